//! Adaptive composite Gauss–Legendre quadrature in f64.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;

use crate::error::{CfError, Result};

const NODES: usize = 15;
const MAX_PANELS: usize = 1 << 20;

pub struct Adaptive {
    rule: GaussLegendre,
    tol: f64,
}

impl Adaptive {
    /// `tol` is the absolute error target for a whole integral.
    pub fn new(tol: f64) -> Self {
        Adaptive {
            rule: GaussLegendre::new(NonZeroUsize::new(NODES).expect("nonzero")),
            tol,
        }
    }

    /// ∫_a^b f. Panels are kept in a queue ordered by their error estimate
    /// (|whole − left − right|) and the worst one is bisected until the
    /// estimates sum to at most the tolerance.
    pub fn integrate<F: Fn(f64) -> f64>(&self, a: f64, b: f64, f: F) -> Result<f64> {
        if a == b {
            return Ok(0.0);
        }
        let mut heap = BinaryHeap::new();
        let mut total_err = 0.0;
        let first = self.panel(a, b, &f);
        total_err += first.err;
        heap.push(first);
        while total_err > self.tol {
            if heap.len() >= MAX_PANELS {
                return Err(CfError::QuadratureNonConvergence { a, b });
            }
            let worst = heap.pop().expect("nonempty");
            total_err -= worst.err;
            let m = 0.5 * (worst.a + worst.b);
            if m <= worst.a || m >= worst.b {
                // cannot split further; keep the panel as it is
                heap.push(Panel { err: 0.0, ..worst });
                continue;
            }
            for p in [self.panel(worst.a, m, &f), self.panel(m, worst.b, &f)] {
                total_err += p.err;
                heap.push(p);
            }
        }
        // sum small panels first
        let mut vals: Vec<f64> = heap.into_iter().map(|p| p.value).collect();
        vals.sort_by(|x, y| x.abs().total_cmp(&y.abs()));
        Ok(vals.into_iter().sum())
    }

    fn panel<F: Fn(f64) -> f64>(&self, a: f64, b: f64, f: &F) -> Panel {
        let m = 0.5 * (a + b);
        let whole = self.rule.integrate(a, b, f);
        let halves = self.rule.integrate(a, m, f) + self.rule.integrate(m, b, f);
        Panel {
            a,
            b,
            value: halves,
            err: (halves - whole).abs(),
        }
    }

    /// ∫ over [a, b] split at the interior points of `cuts`.
    pub fn integrate_split<F: Fn(f64) -> f64>(&self, a: f64, b: f64, cuts: &[f64], f: F) -> Result<f64> {
        let mut pts = vec![a];
        let mut inner: Vec<f64> = cuts.iter().copied().filter(|&c| c > a && c < b).collect();
        inner.sort_by(f64::total_cmp);
        pts.extend(inner);
        pts.push(b);
        let total = (b - a).abs();
        let mut sum = 0.0;
        for w in pts.windows(2) {
            let share = Adaptive {
                rule: self.rule.clone(),
                tol: self.tol * (w[1] - w[0]) / total,
            };
            sum += share.integrate(w[0], w[1], &f)?;
        }
        Ok(sum)
    }
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}

impl Eq for Panel {}

impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_and_log_singularity() {
        let q = Adaptive::new(1e-12);
        assert!((q.integrate(0.0, 2.0, |x| x * x).unwrap() - 8.0 / 3.0).abs() < 1e-13);
        // ∫_0^1 log x = −1
        assert!((q.integrate(0.0, 1.0, f64::ln).unwrap() + 1.0).abs() < 1e-11);
        let s = q.integrate_split(-1.0, 1.0, &[0.0], |x: f64| x.abs().ln()).unwrap();
        assert!((s + 2.0).abs() < 1e-11);
    }
}
