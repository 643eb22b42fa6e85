//! The invariant density h_α of φ_α, the absolutely continuous measure
//! ν_α = h_α dλ, and the integrals and ergodic averages built from them.
//!
//! h_α is a sum of terms ±1/(x + s) on at most three pieces of I_α, so every
//! ν_α-measure below is a sum of logarithms. The only numerical quadrature is
//! for J(α), whose integrand has a logarithmic singularity at 0.

use rayon::prelude::*;
use rug::{Float, Integer};
use serde::{Deserialize, Serialize};

use crate::alpha::AlphaParam;
use crate::digits::{self, digit_of, rank1_cylinder, SignedDigit};
use crate::error::{CfError, Result};
use crate::interval::{Interval, IntervalSet};
use crate::natext;
use crate::quad::Adaptive;
use crate::sampling::{stream_rng, unit_open};

/// The closed-form term of h_α on one piece, before the 1/(3 log G) factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Term {
    /// 1/(x + G + 1)
    Lower,
    /// 1/(x + G + 1) + 1/(x + G − 1) − 1/(x + 1)
    Mixed,
    /// 1/(x + 1)
    Unit,
    /// 1/(x + G − 1)
    Upper,
}

impl Term {
    /// (sign, shift) pairs with h = Σ sign/(x + shift).
    fn parts(self, big_g: &Float) -> Vec<(i8, Float)> {
        let p = big_g.prec();
        let plus = Float::with_val(p, big_g + 1u32);
        let minus = Float::with_val(p, big_g - 1u32);
        let one = Float::with_val(p, 1u32);
        match self {
            Term::Lower => vec![(1, plus)],
            Term::Mixed => vec![(1, plus), (1, minus), (-1, one)],
            Term::Unit => vec![(1, one)],
            Term::Upper => vec![(1, minus)],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityPiece {
    pub interval: Interval,
    pub term: Term,
    parts: Vec<(i8, Float)>,
    parts_f64: Vec<(f64, f64)>,
}

impl DensityPiece {
    /// Σ sign/(x + shift), without the normaliser.
    fn raw(&self, x: &Float) -> Float {
        let mut acc = Float::new(x.prec());
        for (s, shift) in &self.parts {
            let t = Float::with_val(x.prec(), x + shift).recip();
            if *s > 0 {
                acc += t;
            } else {
                acc -= t;
            }
        }
        acc
    }

    /// ∫_a^b of the raw term: Σ sign·log((b + shift)/(a + shift)).
    fn raw_integral(&self, a: &Float, b: &Float) -> Float {
        let prec = a.prec().max(b.prec());
        let mut acc = Float::new(prec);
        for (s, shift) in &self.parts {
            let r = Float::with_val(prec, b + shift) / Float::with_val(prec, a + shift);
            let l = r.ln();
            if *s > 0 {
                acc += l;
            } else {
                acc -= l;
            }
        }
        acc
    }
}

/// h_α as an ordered list of pieces tiling [α − 2, α).
#[derive(Debug, Clone)]
pub struct DensityProfile {
    pub alpha: AlphaParam,
    pub pieces: Vec<DensityPiece>,
    /// (α − 1)/(2 − α) and (1 − α)/α where they fall inside I_α.
    pub breakpoints: Vec<Float>,
    /// 1/(3 log G)
    pub normalizer: Float,
}

impl DensityProfile {
    pub fn new(alpha: &AlphaParam) -> Result<Self> {
        if alpha.branch().is_exploratory() {
            return Err(CfError::out_of_range("alpha", alpha.label(), "[g, G]"));
        }
        let prec = alpha.prec();
        let a = alpha.value();
        let big_g = &alpha.consts().big_g;
        // at α = g a breakpoint equals α, at α = G they equal α − 2 and α;
        // snap rounding residue so the empty pieces are dropped
        let left = alpha.left();
        let snap = |b: Float| {
            let eps = Float::with_val(prec, Float::i_exp(1, 16 - prec as i32));
            if Float::with_val(prec, &b - a).abs() < eps {
                a.clone()
            } else if Float::with_val(prec, &b - &left).abs() < eps {
                left.clone()
            } else {
                b
            }
        };
        let b1 = snap(Float::with_val(prec, a - 1u32) / Float::with_val(prec, 2u32 - a));
        let b2 = snap(Float::with_val(prec, 1u32 - a) / a);
        let (first, second, middle) = if alpha.branch().at_most_one() {
            (b1, b2, Term::Mixed)
        } else {
            (b2, b1, Term::Unit)
        };
        let raw = [
            (alpha.left(), first.clone(), Term::Lower),
            (first.clone(), second.clone(), middle),
            (second.clone(), a.clone(), Term::Upper),
        ];
        let pieces = raw
            .into_iter()
            .map(|(lo, hi, term)| {
                let parts = term.parts(big_g);
                let parts_f64 = parts.iter().map(|(s, v)| (f64::from(*s), v.to_f64())).collect();
                DensityPiece {
                    interval: Interval::closed_open(lo, hi),
                    term,
                    parts,
                    parts_f64,
                }
            })
            .filter(|p| !p.interval.is_empty())
            .collect::<Vec<_>>();
        let mut breakpoints: Vec<Float> = pieces.iter().skip(1).map(|p| p.interval.lo.clone()).collect();
        breakpoints.dedup();
        Ok(DensityProfile {
            alpha: alpha.clone(),
            pieces,
            breakpoints,
            normalizer: alpha.consts().three_log_g().recip(),
        })
    }

    pub fn prec(&self) -> u32 {
        self.alpha.prec()
    }

    fn piece_of(&self, x: &Float) -> Option<&DensityPiece> {
        self.pieces.iter().find(|p| p.interval.contains(x))
    }

    pub fn eval(&self, x: &Float) -> Result<Float> {
        let p = self.piece_of(x).ok_or_else(|| {
            CfError::out_of_range("x", x.to_string_radix(10, Some(20)), format!("I_alpha at {}", self.alpha.label()))
        })?;
        Ok(p.raw(x) * &self.normalizer)
    }

    /// h_α(x) in double precision; NaN outside I_α.
    pub fn eval_f64(&self, x: f64) -> f64 {
        let norm = self.normalizer.to_f64();
        for p in &self.pieces {
            if x >= p.interval.lo.to_f64() && x < p.interval.hi.to_f64() {
                return norm * p.parts_f64.iter().map(|(s, v)| s / (x + v)).sum::<f64>();
            }
        }
        f64::NAN
    }

    /// ν_α([a, b]) for α − 2 ≤ a ≤ b ≤ α, by antiderivatives piece by piece.
    pub fn integral(&self, a: &Float, b: &Float) -> Float {
        let prec = self.prec();
        let mut acc = Float::new(prec);
        for p in &self.pieces {
            let lo = if *a > p.interval.lo { a } else { &p.interval.lo };
            let hi = if *b < p.interval.hi { b } else { &p.interval.hi };
            if lo < hi {
                acc += p.raw_integral(lo, hi);
            }
        }
        acc * &self.normalizer
    }

    /// ν_α([α − 2, x)).
    pub fn cdf(&self, x: &Float) -> Float {
        self.integral(&self.alpha.left(), x)
    }

    /// Raw terms of the pieces adjacent to 0 on the side `e`, and the
    /// distance from 0 to the far end of that piece.
    fn near_zero(&self, e: i8) -> (&DensityPiece, Float) {
        let prec = self.prec();
        let tiny = Float::with_val(prec, Float::i_exp(e as i32, -((prec / 2) as i32)));
        let p = self.piece_of(&tiny).expect("0 is interior to I_alpha");
        let reach = if e > 0 { p.interval.hi.clone() } else { Float::with_val(prec, -&p.interval.lo) };
        (p, reach)
    }
}

pub fn density(x: &Float, alpha: &AlphaParam) -> Result<Float> {
    DensityProfile::new(alpha)?.eval(x)
}

/// ν_α(A), with A clipped to I_α.
pub fn nu_measure(set: &IntervalSet, alpha: &AlphaParam) -> Result<Float> {
    let prof = DensityProfile::new(alpha)?;
    Ok(nu_with(&prof, set))
}

fn nu_with(prof: &DensityProfile, set: &IntervalSet) -> Float {
    let mut acc = Float::new(prof.prec());
    let left = prof.alpha.left();
    let right = prof.alpha.value();
    for i in set.intervals() {
        let lo = if i.lo < left { &left } else { &i.lo };
        let hi = if i.hi > *right { right } else { &i.hi };
        if lo < hi {
            acc += prof.integral(lo, hi);
        }
    }
    acc
}

/// Inverse-branch images of A, one per digit with d < `max_digit`.
#[derive(Debug, Clone)]
pub struct PreimageBranches {
    pub branches: Vec<(SignedDigit, Interval)>,
    /// First omitted odd digit.
    pub max_digit: u64,
    /// Bound on the total length of all omitted branches, 2/(D + α − 2).
    pub tail_bound: Float,
}

impl PreimageBranches {
    pub fn set(&self) -> Result<IntervalSet> {
        IntervalSet::new(self.branches.iter().map(|(_, i)| i.clone()).collect())
    }

    pub fn length(&self, prec: u32) -> Float {
        let mut acc = Float::new(prec);
        for (_, i) in &self.branches {
            acc += i.length();
        }
        acc
    }
}

/// The inverse branch u ↦ e/(u + d) applied to A, intersected with ⟨ed⟩_α.
fn branch_image(a: &Interval, digit: SignedDigit, alpha: &AlphaParam) -> Result<Interval> {
    let prec = alpha.prec();
    let d = digit.d();
    let inv = |u: &Float| Float::with_val(prec, Float::with_val(prec, u + d).recip_ref());
    // u + d > 0 on the branch; only d = 1 can violate it inside I_α
    let below = Float::with_val(prec, -i64::try_from(d).unwrap_or(i64::MAX));
    let a = &a.intersect(&Interval::open(below, Float::with_val(prec, alpha.value() + 1u32)));
    if a.is_empty() {
        return Ok(Interval::open(a.lo.clone(), a.lo.clone()));
    }
    let img = if digit.positive() {
        a.mapped(inv(&a.lo), inv(&a.hi), false)
    } else {
        a.mapped(-inv(&a.lo), -inv(&a.hi), true)
    };
    Ok(img.intersect(&rank1_cylinder(digit.omega(), alpha)?))
}

/// Forward-checks a branch interval: its midpoint reads `digit` and maps
/// into A, and its endpoints map into the closure of A.
fn validate_branch(piece: &Interval, digit: SignedDigit, a: &Interval, alpha: &AlphaParam) -> Result<()> {
    let prec = alpha.prec();
    let tol = Float::with_val(prec, Float::i_exp(1, -((prec / 2) as i32)));
    let mid = piece.midpoint();
    let reading = digit_of(&mid, alpha)?;
    let image = digits::gauss_step(&mid, alpha)?;
    let mut ok = reading.digit == digit && a.contains(&image);
    for end in [&piece.lo, &piece.hi] {
        let u = Float::with_val(prec, end.abs_ref()).recip() - digit.d();
        ok &= u >= Float::with_val(prec, &a.lo - &tol) && u <= Float::with_val(prec, &a.hi + &tol);
    }
    if ok {
        Ok(())
    } else {
        Err(CfError::verification(
            "preimage-branch",
            format!("branch {digit} of {a} gave {piece}"),
        ))
    }
}

/// φ_α⁻¹(A) ∩ {d_α < D}, where D is the least odd digit with
/// 2/(D + α − 2) < `tail_tol`.
pub fn preimage_branches(a: &Interval, alpha: &AlphaParam, tail_tol: f64) -> Result<PreimageBranches> {
    let prec = alpha.prec();
    let av = alpha.value().to_f64();
    let mut max_digit = ((2.0 / tail_tol) + 2.0 - av).ceil().max(1.0) as u64;
    max_digit |= 1;
    while 2.0 / (max_digit as f64 + av - 2.0) >= tail_tol {
        max_digit += 2;
    }
    let mut branches = Vec::new();
    for d in (1..max_digit).step_by(2) {
        for e in [1i8, -1] {
            let digit = SignedDigit::new(e, d)?;
            let piece = branch_image(a, digit, alpha)?;
            if piece.is_empty() {
                continue;
            }
            validate_branch(&piece, digit, a, alpha)?;
            branches.push((digit, piece));
        }
    }
    let tail_bound = Float::with_val(prec, 2u32) / (Float::with_val(prec, max_digit) + alpha.value() - 2u32);
    Ok(PreimageBranches {
        branches,
        max_digit,
        tail_bound,
    })
}

/// Largest number of explicit inverse branches per sign.
pub const BRANCH_BUDGET: usize = 2_000_000;

/// Least odd D ≥ 7 such that every branch of sign `e` with digit ≥ D is full
/// and lands inside the density piece adjacent to 0.
fn tail_start(prof: &DensityProfile, e: i8) -> Result<u64> {
    let prec = prof.prec();
    let (_, reach) = prof.near_zero(e);
    let a = prof.alpha.value();
    // 1/(D + α − 2) < reach
    let fits = |d: u64| {
        let top = Float::with_val(prec, Float::with_val(prec, a + d) - 2u32).recip();
        if e > 0 {
            top < reach
        } else {
            top <= reach
        }
    };
    let guess = (1.0 / reach.to_f64() + 2.0 - a.to_f64()).max(7.0);
    if !guess.is_finite() || guess > 2.0 * BRANCH_BUDGET as f64 {
        return Err(CfError::BranchBudgetExceeded {
            budget: BRANCH_BUDGET,
            depth: 1,
        });
    }
    let mut d = (guess.floor() as u64).saturating_sub(4).max(7) | 1;
    while !fits(d) {
        d += 2;
    }
    Ok(d)
}

/// ν_α of ∪_{d ≥ D, d odd} (inverse branch (e, d) of A), in closed form.
///
/// With x = e/(u + d), each term 1/(x + s) of the density integrates to
/// (1/e)·[log((u1+d)/(u0+d)) − log((u1+d+e/s)/(u0+d+e/s))]; summed over
/// d = D + 2m the products telescope into Gamma functions.
fn nu_tail(prof: &DensityProfile, a: &Interval, e: i8, d0: u64) -> Float {
    let prec = prof.prec();
    let (piece, _) = prof.near_zero(e);
    let half = |u: &Float, shift: &Float| Float::with_val(prec, Float::with_val(prec, u + d0) + shift) / 2u32;
    let zero = Float::new(prec);
    let lg = |v: Float| v.ln_gamma();
    let mut acc = Float::new(prec);
    for (s, shift) in &piece.parts {
        let es = Float::with_val(prec, Float::with_val(prec, shift.recip_ref()) * i32::from(e));
        let t = lg(half(&a.lo, &zero)) + lg(half(&a.hi, &es)) - lg(half(&a.hi, &zero)) - lg(half(&a.lo, &es));
        let t = t * i32::from(e) * i32::from(*s);
        acc += t;
    }
    acc * &prof.normalizer
}

/// λ of the same tail: Σ_{m ≥ 0} 1/(u0 + D + 2m) − 1/(u1 + D + 2m).
fn lambda_tail(a: &Interval, d0: u64, prec: u32) -> Float {
    let half = |u: &Float| Float::with_val(prec, u + d0) / 2u32;
    (half(&a.hi).digamma() - half(&a.lo).digamma()) / 2u32
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct InvarianceReport {
    pub alpha: String,
    pub nu_a: f64,
    pub nu_preimage: f64,
    pub residual: f64,
    pub explicit_branches: usize,
    /// First digit handled by the closed-form tail, for e = +1 and e = −1.
    pub tail_from: [u64; 2],
}

/// ν_α(φ_α⁻¹A) as (value, explicit branch count, tail start digits), with
/// explicit branches below the tail start and the rest in closed form.
fn nu_preimage(prof: &DensityProfile, a: &Interval) -> Result<(Float, usize, [u64; 2])> {
    let alpha = &prof.alpha;
    let mut acc = Float::new(prof.prec());
    let mut count = 0;
    let mut starts = [0u64; 2];
    for (slot, e) in [1i8, -1].into_iter().enumerate() {
        let d0 = tail_start(prof, e)?;
        starts[slot] = d0;
        for d in (1..d0).step_by(2) {
            let digit = SignedDigit::new(e, d)?;
            let piece = branch_image(a, digit, alpha)?;
            if piece.is_empty() {
                continue;
            }
            if d < 16 {
                validate_branch(&piece, digit, a, alpha)?;
            }
            acc += prof.integral(&piece.lo, &piece.hi);
            count += 1;
        }
        acc += nu_tail(prof, a, e, d0);
    }
    Ok((acc, count, starts))
}

/// |ν_α(φ_α⁻¹A) − ν_α(A)| for an interval A ⊆ I_α. Fails if the residual
/// exceeds `tol`.
pub fn check_invariance(a: &Interval, alpha: &AlphaParam, tol: f64) -> Result<InvarianceReport> {
    let prof = DensityProfile::new(alpha)?;
    let clipped = a.intersect(&Interval::closed_open(alpha.left(), alpha.value().clone()));
    let nu_a = prof.integral(&clipped.lo, &clipped.hi);
    let (pre, count, starts) = nu_preimage(&prof, &clipped)?;
    let residual = Float::with_val(prof.prec(), &pre - &nu_a).abs().to_f64();
    let report = InvarianceReport {
        alpha: alpha.label(),
        nu_a: nu_a.to_f64(),
        nu_preimage: pre.to_f64(),
        residual,
        explicit_branches: count,
        tail_from: starts,
    };
    if residual > tol {
        return Err(CfError::verification(
            "invariance",
            format!("residual {residual:e} > {tol:e} for {a} at {}", alpha.label()),
        ));
    }
    Ok(report)
}

/// μ_α(Ω_α), checked against 3 log G within 10⁻⁹.
pub fn mu_omega(alpha: &AlphaParam) -> Result<Float> {
    let mu = natext::omega_domain(alpha)?.mu();
    let target = alpha.consts().three_log_g();
    let dev = Float::with_val(alpha.prec(), &mu - &target).abs();
    if dev > 1e-9 {
        return Err(CfError::verification(
            "mu-omega",
            format!("mu = {} differs from 3 log G by {}", mu.to_f64(), dev.to_f64()),
        ));
    }
    Ok(mu)
}

/// ∫_{I_α} log|x| h_α(x) dx by adaptive quadrature, split at 0 and the
/// density breakpoints.
pub fn j_integral_value(alpha: &AlphaParam, tol: f64) -> Result<f64> {
    let prof = DensityProfile::new(alpha)?;
    let mut cuts: Vec<f64> = prof.breakpoints.iter().map(Float::to_f64).collect();
    cuts.push(0.0);
    let a = alpha.value().to_f64();
    let left = alpha.left().to_f64();
    Adaptive::new(tol / 10.0).integrate_split(left, a, &cuts, |x| {
        if x == 0.0 {
            0.0
        } else {
            x.abs().ln() * prof.eval_f64(x)
        }
    })
}

/// −π²/(18 log G)
pub fn j_target(alpha: &AlphaParam) -> f64 {
    let c = alpha.consts();
    -(c.levy_constant().to_f64())
}

/// J(α), failing when it differs from −π²/(18 log G) by more than `tol`.
pub fn j_integral(alpha: &AlphaParam, tol: f64) -> Result<f64> {
    let v = j_integral_value(alpha, tol)?;
    let target = j_target(alpha);
    if (v - target).abs() > tol {
        return Err(CfError::verification(
            "j-integral",
            format!("J = {v} vs {target} at {}", alpha.label()),
        ));
    }
    Ok(v)
}

/// Samples x ~ ν_α: bisection on the closed-form CDF at 128 bits, then the
/// final bracket is filled uniformly at the precision of α.
pub fn sample_nu<R: rand::Rng>(prof: &DensityProfile, rng: &mut R) -> Float {
    const BISECT_PREC: u32 = 128;
    let target = unit_open(rng, BISECT_PREC);
    let mut lo = Float::with_val(BISECT_PREC, prof.alpha.left());
    let mut hi = Float::with_val(BISECT_PREC, prof.alpha.value());
    for _ in 0..(BISECT_PREC - 8) {
        let mid = Float::with_val(BISECT_PREC, &lo + &hi) / 2u32;
        if prof.cdf(&mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let prec = prof.alpha.prec().max(BISECT_PREC);
    let w = Float::with_val(prec, &hi - &lo);
    Float::with_val(prec, w * unit_open(rng, prec)) + &lo
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EstimatorResult {
    pub estimate: f64,
    pub std_error: f64,
    pub n_iterations: usize,
    pub trials: usize,
    pub seed: u64,
}

impl EstimatorResult {
    pub fn from_samples(values: &[f64], n_iterations: usize, seed: u64) -> Self {
        let t = values.len() as f64;
        let mean = values.iter().sum::<f64>() / t;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (t - 1.0)
        } else {
            0.0
        };
        EstimatorResult {
            estimate: mean,
            std_error: (var / t).sqrt(),
            n_iterations,
            trials: values.len(),
            seed,
        }
    }

    pub fn relative_error(&self, target: f64) -> f64 {
        ((self.estimate - target) / target).abs()
    }
}

/// Orbit averages over ν_α-distributed starting points.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EntropyReport {
    pub alpha: String,
    pub precision_bits: u32,
    /// (2/n) log q_n
    pub entropy: EstimatorResult,
    /// (1/n) log q_n
    pub levy: EstimatorResult,
    /// −(1/n) Σ_{k<n} log|φ_α^k(x)|
    pub birkhoff: EstimatorResult,
    /// (1/n) log|q_n x − p_n|
    pub residual_exponent: EstimatorResult,
    /// (1/n) log|x − p_n/q_n|
    pub approximation_exponent: EstimatorResult,
}

struct TrialOutcome {
    levy: f64,
    birkhoff: f64,
    residual: f64,
}

fn ln_abs(x: &Float) -> f64 {
    let (m, e) = x.to_f64_exp();
    m.abs().ln() + f64::from(e) * std::f64::consts::LN_2
}

fn ln_integer(n: &Integer) -> f64 {
    ln_abs(&Float::with_val(64, n))
}

/// Runs `trials` orbits of length n from x₀ ~ ν_α. The working precision is
/// raised to at least 4n + 64 bits so that n stays within the digit budget.
pub fn entropy_estimate(alpha: &AlphaParam, n: usize, trials: usize, seed: u64) -> Result<EntropyReport> {
    let prec = alpha.prec().max(4 * n as u32 + 64);
    let work = alpha.with_precision(prec);
    let prof = DensityProfile::new(&alpha.with_precision(128))?;
    let outcomes = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream_rng(seed, t as u64);
            let mut sampler = prof.clone();
            sampler.alpha = work.clone();
            let x0 = loop {
                let x = sample_nu(&sampler, &mut rng);
                if !x.is_zero() && work.in_interval(&x) {
                    break x;
                }
            };
            run_trial(&x0, &work, n)
        })
        .collect::<Result<Vec<_>>>()?;
    let pick = |f: &dyn Fn(&TrialOutcome) -> f64| -> EstimatorResult {
        let v: Vec<f64> = outcomes.iter().map(f).collect();
        EstimatorResult::from_samples(&v, n, seed)
    };
    Ok(EntropyReport {
        alpha: alpha.label(),
        precision_bits: prec,
        entropy: pick(&|o| 2.0 * o.levy),
        levy: pick(&|o| o.levy),
        birkhoff: pick(&|o| o.birkhoff),
        residual_exponent: pick(&|o| o.residual),
        approximation_exponent: pick(&|o| o.residual - o.levy),
    })
}

fn run_trial(x0: &Float, alpha: &AlphaParam, n: usize) -> Result<TrialOutcome> {
    let mut log_sum = 0.0;
    let exp = digits::expand_observed(x0, alpha, n, &mut |_, x, _| log_sum += ln_abs(x))?;
    if exp.terminated {
        return Err(CfError::PrecisionExhausted {
            index: exp.len(),
            deviation: "orbit reached 0 before n digits".into(),
        });
    }
    let x = exp.x0_rational();
    let state = &exp.last;
    // q_n x − p_n, exactly
    let r = x * &state.q - &state.p;
    let nf = n as f64;
    Ok(TrialOutcome {
        levy: ln_integer(&state.q) / nf,
        birkhoff: -log_sum / nf,
        residual: ln_abs(&Float::with_val(64, &r)) / nf,
    })
}

/// Deepest level of [`exactness_decay`]; double-precision orbits lose about
/// 3.3 bits per step.
pub const EXACTNESS_DEPTH_BUDGET: usize = 12;

/// Number of quasi-random points used for levels k ≥ 2 of [`exactness_decay`].
pub const EXACTNESS_GRID: usize = 1 << 22;

/// λ(φ_α^{−k}(A)) for k = 1..=n_max.
///
/// Level 1 is exact: explicit branches plus a digamma tail. Deeper levels
/// count Weyl points x of I_α with φ_α^k(x) ∈ A.
pub fn exactness_decay(a: &Interval, alpha: &AlphaParam, n_max: usize) -> Result<Vec<f64>> {
    exactness_decay_with(a, alpha, n_max, EXACTNESS_GRID)
}

pub fn exactness_decay_with(a: &Interval, alpha: &AlphaParam, n_max: usize, grid: usize) -> Result<Vec<f64>> {
    if n_max > EXACTNESS_DEPTH_BUDGET {
        return Err(CfError::BranchBudgetExceeded {
            budget: EXACTNESS_DEPTH_BUDGET,
            depth: n_max,
        });
    }
    if n_max == 0 {
        return Ok(Vec::new());
    }
    let prof = DensityProfile::new(alpha)?;
    let prec = prof.prec();
    let clipped = a.intersect(&Interval::closed_open(alpha.left(), alpha.value().clone()));
    let mut first = Float::new(prec);
    for e in [1i8, -1] {
        let d0 = tail_start(&prof, e)?;
        for d in (1..d0).step_by(2) {
            first += branch_image(&clipped, SignedDigit::new(e, d)?, alpha)?.length();
        }
        first += lambda_tail(&clipped, d0, prec);
    }
    let mut out = vec![first.to_f64()];
    if n_max == 1 {
        return Ok(out);
    }
    let av = alpha.value().to_f64();
    let left = alpha.left().to_f64();
    let (alo, ahi) = (clipped.lo.to_f64(), clipped.hi.to_f64());
    let in_a = |u: f64| u >= alo && u < ahi;
    // Weyl points α − 2 + 2·{j·g}, in 64-bit fixed point so every point
    // carries a full mantissa; dyadic grid points would reach 0 in a few steps
    let theta = (alpha.consts().g.to_f64() * 2f64.powi(64)) as u64;
    let step = 2.0 / grid as f64;
    let counts = (0..grid)
        .into_par_iter()
        .fold(
            || vec![0usize; n_max + 1],
            |mut acc, j| {
                let frac = (j as u64 + 1).wrapping_mul(theta) as f64 / 2f64.powi(64);
                let mut x = left + 2.0 * frac;
                for k in 1..=n_max {
                    x = phi_f64(x, av);
                    if k >= 2 && in_a(x) {
                        acc[k] += 1;
                    }
                }
                acc
            },
        )
        .reduce(
            || vec![0usize; n_max + 1],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    out.extend(counts[2..].iter().map(|&c| c as f64 * step));
    Ok(out)
}

/// φ_α in double precision, with φ_α(0) = 0.
pub fn phi_f64(x: f64, alpha: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let ax = x.abs();
    let d = 2.0 * (1.0 / (2.0 * ax) + (1.0 - alpha) / 2.0).floor() + 1.0;
    let y = 1.0 / ax - d;
    // keep rounding from pushing the iterate out of [α − 2, α)
    y.clamp(alpha - 2.0, alpha - f64::EPSILON)
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EquivalenceReport {
    pub sup: f64,
    pub inf: f64,
    /// max(sup h, 1/inf h): c⁻¹λ ≤ ν_α ≤ cλ on every sampled α.
    pub c: f64,
    pub argmax: (String, f64),
    pub argmin: (String, f64),
}

/// Empirical equivalence constant between ν_α and λ over an α-grid, from
/// piece endpoints and `x_points` interior points per α.
pub fn equivalence_constant(alphas: &[AlphaParam], x_points: usize) -> Result<EquivalenceReport> {
    let mut sup = (f64::NEG_INFINITY, String::new(), 0.0);
    let mut inf = (f64::INFINITY, String::new(), 0.0);
    for alpha in alphas {
        let prof = DensityProfile::new(alpha)?;
        let norm = prof.normalizer.to_f64();
        let mut xs: Vec<f64> = Vec::new();
        let left = alpha.left().to_f64();
        xs.extend((0..x_points).map(|j| left + 2.0 * (j as f64 + 0.5) / x_points as f64));
        for p in &prof.pieces {
            // one-sided limits at both ends of each piece
            let (lo, hi) = (p.interval.lo.to_f64(), p.interval.hi.to_f64());
            for x in [lo, hi] {
                let v = norm * p.parts_f64.iter().map(|(s, c)| s / (x + c)).sum::<f64>();
                record(&mut sup, &mut inf, v, alpha, x);
            }
        }
        for x in xs {
            let v = prof.eval_f64(x);
            if v.is_finite() {
                record(&mut sup, &mut inf, v, alpha, x);
            }
        }
    }
    Ok(EquivalenceReport {
        sup: sup.0,
        inf: inf.0,
        c: sup.0.max(1.0 / inf.0),
        argmax: (sup.1, sup.2),
        argmin: (inf.1, inf.2),
    })
}

fn record(sup: &mut (f64, String, f64), inf: &mut (f64, String, f64), v: f64, alpha: &AlphaParam, x: f64) {
    if v > sup.0 {
        *sup = (v, alpha.label(), x);
    }
    if v < inf.0 {
        *inf = (v, alpha.label(), x);
    }
}

/// π²/(9 log G)
pub fn entropy_target(alpha: &AlphaParam) -> f64 {
    alpha.consts().entropy().to_f64()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::stream_rng;
    use rand::Rng;

    const P: u32 = 256;

    fn f(v: f64) -> Float {
        Float::with_val(P, v)
    }

    fn alpha(s: &str) -> AlphaParam {
        AlphaParam::parse(s, P, false).unwrap()
    }

    #[test]
    fn density_values_at_one() {
        let one = AlphaParam::one(P);
        let three_log_g = 3.0 * 1.618_033_988_749_895f64.ln();
        let h0 = density(&f(1e-30), &one).unwrap().to_f64();
        assert!((h0 - 1.618_033_988_749_895 / three_log_g).abs() < 1e-12);
        assert!((h0 - 1.12081).abs() < 1e-5);
        let hm = density(&f(-0.5), &one).unwrap().to_f64();
        assert!((hm - 1.0 / (three_log_g * (2.118_033_988_749_895))).abs() < 1e-12);
        assert!(density(&f(1.0), &one).is_err());
        assert_eq!(DensityProfile::new(&one).unwrap().pieces.len(), 2);
    }

    #[test]
    fn pieces_tile_and_normalise() {
        for a in AlphaParam::grid_with_specials(65, P) {
            let prof = DensityProfile::new(&a).unwrap();
            assert_eq!(prof.pieces[0].interval.lo, a.left());
            assert_eq!(&prof.pieces.last().unwrap().interval.hi, a.value());
            for w in prof.pieces.windows(2) {
                assert_eq!(w[0].interval.hi, w[1].interval.lo);
            }
            let total = prof.integral(&a.left(), a.value());
            assert!((total.to_f64() - 1.0).abs() < 1e-12, "{a}");
        }
    }

    #[test]
    fn nu_examples() {
        let one = AlphaParam::one(P);
        let s = IntervalSet::single(Interval::closed_open(f(0.0), f(1.0)));
        assert!((nu_measure(&s, &one).unwrap().to_f64() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(nu_measure(&IntervalSet::empty(), &one).unwrap(), 0);
    }

    #[test]
    fn antiderivative_matches_quadrature() {
        let q = Adaptive::new(1e-12);
        for a in ["g", "0.7", "1", "1.3", "G"] {
            let a = alpha(a);
            let prof = DensityProfile::new(&a).unwrap();
            let (lo, hi) = (a.left().to_f64() + 0.1, a.value().to_f64() - 0.05);
            let cuts: Vec<f64> = prof.breakpoints.iter().map(Float::to_f64).collect();
            let num = q.integrate_split(lo, hi, &cuts, |x| prof.eval_f64(x)).unwrap();
            let exact = prof.integral(&f(lo), &f(hi)).to_f64();
            assert!((num - exact).abs() < 1e-10, "{a}");
        }
    }

    #[test]
    fn preimage_branch_examples() {
        let one = AlphaParam::one(P);
        let a = Interval::open(f(0.5), f(1.0));
        let pre = preimage_branches(&a, &one, 1e-3).unwrap();
        let find = |e: i8, d: u64| {
            pre.branches
                .iter()
                .find(|(b, _)| *b == SignedDigit::new(e, d).unwrap())
                .map(|(_, i)| i.to_f64_pair())
        };
        let b1 = find(1, 1).unwrap();
        assert!((b1[0] - 0.5).abs() < 1e-15 && (b1[1] - 2.0 / 3.0).abs() < 1e-15);
        let b3 = find(1, 3).unwrap();
        assert!((b3[0] - 0.25).abs() < 1e-15 && (b3[1] - 2.0 / 7.0).abs() < 1e-15);
        let whole = Interval::closed_open(f(-1.0), f(1.0));
        let pre = preimage_branches(&whole, &one, 1e-3).unwrap();
        let len = pre.length(P).to_f64();
        assert!(len <= 2.0 && 2.0 - len <= pre.tail_bound.to_f64() + 1e-12, "{len}");
        assert!(pre.set().is_ok());
    }

    #[test]
    fn invariance_on_examples_and_random_intervals() {
        let one = AlphaParam::one(P);
        let r = check_invariance(&Interval::open(f(0.5), f(1.0)), &one, 1e-8).unwrap();
        assert!(r.residual < 1e-30, "{r:?}");
        let mut rng = stream_rng(5, 0);
        for a in AlphaParam::grid_with_specials(9, P) {
            let whole = Interval::closed_open(a.left(), a.value().clone());
            assert!(check_invariance(&whole, &a, 1e-8).unwrap().residual < 1e-30);
            for _ in 0..3 {
                let (u, v): (f64, f64) = (rng.gen(), rng.gen());
                let (u, v) = (u.min(v), u.max(v));
                let lo = a.left().to_f64() + 2.0 * u;
                let hi = a.left().to_f64() + 2.0 * v;
                let r = check_invariance(&Interval::closed_open(f(lo), f(hi)), &a, 1e-8).unwrap();
                assert!(r.residual < 1e-30, "{r:?}");
            }
        }
    }

    #[test]
    fn mu_omega_is_three_log_g() {
        for a in ["g", "0.8", "1", "1.2", "1.5", "G"] {
            let v = mu_omega(&alpha(a)).unwrap().to_f64();
            assert!((v - 1.443_635_475_178_810_3).abs() < 1e-12);
        }
    }

    #[test]
    fn j_at_special_points() {
        for a in ["g", "1", "G", "0.75", "1.4"] {
            let v = j_integral(&alpha(a), 1e-9).unwrap();
            assert!((v + 1.139_438).abs() < 1e-6, "{a}: {v}");
        }
    }

    #[test]
    fn exactness_whole_interval_is_two() {
        let one = AlphaParam::one(P);
        let whole = Interval::closed_open(f(-1.0), f(1.0));
        let v = exactness_decay_with(&whole, &one, 3, 1 << 14).unwrap();
        assert!(v.iter().all(|x| (x - 2.0).abs() < 1e-12), "{v:?}");
        assert!(exactness_decay(&whole, &one, 13).is_err());
    }

    #[test]
    fn nu_samples_follow_cdf() {
        let a = alpha("0.8");
        let prof = DensityProfile::new(&a).unwrap();
        let mut rng = stream_rng(9, 0);
        let half = f(0.0);
        let below = (0..2000).filter(|_| sample_nu(&prof, &mut rng) < half).count() as f64 / 2000.0;
        let want = prof.cdf(&half).to_f64();
        assert!((below - want).abs() < 0.04, "{below} vs {want}");
    }

    #[test]
    fn short_entropy_run() {
        let r = entropy_estimate(&AlphaParam::one(P), 200, 4, 1).unwrap();
        assert!(r.precision_bits >= 864);
        assert!((r.entropy.estimate - 2.2789).abs() < 0.3, "{r:?}");
    }

    #[test]
    fn equivalence_constant_is_at_least_two() {
        let r = equivalence_constant(&AlphaParam::grid(9, P), 200).unwrap();
        assert!(r.inf > 0.0 && r.c >= 2.0);
    }
}
