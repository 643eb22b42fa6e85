//! The verification suite: every check is a function of (α, config) that
//! produces machine-readable [`CheckResult`]s. The CLI `verify` command and
//! the acceptance tests both run through here.

use std::time::Instant;

use rayon::prelude::*;
use rug::{Float, Integer, Rational};
use serde::{Deserialize, Serialize};

use crate::cylinders::{self, Envelope};
use crate::digits::{self, Expansion};
use crate::error::{CfError, Result};
use crate::interval::{Interval, IntervalSet};
use crate::measures::{self, DensityProfile};
use crate::natext;
use crate::quad::Adaptive;
use crate::sampling::{chunk_sizes, stream_rng, uniform};
use crate::AlphaParam;

/// Check identifiers, in suite order.
pub mod id {
    pub const DETERMINANT: &str = "determinant";
    pub const RECONSTRUCTION: &str = "reconstruction";
    pub const CONSTRAINTS: &str = "constraints";
    pub const DENOMINATOR_GROWTH: &str = "denominator-growth";
    pub const APPROXIMATION: &str = "approximation";
    pub const BOUNDARY: &str = "boundary";
    pub const PRODUCT_BOUND: &str = "product-bound";
    pub const PARTITION: &str = "partition";
    pub const C_ALPHA: &str = "c-alpha";
    pub const MU_OMEGA: &str = "mu-omega";
    pub const DENSITY: &str = "density";
    pub const INVARIANCE: &str = "invariance";
    pub const J_INTEGRAL: &str = "j-integral";
    pub const ENTROPY: &str = "entropy";
    pub const EXACTNESS: &str = "exactness";
    pub const FULL_CYLINDERS: &str = "full-cylinders";
    pub const CYLINDER_ENVELOPE: &str = "cylinder-envelope";
    pub const ORBIT_CLOUD: &str = "orbit-cloud";

    pub const ALL: &[&str] = &[
        DETERMINANT,
        RECONSTRUCTION,
        CONSTRAINTS,
        DENOMINATOR_GROWTH,
        APPROXIMATION,
        BOUNDARY,
        PRODUCT_BOUND,
        PARTITION,
        C_ALPHA,
        MU_OMEGA,
        DENSITY,
        INVARIANCE,
        J_INTEGRAL,
        ENTROPY,
        EXACTNESS,
        FULL_CYLINDERS,
        CYLINDER_ENVELOPE,
        ORBIT_CLOUD,
    ];
}

/// How `value` is compared with `target`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Comparison {
    /// |value − target| ≤ tolerance
    Within,
    /// value ≤ target + tolerance
    AtMost,
    /// value ≥ target − tolerance
    AtLeast,
    /// value > target
    Above,
}

impl Comparison {
    fn holds(self, value: f64, target: f64, tolerance: f64) -> bool {
        match self {
            Comparison::Within => (value - target).abs() <= tolerance,
            Comparison::AtMost => value <= target + tolerance,
            Comparison::AtLeast => value >= target - tolerance,
            Comparison::Above => value > target,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CheckResult {
    pub check_id: String,
    pub alpha: String,
    /// What `value` measures within the check.
    pub quantity: String,
    pub value: f64,
    pub target: f64,
    pub tolerance: f64,
    pub comparison: Comparison,
    pub pass: bool,
    /// Wall-clock seconds for the whole (check, α) unit; not part of the
    /// deterministic output.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub runtime: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub detail: Option<String>,
}

impl CheckResult {
    fn new(check: &str, alpha: &str, quantity: &str, value: f64, target: f64, tolerance: f64, cmp: Comparison) -> Self {
        CheckResult {
            check_id: check.into(),
            alpha: alpha.into(),
            quantity: quantity.into(),
            value,
            target,
            tolerance,
            comparison: cmp,
            // NaN never passes
            pass: cmp.holds(value, target, tolerance),
            runtime: None,
            detail: None,
        }
    }

    fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = Some(detail.into());
        self
    }

    fn count(check: &str, alpha: &str, quantity: &str, failures: usize) -> Self {
        CheckResult::new(check, alpha, quantity, failures as f64, 0.0, 0.0, Comparison::AtMost)
    }

    /// A check that could not be carried out.
    fn error(check: &str, alpha: &str, err: &CfError) -> Self {
        CheckResult::new(check, alpha, "error", f64::NAN, 0.0, 0.0, Comparison::Within).with_detail(err.to_string())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct VerifyReport {
    pub pass: bool,
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn from_checks(checks: Vec<CheckResult>) -> Self {
        VerifyReport {
            pass: checks.iter().all(|c| c.pass),
            checks,
        }
    }

    /// Distinct ids of failing checks, in suite order.
    pub fn failing_ids(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for c in self.checks.iter().filter(|c| !c.pass) {
            if !out.contains(&c.check_id) {
                out.push(c.check_id.clone());
            }
        }
        out
    }

    pub fn strip_runtimes(&mut self) {
        for c in &mut self.checks {
            c.runtime = None;
        }
    }
}

/// Sample sizes and α-sets for each check. `Default` is the suite run by
/// `oddcf verify`; the acceptance tests raise the sample counts.
#[derive(Debug, Clone)]
pub struct VerifyConfig {
    pub precision_bits: u32,
    pub seed: u64,
    /// Interior points of the [g, G] grid (g and G included, 1 added).
    pub grid_points: usize,
    /// Random (x, α) expansions for the digit and convergent checks.
    pub expansions: usize,
    pub expansion_length: usize,
    pub product_alphas: Vec<String>,
    pub product_samples: usize,
    pub partition_alphas: Vec<String>,
    pub partition_samples: usize,
    pub invariance_intervals: usize,
    pub j_tol: f64,
    pub entropy_alphas: Vec<String>,
    pub entropy_n: usize,
    pub entropy_trials: usize,
    pub exactness_depth: usize,
    pub hitting_samples: usize,
    pub hitting_depth: usize,
    pub tiling_rank: usize,
    pub non_full_rank: usize,
    pub envelope_rank: usize,
    pub cloud_grid: usize,
    pub cloud_depth: usize,
    /// Restrict to these check ids; empty means all.
    pub only: Vec<String>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        let five = ["g", "0.8", "1", "1.3", "G"].map(String::from).to_vec();
        VerifyConfig {
            precision_bits: 256,
            seed: 20_240_501,
            grid_points: 33,
            expansions: 1000,
            expansion_length: 50,
            product_alphas: five,
            product_samples: 10_000,
            partition_alphas: ["g", "0.8", "1", "1.3", "1.6", "G"].map(String::from).to_vec(),
            partition_samples: 40_000,
            invariance_intervals: 10,
            j_tol: 1e-6,
            entropy_alphas: vec!["1".into()],
            entropy_n: 1000,
            entropy_trials: 20,
            exactness_depth: 8,
            hitting_samples: 1000,
            hitting_depth: 40,
            tiling_rank: 6,
            non_full_rank: 10,
            envelope_rank: 3,
            cloud_grid: 100,
            cloud_depth: 10,
            only: Vec::new(),
        }
    }
}

impl VerifyConfig {
    pub fn grid(&self) -> Vec<AlphaParam> {
        AlphaParam::grid_with_specials(self.grid_points, self.precision_bits)
    }

    fn parse_alphas(&self, tokens: &[String]) -> Result<Vec<AlphaParam>> {
        tokens
            .iter()
            .map(|t| AlphaParam::parse(t, self.precision_bits, false))
            .collect()
    }

    /// Per-check seed, so that enabling or disabling a check does not shift
    /// the random streams of the others.
    fn seed_for(&self, check: &str) -> u64 {
        check
            .bytes()
            .fold(self.seed, |h, b| h.rotate_left(7) ^ u64::from(b).wrapping_mul(0x9E37_79B9_7F4A_7C15))
    }

    fn selected(&self, check: &str) -> bool {
        self.only.is_empty() || self.only.iter().any(|o| o == check)
    }
}

/// Runs every selected check. Errors inside a check become failed results;
/// only an unknown id in `only` is an error.
pub fn run(cfg: &VerifyConfig) -> Result<VerifyReport> {
    if let Some(bad) = cfg.only.iter().find(|o| !id::ALL.contains(&o.as_str())) {
        return Err(CfError::Parse {
            input: bad.clone(),
            reason: format!("unknown check id; known: {}", id::ALL.join(", ")),
        });
    }
    let mut checks = Vec::new();
    for check in id::ALL.iter().filter(|c| cfg.selected(c)) {
        checks.extend(run_check(check, cfg)?);
    }
    Ok(VerifyReport::from_checks(checks))
}

/// Results of one check id.
pub fn run_check(check: &str, cfg: &VerifyConfig) -> Result<Vec<CheckResult>> {
    let out = match check {
        id::DETERMINANT | id::RECONSTRUCTION | id::CONSTRAINTS | id::DENOMINATOR_GROWTH | id::APPROXIMATION => {
            timed(check, "corpus", || corpus_check(check, cfg))
        }
        id::BOUNDARY => per_alpha(check, &interior(cfg.grid()), |a| boundary(a)),
        id::PRODUCT_BOUND => per_alpha(check, &cfg.parse_alphas(&cfg.product_alphas)?, |a| product_bound(a, cfg)),
        id::PARTITION => per_alpha(check, &cfg.parse_alphas(&cfg.partition_alphas)?, |a| partition(a, cfg)),
        id::C_ALPHA => per_alpha(check, &cfg.grid(), c_alpha),
        id::MU_OMEGA => per_alpha(check, &cfg.grid(), mu_omega),
        id::DENSITY => per_alpha(check, &cfg.grid(), density),
        id::INVARIANCE => per_alpha(check, &cfg.grid(), |a| invariance(a, cfg)),
        id::J_INTEGRAL => per_alpha(check, &cfg.grid(), |a| j_integral(a, cfg)),
        id::ENTROPY => per_alpha(check, &cfg.parse_alphas(&cfg.entropy_alphas)?, |a| entropy(a, cfg)),
        id::EXACTNESS => per_alpha(check, &[AlphaParam::one(cfg.precision_bits)], |a| exactness(a, cfg)),
        id::FULL_CYLINDERS => per_alpha(check, &specials(cfg), |a| full_cylinders(a, cfg)),
        id::CYLINDER_ENVELOPE => per_alpha(check, &specials(cfg), |a| cylinder_envelope(a, cfg)),
        id::ORBIT_CLOUD => timed(check, "grid", || orbit_cloud(cfg)),
        other => {
            return Err(CfError::Parse {
                input: other.into(),
                reason: "unknown check id".into(),
            })
        }
    };
    Ok(out)
}

fn timed(check: &str, label: &str, f: impl FnOnce() -> Result<Vec<CheckResult>>) -> Vec<CheckResult> {
    let start = Instant::now();
    let mut out = f().unwrap_or_else(|e| vec![CheckResult::error(check, label, &e)]);
    let secs = start.elapsed().as_secs_f64();
    for r in &mut out {
        r.runtime = Some(secs);
    }
    out
}

fn per_alpha(check: &str, alphas: &[AlphaParam], f: impl Fn(&AlphaParam) -> Result<Vec<CheckResult>>) -> Vec<CheckResult> {
    alphas.iter().flat_map(|a| timed(check, &a.label(), || f(a))).collect()
}

fn interior(grid: Vec<AlphaParam>) -> Vec<AlphaParam> {
    grid.into_iter()
        .filter(|a| !matches!(a.branch(), crate::Branch::AtLower | crate::Branch::AtUpper))
        .collect()
}

fn specials(cfg: &VerifyConfig) -> Vec<AlphaParam> {
    let p = cfg.precision_bits;
    vec![AlphaParam::g(p), AlphaParam::one(p), AlphaParam::big_g(p)]
}

// ---------------------------------------------------------------------------
// Expansion corpus

/// One random expansion with its float iterates x_0, …, x_n.
pub struct CorpusEntry {
    pub exp: Expansion,
    pub iterates: Vec<Float>,
}

/// `cfg.expansions` expansions of uniform x ∈ I_α, α cycling through the
/// grid, each of length `cfg.expansion_length`.
pub fn corpus(cfg: &VerifyConfig) -> Result<Vec<CorpusEntry>> {
    let grid = cfg.grid();
    let seed = cfg.seed_for("corpus");
    (0..cfg.expansions)
        .into_par_iter()
        .map(|i| {
            let alpha = &grid[i % grid.len()];
            let mut rng = stream_rng(seed, i as u64);
            let x0 = uniform(&mut rng, &alpha.left(), alpha.value(), cfg.precision_bits);
            let mut iterates = Vec::with_capacity(cfg.expansion_length + 1);
            let exp = digits::expand_observed(&x0, alpha, cfg.expansion_length, &mut |_, x, _| {
                iterates.push(x.clone())
            })?;
            iterates.push(exp.tail.clone());
            Ok(CorpusEntry { exp, iterates })
        })
        .collect()
}

fn corpus_check(check: &str, cfg: &VerifyConfig) -> Result<Vec<CheckResult>> {
    let entries = corpus(cfg)?;
    let label = "corpus";
    let digits_total: usize = entries.iter().map(|e| e.exp.len()).sum();
    let note = format!("{} expansions, {} digits", entries.len(), digits_total);
    Ok(match check {
        id::DETERMINANT => {
            let bad: usize = entries.par_iter().map(|e| determinant_violations(&e.exp)).sum();
            vec![CheckResult::count(check, label, "violations", bad).with_detail(note)]
        }
        id::RECONSTRUCTION => {
            let worst = entries
                .par_iter()
                .map(|e| reconstruction_error(e, cfg.precision_bits))
                .collect::<Result<Vec<f64>>>()?
                .into_iter()
                .fold(0.0, f64::max);
            let tol = 2f64.powi(-(cfg.precision_bits as i32) / 2);
            vec![CheckResult::new(check, label, "max-residual", worst, 0.0, tol, Comparison::AtMost).with_detail(note)]
        }
        id::CONSTRAINTS => {
            let bad: usize = entries
                .iter()
                .map(|e| digits::validate_constraints(&e.exp).violations.len())
                .sum();
            vec![CheckResult::count(check, label, "violations", bad).with_detail(note)]
        }
        id::DENOMINATOR_GROWTH => {
            let (lower, ratio, positivity) = entries
                .par_iter()
                .map(|e| growth_violations(&e.exp))
                .reduce(|| (0, 0, 0), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2));
            vec![
                CheckResult::count(check, label, "positivity-violations", positivity),
                CheckResult::count(check, label, "lower-bound-violations", lower).with_detail(note.clone()),
                CheckResult::count(check, label, "five-ratio-violations", ratio).with_detail(note),
            ]
        }
        id::APPROXIMATION => {
            let stats = entries
                .par_iter()
                .map(|e| approximation_stats(&e.exp))
                .reduce(ApproxStats::default, ApproxStats::merge);
            let consts = crate::Constants::new(cfg.precision_bits);
            // |x − p_n/q_n| ≤ 1/(C_α q_n²) ≤ C^{−n}/(2(√5 − 2) q²)
            let c_min = c_min_f(&consts);
            let q2 = Float::with_val(64, consts.growth_prefactor.square_ref());
            let decay_bound = (c_min * q2).recip().to_f64();
            // |u| < G and C_α ≥ 2(√5 − 2)
            let c1_bound = (Float::with_val(64, &consts.big_g) / c_min_f(&consts)).to_f64();
            vec![
                CheckResult::count(check, label, "lower-bound-violations", stats.lower_violations).with_detail(format!(
                    "1/(q_n q_(n+1)) <= |x - p_n/q_n| failed on {} of {} (x, n) pairs",
                    stats.lower_violations, stats.pairs
                )),
                CheckResult::count(check, label, "sandwich-violations", stats.sandwich_violations).with_detail(format!(
                    "|u|/(M_alpha q_n^2) <= |x - p_n/q_n| <= |u|/(C_alpha q_n^2), M_alpha = sup (1 + xy); \
                     ratio range [{:.6}, {:.6}]; {} pairs have q_n + u q_(n-1) > 2G q_n",
                    stats.sandwich_lo, stats.sandwich_hi, stats.above_two_g
                )),
                CheckResult::new(check, label, "c1-fitted", stats.c1, c1_bound, 0.0, Comparison::AtMost)
                    .with_detail("sup_n |x - p_n/q_n| q_n^2"),
                CheckResult::new(check, label, "decay-sup", stats.decay_sup, decay_bound, 0.0, Comparison::AtMost)
                    .with_detail("sup_n |x - p_n/q_n| C^n"),
            ]
        }
        _ => unreachable!("not a corpus check"),
    })
}

/// 2(√5 − 2), the α-uniform lower bound of C_α.
fn c_min_f(c: &crate::Constants) -> Float {
    Float::with_val(64, &c.sqrt5 - 2u32) * 2u32
}

fn determinant_violations(exp: &Expansion) -> usize {
    let convs = exp.convergents();
    let mut sign = 1i32;
    let mut bad = 0;
    // convs[k] has index k − 1
    for (n, d) in exp.digits.iter().enumerate().map(|(i, d)| (i + 1, d)) {
        sign *= -i32::from(d.e());
        let (prev, cur) = (&convs[n], &convs[n + 1]);
        let det = Integer::from(&prev.p * &cur.q) - Integer::from(&cur.p * &prev.q);
        if det != sign {
            bad += 1;
        }
    }
    bad
}

fn reconstruction_error(e: &CorpusEntry, prec: u32) -> Result<f64> {
    let mut worst = 0f64;
    for n in 1..=e.exp.len() {
        let v = digits::evaluate(&e.exp.digits[..n], Some(&e.iterates[n]), prec)?;
        worst = worst.max(Float::with_val(prec, &v - &e.exp.x0).abs().to_f64());
    }
    Ok(worst)
}

/// (q_n ≥ qBⁿ failures, five-ratio failures, q_n ≤ 0 count).
fn growth_violations(exp: &Expansion) -> (usize, usize, usize) {
    let c = exp.alpha.consts();
    let prec = exp.alpha.prec();
    let convs = exp.convergents();
    let q: Vec<&Integer> = convs.iter().skip(1).map(|c| &c.q).collect(); // q_0, q_1, …
    let positivity = q.iter().skip(1).filter(|v| ***v <= 0).count();
    let mut lower = 0;
    let mut bound = c.growth_prefactor.clone();
    for qn in q.iter().skip(1) {
        bound *= &c.growth_rate;
        // q_n integer, bound irrational: no ties at this precision
        if Float::with_val(prec, *qn) < bound {
            lower += 1;
        }
    }
    // min_j q_n/q_{n+j} ≤ (5G − 2)^{−1/5}, i.e. max_j q_{n+j} ≥ B q_n
    let mut ratio = 0;
    for n in 1..q.len().saturating_sub(5) {
        let need = Float::with_val(prec, q[n] * &c.growth_rate);
        if !(1..=5).any(|j| Float::with_val(prec, q[n + j]) >= need) {
            ratio += 1;
        }
    }
    (lower, ratio, positivity)
}

struct ApproxStats {
    pairs: usize,
    lower_violations: usize,
    sandwich_violations: usize,
    sandwich_lo: f64,
    sandwich_hi: f64,
    above_two_g: usize,
    c1: f64,
    decay_sup: f64,
}

impl Default for ApproxStats {
    fn default() -> Self {
        ApproxStats {
            pairs: 0,
            lower_violations: 0,
            sandwich_violations: 0,
            sandwich_lo: f64::INFINITY,
            sandwich_hi: 0.0,
            above_two_g: 0,
            c1: 0.0,
            decay_sup: 0.0,
        }
    }
}

impl ApproxStats {
    fn merge(self, o: ApproxStats) -> ApproxStats {
        ApproxStats {
            pairs: self.pairs + o.pairs,
            lower_violations: self.lower_violations + o.lower_violations,
            sandwich_violations: self.sandwich_violations + o.sandwich_violations,
            sandwich_lo: self.sandwich_lo.min(o.sandwich_lo),
            sandwich_hi: self.sandwich_hi.max(o.sandwich_hi),
            above_two_g: self.above_two_g + o.above_two_g,
            c1: self.c1.max(o.c1),
            decay_sup: self.decay_sup.max(o.decay_sup),
        }
    }
}

/// Exact checks of the two-sided approximation inequalities for n ≥ 1 with
/// q_{n+1} available.
fn approximation_stats(exp: &Expansion) -> ApproxStats {
    let alpha = &exp.alpha;
    let prec = alpha.prec();
    let c = alpha.consts();
    let x = exp.x0_rational();
    let convs = exp.convergents();
    let c_alpha = natext::c_alpha_closed_form(alpha);
    let inv_two_g = Float::with_val(prec, &c.big_g * 2u32).recip();
    let inv_m_alpha = match natext::omega_domain(alpha) {
        Ok(d) => d.max_one_plus_xy().recip(),
        Err(_) => inv_two_g.clone(),
    };
    let inv_c_alpha = Float::with_val(prec, c_alpha.recip_ref());
    let mut s = ApproxStats::default();
    let mut decay = Float::with_val(prec, 1u32);
    for n in 1..exp.len() {
        decay *= &c.decay_rate;
        let (prev, cur, next) = (&convs[n], &convs[n + 1], &convs[n + 2]);
        let err = Rational::from(&x - Rational::from((cur.p.clone(), cur.q.clone()))).abs();
        s.pairs += 1;
        // 1/(q_n q_{n+1}) ≤ |x − p_n/q_n|
        let lower = Rational::from((Integer::from(1), Integer::from(&cur.q * &next.q)));
        if err < lower {
            s.lower_violations += 1;
        }
        // |x − p_n/q_n| q_n²/|u| = q_n/|q_n + u q_{n−1}|
        let state = digits::ConvergentPair {
            n,
            p: cur.p.clone(),
            q: cur.q.clone(),
            p_prev: prev.p.clone(),
            q_prev: prev.q.clone(),
        };
        if let Some(u) = state.residual_exact(&x).filter(|u| *u != 0) {
            let den = Rational::from(&cur.q + Rational::from(&u * &prev.q)).abs();
            let r = Float::with_val(prec, Rational::from(&cur.q / den));
            if r < inv_m_alpha || r > inv_c_alpha {
                s.sandwich_violations += 1;
            }
            if r < inv_two_g {
                s.above_two_g += 1;
            }
            let rf = r.to_f64();
            s.sandwich_lo = s.sandwich_lo.min(rf);
            s.sandwich_hi = s.sandwich_hi.max(rf);
        }
        let e2 = Float::with_val(prec, &err) * Float::with_val(prec, &cur.q).square();
        s.c1 = s.c1.max(e2.to_f64());
        let d = Float::with_val(prec, &err) * &decay;
        s.decay_sup = s.decay_sup.max(d.to_f64());
    }
    s
}

// ---------------------------------------------------------------------------
// Per-α checks

fn boundary(alpha: &AlphaParam) -> Result<Vec<CheckResult>> {
    let r = digits::boundary_identities(alpha)?;
    let label = alpha.label();
    let tol = 2f64.powi(-(alpha.prec() as i32) / 2);
    let mut out = vec![
        CheckResult::new(id::BOUNDARY, &label, "d(alpha)", r.d_at_right.digit.d() as f64, 1.0, 0.0, Comparison::Within),
        CheckResult::new(id::BOUNDARY, &label, "d(alpha-2)", r.d_at_left.digit.d() as f64, 1.0, 0.0, Comparison::Within),
    ];
    if let Some(s) = r.sum_residual {
        out.push(CheckResult::new(id::BOUNDARY, &label, "reciprocal-sum-residual", s.to_f64(), 0.0, tol, Comparison::AtMost));
    }
    if let Some(s) = r.second_iterate_residual {
        out.push(CheckResult::new(id::BOUNDARY, &label, "second-iterate-residual", s.to_f64(), 0.0, tol, Comparison::AtMost));
    }
    Ok(out)
}

fn product_bound(alpha: &AlphaParam, cfg: &VerifyConfig) -> Result<Vec<CheckResult>> {
    let dom = natext::omega_domain(alpha)?;
    let bounds = natext::product_bounds(alpha);
    let seed = cfg.seed_for(id::PRODUCT_BOUND);
    let (failures, max_k) = chunk_sizes(cfg.product_samples)
        .into_par_iter()
        .enumerate()
        .map(|(s, m)| {
            let mut rng = stream_rng(seed, s as u64);
            let mut fail = 0usize;
            let mut max_k = 0usize;
            for _ in 0..m {
                let pt = dom.sample(&mut rng);
                match natext::five_product_bound_with(&pt, alpha, &bounds) {
                    Ok(w) => max_k = max_k.max(w.k),
                    Err(CfError::VerificationFailure { .. }) => fail += 1,
                    Err(e) => return Err(e),
                }
            }
            Ok((fail, max_k))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold((0, 0), |a, b| (a.0 + b.0, a.1.max(b.1)));
    Ok(vec![CheckResult::count(id::PRODUCT_BOUND, &alpha.label(), "points-without-witness", failures)
        .with_detail(format!("{} points, largest witness k = {max_k}", cfg.product_samples))])
}

fn partition(alpha: &AlphaParam, cfg: &VerifyConfig) -> Result<Vec<CheckResult>> {
    let r = natext::verify_partition(alpha, cfg.partition_samples, cfg.seed_for(id::PARTITION))?;
    let label = alpha.label();
    let sub: usize = r.subregion_checks.iter().map(|&(_, _, f)| f).sum();
    let mu_fail = r.mu_balance.iter().filter(|m| !m.pass).count();
    let first = r.first_failure.clone().unwrap_or_default();
    Ok(vec![
        CheckResult::count(id::PARTITION, &label, "image-outside-domain", r.closure_failures).with_detail(first),
        CheckResult::count(id::PARTITION, &label, "preimage-count-failures", r.preimage_failures),
        CheckResult::count(id::PARTITION, &label, "subregion-target-failures", sub),
        CheckResult::count(id::PARTITION, &label, "mu-balance-failures", mu_fail),
    ])
}

fn c_alpha(alpha: &AlphaParam) -> Result<Vec<CheckResult>> {
    let r = natext::c_alpha(alpha, 64)?;
    let label = alpha.label();
    let floor = {
        let c = alpha.consts();
        (Float::with_val(64, &c.sqrt5 - 2u32) * 2u32).to_f64()
    };
    Ok(vec![
        CheckResult::new(id::C_ALPHA, &label, "corner-min", r.corner_min, r.closed_form, 1e-12, Comparison::Within),
        CheckResult::new(id::C_ALPHA, &label, "grid-min", r.grid_min, r.closed_form, 1e-12, Comparison::Within),
        CheckResult::new(id::C_ALPHA, &label, "closed-form", r.closed_form, floor, 0.0, Comparison::AtLeast),
    ])
}

fn mu_omega(alpha: &AlphaParam) -> Result<Vec<CheckResult>> {
    let mu = natext::omega_domain(alpha)?.mu().to_f64();
    let target = alpha.consts().three_log_g().to_f64();
    Ok(vec![CheckResult::new(id::MU_OMEGA, &alpha.label(), "mu", mu, target, 1e-9, Comparison::Within)])
}

fn density(alpha: &AlphaParam) -> Result<Vec<CheckResult>> {
    let prof = DensityProfile::new(alpha)?;
    let label = alpha.label();
    let closed = prof.integral(&alpha.left(), alpha.value()).to_f64();
    let cuts: Vec<f64> = prof.breakpoints.iter().map(Float::to_f64).collect();
    let quad = Adaptive::new(1e-11).integrate_split(alpha.left().to_f64(), alpha.value().to_f64(), &cuts, |x| {
        prof.eval_f64(x)
    })?;
    Ok(vec![
        CheckResult::new(id::DENSITY, &label, "integral-closed-form", closed, 1.0, 1e-9, Comparison::Within),
        CheckResult::new(id::DENSITY, &label, "integral-quadrature", quad, 1.0, 1e-9, Comparison::Within),
    ])
}

fn invariance(alpha: &AlphaParam, cfg: &VerifyConfig) -> Result<Vec<CheckResult>> {
    let prec = alpha.prec();
    let mut rng = stream_rng(cfg.seed_for(id::INVARIANCE), alpha_stream(alpha));
    let mut worst = 0f64;
    let mut worst_at = String::new();
    for _ in 0..cfg.invariance_intervals {
        let u = uniform(&mut rng, &alpha.left(), alpha.value(), prec);
        let v = uniform(&mut rng, &alpha.left(), alpha.value(), prec);
        let (lo, hi) = if u < v { (u, v) } else { (v, u) };
        let a = Interval::closed_open(lo, hi);
        let r = measures::check_invariance(&a, alpha, f64::INFINITY)?;
        if r.residual >= worst {
            worst = r.residual;
            worst_at = a.to_string();
        }
    }
    Ok(vec![CheckResult::new(id::INVARIANCE, &alpha.label(), "max-residual", worst, 0.0, 1e-8, Comparison::AtMost)
        .with_detail(format!("{} intervals; worst {worst_at}", cfg.invariance_intervals))])
}

/// Stream index derived from the bits of α, so per-α draws do not depend
/// on the grid.
fn alpha_stream(alpha: &AlphaParam) -> u64 {
    alpha.value().to_f64().to_bits()
}

fn j_integral(alpha: &AlphaParam, cfg: &VerifyConfig) -> Result<Vec<CheckResult>> {
    let v = measures::j_integral_value(alpha, cfg.j_tol / 100.0)?;
    let target = measures::j_target(alpha);
    Ok(vec![CheckResult::new(id::J_INTEGRAL, &alpha.label(), "J", v, target, cfg.j_tol, Comparison::Within)])
}

fn entropy(alpha: &AlphaParam, cfg: &VerifyConfig) -> Result<Vec<CheckResult>> {
    let r = measures::entropy_estimate(alpha, cfg.entropy_n, cfg.entropy_trials, cfg.seed_for(id::ENTROPY))?;
    let target = measures::entropy_target(alpha);
    let label = alpha.label();
    let describe = |e: &measures::EstimatorResult| {
        format!("n = {}, trials = {}, stderr = {:.3e}, seed = {}", e.n_iterations, e.trials, e.std_error, e.seed)
    };
    let rel = 0.01 * target;
    Ok(vec![
        CheckResult::new(id::ENTROPY, &label, "(2/n) log q_n", r.entropy.estimate, target, rel, Comparison::Within)
            .with_detail(describe(&r.entropy)),
        CheckResult::new(
            id::ENTROPY,
            &label,
            "(1/n) log|x - p_n/q_n|",
            r.approximation_exponent.estimate,
            -target,
            rel,
            Comparison::Within,
        )
        .with_detail(describe(&r.approximation_exponent)),
        CheckResult::new(id::ENTROPY, &label, "birkhoff -2/n sum log|x_k|", 2.0 * r.birkhoff.estimate, target, rel, Comparison::Within)
            .with_detail(describe(&r.birkhoff)),
    ])
}

/// |λ(φ⁻ᵏA) − 2ν(A)| for A = (1/2, 1), k = 0..=depth.
pub fn exactness_errors(alpha: &AlphaParam, depth: usize) -> Result<Vec<f64>> {
    let prec = alpha.prec();
    let a = Interval::open(Float::with_val(prec, 0.5), Float::with_val(prec, 1u32));
    let a = a.intersect(&Interval::closed_open(alpha.left(), alpha.value().clone()));
    let two_nu = 2.0 * measures::nu_measure(&IntervalSet::single(a.clone()), alpha)?.to_f64();
    let mut out = vec![(a.length().to_f64() - two_nu).abs()];
    out.extend(measures::exactness_decay(&a, alpha, depth)?.into_iter().map(|l| (l - two_nu).abs()));
    Ok(out)
}

fn exactness(alpha: &AlphaParam, cfg: &VerifyConfig) -> Result<Vec<CheckResult>> {
    let errs = exactness_errors(alpha, cfg.exactness_depth)?;
    let last = *errs.last().expect("depth ≥ 0");
    // once below 10⁻² the error must stay there
    let crossed = errs.iter().position(|&e| e < 1e-2).unwrap_or(errs.len());
    let stays = errs[crossed..].iter().fold(0f64, |m, &e| m.max(e));
    let seq = errs.iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>().join(", ");
    let label = alpha.label();
    Ok(vec![
        CheckResult::new(id::EXACTNESS, &label, "error-at-depth", last, 0.0, 1e-2, Comparison::AtMost)
            .with_detail(format!("|lambda(phi^-k A) - 2 nu(A)|, A = (1/2, 1), k = 0..: {seq}")),
        CheckResult::new(id::EXACTNESS, &label, "max-error-after-crossing", stays, 0.0, 1e-2, Comparison::AtMost),
        CheckResult::new(id::EXACTNESS, &label, "drop-from-k0", errs[0] - last, 0.0, 0.0, Comparison::Above),
    ])
}

/// Cylinder alphabet bound for a tiling check at rank n, keeping the
/// enumeration near 10⁵ words.
fn tiling_d_max(n: usize) -> u64 {
    match n {
        0..=2 => 15,
        3 => 9,
        4 => 7,
        5 | 6 => 5,
        _ => 3,
    }
}

fn full_cylinders(alpha: &AlphaParam, cfg: &VerifyConfig) -> Result<Vec<CheckResult>> {
    let prec = alpha.prec();
    let label = alpha.label();
    let seed = cfg.seed_for(id::FULL_CYLINDERS);
    let hit_counts = (0..cfg.hitting_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed ^ alpha_stream(alpha), i as u64);
            let x = uniform(&mut rng, &alpha.left(), alpha.value(), prec);
            Ok(usize::from(!cylinders::full_cylinder_hitting(&x, alpha, cfg.hitting_depth)?.is_empty()))
        })
        .collect::<Result<Vec<usize>>>()?;
    let frac = hit_counts.iter().sum::<usize>() as f64 / cfg.hitting_samples.max(1) as f64;
    let mut out = vec![CheckResult::new(id::FULL_CYLINDERS, &label, "hit-fraction", frac, 0.99, 0.0, Comparison::AtLeast)
        .with_detail(format!("{} samples, n_max = {}", cfg.hitting_samples, cfg.hitting_depth))];
    let mut worst = 0f64;
    let mut detail = Vec::new();
    for n in 1..=cfg.tiling_rank {
        let e = cylinders::enumerate_rank(alpha, n, tiling_d_max(n), measures::BRANCH_BUDGET)?;
        let dev = Float::with_val(prec, e.total_length() - 2u32).abs().to_f64();
        // indeterminate cylinders are narrower than the guard band
        let slack = 1e-12 + e.indeterminate as f64 * 2f64.powi(-(prec as i32) / 2);
        worst = worst.max(dev - slack);
        detail.push(format!("n={n}: |sum - 2| = {dev:.2e}"));
    }
    out.push(
        CheckResult::new(id::FULL_CYLINDERS, &label, "tiling-excess", worst.max(0.0), 0.0, 0.0, Comparison::AtMost)
            .with_detail(detail.join("; ")),
    );
    let counts = cylinders::count_non_full(alpha, cfg.non_full_rank)?;
    let over = counts.iter().enumerate().filter(|(k, &c)| c > 1usize << (k + 1)).count();
    out.push(
        CheckResult::count(id::FULL_CYLINDERS, &label, "ranks-with-S_n-above-2^n", over)
            .with_detail(format!("|S_n| = {counts:?}")),
    );
    Ok(out)
}

fn cylinder_envelope(alpha: &AlphaParam, cfg: &VerifyConfig) -> Result<Vec<CheckResult>> {
    let env = Envelope::fixture();
    let label = alpha.label();
    let mut scaling_fail = 0;
    let mut quasi_fail = 0;
    let mut words = 0;
    let prec = alpha.prec();
    let whole = Interval::closed_open(alpha.left(), alpha.value().clone());
    let half = Interval::closed_open(alpha.left(), Float::with_val(prec, alpha.value() - 1u32));
    for n in 1..=cfg.envelope_rank {
        let e = cylinders::enumerate_rank(alpha, n, 7, measures::BRANCH_BUDGET)?;
        for c in e.cylinders.iter().filter(|c| c.is_nonempty()) {
            words += 1;
            if !cylinders::measure_scaling_check(&c.word, alpha, &env)?.pass() {
                scaling_fail += 1;
            }
            if cylinders::image_is_full(&c.image, alpha) {
                for a in [&whole, &half] {
                    if cylinders::quasi_independence_check(&c.word, a, alpha, &env).is_err() {
                        quasi_fail += 1;
                    }
                }
            }
        }
    }
    Ok(vec![
        CheckResult::count(id::CYLINDER_ENVELOPE, &label, "scaling-outside-envelope", scaling_fail)
            .with_detail(format!("{words} cylinders up to rank {}", cfg.envelope_rank)),
        CheckResult::count(id::CYLINDER_ENVELOPE, &label, "quasi-independence-outside-envelope", quasi_fail),
    ])
}

/// Every interior grid α keeps its cloud inside the closure of Ω_α; α = 0.9g
/// escapes Ω_g.
fn orbit_cloud(cfg: &VerifyConfig) -> Result<Vec<CheckResult>> {
    let mut out = Vec::new();
    for alpha in cfg.grid() {
        let cloud = natext::orbit_cloud(&alpha, cfg.cloud_grid, cfg.cloud_depth)?;
        let dom = natext::omega_domain(&alpha)?;
        let esc = natext::escape_fraction(&cloud, &dom);
        out.push(CheckResult::new(id::ORBIT_CLOUD, &alpha.label(), "escape-fraction", esc, 0.0, 0.0, Comparison::AtMost));
    }
    let p = cfg.precision_bits;
    let low = AlphaParam::parse("0.9g", p, true)?;
    let cloud = natext::orbit_cloud(&low, cfg.cloud_grid, cfg.cloud_depth)?;
    let esc = natext::escape_fraction(&cloud, &natext::omega_domain(&AlphaParam::g(p))?);
    out.push(
        CheckResult::new(id::ORBIT_CLOUD, &low.label(), "escape-fraction-from-omega-g", esc, 0.0, 0.0, Comparison::Above)
            .with_detail(format!("{} points", cloud.len())),
    );
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> VerifyConfig {
        VerifyConfig {
            grid_points: 5,
            expansions: 40,
            expansion_length: 30,
            product_samples: 500,
            partition_samples: 2000,
            invariance_intervals: 2,
            entropy_n: 200,
            entropy_trials: 4,
            exactness_depth: 3,
            hitting_samples: 50,
            tiling_rank: 3,
            non_full_rank: 6,
            envelope_rank: 2,
            cloud_grid: 20,
            cloud_depth: 5,
            ..VerifyConfig::default()
        }
    }

    #[test]
    fn corpus_checks_pass_except_stated_lower_bound() {
        let cfg = small();
        for check in [id::DETERMINANT, id::RECONSTRUCTION, id::CONSTRAINTS, id::DENOMINATOR_GROWTH] {
            let r = run_check(check, &cfg).unwrap();
            assert!(r.iter().all(|c| c.pass), "{r:?}");
        }
        let r = run_check(id::APPROXIMATION, &cfg).unwrap();
        for c in &r {
            assert_eq!(c.pass, c.quantity != "lower-bound-violations", "{c:?}");
        }
    }

    #[test]
    fn per_alpha_checks_pass_on_a_small_config() {
        let mut cfg = small();
        cfg.only = [id::BOUNDARY, id::MU_OMEGA, id::DENSITY, id::C_ALPHA, id::ORBIT_CLOUD]
            .map(String::from)
            .to_vec();
        let rep = run(&cfg).unwrap();
        assert!(rep.pass, "{:?}", rep.failing_ids());
        assert!(rep.checks.iter().any(|c| c.check_id == id::ORBIT_CLOUD && c.alpha == "0.9g"));
    }

    #[test]
    fn unknown_id_is_rejected_and_failures_are_listed_once() {
        let cfg = VerifyConfig {
            only: vec!["nope".into()],
            ..small()
        };
        assert!(run(&cfg).is_err());
        let a = CheckResult::count("x", "1", "q", 1);
        let rep = VerifyReport::from_checks(vec![a.clone(), a, CheckResult::count("y", "1", "q", 0)]);
        assert!(!rep.pass);
        assert_eq!(rep.failing_ids(), vec!["x".to_string()]);
    }

    #[test]
    fn nan_never_passes() {
        for cmp in [Comparison::Within, Comparison::AtMost, Comparison::AtLeast, Comparison::Above] {
            assert!(!cmp.holds(f64::NAN, 0.0, 1.0));
        }
    }
}
