//! One-dimensional dynamics: digit extraction, the Gauss map, expansions,
//! exact convergents, evaluation and digit-constraint validation.
//!
//! Float-mode expansions treat the input as the exact dyadic rational it is
//! stored as. Every `checkpoint_interval` steps the float iterate is compared
//! with the residual recomputed exactly from the convergents and then
//! replaced by it, so rounding error never accumulates past one interval.

use std::cmp::Ordering;
use std::fmt;

use rug::{Float, Integer, Rational};
use serde::{Deserialize, Serialize};

use crate::alpha::{AlphaParam, AlphaSource, Branch};
use crate::error::{CfError, Result};
use crate::interval::{decimal, Interval};

/// One term (e, d) of an expansion: sign e = ±1 and odd partial quotient d.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "(i8, u64)", into = "(i8, u64)")]
pub struct SignedDigit {
    e: i8,
    d: u64,
}

impl SignedDigit {
    pub fn new(e: i8, d: u64) -> Result<Self> {
        if e != 1 && e != -1 {
            return Err(CfError::InvalidDigitString(format!("sign {e} is not ±1")));
        }
        if d % 2 == 0 {
            return Err(CfError::EvenDigit(d as i64));
        }
        Ok(SignedDigit { e, d })
    }

    /// Digit from its signed symbol ω = e·d.
    pub fn from_omega(omega: i64) -> Result<Self> {
        if omega % 2 == 0 {
            return Err(CfError::EvenDigit(omega));
        }
        SignedDigit::new(if omega > 0 { 1 } else { -1 }, omega.unsigned_abs())
    }

    pub fn e(self) -> i8 {
        self.e
    }

    pub fn d(self) -> u64 {
        self.d
    }

    pub fn omega(self) -> i64 {
        self.e as i64 * self.d as i64
    }

    pub fn positive(self) -> bool {
        self.e > 0
    }
}

impl TryFrom<(i8, u64)> for SignedDigit {
    type Error = CfError;
    fn try_from((e, d): (i8, u64)) -> Result<Self> {
        SignedDigit::new(e, d)
    }
}

impl From<SignedDigit> for (i8, u64) {
    fn from(s: SignedDigit) -> Self {
        (s.e, s.d)
    }
}

impl fmt::Display for SignedDigit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:+},{})", self.e, self.d)
    }
}

/// A digit together with the reliability flag of the floor that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DigitReading {
    pub digit: SignedDigit,
    /// The floor argument was within 2^(−P/4) of an integer.
    pub near_tie: bool,
}

fn tie_guard(prec: u32) -> Float {
    Float::with_val(prec, Float::i_exp(1, -((prec / 4) as i32)))
}

fn odd_from_floor(m: &Integer) -> Result<u64> {
    // d = 2m + 1 with m ≥ 0
    let d = Integer::from(m * 2u32) + 1u32;
    d.to_u64().ok_or(CfError::DigitOverflow)
}

/// d_α(x) and e(x) for nonzero x, without checking x ∈ I_α.
fn raw_digit(x: &Float, alpha: &AlphaParam) -> Result<DigitReading> {
    if x.is_zero() {
        return Err(CfError::ZeroInput);
    }
    let prec = alpha.prec().max(x.prec());
    let ax = Float::with_val(prec, x.abs_ref());
    let inv = Float::with_val(prec, 1u32 / &ax);
    reading_from_reciprocal(&inv, x.is_sign_negative(), alpha)
}

/// The digit of x from 1/|x| and the sign of x.
fn reading_from_reciprocal(inv: &Float, negative: bool, alpha: &AlphaParam) -> Result<DigitReading> {
    let prec = inv.prec();
    // t = 1/(2|x|) + (1 − α)/2
    let mut t = Float::with_val(prec, inv / 2u32);
    t += Float::with_val(prec, 1u32 - alpha.value()) / 2u32;
    let floor = Float::with_val(prec, t.floor_ref());
    let frac = Float::with_val(prec, &t - &floor);
    let guard = tie_guard(alpha.prec());
    let near_tie = frac < guard || Float::with_val(prec, 1u32 - &frac) < guard;
    let m = floor.to_integer().ok_or(CfError::DigitOverflow)?;
    let d = odd_from_floor(&m)?;
    let e = if negative { -1 } else { 1 };
    Ok(DigitReading {
        digit: SignedDigit { e, d },
        near_tie,
    })
}

/// The digit (e(x), d_α(x)) of a nonzero x ∈ [α − 2, α).
pub fn digit_of(x: &Float, alpha: &AlphaParam) -> Result<DigitReading> {
    if x.is_zero() {
        return Err(CfError::ZeroInput);
    }
    check_in_interval(x, alpha)?;
    raw_digit(x, alpha)
}

fn check_in_interval(x: &Float, alpha: &AlphaParam) -> Result<()> {
    if alpha.in_interval(x) {
        Ok(())
    } else {
        Err(CfError::out_of_range(
            "x",
            decimal_short(x),
            format!("[{}, {})", decimal_short(&alpha.left()), decimal_short(alpha.value())),
        ))
    }
}

fn decimal_short(x: &Float) -> String {
    x.to_string_radix(10, Some(20))
}

/// φ_α(x) = 1/|x| − d_α(x), with φ_α(0) = 0.
pub fn gauss_step(x: &Float, alpha: &AlphaParam) -> Result<Float> {
    if x.is_zero() {
        return Ok(x.clone());
    }
    let r = digit_of(x, alpha)?;
    Ok(apply_digit(x, r.digit, alpha.prec().max(x.prec())))
}

/// 1/|x| − d for the digit already read off x.
pub(crate) fn apply_digit(x: &Float, digit: SignedDigit, prec: u32) -> Float {
    let ax = Float::with_val(prec, x.abs_ref());
    Float::with_val(prec, 1u32 / &ax) - digit.d
}

/// d_α(α), defined by the digit formula at the excluded right endpoint.
pub fn digit_at_right_endpoint(alpha: &AlphaParam) -> Result<DigitReading> {
    raw_digit(alpha.value(), alpha)
}

/// The exact value of α when it is rational.
pub fn exact_alpha(alpha: &AlphaParam) -> Option<Rational> {
    match alpha.source() {
        AlphaSource::Rational(r) => Some(r.clone()),
        AlphaSource::Float(f) => f.to_rational(),
        _ => None,
    }
}

/// Exact digit of a nonzero rational. With irrational α the floor argument is
/// irrational, so it is evaluated at a precision that clears the tie guard.
pub fn digit_of_rational(x: &Rational, alpha: &AlphaParam) -> Result<DigitReading> {
    if *x == 0 {
        return Err(CfError::ZeroInput);
    }
    let e: i8 = if *x < 0 { -1 } else { 1 };
    let ax = Rational::from(x.abs_ref());
    let half_inv = Rational::from(ax.recip_ref()) / 2u32;
    if let Some(a) = exact_alpha(alpha) {
        let lo = Rational::from(&a - 2u32);
        if *x < lo || *x >= a {
            return Err(CfError::out_of_range("x", x.to_string(), format!("[{lo}, {a})")));
        }
        let t = half_inv + Rational::from(1u32 - &a) / 2u32;
        let m = t.floor().into_numer_denom().0;
        return Ok(DigitReading {
            digit: SignedDigit { e, d: odd_from_floor(&m)? },
            near_tie: false,
        });
    }
    let prec = alpha.prec();
    let xf = Float::with_val(prec, x);
    check_in_interval(&xf, alpha)?;
    let mut t = Float::with_val(prec, &half_inv);
    t += Float::with_val(prec, 1u32 - alpha.value()) / 2u32;
    let floor = Float::with_val(prec, t.floor_ref());
    let frac = Float::with_val(prec, &t - &floor);
    let guard = tie_guard(prec);
    let near_tie = frac < guard || Float::with_val(prec, 1u32 - &frac) < guard;
    let m = floor.to_integer().ok_or(CfError::DigitOverflow)?;
    Ok(DigitReading {
        digit: SignedDigit { e, d: odd_from_floor(&m)? },
        near_tie,
    })
}

/// Exact Gauss map on rationals.
pub fn gauss_step_rational(x: &Rational, alpha: &AlphaParam) -> Result<Rational> {
    if *x == 0 {
        return Ok(Rational::new());
    }
    let r = digit_of_rational(x, alpha)?;
    Ok(Rational::from(x.abs_ref()).recip() - r.digit.d)
}

/// The pair (p_n, q_n) with its index; n = −1 is the seed (1, 0).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Convergent {
    pub index: i64,
    pub p: Integer,
    pub q: Integer,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct ConvergentRecord {
    pub index: i64,
    pub p: String,
    pub q: String,
}

impl From<&Convergent> for ConvergentRecord {
    fn from(c: &Convergent) -> Self {
        ConvergentRecord {
            index: c.index,
            p: c.p.to_string(),
            q: c.q.to_string(),
        }
    }
}

/// Running state of the matrix recurrence: (p_n, q_n) and (p_{n−1}, q_{n−1}).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConvergentPair {
    pub n: usize,
    pub p: Integer,
    pub q: Integer,
    pub p_prev: Integer,
    pub q_prev: Integer,
}

impl Default for ConvergentPair {
    fn default() -> Self {
        ConvergentPair {
            n: 0,
            p: Integer::ZERO,
            q: Integer::from(1),
            p_prev: Integer::from(1),
            q_prev: Integer::ZERO,
        }
    }
}

impl ConvergentPair {
    /// p_{n+1} = d p_n + e p_{n−1}, likewise for q.
    pub fn push(&mut self, digit: SignedDigit) {
        let mut p_next = Integer::from(&self.p * digit.d);
        let mut q_next = Integer::from(&self.q * digit.d);
        if digit.positive() {
            p_next += &self.p_prev;
            q_next += &self.q_prev;
        } else {
            p_next -= &self.p_prev;
            q_next -= &self.q_prev;
        }
        self.p_prev = std::mem::replace(&mut self.p, p_next);
        self.q_prev = std::mem::replace(&mut self.q, q_next);
        self.n += 1;
    }

    pub fn from_digits(digits: &[SignedDigit]) -> Self {
        let mut s = ConvergentPair::default();
        for &d in digits {
            s.push(d);
        }
        s
    }

    /// (q_n x − p_n)/(−q_{n−1} x + p_{n−1}) exactly; `None` when the
    /// denominator vanishes.
    pub fn residual_exact(&self, x: &Rational) -> Option<Rational> {
        let num = Rational::from(x * &self.q) - &self.p;
        let den = Rational::from(&self.p_prev - Rational::from(x * &self.q_prev));
        if den == 0 {
            None
        } else {
            Some(num / den)
        }
    }

    /// (p_n + t p_{n−1})/(q_n + t q_{n−1}) at `prec` bits.
    pub fn mobius(&self, t: &Float, prec: u32) -> Result<Float> {
        let num = Float::with_val(prec, t * &self.p_prev) + &self.p;
        let den = Float::with_val(prec, t * &self.q_prev) + &self.q;
        if den.is_zero() {
            return Err(CfError::InvalidDigitString("vanishing denominator q_n + t q_{n-1}".into()));
        }
        Ok(num / den)
    }
}

/// A finite digit string for one x0 at one α.
#[derive(Debug, Clone)]
pub struct Expansion {
    pub alpha: AlphaParam,
    /// The input as a float; in float mode this is the exact value expanded.
    pub x0: Float,
    /// Set in exact rational mode.
    pub x0_exact: Option<Rational>,
    pub digits: Vec<SignedDigit>,
    /// Some iterate was exactly 0.
    pub terminated: bool,
    pub precision_bits: u32,
    /// Indices of digits whose floor was near a tie.
    pub near_ties: Vec<usize>,
    /// φ^n(x0) for n = digits.len().
    pub tail: Float,
    /// Convergent state after the last digit.
    pub last: ConvergentPair,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ExpansionRecord {
    pub alpha: String,
    pub branch: Branch,
    pub x0: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub x0_exact: Option<String>,
    pub precision_bits: u32,
    pub digits: Vec<SignedDigit>,
    pub terminated: bool,
}

impl Expansion {
    pub fn len(&self) -> usize {
        self.digits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.digits.is_empty()
    }

    /// x0 as an exact rational (the dyadic value in float mode).
    pub fn x0_rational(&self) -> Rational {
        self.x0_exact
            .clone()
            .unwrap_or_else(|| self.x0.to_rational().expect("finite input"))
    }

    pub fn convergents(&self) -> Vec<Convergent> {
        convergents(&self.digits)
    }

    pub fn record(&self) -> ExpansionRecord {
        ExpansionRecord {
            alpha: self.alpha.label(),
            branch: self.alpha.branch(),
            x0: decimal(&self.x0),
            x0_exact: self.x0_exact.as_ref().map(|r| r.to_string()),
            precision_bits: self.precision_bits,
            digits: self.digits.clone(),
            terminated: self.terminated,
        }
    }
}

/// Optional per-step hook: called with (k, x_k, digit) before each step.
pub type StepObserver<'a> = dyn FnMut(usize, &Float, SignedDigit) + 'a;

/// Steps between exact-residual checkpoints at precision `prec`.
pub fn checkpoint_interval(prec: u32) -> usize {
    ((prec / 16) as usize).max(1)
}

/// Largest expansion length allowed at precision `prec`.
pub fn digit_budget(prec: u32) -> usize {
    (prec / 4) as usize
}

/// Expands a float x0 ∈ I_α to at most `n_max` digits at the precision of α.
pub fn expand(x0: &Float, alpha: &AlphaParam, n_max: usize) -> Result<Expansion> {
    expand_observed(x0, alpha, n_max, &mut |_, _, _| {})
}

pub fn expand_observed(
    x0: &Float,
    alpha: &AlphaParam,
    n_max: usize,
    observer: &mut StepObserver<'_>,
) -> Result<Expansion> {
    let prec = alpha.prec();
    if n_max > digit_budget(prec) {
        return Err(CfError::PrecisionBudget {
            requested: n_max,
            max: digit_budget(prec),
            precision_bits: prec,
        });
    }
    let x0 = Float::with_val(prec, x0);
    check_in_interval(&x0, alpha)?;
    let exact_x0 = x0.to_rational().ok_or_else(|| CfError::out_of_range("x", "non-finite", "finite"))?;
    let tol = Float::with_val(prec, Float::i_exp(1, -((prec / 2) as i32)));
    let interval = checkpoint_interval(prec);

    let mut state = ConvergentPair::default();
    let mut digits = Vec::with_capacity(n_max);
    let mut near_ties = Vec::new();
    let mut x = x0.clone();
    let mut terminated = x.is_zero();
    while digits.len() < n_max && !terminated {
        let k = digits.len();
        if let Err(CfError::OutOfRange { value, .. }) = check_in_interval(&x, alpha) {
            return Err(CfError::PrecisionExhausted {
                index: k,
                deviation: format!("iterate {value} left the interval"),
            });
        }
        // one division per step: the digit and the next iterate share 1/|x|
        let inv = Float::with_val(prec, 1u32 / Float::with_val(prec, x.abs_ref()));
        let reading = reading_from_reciprocal(&inv, x.is_sign_negative(), alpha)?;
        if reading.near_tie {
            near_ties.push(k);
        }
        observer(k, &x, reading.digit);
        x = inv - reading.digit.d;
        digits.push(reading.digit);
        state.push(reading.digit);
        terminated = x.is_zero();
        // a float iterate near 0 may be rounding noise of an exact 0
        let tiny = !terminated && x.get_exp().is_some_and(|e| e < -((prec / 4) as i32));
        if !terminated && (tiny || digits.len() % interval == 0 || digits.len() == n_max) {
            x = resync(&x, &state, &exact_x0, alpha, &tol)?;
            terminated = x.is_zero();
        }
    }
    Ok(Expansion {
        alpha: alpha.clone(),
        x0,
        x0_exact: None,
        digits,
        terminated,
        precision_bits: prec,
        near_ties,
        tail: x,
        last: state,
    })
}

/// Compares the float iterate with the exact residual and returns the latter.
fn resync(x: &Float, state: &ConvergentPair, x0: &Rational, alpha: &AlphaParam, tol: &Float) -> Result<Float> {
    let prec = alpha.prec();
    let index = state.n;
    let r = state.residual_exact(x0).ok_or_else(|| CfError::PrecisionExhausted {
        index,
        deviation: "residual denominator vanished".into(),
    })?;
    let rf = Float::with_val(prec, &r);
    let dev = Float::with_val(prec, &rf - x).abs();
    let inside = rf.is_zero() || alpha.in_interval(&rf);
    if dev > *tol || !inside {
        return Err(CfError::PrecisionExhausted {
            index,
            deviation: dev.to_string_radix(10, Some(6)),
        });
    }
    Ok(rf)
}

/// Exact expansion of a rational x0 ∈ I_α; stops at 0 or `n_max` digits.
pub fn expand_rational(x0: &Rational, alpha: &AlphaParam, n_max: usize) -> Result<Expansion> {
    let prec = alpha.prec();
    let mut x = x0.clone();
    let mut state = ConvergentPair::default();
    let mut digits = Vec::new();
    let mut near_ties = Vec::new();
    if x != 0 {
        // range check also for inputs that terminate immediately
        digit_of_rational(&x, alpha)?;
    } else if !alpha.in_interval(&Float::with_val(prec, &x)) {
        return Err(CfError::out_of_range("x", "0", "I_alpha"));
    }
    while digits.len() < n_max && x != 0 {
        let reading = digit_of_rational(&x, alpha)?;
        if reading.near_tie {
            near_ties.push(digits.len());
        }
        x = Rational::from(x.abs_ref()).recip() - reading.digit.d;
        digits.push(reading.digit);
        state.push(reading.digit);
    }
    Ok(Expansion {
        alpha: alpha.clone(),
        x0: Float::with_val(prec, x0),
        x0_exact: Some(x0.clone()),
        terminated: x == 0,
        digits,
        precision_bits: prec,
        near_ties,
        tail: Float::with_val(prec, &x),
        last: state,
    })
}

/// (p_n, q_n) for n = −1..=len(digits).
pub fn convergents(digits: &[SignedDigit]) -> Vec<Convergent> {
    let mut out = Vec::with_capacity(digits.len() + 2);
    let mut s = ConvergentPair::default();
    out.push(Convergent {
        index: -1,
        p: s.p_prev.clone(),
        q: s.q_prev.clone(),
    });
    out.push(Convergent {
        index: 0,
        p: s.p.clone(),
        q: s.q.clone(),
    });
    for (i, &d) in digits.iter().enumerate() {
        s.push(d);
        out.push(Convergent {
            index: i as i64 + 1,
            p: s.p.clone(),
            q: s.q.clone(),
        });
    }
    out
}

/// (p_n + t p_{n−1})/(q_n + t q_{n−1}); without a tail this is p_n/q_n.
pub fn evaluate(digits: &[SignedDigit], tail: Option<&Float>, prec: u32) -> Result<Float> {
    let s = ConvergentPair::from_digits(digits);
    match tail {
        Some(t) => s.mobius(t, prec),
        None => {
            if s.q == 0 {
                return Err(CfError::InvalidDigitString("q_n = 0".into()));
            }
            Ok(Float::with_val(prec, &s.p) / &s.q)
        }
    }
}

/// p_n/q_n as an exact rational.
pub fn evaluate_exact(digits: &[SignedDigit]) -> Result<Rational> {
    let s = ConvergentPair::from_digits(digits);
    if s.q == 0 {
        return Err(CfError::InvalidDigitString("q_n = 0".into()));
    }
    Ok(Rational::from((s.p, s.q)))
}

/// φ^n(x0) recovered from the convergents: (q_n x0 − p_n)/(−q_{n−1} x0 + p_{n−1}).
/// `convs` is the output of [`convergents`], so index n sits at position n + 1.
pub fn residual(x0: &Float, convs: &[Convergent], n: usize) -> Result<Float> {
    let prec = x0.prec();
    let x = x0.to_rational().ok_or_else(|| CfError::out_of_range("x", "non-finite", "finite"))?;
    if n + 1 >= convs.len() {
        return Err(CfError::out_of_range("n", n, format!("0..{}", convs.len().saturating_sub(2))));
    }
    let cur = &convs[n + 1];
    let prev = &convs[n];
    let state = ConvergentPair {
        n,
        p: cur.p.clone(),
        q: cur.q.clone(),
        p_prev: prev.p.clone(),
        q_prev: prev.q.clone(),
    };
    let r = state
        .residual_exact(&x)
        .ok_or_else(|| CfError::InvalidDigitString("residual denominator vanished".into()))?;
    Ok(Float::with_val(prec, &r))
}

/// Values at the interval endpoints that the domain construction relies on.
#[derive(Debug, Clone)]
pub struct BoundaryReport {
    pub d_at_right: DigitReading,
    pub d_at_left: DigitReading,
    pub phi_right: Float,
    pub phi_left: Float,
    /// |1/φ(α) + 1/φ(α − 2) + 2|, for α ∈ (g,1) ∪ (1,G).
    pub sum_residual: Option<Float>,
    /// |φ²(α) − φ²(α − 2)|, for α ∈ (g,G).
    pub second_iterate_residual: Option<Float>,
}

pub fn boundary_identities(alpha: &AlphaParam) -> Result<BoundaryReport> {
    let prec = alpha.prec();
    let right = alpha.right();
    let left = alpha.left();
    let d_at_right = digit_at_right_endpoint(alpha)?;
    let d_at_left = digit_of(&left, alpha)?;
    let phi_right = apply_digit(&right, d_at_right.digit, prec);
    let phi_left = apply_digit(&left, d_at_left.digit, prec);
    let branch = alpha.branch();
    let sum_residual = matches!(branch, Branch::Low | Branch::High).then(|| {
        let a = Float::with_val(prec, phi_right.recip_ref());
        let b = Float::with_val(prec, phi_left.recip_ref());
        (a + b + 2u32).abs()
    });
    let second_iterate_residual = if matches!(branch, Branch::Low | Branch::One | Branch::High) {
        let a = gauss_step(&phi_right, alpha)?;
        let b = gauss_step(&phi_left, alpha)?;
        Some(Float::with_val(prec, &a - &b).abs())
    } else {
        None
    };
    Ok(BoundaryReport {
        d_at_right,
        d_at_left,
        phi_right,
        phi_left,
        sum_residual,
        second_iterate_residual,
    })
}

/// Identifiers of the necessary digit conditions.
pub mod rule {
    /// α = g: (d, e) ≠ (1, +1)
    pub const NO_PLUS_ONE: &str = "no-plus-one";
    /// α = 1: (d_i, e_{i+1}) ≠ (1, −1)
    pub const ONE_THEN_NEGATIVE: &str = "one-then-negative";
    /// α = G: (d, e) ≠ (1, −1)
    pub const NO_MINUS_ONE: &str = "no-minus-one";
    /// g < α < 1: (1, +1) is followed by a positive digit
    pub const LOW_PLUS_ONE_FOLLOW: &str = "low-plus-one-follow";
    /// g < α < 1: (1, −1) is not followed by (1, −1) or (3, −1)
    pub const LOW_MINUS_ONE_FOLLOW: &str = "low-minus-one-follow";
    /// 1 < α < G: (1, −1) is followed by a positive digit
    pub const HIGH_MINUS_ONE_FOLLOW: &str = "high-minus-one-follow";
    /// 1 < α < G: (1, +1) is not followed by (1, −1)
    pub const HIGH_PLUS_ONE_FOLLOW: &str = "high-plus-one-follow";
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub index: usize,
    pub rule: String,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintReport {
    pub violations: Vec<Violation>,
    pub rules_checked: Vec<String>,
}

impl ConstraintReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn validate_constraints(exp: &Expansion) -> ConstraintReport {
    validate_digits(&exp.digits, exp.alpha.branch())
}

/// Checks the listed necessary conditions on consecutive digits for `branch`.
pub fn validate_digits(digits: &[SignedDigit], branch: Branch) -> ConstraintReport {
    let rules: &[&str] = match branch {
        Branch::AtLower => &[rule::NO_PLUS_ONE],
        Branch::One => &[rule::ONE_THEN_NEGATIVE],
        Branch::AtUpper => &[rule::NO_MINUS_ONE],
        Branch::Low => &[rule::LOW_PLUS_ONE_FOLLOW, rule::LOW_MINUS_ONE_FOLLOW],
        Branch::High => &[rule::HIGH_MINUS_ONE_FOLLOW, rule::HIGH_PLUS_ONE_FOLLOW],
        Branch::Exploratory => &[],
    };
    let mut violations = Vec::new();
    let mut flag = |index: usize, rule: &str, detail: String| {
        violations.push(Violation {
            index,
            rule: rule.to_string(),
            detail,
        })
    };
    for (i, &cur) in digits.iter().enumerate() {
        let next = digits.get(i + 1).copied();
        let is = |s: SignedDigit, e: i8, d: u64| s.e == e && s.d == d;
        for &r in rules {
            match r {
                rule::NO_PLUS_ONE if is(cur, 1, 1) => flag(i, r, format!("digit {cur}")),
                rule::NO_MINUS_ONE if is(cur, -1, 1) => flag(i, r, format!("digit {cur}")),
                rule::ONE_THEN_NEGATIVE => {
                    if let Some(n) = next {
                        if cur.d == 1 && n.e < 0 {
                            flag(i, r, format!("{cur} then {n}"));
                        }
                    }
                }
                rule::LOW_PLUS_ONE_FOLLOW | rule::HIGH_MINUS_ONE_FOLLOW => {
                    let e = if r == rule::LOW_PLUS_ONE_FOLLOW { 1 } else { -1 };
                    if let Some(n) = next {
                        if is(cur, e, 1) && n.e < 0 {
                            flag(i, r, format!("{cur} then {n}"));
                        }
                    }
                }
                rule::LOW_MINUS_ONE_FOLLOW => {
                    if let Some(n) = next {
                        if is(cur, -1, 1) && (is(n, -1, 1) || is(n, -1, 3)) {
                            flag(i, r, format!("{cur} then {n}"));
                        }
                    }
                }
                rule::HIGH_PLUS_ONE_FOLLOW => {
                    if let Some(n) = next {
                        if is(cur, 1, 1) && is(n, -1, 1) {
                            flag(i, r, format!("{cur} then {n}"));
                        }
                    }
                }
                _ => {}
            }
        }
    }
    ConstraintReport {
        violations,
        rules_checked: rules.iter().map(|s| s.to_string()).collect(),
    }
}

/// The rank-one cylinder ⟨b⟩_α = {x ∈ I_α : e(x)·d_α(x) = b}.
pub fn rank1_cylinder(b: i64, alpha: &AlphaParam) -> Result<Interval> {
    if b % 2 == 0 {
        return Err(CfError::EvenDigit(b));
    }
    let prec = alpha.prec();
    let a = alpha.value();
    // 1/(m + α)
    let inv = |m: i64| Float::with_val(prec, Float::with_val(prec, a + m).recip_ref());
    let k = (b.unsigned_abs() as i64 - 1) / 2;
    let iv = match (b > 0, k) {
        (true, 0) => Interval::open(inv(1), a.clone()),
        (false, 0) => Interval::closed_open(alpha.left(), -inv(1)),
        (true, k) => Interval::open_closed(inv(2 * k + 1), inv(2 * k - 1)),
        (false, k) => Interval::closed_open(-inv(2 * k - 1), -inv(2 * k + 1)),
    };
    // ⟨1⟩_g and ⟨−1⟩_G are empty; their endpoints agree only up to rounding
    let degenerate = matches!((alpha.branch(), b), (Branch::AtLower, 1) | (Branch::AtUpper, -1));
    if degenerate || iv.lo.partial_cmp(&iv.hi) != Some(Ordering::Less) {
        return Ok(Interval::open(iv.lo.clone(), iv.lo));
    }
    Ok(iv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::str::FromStr;

    const P: u32 = 256;

    fn q(s: &str) -> Rational {
        Rational::from_str(s).unwrap()
    }

    fn f(s: &str) -> Float {
        Float::with_val(P, &q(s))
    }

    fn sd(e: i8, d: u64) -> SignedDigit {
        SignedDigit::new(e, d).unwrap()
    }

    #[test]
    fn digits_at_simple_points() {
        let one = AlphaParam::one(P);
        assert_eq!(digit_of(&f("1/3"), &one).unwrap().digit, sd(1, 3));
        assert_eq!(digit_of(&one.consts().g, &one).unwrap().digit, sd(1, 1));
        let big = AlphaParam::big_g(P);
        let x = Float::with_val(P, -0.1f64);
        assert_eq!(digit_of(&x, &big).unwrap().digit, sd(-1, 9));
        // −0.1 lies in ⟨−9⟩_G
        assert!(rank1_cylinder(-9, &big).unwrap().contains(&x));
    }

    #[test]
    fn digit_errors() {
        let one = AlphaParam::one(P);
        assert_eq!(digit_of(&Float::new(P), &one), Err(CfError::ZeroInput));
        assert!(matches!(digit_of(&f("1"), &one), Err(CfError::OutOfRange { .. })));
        assert!(digit_of(&f("-1"), &one).is_ok());
        assert!(SignedDigit::new(1, 4).is_err());
        assert!(SignedDigit::new(0, 3).is_err());
    }

    #[test]
    fn gauss_step_values() {
        let one = AlphaParam::one(P);
        assert!(gauss_step(&f("1/3"), &one).unwrap().is_zero());
        let g = one.consts().g.clone();
        let fg = gauss_step(&g, &one).unwrap();
        assert!(Float::with_val(P, &fg - &g).abs() < 1e-70);
        let a = AlphaParam::parse("0.8", P, false).unwrap();
        let y = gauss_step(&a.left(), &a).unwrap();
        let bound = -Float::with_val(P, Float::with_val(P, a.value() + 3u32).recip_ref());
        assert!(y > bound && y <= 0);
    }

    #[test]
    fn expansion_examples() {
        let one = AlphaParam::one(P);
        let e = expand_rational(&q("1/3"), &one, 10).unwrap();
        assert_eq!(e.digits, vec![sd(1, 3)]);
        assert!(e.terminated);

        let g = one.consts().g.clone();
        let e = expand(&g, &one, 4).unwrap();
        assert_eq!(e.digits, vec![sd(1, 1); 4]);
        assert!(!e.terminated);

        let a = AlphaParam::parse("1.2", P, false).unwrap();
        let e = expand(&a.left(), &a, 2).unwrap();
        assert_eq!(e.digits[0], sd(-1, 1));
    }

    #[test]
    fn quarter_terminates_at_lower_endpoint() {
        let g = AlphaParam::g(P);
        let e = expand(&f("1/4"), &g, 30).unwrap();
        assert_eq!(e.digits, vec![sd(1, 5), sd(-1, 1)]);
        assert!(e.terminated);
        assert!(validate_constraints(&e).is_clean());
        let r = expand_rational(&q("1/4"), &g, 30).unwrap();
        assert_eq!(r.digits, e.digits);
    }

    #[test]
    fn budget_is_enforced() {
        let one = AlphaParam::one(P);
        assert!(matches!(
            expand(&f("1/7"), &one, 65),
            Err(CfError::PrecisionBudget { .. })
        ));
    }

    #[test]
    fn fibonacci_convergents() {
        let c = convergents(&[sd(1, 1); 4]);
        let qs: Vec<i64> = c.iter().map(|c| c.q.to_i64().unwrap()).collect();
        let ps: Vec<i64> = c.iter().map(|c| c.p.to_i64().unwrap()).collect();
        assert_eq!(qs, vec![0, 1, 1, 2, 3, 5]);
        assert_eq!(ps, vec![1, 0, 1, 1, 2, 3]);
        assert_eq!(evaluate_exact(&[sd(1, 3)]).unwrap(), q("1/3"));
        let v = evaluate(&[sd(1, 1); 20], None, P).unwrap();
        let g = AlphaParam::one(P).consts().g.clone();
        assert!(Float::with_val(P, v - g).abs() < 1e-8);
    }

    #[test]
    fn residual_at_zero_and_fixed_point() {
        let one = AlphaParam::one(P);
        let x = f("2/7");
        let e = expand(&x, &one, 3).unwrap();
        let c = e.convergents();
        assert_eq!(residual(&x, &c, 0).unwrap(), x);
        let g = one.consts().g.clone();
        let c = convergents(&[sd(1, 1); 3]);
        let r = residual(&g, &c, 3).unwrap();
        assert!(Float::with_val(P, r - &g).abs() < 1e-70);
    }

    #[test]
    fn boundary_values() {
        let a = AlphaParam::parse("0.8", P, false).unwrap();
        let r = boundary_identities(&a).unwrap();
        let tol = Float::with_val(P, Float::i_exp(1, -128));
        assert!(r.sum_residual.unwrap() < tol);
        assert!(r.second_iterate_residual.unwrap() < tol);

        let one = AlphaParam::one(P);
        let r = boundary_identities(&one).unwrap();
        assert!(r.sum_residual.is_none());
        assert!(r.second_iterate_residual.unwrap().is_zero());

        let a = AlphaParam::parse("1.2", P, false).unwrap();
        let r = boundary_identities(&a).unwrap();
        assert_eq!(r.d_at_right.digit.d(), 1);
        assert_eq!(r.d_at_left.digit, sd(-1, 1));
    }

    #[test]
    fn constraint_rules() {
        let one = AlphaParam::one(P);
        let e = expand(&one.consts().g, &one, 20).unwrap();
        assert!(validate_constraints(&e).is_clean());
        let rep = validate_digits(&[sd(1, 1), sd(-1, 1)], Branch::One);
        assert_eq!(rep.violations.len(), 1);
        assert_eq!(rep.violations[0].rule, rule::ONE_THEN_NEGATIVE);
        let rep = validate_digits(&[sd(-1, 1), sd(-1, 3)], Branch::Low);
        assert_eq!(rep.violations[0].rule, rule::LOW_MINUS_ONE_FOLLOW);
        let rep = validate_digits(&[sd(1, 1), sd(-1, 1)], Branch::High);
        assert_eq!(rep.violations[0].rule, rule::HIGH_PLUS_ONE_FOLLOW);
    }

    #[test]
    fn rank_one_cylinders() {
        let one = AlphaParam::one(P);
        let c3 = rank1_cylinder(3, &one).unwrap();
        assert_eq!((c3.lo.clone(), c3.hi.clone()), (f("1/4"), f("1/2")));
        assert!(!c3.lo_closed && c3.hi_closed);
        let m1 = rank1_cylinder(-1, &one).unwrap();
        assert_eq!((m1.lo.clone(), m1.hi.clone()), (f("-1"), f("-1/2")));
        assert!(m1.lo_closed && !m1.hi_closed);
        assert!(rank1_cylinder(1, &AlphaParam::g(P)).unwrap().is_empty());
        assert!(rank1_cylinder(-1, &AlphaParam::big_g(P)).unwrap().is_empty());
        assert_eq!(rank1_cylinder(2, &one), Err(CfError::EvenDigit(2)));
    }

    #[test]
    fn serialization_shape() {
        let one = AlphaParam::one(P);
        let e = expand_rational(&q("1/3"), &one, 10).unwrap();
        let v = serde_json::to_value(e.record()).unwrap();
        assert_eq!(v["digits"], serde_json::json!([[1, 3]]));
        assert_eq!(v["terminated"], true);
        assert_eq!(v["branch"], "one");
    }
}
