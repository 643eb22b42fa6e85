//! Cylinder sets Δ_n(ω) = ⟨ω_1, …, ω_n⟩_α and their images J_n(ω) = φ_α^n(Δ_n(ω)).
//!
//! J_n is built by restricting to one rank-one cylinder at a time and
//! mapping forward; Δ_n is the image of J_n under
//! u ↦ (p_n + u p_{n−1})/(q_n + u q_{n−1}). Float endpoints carry a guard
//! band of 2^(−P/2): a restriction narrower than that is reported as
//! indeterminate rather than guessed. For rational α the same construction
//! also runs in exact arithmetic.

use std::fmt;

use rayon::prelude::*;
use rug::ops::Pow;
use rug::{Float, Rational};
use serde::{Deserialize, Serialize};

use crate::alpha::AlphaParam;
use crate::digits::{self, exact_alpha, rank1_cylinder, ConvergentPair, SignedDigit};
use crate::error::{CfError, Result};
use crate::interval::{decimal, Interval};

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(into = "Vec<i64>", try_from = "Vec<i64>")]
pub struct CylinderWord(pub Vec<SignedDigit>);

impl CylinderWord {
    pub fn from_omegas(omegas: &[i64]) -> Result<Self> {
        omegas
            .iter()
            .map(|&w| SignedDigit::from_omega(w))
            .collect::<Result<Vec<_>>>()
            .map(CylinderWord)
    }

    pub fn omegas(&self) -> Vec<i64> {
        self.0.iter().map(|d| d.omega()).collect()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn extended(&self, b: SignedDigit) -> Self {
        let mut w = self.0.clone();
        w.push(b);
        CylinderWord(w)
    }
}

impl From<CylinderWord> for Vec<i64> {
    fn from(w: CylinderWord) -> Self {
        w.omegas()
    }
}

impl TryFrom<Vec<i64>> for CylinderWord {
    type Error = CfError;
    fn try_from(v: Vec<i64>) -> Result<Self> {
        CylinderWord::from_omegas(&v)
    }
}

impl fmt::Display for CylinderWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "⟨")?;
        for (i, w) in self.omegas().iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{w}")?;
        }
        write!(f, "⟩")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Emptiness {
    Nonempty,
    Empty,
    /// Some restriction was nonempty but narrower than the guard band.
    Indeterminate,
}

#[derive(Debug, Clone)]
pub struct CylinderInterval {
    pub word: CylinderWord,
    pub delta: Interval,
    pub image: Interval,
    pub status: Emptiness,
    pub convergents: ConvergentPair,
}

impl CylinderInterval {
    pub fn is_nonempty(&self) -> bool {
        self.status == Emptiness::Nonempty
    }

    pub fn record(&self, alpha: &AlphaParam) -> CylinderRecord {
        CylinderRecord {
            word: self.word.omegas(),
            delta: [decimal(&self.delta.lo), decimal(&self.delta.hi)],
            image: [decimal(&self.image.lo), decimal(&self.image.hi)],
            p: self.convergents.p.to_string(),
            q: self.convergents.q.to_string(),
            full: self.is_nonempty() && image_is_full(&self.image, alpha),
        }
    }
}

/// One line of a cylinder dump.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CylinderRecord {
    pub word: Vec<i64>,
    pub delta: [String; 2],
    pub image: [String; 2],
    pub p: String,
    pub q: String,
    pub full: bool,
}

fn guard(prec: u32) -> Float {
    Float::with_val(prec, Float::i_exp(1, -((prec / 2) as i32)))
}

/// φ on ⟨b⟩: decreasing for b > 0, increasing for b < 0.
fn map_forward(k: &Interval, b: SignedDigit, prec: u32) -> Interval {
    let phi = |x: &Float| digits::apply_digit(x, b, prec);
    k.mapped(phi(&k.lo), phi(&k.hi), !b.positive())
}

/// Restricts J to ⟨b⟩ and maps it forward. Returns the new image and
/// whether the restriction is inside the guard band.
fn restrict(j: &Interval, b: SignedDigit, alpha: &AlphaParam) -> Result<(Interval, Emptiness)> {
    let prec = alpha.prec();
    let cyl = rank1_cylinder(b.omega(), alpha)?;
    if cyl.is_empty() {
        return Ok((cyl, Emptiness::Empty));
    }
    let k = j.intersect(&cyl);
    let width = Float::with_val(prec, &k.hi - &k.lo);
    let g = guard(prec);
    if k.is_empty() {
        let status = if width.abs() <= g { Emptiness::Indeterminate } else { Emptiness::Empty };
        return Ok((k, status));
    }
    let status = if width <= g { Emptiness::Indeterminate } else { Emptiness::Nonempty };
    Ok((map_forward(&k, b, prec), status))
}

/// u ↦ (p_n + u p_{n−1})/(q_n + u q_{n−1}) applied to an interval.
fn mobius_interval(state: &ConvergentPair, j: &Interval, prec: u32) -> Result<Interval> {
    let lo = state.mobius(&j.lo, prec)?;
    let hi = state.mobius(&j.hi, prec)?;
    // derivative sign is that of p_{n−1} q_n − p_n q_{n−1} = ±1
    let det = Rational::from(&state.p_prev * &state.q) - Rational::from(&state.p * &state.q_prev);
    Ok(j.mapped(lo, hi, det > 0))
}

fn whole(alpha: &AlphaParam) -> Interval {
    Interval::closed_open(alpha.left(), alpha.value().clone())
}

/// J_n(ω) = I_α up to endpoint conventions and the guard band.
pub fn image_is_full(j: &Interval, alpha: &AlphaParam) -> bool {
    let prec = alpha.prec();
    let g = guard(prec);
    Float::with_val(prec, &j.lo - alpha.left()).abs() <= g && Float::with_val(prec, &j.hi - alpha.value()).abs() <= g
}

pub fn cylinder(word: &CylinderWord, alpha: &AlphaParam) -> Result<CylinderInterval> {
    let prec = alpha.prec();
    let mut j = whole(alpha);
    let mut state = ConvergentPair::default();
    let mut status = Emptiness::Nonempty;
    for &b in &word.0 {
        let (next, s) = restrict(&j, b, alpha)?;
        state.push(b);
        match s {
            Emptiness::Empty => {
                status = Emptiness::Empty;
                break;
            }
            Emptiness::Indeterminate => status = Emptiness::Indeterminate,
            Emptiness::Nonempty => {}
        }
        j = next;
    }
    if status == Emptiness::Empty {
        let z = Float::new(prec);
        let empty = Interval::open(z.clone(), z);
        return Ok(CylinderInterval {
            word: word.clone(),
            delta: empty.clone(),
            image: empty,
            status,
            convergents: ConvergentPair::from_digits(&word.0),
        });
    }
    if status == Emptiness::Indeterminate {
        if let Some(ex) = cylinder_exact(word, alpha) {
            status = if ex.is_some() { Emptiness::Nonempty } else { Emptiness::Empty };
        }
    }
    let delta = mobius_interval(&state, &j, prec)?;
    Ok(CylinderInterval {
        word: word.clone(),
        delta,
        image: j,
        status,
        convergents: state,
    })
}

pub fn is_full(word: &CylinderWord, alpha: &AlphaParam) -> Result<bool> {
    let c = cylinder(word, alpha)?;
    Ok(c.is_nonempty() && image_is_full(&c.image, alpha))
}

/// Interval with rational endpoints.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExactInterval {
    pub lo: Rational,
    pub hi: Rational,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl ExactInterval {
    fn is_empty(&self) -> bool {
        self.lo > self.hi || (self.lo == self.hi && !(self.lo_closed && self.hi_closed))
    }

    fn intersect(&self, o: &ExactInterval) -> ExactInterval {
        let (lo, lo_closed) = if self.lo > o.lo {
            (self.lo.clone(), self.lo_closed)
        } else if self.lo < o.lo {
            (o.lo.clone(), o.lo_closed)
        } else {
            (self.lo.clone(), self.lo_closed && o.lo_closed)
        };
        let (hi, hi_closed) = if self.hi < o.hi {
            (self.hi.clone(), self.hi_closed)
        } else if self.hi > o.hi {
            (o.hi.clone(), o.hi_closed)
        } else {
            (self.hi.clone(), self.hi_closed && o.hi_closed)
        };
        ExactInterval {
            lo,
            hi,
            lo_closed,
            hi_closed,
        }
    }

    fn mapped(&self, at_lo: Rational, at_hi: Rational, increasing: bool) -> ExactInterval {
        if increasing {
            ExactInterval {
                lo: at_lo,
                hi: at_hi,
                lo_closed: self.lo_closed,
                hi_closed: self.hi_closed,
            }
        } else {
            ExactInterval {
                lo: at_hi,
                hi: at_lo,
                lo_closed: self.hi_closed,
                hi_closed: self.lo_closed,
            }
        }
    }

    pub fn to_float(&self, prec: u32) -> Interval {
        Interval::new(
            Float::with_val(prec, &self.lo),
            Float::with_val(prec, &self.hi),
            self.lo_closed,
            self.hi_closed,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExactCylinder {
    pub delta: ExactInterval,
    pub image: ExactInterval,
}

fn rank1_exact(b: SignedDigit, a: &Rational) -> ExactInterval {
    let inv = |m: u64| Rational::from(a + m).recip();
    let k = (b.d() - 1) / 2;
    match (b.positive(), k) {
        (true, 0) => ExactInterval {
            lo: inv(1),
            hi: a.clone(),
            lo_closed: false,
            hi_closed: false,
        },
        (false, 0) => ExactInterval {
            lo: Rational::from(a - 2u32),
            hi: -inv(1),
            lo_closed: true,
            hi_closed: false,
        },
        (true, k) => ExactInterval {
            lo: inv(2 * k + 1),
            hi: inv(2 * k - 1),
            lo_closed: false,
            hi_closed: true,
        },
        (false, k) => ExactInterval {
            lo: -inv(2 * k - 1),
            hi: -inv(2 * k + 1),
            lo_closed: true,
            hi_closed: false,
        },
    }
}

/// The exact cylinder for rational α: `None` when α is irrational,
/// `Some(None)` when the word is inadmissible.
pub fn cylinder_exact(word: &CylinderWord, alpha: &AlphaParam) -> Option<Option<ExactCylinder>> {
    let a = exact_alpha(alpha)?;
    let mut j = ExactInterval {
        lo: Rational::from(&a - 2u32),
        hi: a.clone(),
        lo_closed: true,
        hi_closed: false,
    };
    let mut state = ConvergentPair::default();
    for &b in &word.0 {
        let k = j.intersect(&rank1_exact(b, &a));
        if k.is_empty() {
            return Some(None);
        }
        let phi = |x: &Rational| Rational::from(x.abs_ref()).recip() - b.d();
        j = k.mapped(phi(&k.lo), phi(&k.hi), !b.positive());
        state.push(b);
    }
    let m = |u: &Rational| {
        let num = Rational::from(u * &state.p_prev) + &state.p;
        let den = Rational::from(u * &state.q_prev) + &state.q;
        num / den
    };
    let det = Rational::from(&state.p_prev * &state.q) - Rational::from(&state.p * &state.q_prev);
    let delta = j.mapped(m(&j.lo), m(&j.hi), det > 0);
    Some(Some(ExactCylinder { delta, image: j }))
}

/// Fitted constants of the cylinder estimates, frozen from the calibration
/// corpus of `examples/calibrate.rs`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct Envelope {
    /// Lower bound of λ(Δ_n) q_n² / λ(J_n).
    pub c3: f64,
    /// Upper bound of the same ratio.
    pub c4: f64,
    /// Upper bound of λ(Δ_n) Cⁿ.
    pub c5: f64,
    /// Lower bound of λ(φ⁻ⁿA ∩ Δ_n) / (λ(A) λ(Δ_n)) on full words.
    pub c8: f64,
    /// Upper bound of the same ratio.
    pub c9: f64,
}

const ENVELOPE_JSON: &str = include_str!("../fixtures/envelope.json");

#[derive(Deserialize)]
struct EnvelopeFixture {
    envelope: Envelope,
}

impl Envelope {
    pub fn fixture() -> Envelope {
        serde_json::from_str::<EnvelopeFixture>(ENVELOPE_JSON)
            .expect("envelope fixture is valid JSON")
            .envelope
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ScalingReport {
    pub word: Vec<i64>,
    pub n: usize,
    /// λ(Δ_n) q_n² / λ(J_n)
    pub ratio: f64,
    /// λ(Δ_n) Cⁿ
    pub decay: f64,
    pub ratio_in_envelope: bool,
    pub decay_in_envelope: bool,
}

impl ScalingReport {
    pub fn pass(&self) -> bool {
        self.ratio_in_envelope && self.decay_in_envelope
    }
}

pub fn scaling_values(c: &CylinderInterval, alpha: &AlphaParam) -> (f64, f64) {
    let prec = alpha.prec();
    let q = Float::with_val(prec, &c.convergents.q);
    let ld = c.delta.length();
    let ratio = Float::with_val(prec, &ld * &q) * &q / c.image.length();
    let n = c.word.len() as u32;
    let cn = Float::with_val(prec, (&alpha.consts().decay_rate).pow(n));
    let decay = ld * cn;
    (ratio.to_f64(), decay.to_f64())
}

pub fn measure_scaling_check(word: &CylinderWord, alpha: &AlphaParam, env: &Envelope) -> Result<ScalingReport> {
    let c = cylinder(word, alpha)?;
    if !c.is_nonempty() {
        return Err(CfError::verification("measure-scaling", format!("{word} is empty at {}", alpha.label())));
    }
    let (ratio, decay) = scaling_values(&c, alpha);
    Ok(ScalingReport {
        word: word.omegas(),
        n: word.len(),
        ratio,
        decay,
        ratio_in_envelope: ratio >= env.c3 && ratio <= env.c4,
        decay_in_envelope: decay <= env.c5,
    })
}

/// λ(φ⁻ⁿA ∩ Δ_n) / (λ(A) λ(Δ_n)) for a full word. For A = [a, b] ⊆ I_α this
/// equals (q_n + (α−2) q_{n−1})(q_n + α q_{n−1}) / (2 (q_n + a q_{n−1})(q_n + b q_{n−1})).
pub fn quasi_independence_value(word: &CylinderWord, a: &Interval, alpha: &AlphaParam) -> Result<f64> {
    let c = cylinder(word, alpha)?;
    if !(c.is_nonempty() && image_is_full(&c.image, alpha)) {
        return Err(CfError::verification(
            "quasi-independence",
            format!("{word} is not full at {}", alpha.label()),
        ));
    }
    let prec = alpha.prec();
    let a = a.intersect(&whole(alpha));
    if a.is_empty() {
        return Err(CfError::verification("quasi-independence", "A does not meet I_alpha"));
    }
    let s = &c.convergents;
    let lin = |u: &Float| Float::with_val(prec, u * &s.q_prev) + &s.q;
    let num = lin(&alpha.left()) * lin(alpha.value());
    let den = lin(&a.lo) * lin(&a.hi) * 2u32;
    Ok(Float::with_val(prec, num / den).abs().to_f64())
}

pub fn quasi_independence_check(word: &CylinderWord, a: &Interval, alpha: &AlphaParam, env: &Envelope) -> Result<f64> {
    let r = quasi_independence_value(word, a, alpha)?;
    if r < env.c8 || r > env.c9 {
        return Err(CfError::verification(
            "quasi-independence",
            format!("ratio {r} outside [{}, {}] for {word}, A = {a}", env.c8, env.c9),
        ));
    }
    Ok(r)
}

/// All k ≤ n_max at which the rank-k cylinder containing x0 is full.
pub fn full_cylinder_hitting(x0: &Float, alpha: &AlphaParam, n_max: usize) -> Result<Vec<usize>> {
    if n_max == 0 {
        if !alpha.in_interval(x0) {
            return Err(CfError::out_of_range("x", x0.to_string_radix(10, Some(20)), "I_alpha"));
        }
        return Ok(Vec::new());
    }
    let exp = digits::expand(x0, alpha, n_max)?;
    let mut j = whole(alpha);
    let mut hits = Vec::new();
    for (k, &b) in exp.digits.iter().enumerate() {
        let (next, status) = restrict(&j, b, alpha)?;
        if status == Emptiness::Empty {
            return Err(CfError::verification(
                "full-cylinders",
                format!("prefix of length {} of an actual expansion is empty", k + 1),
            ));
        }
        j = next;
        if image_is_full(&j, alpha) {
            hits.push(k + 1);
        }
    }
    Ok(hits)
}

/// Rank-n cylinders with all |ω_i| ≤ `d_max` that are nonempty or
/// indeterminate, plus the total
/// length of the parts of lower-rank cylinders whose next digit exceeds
/// `d_max`.
#[derive(Debug, Clone)]
pub struct RankEnumeration {
    pub rank: usize,
    pub d_max: u64,
    pub cylinders: Vec<CylinderInterval>,
    pub indeterminate: usize,
    pub tail_length: Float,
}

impl RankEnumeration {
    /// Σ λ(Δ_n) + tail, which is λ(I_α) = 2 when the cylinders tile.
    pub fn total_length(&self) -> Float {
        let mut acc = self.tail_length.clone();
        for c in self.cylinders.iter().filter(|c| c.is_nonempty()) {
            acc += c.delta.length();
        }
        acc
    }
}

/// Digits in enumeration order: increasing |ω|, + before −.
fn alphabet(d_max: u64) -> Vec<SignedDigit> {
    (1..=d_max)
        .step_by(2)
        .flat_map(|d| [SignedDigit::new(1, d), SignedDigit::new(-1, d)])
        .map(|r| r.expect("odd digit"))
        .collect()
}

struct Node {
    word: CylinderWord,
    image: Interval,
    state: ConvergentPair,
    status: Emptiness,
}

/// λ of the part of Δ(node) whose next digit exceeds d_max: J ∩ [−1/(D+α), 1/(D+α)].
fn tail_blob(node: &Node, d_max: u64, alpha: &AlphaParam) -> Result<Float> {
    let prec = alpha.prec();
    let r = Float::with_val(prec, Float::with_val(prec, alpha.value() + d_max).recip_ref());
    let zone = Interval::closed(Float::with_val(prec, -&r), r);
    let k = node.image.intersect(&zone);
    if k.is_empty() {
        return Ok(Float::new(prec));
    }
    Ok(mobius_interval(&node.state, &k, prec)?.length())
}

pub fn enumerate_rank(alpha: &AlphaParam, n: usize, d_max: u64, budget: usize) -> Result<RankEnumeration> {
    let prec = alpha.prec();
    let letters = alphabet(d_max);
    let mut level = vec![Node {
        word: CylinderWord::default(),
        image: whole(alpha),
        state: ConvergentPair::default(),
        status: Emptiness::Nonempty,
    }];
    let mut tail = Float::new(prec);
    let mut indeterminate = 0;
    for depth in 1..=n {
        let children = level
            .par_iter()
            .map(|node| {
                let mut out = Vec::new();
                let mut ind = 0;
                for &b in &letters {
                    let (image, status) = restrict(&node.image, b, alpha)?;
                    let status = match (status, node.status) {
                        (Emptiness::Empty, _) => continue,
                        (Emptiness::Indeterminate, _) => {
                            ind += 1;
                            Emptiness::Indeterminate
                        }
                        (Emptiness::Nonempty, inherited) => inherited,
                    };
                    let mut state = node.state.clone();
                    state.push(b);
                    out.push(Node {
                        word: node.word.extended(b),
                        image,
                        state,
                        status,
                    });
                }
                Ok((out, tail_blob(node, d_max, alpha)?, ind))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut next = Vec::new();
        for (nodes, blob, ind) in children {
            next.extend(nodes);
            tail += blob;
            indeterminate += ind;
        }
        if next.len() > budget {
            return Err(CfError::BranchBudgetExceeded { budget, depth });
        }
        level = next;
    }
    let cylinders = level
        .into_iter()
        .map(|node| {
            let delta = mobius_interval(&node.state, &node.image, prec)?;
            Ok(CylinderInterval {
                word: node.word,
                delta,
                image: node.image,
                status: node.status,
                convergents: node.state,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RankEnumeration {
        rank: n,
        d_max,
        cylinders,
        indeterminate,
        tail_length: tail,
    })
}

/// |S_k| for k = 1..=n, where S_k holds the nonempty rank-k words none of
/// whose prefixes has a full image.
///
/// A rank-one cylinder inside a non-full J maps onto its full rank-one
/// image, so only digits with |ω| ≤ 7 (where rank-one images can be
/// partial) and digits at the ends of J can extend a word of S.
pub fn count_non_full(alpha: &AlphaParam, n: usize) -> Result<Vec<usize>> {
    let mut level = vec![whole(alpha)];
    let mut counts = Vec::with_capacity(n);
    for _ in 0..n {
        let mut next = Vec::new();
        for j in &level {
            for b in candidate_digits(j, alpha)? {
                let (image, status) = restrict(j, b, alpha)?;
                if status == Emptiness::Empty {
                    continue;
                }
                if !image_is_full(&image, alpha) {
                    next.push(image);
                }
            }
        }
        counts.push(next.len());
        level = next;
    }
    Ok(counts)
}

fn candidate_digits(j: &Interval, alpha: &AlphaParam) -> Result<Vec<SignedDigit>> {
    let prec = alpha.prec();
    let mut ds: Vec<SignedDigit> = alphabet(7);
    let nudge = guard(prec);
    for end in [Float::with_val(prec, &j.lo + &nudge), Float::with_val(prec, &j.hi - &nudge)] {
        if end.is_zero() || !alpha.in_interval(&end) {
            continue;
        }
        // an end within 2^-64 of 0 would need a digit beyond u64; the
        // cylinders there are not representable and are skipped
        let r = match digits::digit_of(&end, alpha) {
            Ok(r) => r.digit,
            Err(CfError::DigitOverflow) => continue,
            Err(e) => return Err(e),
        };
        for delta in [0i64, 2, -2] {
            let d = r.d() as i64 + delta;
            if d >= 1 {
                ds.push(SignedDigit::new(r.e(), d as u64)?);
            }
        }
    }
    ds.sort_by_key(|d| (d.d(), -d.e()));
    ds.dedup();
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{stream_rng, uniform};

    const P: u32 = 256;

    fn f(v: f64) -> Float {
        Float::with_val(P, v)
    }

    fn w(o: &[i64]) -> CylinderWord {
        CylinderWord::from_omegas(o).unwrap()
    }

    fn close(a: &Float, b: f64) -> bool {
        (a.to_f64() - b).abs() < 1e-15
    }

    #[test]
    fn rank_one_examples() {
        let one = AlphaParam::one(P);
        let c = cylinder(&w(&[3]), &one).unwrap();
        assert!(close(&c.delta.lo, 0.25) && close(&c.delta.hi, 0.5));
        assert!(!c.delta.lo_closed && c.delta.hi_closed);
        assert!(close(&c.image.lo, -1.0) && close(&c.image.hi, 1.0));
        assert!(is_full(&w(&[3]), &one).unwrap());
        let c = cylinder(&w(&[1]), &one).unwrap();
        assert!(close(&c.delta.lo, 0.5) && close(&c.delta.hi, 1.0));
        assert!(close(&c.image.lo, 0.0) && close(&c.image.hi, 1.0));
        assert!(!is_full(&w(&[1]), &one).unwrap());
        assert_eq!(cylinder(&w(&[1, -1]), &one).unwrap().status, Emptiness::Empty);
        assert_eq!(cylinder(&w(&[1]), &AlphaParam::g(P)).unwrap().status, Emptiness::Empty);
        assert!(CylinderWord::from_omegas(&[2]).is_err());
    }

    #[test]
    fn exact_path_agrees() {
        let a = AlphaParam::parse("0.8", P, false).unwrap();
        for word in [vec![3], vec![-1, 3, 5], vec![1, 1, -3], vec![-3, -1]] {
            let word = w(&word);
            let c = cylinder(&word, &a).unwrap();
            let ex = cylinder_exact(&word, &a).unwrap();
            assert_eq!(ex.is_some(), c.is_nonempty(), "{word}");
            if let Some(ex) = ex {
                let fl = ex.delta.to_float(P);
                assert!(Float::with_val(P, &fl.lo - &c.delta.lo).abs() < 1e-60);
                assert!(Float::with_val(P, &fl.hi - &c.delta.hi).abs() < 1e-60);
                // endpoints of Δ map to endpoints of J exactly
                let s = ConvergentPair::from_digits(&word.0);
                let r_lo = s.residual_exact(&ex.delta.lo).unwrap();
                let r_hi = s.residual_exact(&ex.delta.hi).unwrap();
                let mut got = [r_lo, r_hi];
                got.sort();
                assert_eq!(got, [ex.image.lo.clone(), ex.image.hi.clone()]);
            }
        }
    }

    #[test]
    fn rank_two_full_words_span_the_interval() {
        let one = AlphaParam::one(P);
        let en = enumerate_rank(&one, 2, 9, 10_000).unwrap();
        let mut rng = stream_rng(4, 0);
        let mut full = 0;
        for c in en.cylinders.iter().filter(|c| image_is_full(&c.image, &one)) {
            full += 1;
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            // one jittered point in each of 100 equal strata of Δ
            let width = c.delta.length();
            for j in 0..100 {
                let step = Float::with_val(P, &width / 100u32);
                let s_lo = Float::with_val(P, &step * j) + &c.delta.lo;
                let s_hi = Float::with_val(P, &s_lo + &step);
                let x = uniform(&mut rng, &s_lo, &s_hi, P);
                let e = digits::expand(&x, &one, 2).unwrap();
                assert_eq!(e.digits, c.word.0);
                let u = e.tail.to_f64();
                lo = lo.min(u);
                hi = hi.max(u);
            }
            assert!(lo < -0.9 && hi > 0.9, "{}: [{lo}, {hi}]", c.word);
        }
        assert!(full > 20);
    }

    #[test]
    fn rank_two_tiles() {
        for a in ["g", "0.8", "1", "1.3", "G"] {
            let a = AlphaParam::parse(a, P, false).unwrap();
            let en = enumerate_rank(&a, 2, 41, 100_000).unwrap();
            let total = en.total_length().to_f64();
            assert!((total - 2.0).abs() < 1e-12, "{a}: {total}");
        }
    }

    #[test]
    fn quasi_independence_of_whole_interval_is_half() {
        let one = AlphaParam::one(P);
        let r = quasi_independence_value(&w(&[3]), &whole(&one), &one).unwrap();
        assert!((r - 0.5).abs() < 1e-15);
        // ⟨3⟩ at α = 1, A = (0, 1/2): (3 − 1)(3 + 1)/(2·3·3.5)
        let r = quasi_independence_value(&w(&[3]), &Interval::open(f(0.0), f(0.5)), &one).unwrap();
        assert!((r - 8.0 / 21.0).abs() < 1e-15);
        assert!(quasi_independence_value(&w(&[1]), &whole(&one), &one).is_err());
    }

    #[test]
    fn empty_word_scaling() {
        let one = AlphaParam::one(P);
        let c = cylinder(&CylinderWord::default(), &one).unwrap();
        let (ratio, decay) = scaling_values(&c, &one);
        assert!((ratio - 1.0).abs() < 1e-15 && (decay - 2.0).abs() < 1e-15);
    }

    #[test]
    fn hitting_times() {
        let one = AlphaParam::one(P);
        assert!(full_cylinder_hitting(&f(0.3), &one, 0).unwrap().is_empty());
        let hits = full_cylinder_hitting(&f(0.3), &one, 20).unwrap();
        assert!(!hits.is_empty());
        // 0.3 starts with digit 3, whose cylinder is full
        assert_eq!(hits[0], 1);
    }

    #[test]
    fn non_full_counts_are_bounded() {
        for a in AlphaParam::grid_with_specials(5, P) {
            let counts = count_non_full(&a, 8).unwrap();
            for (k, c) in counts.iter().enumerate() {
                assert!(*c <= 1 << (k + 1), "{a}: {counts:?}");
            }
        }
    }
}
