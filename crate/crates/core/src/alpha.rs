//! The parameter α, its branch classification and the golden-ratio constants
//! that every other module works with.
//!
//! Constants are derived from `√5` at the working precision; no decimal
//! literal of g or G appears anywhere in the computation.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rug::float::Constant;
use rug::ops::Pow;
use rug::{Float, Rational};
use serde::{Deserialize, Serialize};

use crate::error::{CfError, Result};

pub const DEFAULT_PRECISION: u32 = 256;

/// Golden-ratio constants and the derived growth/entropy constants at one
/// working precision.
#[derive(Debug, Clone)]
pub struct Constants {
    pub prec: u32,
    pub sqrt5: Float,
    /// g = (√5 − 1)/2
    pub g: Float,
    /// G = (√5 + 1)/2
    pub big_g: Float,
    /// log G
    pub log_big_g: Float,
    pub pi: Float,
    /// B = (5G − 2)^{1/5}, the guaranteed growth rate of denominators.
    pub growth_rate: Float,
    /// q = (g/B)^4, the prefactor of the denominator lower bound.
    pub growth_prefactor: Float,
    /// C = (5G − 2)^{2/5}, the decay rate of cylinder lengths.
    pub decay_rate: Float,
}

impl Constants {
    pub fn new(prec: u32) -> Self {
        let sqrt5 = Float::with_val(prec, 5).sqrt();
        let g = Float::with_val(prec, &sqrt5 - 1u32) / 2u32;
        let big_g = Float::with_val(prec, &sqrt5 + 1u32) / 2u32;
        let log_big_g = Float::with_val(prec, big_g.ln_ref());
        let pi = Float::with_val(prec, Constant::Pi);
        let five_g_minus_two = Float::with_val(prec, &big_g * 5u32) - 2u32;
        let growth_rate = Float::with_val(prec, five_g_minus_two.clone().pow(Float::with_val(prec, 0.2)));
        let growth_prefactor = Float::with_val(prec, &g / &growth_rate).pow(4u32);
        let decay_rate = Float::with_val(prec, &growth_rate * &growth_rate);
        Constants {
            prec,
            sqrt5,
            g,
            big_g,
            log_big_g,
            pi,
            growth_rate,
            growth_prefactor,
            decay_rate,
        }
    }

    /// 2 − G
    pub fn two_minus_g(&self) -> Float {
        Float::with_val(self.prec, 2u32 - &self.big_g)
    }

    /// 3 log G, the total mass of the natural-extension measure.
    pub fn three_log_g(&self) -> Float {
        Float::with_val(self.prec, &self.log_big_g * 3u32)
    }

    /// π²/(18 log G): the Lévy constant and −J(α).
    pub fn levy_constant(&self) -> Float {
        let pi2 = Float::with_val(self.prec, self.pi.square_ref());
        pi2 / Float::with_val(self.prec, &self.log_big_g * 18u32)
    }

    /// π²/(9 log G): the entropy of the Gauss map.
    pub fn entropy(&self) -> Float {
        Float::with_val(self.prec, self.levy_constant() * 2u32)
    }

    /// 5G − 2
    pub fn five_g_minus_two(&self) -> Float {
        Float::with_val(self.prec, &self.big_g * 5u32) - 2u32
    }
}

/// Which regime of the parameter range α falls into. The natural-extension
/// domain, the density and the digit constraints all change shape across
/// these regimes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// α = g
    AtLower,
    /// g < α < 1
    Low,
    /// α = 1
    One,
    /// 1 < α < G
    High,
    /// α = G
    AtUpper,
    /// α outside [g, G]; only orbit clouds are meaningful.
    Exploratory,
}

impl Branch {
    pub fn is_exploratory(self) -> bool {
        self == Branch::Exploratory
    }

    /// α ≤ 1 (density and product bounds use the lower formulas).
    pub fn at_most_one(self) -> bool {
        matches!(self, Branch::AtLower | Branch::Low | Branch::One)
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Branch::AtLower => "at_lower",
            Branch::Low => "low",
            Branch::One => "one",
            Branch::High => "high",
            Branch::AtUpper => "at_upper",
            Branch::Exploratory => "exploratory",
        };
        f.write_str(s)
    }
}

/// How α was specified, so it can be re-resolved at another precision.
#[derive(Debug, Clone, PartialEq)]
pub enum AlphaSource {
    /// `multiplier · g`
    TimesSmallG(Rational),
    /// `multiplier · G`
    TimesBigG(Rational),
    Rational(Rational),
    /// A decimal literal that is not a short rational, kept as text.
    Decimal(String),
    /// A binary float given directly.
    Float(Float),
}

/// The parameter α at a fixed working precision.
#[derive(Debug, Clone)]
pub struct AlphaParam {
    value: Float,
    branch: Branch,
    source: AlphaSource,
    consts: Arc<Constants>,
}

impl AlphaParam {
    /// α from a float; rejects values outside [g, G].
    pub fn new(value: Float) -> Result<Self> {
        Self::from_source(AlphaSource::Float(value.clone()), value.prec(), false)
    }

    /// α from a float; values outside [g, G] are allowed and tagged exploratory.
    pub fn exploratory(value: Float) -> Result<Self> {
        Self::from_source(AlphaSource::Float(value.clone()), value.prec(), true)
    }

    pub fn g(prec: u32) -> Self {
        Self::from_source(AlphaSource::TimesSmallG(Rational::from(1)), prec, false).expect("g is in range")
    }

    pub fn big_g(prec: u32) -> Self {
        Self::from_source(AlphaSource::TimesBigG(Rational::from(1)), prec, false).expect("G is in range")
    }

    pub fn one(prec: u32) -> Self {
        Self::from_source(AlphaSource::Rational(Rational::from(1)), prec, false).expect("1 is in range")
    }

    /// Convenience constructor from an `f64` (rounded to `prec` bits).
    pub fn from_f64(value: f64, prec: u32) -> Result<Self> {
        Self::new(Float::with_val(prec, value))
    }

    /// Parses `g`, `G`, `1`, `0.9g`, `3/4`, `0.8`, `1.2G` style tokens.
    pub fn parse(token: &str, prec: u32, allow_exploratory: bool) -> Result<Self> {
        let source = parse_source(token)?;
        Self::from_source(source, prec, allow_exploratory)
    }

    pub fn from_source(source: AlphaSource, prec: u32, allow_exploratory: bool) -> Result<Self> {
        let consts = Arc::new(Constants::new(prec));
        let value = resolve(&source, &consts)?;
        if !value.is_finite() || value <= 0 {
            return Err(CfError::out_of_range("alpha", value.to_f64(), "(0, ∞)"));
        }
        let branch = classify(&value, &consts);
        if branch.is_exploratory() && !allow_exploratory {
            return Err(CfError::out_of_range("alpha", value.to_f64(), "[g, G]"));
        }
        Ok(AlphaParam {
            value,
            branch,
            source,
            consts,
        })
    }

    /// The same α re-resolved at another precision.
    pub fn with_precision(&self, prec: u32) -> Self {
        Self::from_source(self.source.clone(), prec, true).expect("re-resolving a valid alpha")
    }

    pub fn value(&self) -> &Float {
        &self.value
    }

    pub fn branch(&self) -> Branch {
        self.branch
    }

    pub fn source(&self) -> &AlphaSource {
        &self.source
    }

    pub fn prec(&self) -> u32 {
        self.consts.prec
    }

    pub fn consts(&self) -> &Constants {
        &self.consts
    }

    pub fn float(&self, v: f64) -> Float {
        Float::with_val(self.prec(), v)
    }

    /// Left endpoint α − 2 of I_α.
    pub fn left(&self) -> Float {
        Float::with_val(self.prec(), &self.value - 2u32)
    }

    /// Right endpoint α of I_α (excluded).
    pub fn right(&self) -> Float {
        self.value.clone()
    }

    /// x ∈ [α − 2, α)
    pub fn in_interval(&self, x: &Float) -> bool {
        *x >= self.left() && *x < self.value
    }

    /// Human-readable form of the parameter (source token when symbolic).
    pub fn label(&self) -> String {
        match &self.source {
            AlphaSource::TimesSmallG(m) if *m == 1 => "g".into(),
            AlphaSource::TimesBigG(m) if *m == 1 => "G".into(),
            AlphaSource::TimesSmallG(m) => format!("{}g", rational_label(m)),
            AlphaSource::TimesBigG(m) => format!("{}G", rational_label(m)),
            AlphaSource::Rational(r) => r.to_string(),
            AlphaSource::Decimal(s) => s.clone(),
            AlphaSource::Float(f) => f.to_string_radix(10, Some(20)),
        }
    }

    /// Points of the `[g, G]` grid with `points` equally spaced values
    /// (endpoints included, exactly g and G).
    pub fn grid(points: usize, prec: u32) -> Vec<AlphaParam> {
        assert!(points >= 2);
        let c = Constants::new(prec);
        (0..points)
            .map(|i| {
                if i == 0 {
                    AlphaParam::g(prec)
                } else if i + 1 == points {
                    AlphaParam::big_g(prec)
                } else {
                    // g + i/(points−1)
                    let v = Float::with_val(prec, &c.g + Float::with_val(prec, i as f64) / (points - 1) as f64);
                    AlphaParam::new(v).expect("interior grid point")
                }
            })
            .collect()
    }

    /// The `points`-point grid plus the three special values {g, 1, G},
    /// deduplicated.
    pub fn grid_with_specials(points: usize, prec: u32) -> Vec<AlphaParam> {
        let mut grid = Self::grid(points, prec);
        if !grid.iter().any(|a| a.branch() == Branch::One) {
            let pos = grid.iter().position(|a| *a.value() > 1).unwrap_or(grid.len());
            grid.insert(pos, AlphaParam::one(prec));
        }
        grid
    }
}

impl fmt::Display for AlphaParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

fn rational_label(r: &Rational) -> String {
    if *r.denom() == 1 {
        r.numer().to_string()
    } else {
        // exact decimal if the denominator is a product of 2s and 5s
        let f = Float::with_val(64, r);
        f.to_f64().to_string()
    }
}

fn classify(value: &Float, c: &Constants) -> Branch {
    match (value.partial_cmp(&c.g), value.partial_cmp(&c.big_g)) {
        (Some(Ordering::Less), _) | (_, Some(Ordering::Greater)) => Branch::Exploratory,
        (Some(Ordering::Equal), _) => Branch::AtLower,
        (_, Some(Ordering::Equal)) => Branch::AtUpper,
        _ => match value.partial_cmp(&1u32) {
            Some(Ordering::Less) => Branch::Low,
            Some(Ordering::Equal) => Branch::One,
            _ => Branch::High,
        },
    }
}

fn resolve(source: &AlphaSource, c: &Constants) -> Result<Float> {
    let prec = c.prec;
    Ok(match source {
        AlphaSource::TimesSmallG(m) => Float::with_val(prec, &c.g * m),
        AlphaSource::TimesBigG(m) => Float::with_val(prec, &c.big_g * m),
        AlphaSource::Rational(r) => Float::with_val(prec, r),
        AlphaSource::Decimal(s) => parse_float(s, prec)?,
        AlphaSource::Float(f) => Float::with_val(prec, f),
    })
}

/// Parses a decimal literal at `prec` bits.
pub fn parse_float(s: &str, prec: u32) -> Result<Float> {
    Float::parse(s)
        .map(|p| Float::with_val(prec, p))
        .map_err(|e| CfError::Parse {
            input: s.into(),
            reason: e.to_string(),
        })
}

/// Parses `p/q` or an integer as an exact rational.
pub fn parse_rational(s: &str) -> Option<Rational> {
    if s.contains('.') || s.contains('e') || s.contains('E') {
        return None;
    }
    Rational::from_str(s.trim()).ok()
}

/// Decimal literal to an exact rational (`0.9` → 9/10).
fn decimal_to_rational(s: &str) -> Option<Rational> {
    let s = s.trim();
    if let Some(r) = parse_rational(s) {
        return Some(r);
    }
    if s.contains(['e', 'E']) {
        return None;
    }
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (int, frac) = body.split_once('.')?;
    if !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{int}{frac}");
    let num = rug::Integer::from_str(if digits.is_empty() { "0" } else { &digits }).ok()?;
    let den = rug::Integer::from(10u32).pow(frac.len() as u32);
    let r = Rational::from((num, den));
    Some(if neg { -r } else { r })
}

/// A real number token: `p/q`, a decimal, `g` or `G` with an optional
/// rational multiplier (`-0.5g`), or anything MPFR parses. Returns the value
/// at `prec` bits and, when the token is rational, its exact value.
pub fn parse_real(token: &str, prec: u32) -> Result<(Float, Option<Rational>)> {
    let source = parse_source(token)?;
    let exact = match &source {
        AlphaSource::Rational(r) => Some(r.clone()),
        _ => None,
    };
    Ok((resolve(&source, &Constants::new(prec))?, exact))
}

fn parse_source(token: &str) -> Result<AlphaSource> {
    let t = token.trim();
    let bad = |reason: &str| CfError::Parse {
        input: token.into(),
        reason: reason.into(),
    };
    if t.is_empty() {
        return Err(bad("empty alpha"));
    }
    if let Some(prefix) = t.strip_suffix('g') {
        let m = if prefix.is_empty() {
            Rational::from(1)
        } else {
            decimal_to_rational(prefix.trim_end_matches('*')).ok_or_else(|| bad("bad multiplier of g"))?
        };
        return Ok(AlphaSource::TimesSmallG(m));
    }
    if let Some(prefix) = t.strip_suffix('G') {
        let m = if prefix.is_empty() {
            Rational::from(1)
        } else {
            decimal_to_rational(prefix.trim_end_matches('*')).ok_or_else(|| bad("bad multiplier of G"))?
        };
        return Ok(AlphaSource::TimesBigG(m));
    }
    if let Some(r) = decimal_to_rational(t) {
        return Ok(AlphaSource::Rational(r));
    }
    // validate now so the error surfaces at parse time
    parse_float(t, 64)?;
    Ok(AlphaSource::Decimal(t.to_string()))
}
