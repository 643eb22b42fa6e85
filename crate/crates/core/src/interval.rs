//! Real intervals with explicit open/closed endpoints, and finite disjoint
//! unions of them.

use std::cmp::Ordering;
use std::fmt;

use rug::Float;
use serde::{Deserialize, Serialize};

use crate::error::{CfError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Interval {
    pub lo: Float,
    pub hi: Float,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl Interval {
    pub fn new(lo: Float, hi: Float, lo_closed: bool, hi_closed: bool) -> Self {
        Interval {
            lo,
            hi,
            lo_closed,
            hi_closed,
        }
    }

    /// [lo, hi)
    pub fn closed_open(lo: Float, hi: Float) -> Self {
        Self::new(lo, hi, true, false)
    }

    /// (lo, hi]
    pub fn open_closed(lo: Float, hi: Float) -> Self {
        Self::new(lo, hi, false, true)
    }

    /// (lo, hi)
    pub fn open(lo: Float, hi: Float) -> Self {
        Self::new(lo, hi, false, false)
    }

    /// [lo, hi]
    pub fn closed(lo: Float, hi: Float) -> Self {
        Self::new(lo, hi, true, true)
    }

    pub fn prec(&self) -> u32 {
        self.lo.prec().max(self.hi.prec())
    }

    pub fn contains(&self, x: &Float) -> bool {
        let above = match x.partial_cmp(&self.lo) {
            Some(Ordering::Greater) => true,
            Some(Ordering::Equal) => self.lo_closed,
            _ => false,
        };
        above
            && match x.partial_cmp(&self.hi) {
                Some(Ordering::Less) => true,
                Some(Ordering::Equal) => self.hi_closed,
                _ => false,
            }
    }

    /// True when the interval contains no point.
    pub fn is_empty(&self) -> bool {
        match self.lo.partial_cmp(&self.hi) {
            Some(Ordering::Less) => false,
            Some(Ordering::Equal) => !(self.lo_closed && self.hi_closed),
            _ => true,
        }
    }

    pub fn length(&self) -> Float {
        if self.is_empty() {
            Float::new(self.prec())
        } else {
            Float::with_val(self.prec(), &self.hi - &self.lo)
        }
    }

    pub fn midpoint(&self) -> Float {
        Float::with_val(self.prec(), &self.lo + &self.hi) / 2u32
    }

    pub fn intersect(&self, other: &Interval) -> Interval {
        let (lo, lo_closed) = match self.lo.partial_cmp(&other.lo) {
            Some(Ordering::Greater) => (self.lo.clone(), self.lo_closed),
            Some(Ordering::Less) => (other.lo.clone(), other.lo_closed),
            _ => (self.lo.clone(), self.lo_closed && other.lo_closed),
        };
        let (hi, hi_closed) = match self.hi.partial_cmp(&other.hi) {
            Some(Ordering::Less) => (self.hi.clone(), self.hi_closed),
            Some(Ordering::Greater) => (other.hi.clone(), other.hi_closed),
            _ => (self.hi.clone(), self.hi_closed && other.hi_closed),
        };
        Interval::new(lo, hi, lo_closed, hi_closed)
    }

    /// Image under an increasing (`increasing = true`) or decreasing map
    /// given by its endpoint values.
    pub fn mapped(&self, at_lo: Float, at_hi: Float, increasing: bool) -> Interval {
        if increasing {
            Interval::new(at_lo, at_hi, self.lo_closed, self.hi_closed)
        } else {
            Interval::new(at_hi, at_lo, self.hi_closed, self.lo_closed)
        }
    }

    pub fn to_f64_pair(&self) -> [f64; 2] {
        [self.lo.to_f64(), self.hi.to_f64()]
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}{}, {}{}",
            if self.lo_closed { '[' } else { '(' },
            self.lo.to_string_radix(10, Some(17)),
            self.hi.to_string_radix(10, Some(17)),
            if self.hi_closed { ']' } else { ')' }
        )
    }
}

/// JSON form of an interval: decimal-string endpoints and closedness.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct IntervalRecord {
    pub lo: String,
    pub hi: String,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl From<&Interval> for IntervalRecord {
    fn from(i: &Interval) -> Self {
        IntervalRecord {
            lo: decimal(&i.lo),
            hi: decimal(&i.hi),
            lo_closed: i.lo_closed,
            hi_closed: i.hi_closed,
        }
    }
}

/// Full-precision decimal string.
pub fn decimal(x: &Float) -> String {
    x.to_string_radix(10, None)
}

/// Decimal string with 17 significant digits.
pub fn decimal17(x: &Float) -> String {
    x.to_string_radix(10, Some(17))
}

/// A finite union of pairwise disjoint intervals.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IntervalSet {
    intervals: Vec<Interval>,
}

impl IntervalSet {
    pub fn empty() -> Self {
        IntervalSet::default()
    }

    /// Builds a set, dropping empty pieces. Fails if two pieces overlap in
    /// more than an endpoint.
    pub fn new(mut intervals: Vec<Interval>) -> Result<Self> {
        intervals.retain(|i| !i.is_empty());
        intervals.sort_by(|a, b| a.lo.partial_cmp(&b.lo).unwrap_or(Ordering::Equal));
        for w in intervals.windows(2) {
            let overlap = match w[0].hi.partial_cmp(&w[1].lo) {
                Some(Ordering::Greater) => true,
                Some(Ordering::Equal) => w[0].hi_closed && w[1].lo_closed,
                _ => false,
            };
            if overlap {
                return Err(CfError::verification("interval-set", format!(
                    "interval set pieces overlap: {} and {}",
                    w[0], w[1]
                )));
            }
        }
        Ok(IntervalSet { intervals })
    }

    pub fn single(i: Interval) -> Self {
        IntervalSet::new(vec![i]).expect("single interval")
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn contains(&self, x: &Float) -> bool {
        self.intervals.iter().any(|i| i.contains(x))
    }

    /// Lebesgue measure.
    pub fn length(&self, prec: u32) -> Float {
        let mut acc = Float::new(prec);
        for i in &self.intervals {
            acc += i.length();
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(v: f64) -> Float {
        Float::with_val(64, v)
    }

    #[test]
    fn half_open_membership() {
        let i = Interval::closed_open(f(-1.0), f(1.0));
        assert!(i.contains(&f(-1.0)));
        assert!(!i.contains(&f(1.0)));
        assert!(Interval::open(f(0.5), f(0.5)).is_empty());
        assert!(!Interval::closed(f(0.5), f(0.5)).is_empty());
    }

    #[test]
    fn intersection_keeps_tightest_flags() {
        let a = Interval::closed_open(f(-1.0), f(1.0));
        let b = Interval::open_closed(f(0.0), f(1.0));
        let c = a.intersect(&b);
        assert_eq!(c.lo, 0.0);
        assert!(!c.lo_closed && !c.hi_closed);
        assert!(a.intersect(&Interval::open(f(2.0), f(3.0))).is_empty());
    }

    #[test]
    fn sets_reject_overlap_and_sum_lengths() {
        let s = IntervalSet::new(vec![
            Interval::closed_open(f(0.0), f(0.5)),
            Interval::closed_open(f(0.5), f(0.75)),
        ])
        .unwrap();
        assert_eq!(s.length(64), 0.75);
        assert!(IntervalSet::new(vec![Interval::closed(f(0.0), f(0.5)), Interval::closed(f(0.5), f(1.0))]).is_err());
    }
}
