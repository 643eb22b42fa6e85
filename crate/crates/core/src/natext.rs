//! The planar natural extension Φ_α(x, y) = (φ_α(x), 1/(d_α(x) + e(x)·y)) on
//! its domain Ω_α, a finite union of rectangles whose shape depends on the
//! branch of α.
//!
//! Every domain carries a labelled decomposition into subregions together
//! with the set each subregion is mapped onto. Partition checks sample these
//! pieces and test the images literally against the recorded edge
//! conventions.

use std::fmt;

use rayon::prelude::*;
use rug::Float;
use serde::{Deserialize, Serialize};

use crate::alpha::{AlphaParam, Branch};
use crate::digits::{self, apply_digit, digit_of, ConvergentPair, SignedDigit};
use crate::error::{CfError, Result};
use crate::interval::{decimal, Interval};
use crate::sampling::{chunk_sizes, stream_rng, uniform};

#[derive(Debug, Clone, PartialEq)]
pub struct NEPoint {
    pub x: Float,
    pub y: Float,
}

impl NEPoint {
    pub fn new(x: Float, y: Float) -> Self {
        NEPoint { x, y }
    }
}

impl fmt::Display for NEPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({}, {})",
            self.x.to_string_radix(10, Some(17)),
            self.y.to_string_radix(10, Some(17))
        )
    }
}

/// Axis-aligned rectangle with per-edge closedness.
#[derive(Debug, Clone, PartialEq)]
pub struct Rect {
    pub x: Interval,
    pub y: Interval,
}

impl Rect {
    pub fn new(x: Interval, y: Interval) -> Self {
        Rect { x, y }
    }

    pub fn contains(&self, p: &NEPoint) -> bool {
        self.x.contains(&p.x) && self.y.contains(&p.y)
    }

    /// Membership in the closed rectangle.
    pub fn contains_closed(&self, p: &NEPoint) -> bool {
        p.x >= self.x.lo && p.x <= self.x.hi && p.y >= self.y.lo && p.y <= self.y.hi
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty() || self.y.is_empty()
    }

    pub fn area(&self) -> Float {
        self.x.length() * self.y.length()
    }

    /// ∫∫ dx dy/(1 + xy)² over the rectangle:
    /// log[(1 + x1 y1)(1 + x0 y0) / ((1 + x0 y1)(1 + x1 y0))].
    pub fn mu(&self) -> Float {
        let prec = self.x.prec().max(self.y.prec());
        if self.is_empty() {
            return Float::new(prec);
        }
        let one_plus = |a: &Float, b: &Float| Float::with_val(prec, a * b) + 1u32;
        let (x0, x1, y0, y1) = (&self.x.lo, &self.x.hi, &self.y.lo, &self.y.hi);
        let num = one_plus(x1, y1) * one_plus(x0, y0);
        let den = one_plus(x0, y1) * one_plus(x1, y0);
        (num / den).ln()
    }

    fn corner_values(&self) -> impl Iterator<Item = Float> + '_ {
        let prec = self.x.prec().max(self.y.prec());
        [
            (&self.x.lo, &self.y.lo),
            (&self.x.lo, &self.y.hi),
            (&self.x.hi, &self.y.lo),
            (&self.x.hi, &self.y.hi),
        ]
        .into_iter()
        .map(move |(a, b)| Float::with_val(prec, a * b) + 1u32)
    }

    /// Minimum of 1 + xy over the closed rectangle, attained at a corner.
    pub fn min_one_plus_xy(&self) -> Float {
        self.corner_values()
            .reduce(|a, b| if b < a { b } else { a })
            .expect("four corners")
    }

    /// Maximum of 1 + xy over the closed rectangle, attained at a corner.
    pub fn max_one_plus_xy(&self) -> Float {
        self.corner_values()
            .reduce(|a, b| if b > a { b } else { a })
            .expect("four corners")
    }

    pub fn sample<R: rand::Rng>(&self, rng: &mut R, prec: u32) -> NEPoint {
        NEPoint {
            x: uniform(rng, &self.x.lo, &self.x.hi, prec),
            y: uniform(rng, &self.y.lo, &self.y.hi, prec),
        }
    }

    pub fn record(&self) -> RectRecord {
        RectRecord {
            x0: decimal(&self.x.lo),
            x1: decimal(&self.x.hi),
            y0: decimal(&self.y.lo),
            y1: decimal(&self.y.hi),
            closed_edges: ClosedEdges {
                left: self.x.lo_closed,
                right: self.x.hi_closed,
                bottom: self.y.lo_closed,
                top: self.y.hi_closed,
            },
        }
    }
}

impl fmt::Display for Rect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} × {}", self.x, self.y)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ClosedEdges {
    pub left: bool,
    pub right: bool,
    pub bottom: bool,
    pub top: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RectRecord {
    pub x0: String,
    pub x1: String,
    pub y0: String,
    pub y1: String,
    pub closed_edges: ClosedEdges,
}

/// x ∈ `x` and y in one of the bands between 1/(2k + far) and 1/(2k + near),
/// far > near, for k in [k_min, k_max].
#[derive(Debug, Clone, PartialEq)]
pub struct BandFamily {
    pub x: Interval,
    pub far: Float,
    pub near: Float,
    /// Closedness at 1/(2k + far), the lower y-end.
    pub far_closed: bool,
    /// Closedness at 1/(2k + near), the upper y-end.
    pub near_closed: bool,
    pub k_min: u64,
    pub k_max: Option<u64>,
}

impl BandFamily {
    fn band(&self, k: u64) -> Interval {
        let prec = self.far.prec();
        let end = |off: &Float| Float::with_val(prec, Float::with_val(prec, off + 2 * k).recip_ref());
        Interval::new(end(&self.far), end(&self.near), self.far_closed, self.near_closed)
    }

    pub fn contains(&self, p: &NEPoint) -> bool {
        if !self.x.contains(&p.x) || p.y <= 0 {
            return false;
        }
        // 1/y − near ≥ 2k and 1/y − far ≤ 2k, so k is within one of (1/y − near)/2
        let prec = self.far.prec();
        let inv = Float::with_val(prec, p.y.recip_ref());
        let est = Float::with_val(prec, &inv - &self.near) / 2u32;
        let Some(k0) = est.floor().to_integer().and_then(|i| i.to_i64()) else {
            return false;
        };
        (k0 - 1..=k0 + 1).any(|k| {
            k >= 0
                && (k as u64) >= self.k_min
                && self.k_max.is_none_or(|m| k as u64 <= m)
                && self.band(k as u64).contains(&p.y)
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TargetPiece {
    Rect(Rect),
    Bands(BandFamily),
}

impl TargetPiece {
    pub fn contains(&self, p: &NEPoint) -> bool {
        match self {
            TargetPiece::Rect(r) => r.contains(p),
            TargetPiece::Bands(b) => b.contains(p),
        }
    }
}

/// One labelled piece Ω_{i;α} of the decomposition and the set it maps onto.
#[derive(Debug, Clone, PartialEq)]
pub struct Subregion {
    pub label: u8,
    pub rect: Rect,
    pub target: Vec<TargetPiece>,
}

impl Subregion {
    pub fn target_contains(&self, p: &NEPoint) -> bool {
        self.target.iter().any(|t| t.contains(p))
    }
}

/// Which of the two decompositions applies for 1 < α < G.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HighCase {
    /// 1/(1+α) < φ_α(α−2): six pieces.
    Six,
    /// φ_α(α−2) ≤ 1/(1+α): seven pieces.
    Seven,
}

#[derive(Debug, Clone)]
pub struct OmegaDomain {
    pub alpha: AlphaParam,
    /// Named rectangles ("I", "II", "III") whose union is Ω_α.
    pub rectangles: Vec<(String, Rect)>,
    pub subregions: Vec<Subregion>,
    pub high_case: Option<HighCase>,
}

impl OmegaDomain {
    pub fn contains(&self, p: &NEPoint) -> bool {
        self.rectangles.iter().any(|(_, r)| r.contains(p))
    }

    pub fn contains_closed(&self, p: &NEPoint) -> bool {
        self.rectangles.iter().any(|(_, r)| r.contains_closed(p))
    }

    /// sup of 1 + xy over Ω_α. Exceeds 2G once α > 2 − g, where the top
    /// rectangle reaches y = G.
    pub fn max_one_plus_xy(&self) -> Float {
        self.rectangles
            .iter()
            .map(|(_, r)| r.max_one_plus_xy())
            .reduce(|a, b| if b > a { b } else { a })
            .expect("nonempty domain")
    }

    pub fn area(&self) -> Float {
        let mut a = Float::new(self.alpha.prec());
        for (_, r) in &self.rectangles {
            a += r.area();
        }
        a
    }

    /// μ(Ω_α) summed rectangle by rectangle in closed form.
    pub fn mu(&self) -> Float {
        let mut a = Float::new(self.alpha.prec());
        for (_, r) in &self.rectangles {
            a += r.mu();
        }
        a
    }

    pub fn subregion(&self, label: u8) -> Option<&Subregion> {
        self.subregions.iter().find(|s| s.label == label)
    }

    pub fn record(&self) -> Vec<RectRecord> {
        self.rectangles.iter().map(|(_, r)| r.record()).collect()
    }

    /// Samples a point uniformly from the domain by area.
    pub fn sample<R: rand::Rng>(&self, rng: &mut R) -> NEPoint {
        let prec = self.alpha.prec();
        let areas: Vec<f64> = self.rectangles.iter().map(|(_, r)| r.area().to_f64()).collect();
        let total: f64 = areas.iter().sum();
        let mut u = rng.gen::<f64>() * total;
        for ((_, r), a) in self.rectangles.iter().zip(&areas) {
            if u < *a {
                return r.sample(rng, prec);
            }
            u -= a;
        }
        self.rectangles.last().expect("nonempty domain").1.sample(rng, prec)
    }
}

/// Shared constants of the domain construction at one α.
struct Frame {
    prec: u32,
    a: Float,
    left: Float,
    big_g: Float,
    two_minus_g: Float,
    inv1: Float,
}

impl Frame {
    fn new(alpha: &AlphaParam) -> Self {
        let prec = alpha.prec();
        let a = alpha.value().clone();
        let inv1 = Float::with_val(prec, Float::with_val(prec, &a + 1u32).recip_ref());
        Frame {
            prec,
            left: alpha.left(),
            big_g: alpha.consts().big_g.clone(),
            two_minus_g: alpha.consts().two_minus_g(),
            inv1,
            a,
        }
    }

    fn f(&self, v: f64) -> Float {
        Float::with_val(self.prec, v)
    }

    fn zero(&self) -> Float {
        Float::new(self.prec)
    }

    fn one(&self) -> Float {
        self.f(1.0)
    }

    fn i_alpha(&self) -> Interval {
        Interval::closed_open(self.left.clone(), self.a.clone())
    }

    /// G + c
    fn g_plus(&self, c: i32) -> Float {
        Float::with_val(self.prec, &self.big_g + c)
    }

    /// c − G
    fn minus_g(&self, c: i32) -> Float {
        Float::with_val(self.prec, c - &self.big_g)
    }

    fn bands(&self, x: Interval, far: Float, near: Float, closed: (bool, bool), k: (u64, Option<u64>)) -> TargetPiece {
        TargetPiece::Bands(BandFamily {
            x,
            far,
            near,
            far_closed: closed.0,
            near_closed: closed.1,
            k_min: k.0,
            k_max: k.1,
        })
    }

    /// I_α × ∪_{k≥1} [1/(2k+1), 1/(2k−1+G))
    fn negative_small_bands(&self) -> TargetPiece {
        self.bands(self.i_alpha(), self.one(), self.g_plus(-1), (true, false), (1, None))
    }

    /// I_α × ∪_{k≥1} (1/(2k+3−G), 1/(2k+1)]
    fn positive_low_bands(&self) -> TargetPiece {
        self.bands(self.i_alpha(), self.minus_g(3), self.one(), (false, true), (1, None))
    }

    /// I_α × ∪_{k≥1} (1/(2k+1+G), 1/(2k+2)]
    fn positive_top_bands(&self) -> TargetPiece {
        self.bands(self.i_alpha(), self.g_plus(1), self.f(2.0), (false, true), (1, None))
    }
}

fn phi(x: &Float, alpha: &AlphaParam) -> Result<Float> {
    digits::gauss_step(x, alpha)
}

/// φ_α(α), through the digit at the excluded right endpoint.
pub fn phi_at_right(alpha: &AlphaParam) -> Result<Float> {
    let r = digits::digit_at_right_endpoint(alpha)?;
    Ok(apply_digit(alpha.value(), r.digit, alpha.prec()))
}

/// Builds Ω_α with its subregion decomposition and image sets.
pub fn omega_domain(alpha: &AlphaParam) -> Result<OmegaDomain> {
    let fr = Frame::new(alpha);
    let (rectangles, subregions, high_case) = match alpha.branch() {
        Branch::Exploratory => {
            return Err(CfError::out_of_range(
                "alpha",
                alpha.label(),
                "[g, G] (no domain is claimed below g)",
            ))
        }
        Branch::Low => low_domain(alpha, &fr)?,
        Branch::High => high_domain(alpha, &fr)?,
        Branch::One => one_domain(&fr),
        Branch::AtLower => lower_domain(alpha, &fr)?,
        Branch::AtUpper => upper_domain(&fr),
    };
    Ok(OmegaDomain {
        alpha: alpha.clone(),
        rectangles,
        subregions,
        high_case,
    })
}

type Parts = (Vec<(String, Rect)>, Vec<Subregion>, Option<HighCase>);

fn named(label: &str, r: Rect) -> (String, Rect) {
    (label.to_string(), r)
}

fn sub(label: u8, rect: Rect, target: Vec<TargetPiece>) -> Subregion {
    Subregion { label, rect, target }
}

fn three_rects(alpha: &AlphaParam, fr: &Frame) -> Result<(Rect, Rect, Rect, Float, Float)> {
    let phi_r = phi_at_right(alpha)?;
    let phi_l = phi(&fr.left, alpha)?;
    let r1 = Rect::new(fr.i_alpha(), Interval::closed_open(fr.zero(), fr.two_minus_g.clone()));
    let r2 = Rect::new(
        Interval::open(phi_r.clone(), fr.a.clone()),
        Interval::open_closed(fr.two_minus_g.clone(), fr.one()),
    );
    let r3 = Rect::new(
        Interval::closed_open(phi_l.clone(), fr.a.clone()),
        Interval::closed_open(fr.one(), fr.big_g.clone()),
    );
    Ok((r1, r2, r3, phi_r, phi_l))
}

fn half_index(d: SignedDigit) -> u64 {
    (d.d() - 1) / 2
}

fn low_domain(alpha: &AlphaParam, fr: &Frame) -> Result<Parts> {
    let (om1, om2, om3, phi_r, phi_l) = three_rects(alpha, fr)?;
    let k = half_index(digit_of(&phi_r, alpha)?.digit);
    let phi2 = phi(&phi_r, alpha)?;
    let y_low = Interval::closed_open(fr.zero(), fr.two_minus_g.clone());
    let y_top = Interval::closed_open(fr.one(), fr.big_g.clone());
    let neg_inv1 = Float::with_val(fr.prec, -&fr.inv1);
    let subs = vec![
        sub(1, Rect::new(Interval::closed_open(fr.left.clone(), neg_inv1.clone()), y_low.clone()), vec![TargetPiece::Rect(om3.clone())]),
        sub(
            2,
            Rect::new(Interval::open(fr.inv1.clone(), fr.a.clone()), Interval::closed_open(fr.zero(), fr.big_g.clone())),
            vec![TargetPiece::Rect(om2.clone())],
        ),
        sub(3, Rect::new(Interval::closed_open(neg_inv1, fr.zero()), y_low.clone()), vec![fr.negative_small_bands()]),
        sub(4, Rect::new(Interval::open_closed(fr.zero(), fr.inv1.clone()), y_low), vec![fr.positive_low_bands()]),
        sub(5, Rect::new(Interval::open_closed(fr.zero(), fr.inv1.clone()), y_top.clone()), vec![fr.positive_top_bands()]),
        sub(
            6,
            Rect::new(
                Interval::open_closed(phi_r, fr.inv1.clone()),
                Interval::closed_open(fr.two_minus_g.clone(), fr.one()),
            ),
            vec![
                fr.bands(fr.i_alpha(), fr.f(2.0), fr.minus_g(3), (false, true), (1, Some(k.saturating_sub(1)))),
                fr.bands(
                    Interval::closed_open(fr.left.clone(), phi2.clone()),
                    fr.f(2.0),
                    fr.minus_g(3),
                    (false, true),
                    (k, Some(k)),
                ),
            ],
        ),
        sub(
            7,
            Rect::new(Interval::closed_open(phi_l, fr.zero()), y_top),
            vec![
                fr.bands(fr.i_alpha(), fr.f(2.0), fr.minus_g(3), (true, false), (k + 1, None)),
                fr.bands(Interval::closed_open(phi2, fr.a.clone()), fr.f(2.0), fr.minus_g(3), (true, false), (k, Some(k))),
            ],
        ),
    ];
    Ok((vec![named("I", om1), named("II", om2), named("III", om3)], subs, None))
}

fn high_domain(alpha: &AlphaParam, fr: &Frame) -> Result<Parts> {
    let (om1, om2, om3, phi_r, phi_l) = three_rects(alpha, fr)?;
    let prec = fr.prec;
    let abs_phi_r = Float::with_val(prec, phi_r.abs_ref());
    let k = half_index(digit_of(&abs_phi_r, alpha)?.digit);
    let l = half_index(digit_of(&phi_l, alpha)?.digit);
    let phi2_r = phi(&phi_r, alpha)?;
    let phi2_l = phi(&phi_l, alpha)?;
    let half = fr.f(0.5);
    let y_low = Interval::closed_open(fr.zero(), fr.two_minus_g.clone());
    let y_unit = Interval::closed_open(fr.zero(), fr.one());
    let y_top = Interval::closed_open(fr.one(), fr.big_g.clone());
    let neg_inv1 = Float::with_val(prec, -&fr.inv1);
    // (φ(α), α) × (2−G, 1/2]
    let low_strip = Rect::new(
        Interval::open(phi_r.clone(), fr.a.clone()),
        Interval::open_closed(fr.two_minus_g.clone(), half.clone()),
    );
    let mut subs = vec![
        sub(1, Rect::new(Interval::closed_open(fr.left.clone(), neg_inv1.clone()), y_low.clone()), vec![TargetPiece::Rect(om3.clone())]),
        sub(
            2,
            Rect::new(Interval::open(fr.inv1.clone(), fr.a.clone()), y_unit.clone()),
            vec![TargetPiece::Rect(Rect::new(
                Interval::open(phi_r.clone(), fr.a.clone()),
                Interval::open_closed(half.clone(), fr.one()),
            ))],
        ),
        sub(3, Rect::new(Interval::closed_open(neg_inv1, fr.zero()), y_low), vec![fr.negative_small_bands()]),
        sub(
            4,
            Rect::new(Interval::open_closed(fr.zero(), fr.inv1.clone()), y_unit),
            vec![fr.bands(fr.i_alpha(), fr.f(2.0), fr.one(), (false, true), (1, None))],
        ),
        sub(
            5,
            Rect::new(
                Interval::open(phi_r.clone(), fr.zero()),
                Interval::open_closed(fr.two_minus_g.clone(), fr.one()),
            ),
            vec![
                fr.bands(Interval::open(phi2_r, fr.a.clone()), fr.g_plus(-1), fr.zero(), (false, true), (k, Some(k))),
                fr.bands(fr.i_alpha(), fr.g_plus(-1), fr.zero(), (false, true), (k + 1, None)),
            ],
        ),
    ];
    let case = if fr.inv1 < phi_l { HighCase::Six } else { HighCase::Seven };
    match case {
        HighCase::Six => subs.push(sub(
            6,
            Rect::new(Interval::closed_open(phi_l, fr.a.clone()), y_top),
            vec![TargetPiece::Rect(Rect::new(
                Interval::open_closed(phi_r, phi2_l),
                Interval::open_closed(fr.two_minus_g.clone(), half),
            ))],
        )),
        HighCase::Seven => {
            subs.push(sub(
                6,
                Rect::new(Interval::closed(phi_l, fr.inv1.clone()), y_top.clone()),
                vec![
                    fr.bands(Interval::closed(fr.left.clone(), phi2_l), fr.g_plus(1), fr.f(2.0), (false, true), (l, Some(l))),
                    fr.bands(fr.i_alpha(), fr.g_plus(1), fr.f(2.0), (false, true), (1, Some(l.saturating_sub(1)))),
                ],
            ));
            subs.push(sub(
                7,
                Rect::new(Interval::open(fr.inv1.clone(), fr.a.clone()), y_top),
                vec![TargetPiece::Rect(low_strip)],
            ));
        }
    }
    Ok((vec![named("I", om1), named("II", om2), named("III", om3)], subs, Some(case)))
}

fn one_domain(fr: &Frame) -> Parts {
    let half = fr.f(0.5);
    let neg_half = fr.f(-0.5);
    let y_low = Interval::closed_open(fr.zero(), fr.two_minus_g.clone());
    let bottom = Rect::new(fr.i_alpha(), y_low.clone());
    let upper = Rect::new(
        Interval::closed_open(fr.zero(), fr.one()),
        Interval::closed_open(fr.two_minus_g.clone(), fr.big_g.clone()),
    );
    let subs = vec![
        sub(
            1,
            Rect::new(Interval::closed_open(fr.left.clone(), neg_half.clone()), y_low.clone()),
            vec![TargetPiece::Rect(Rect::new(
                Interval::closed_open(fr.zero(), fr.one()),
                Interval::closed_open(fr.one(), fr.big_g.clone()),
            ))],
        ),
        sub(
            2,
            Rect::new(Interval::open(half.clone(), fr.one()), Interval::closed_open(fr.zero(), fr.big_g.clone())),
            vec![TargetPiece::Rect(Rect::new(
                Interval::open(fr.zero(), fr.one()),
                Interval::open_closed(fr.two_minus_g.clone(), fr.one()),
            ))],
        ),
        sub(3, Rect::new(Interval::closed_open(neg_half, fr.zero()), y_low.clone()), vec![fr.negative_small_bands()]),
        sub(4, Rect::new(Interval::open_closed(fr.zero(), half.clone()), y_low), vec![fr.positive_low_bands()]),
        sub(
            5,
            Rect::new(Interval::open_closed(fr.zero(), half.clone()), Interval::closed_open(fr.one(), fr.big_g.clone())),
            vec![fr.positive_top_bands()],
        ),
        sub(
            6,
            Rect::new(Interval::open_closed(fr.zero(), half), Interval::closed_open(fr.two_minus_g.clone(), fr.one())),
            vec![fr.bands(fr.i_alpha(), fr.f(2.0), fr.minus_g(3), (false, true), (1, None))],
        ),
    ];
    (vec![named("I", bottom), named("II+III", upper)], subs, None)
}

fn lower_domain(alpha: &AlphaParam, fr: &Frame) -> Result<Parts> {
    let prec = fr.prec;
    let g = fr.a.clone();
    let neg_g = Float::with_val(prec, -&g);
    // φ_g(g − 2) = (g − 1)/(2 − g)
    let corner = phi(&fr.left, alpha)?;
    let y_low = Interval::closed_open(fr.zero(), fr.two_minus_g.clone());
    let y_top = Interval::closed_open(fr.one(), fr.big_g.clone());
    let bottom = Rect::new(fr.i_alpha(), y_low.clone());
    let top = Rect::new(Interval::closed_open(corner.clone(), g.clone()), y_top.clone());
    let subs = vec![
        sub(1, Rect::new(Interval::closed_open(fr.left.clone(), neg_g.clone()), y_low.clone()), vec![TargetPiece::Rect(top.clone())]),
        sub(3, Rect::new(Interval::closed_open(neg_g, fr.zero()), y_low.clone()), vec![fr.negative_small_bands()]),
        sub(4, Rect::new(Interval::open_closed(fr.zero(), g.clone()), y_low), vec![fr.positive_low_bands()]),
        sub(5, Rect::new(Interval::open_closed(fr.zero(), g), y_top.clone()), vec![fr.positive_top_bands()]),
        sub(
            7,
            Rect::new(Interval::open(corner, fr.zero()), y_top),
            vec![fr.bands(fr.i_alpha(), fr.f(2.0), fr.minus_g(3), (true, false), (1, None))],
        ),
    ];
    Ok((vec![named("I", bottom), named("III", top)], subs, None))
}

fn upper_domain(fr: &Frame) -> Parts {
    let unit = Interval::closed_open(fr.zero(), fr.one());
    let whole = Rect::new(fr.i_alpha(), unit.clone());
    let subs = vec![
        sub(
            2,
            Rect::new(Interval::open(fr.two_minus_g.clone(), fr.a.clone()), unit.clone()),
            vec![TargetPiece::Rect(Rect::new(
                Interval::open(fr.left.clone(), fr.a.clone()),
                Interval::open_closed(fr.f(0.5), fr.one()),
            ))],
        ),
        sub(
            3,
            Rect::new(
                Interval::closed_open(fr.left.clone(), fr.zero()),
                Interval::closed_open(fr.zero(), fr.two_minus_g.clone()),
            ),
            vec![fr.negative_small_bands()],
        ),
        sub(
            4,
            Rect::new(Interval::open_closed(fr.zero(), fr.two_minus_g.clone()), unit),
            vec![fr.bands(fr.i_alpha(), fr.f(2.0), fr.one(), (false, true), (1, None))],
        ),
        sub(
            5,
            Rect::new(
                Interval::closed_open(fr.left.clone(), fr.zero()),
                Interval::open_closed(fr.two_minus_g.clone(), fr.one()),
            ),
            vec![fr.bands(fr.i_alpha(), fr.g_plus(-1), fr.zero(), (false, true), (1, None))],
        ),
    ];
    (vec![named("I", whole)], subs, None)
}

/// Φ_α(x, y) = (φ_α(x), 1/(d_α(x) + e(x)·y)).
pub fn ne_step(pt: &NEPoint, alpha: &AlphaParam) -> Result<NEPoint> {
    let r = digit_of(&pt.x, alpha)?;
    Ok(step_with(pt, r.digit, alpha.prec()))
}

fn step_with(pt: &NEPoint, digit: SignedDigit, prec: u32) -> NEPoint {
    let x = apply_digit(&pt.x, digit, prec);
    let mut den = Float::with_val(prec, digit.d());
    if digit.positive() {
        den += &pt.y;
    } else {
        den -= &pt.y;
    }
    NEPoint {
        x,
        y: Float::with_val(prec, den.recip_ref()),
    }
}

/// Φ_α^k(x0, 0) for k = 0..=n. The y-coordinates are cross-checked against
/// q_{k−1}/q_k from the exact convergents.
pub fn ne_orbit(x0: &Float, alpha: &AlphaParam, n: usize) -> Result<Vec<NEPoint>> {
    let prec = alpha.prec();
    let mut xs = Vec::with_capacity(n + 1);
    let exp = digits::expand_observed(x0, alpha, n, &mut |_, x, _| xs.push(x.clone()))?;
    xs.push(exp.tail.clone());
    let tol = Float::with_val(prec, Float::i_exp(1, -((prec / 2) as i32)));
    let mut pts = Vec::with_capacity(xs.len());
    let mut y = Float::new(prec);
    let mut state = ConvergentPair::default();
    for (k, x) in xs.into_iter().enumerate() {
        if k > 0 {
            let digit = exp.digits[k - 1];
            let prev = NEPoint::new(Float::new(prec), y);
            y = step_with(&prev, digit, prec).y;
            state.push(digit);
            let exact = Float::with_val(prec, &state.q_prev) / &state.q;
            let dev = Float::with_val(prec, &exact - &y).abs();
            if dev > tol {
                return Err(CfError::PrecisionExhausted {
                    index: k,
                    deviation: dev.to_string_radix(10, Some(6)),
                });
            }
        }
        pts.push(NEPoint::new(x, y.clone()));
    }
    Ok(pts)
}

pub fn contains(dom: &OmegaDomain, pt: &NEPoint) -> bool {
    dom.contains(pt)
}

/// Preimages of `pt` under Φ_α inside Ω_α.
pub fn preimages(dom: &OmegaDomain, pt: &NEPoint) -> Vec<NEPoint> {
    let alpha = &dom.alpha;
    let prec = alpha.prec();
    if pt.y <= 0 {
        return Vec::new();
    }
    let t = Float::with_val(prec, pt.y.recip_ref());
    let big_g = &alpha.consts().big_g;
    let mut out = Vec::new();
    for e in [1i8, -1] {
        // e = +1: d ∈ (t − G, t]; e = −1: d ∈ [t, t + G); an interval of
        // length G < 2 holds at most one odd integer
        let d = if e > 0 {
            let f = Float::with_val(prec, t.floor_ref()).to_integer().expect("finite");
            if f.is_even() {
                f - 1u32
            } else {
                f
            }
        } else {
            let c = Float::with_val(prec, t.ceil_ref()).to_integer().expect("finite");
            if c.is_even() {
                c + 1u32
            } else {
                c
            }
        };
        let Some(d) = d.to_u64().filter(|&d| d >= 1) else {
            continue;
        };
        let y = if e > 0 {
            Float::with_val(prec, &t - d)
        } else {
            Float::with_val(prec, d - &t)
        };
        if y < 0 || y >= *big_g {
            continue;
        }
        let den = Float::with_val(prec, &pt.x + d);
        if den.is_zero() {
            continue;
        }
        let mut x = Float::with_val(prec, den.recip_ref());
        if e < 0 {
            x = -x;
        }
        let Ok(r) = digit_of(&x, alpha) else {
            continue;
        };
        let cand = NEPoint::new(x, y);
        if r.digit.e() == e && r.digit.d() == d && dom.contains(&cand) {
            out.push(cand);
        }
    }
    out
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MuBalance {
    pub rect: String,
    pub exact: f64,
    pub estimate: f64,
    pub std_error: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PartitionReport {
    pub alpha: String,
    pub samples: usize,
    pub seed: u64,
    /// Φ-images of uniform domain points that left Ω_α.
    pub closure_failures: usize,
    /// Per subregion label: (points sampled, points landing outside the image set).
    pub subregion_checks: Vec<(u8, usize, usize)>,
    /// Image points whose preimage count in Ω_α was not exactly one.
    pub preimage_failures: usize,
    pub mu_balance: Vec<MuBalance>,
    pub first_failure: Option<String>,
}

impl PartitionReport {
    pub fn pass(&self) -> bool {
        self.closure_failures == 0
            && self.preimage_failures == 0
            && self.subregion_checks.iter().all(|&(_, _, f)| f == 0)
            && self.mu_balance.iter().all(|m| m.pass)
    }
}

#[derive(Default)]
struct Tally {
    closure: usize,
    preimage: usize,
    sub_total: Vec<usize>,
    sub_fail: Vec<usize>,
    // Σ w·1{Φp ∈ R} and Σ (w·1)² per rectangle
    mu_sum: Vec<f64>,
    mu_sq: Vec<f64>,
    first: Option<String>,
}

impl Tally {
    fn new(subs: usize, rects: usize) -> Self {
        Tally {
            sub_total: vec![0; subs],
            sub_fail: vec![0; subs],
            mu_sum: vec![0.0; rects],
            mu_sq: vec![0.0; rects],
            ..Default::default()
        }
    }

    fn merge(mut self, o: Tally) -> Tally {
        self.closure += o.closure;
        self.preimage += o.preimage;
        for i in 0..self.sub_total.len() {
            self.sub_total[i] += o.sub_total[i];
            self.sub_fail[i] += o.sub_fail[i];
        }
        for i in 0..self.mu_sum.len() {
            self.mu_sum[i] += o.mu_sum[i];
            self.mu_sq[i] += o.mu_sq[i];
        }
        self.first = self.first.or(o.first);
        self
    }
}

/// Monte Carlo partition check: forward closure and exactly one preimage for
/// `samples` uniform points of Ω_α, subregion-to-image membership for
/// `samples` points spread over the subregions, and agreement of
/// μ(Φ⁻¹R) with μ(R) for each domain rectangle R within three standard
/// errors.
pub fn verify_partition(alpha: &AlphaParam, samples: usize, seed: u64) -> Result<PartitionReport> {
    let dom = omega_domain(alpha)?;
    let prec = alpha.prec();
    let nsub = dom.subregions.len();
    let nrect = dom.rectangles.len();
    let chunks = chunk_sizes(samples);
    let tally = chunks
        .par_iter()
        .enumerate()
        .map(|(stream, &count)| {
            let mut rng = stream_rng(seed, stream as u64);
            let mut t = Tally::new(nsub, nrect);
            for i in 0..count {
                let p = dom.sample(&mut rng);
                let w = {
                    let v = Float::with_val(prec, &p.x * &p.y) + 1u32;
                    1.0 / (v.to_f64() * v.to_f64())
                };
                match ne_step(&p, alpha) {
                    Ok(img) => {
                        if !dom.contains(&img) {
                            t.closure += 1;
                            t.first.get_or_insert_with(|| format!("closure: {p} -> {img}"));
                        } else if preimages(&dom, &img).len() != 1 {
                            t.preimage += 1;
                            t.first.get_or_insert_with(|| format!("preimage count at {img}"));
                        }
                        for (j, (_, r)) in dom.rectangles.iter().enumerate() {
                            if r.contains(&img) {
                                t.mu_sum[j] += w;
                                t.mu_sq[j] += w * w;
                            }
                        }
                    }
                    Err(CfError::ZeroInput) => {}
                    Err(e) => return Err(e),
                }
                // subregion sweep, round robin
                let j = (i + stream) % nsub;
                let s = &dom.subregions[j];
                if s.rect.is_empty() {
                    continue;
                }
                let q = s.rect.sample(&mut rng, prec);
                t.sub_total[j] += 1;
                match ne_step(&q, alpha) {
                    Ok(img) if s.target_contains(&img) => {}
                    Ok(img) => {
                        t.sub_fail[j] += 1;
                        t.first
                            .get_or_insert_with(|| format!("subregion {}: {q} -> {img}", s.label));
                    }
                    Err(CfError::ZeroInput) | Err(CfError::OutOfRange { .. }) => {
                        // sampled x outside I_α only on the closed right edge
                    }
                    Err(e) => return Err(e),
                }
            }
            Ok(t)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(Tally::new(nsub, nrect), Tally::merge);

    let area = dom.area().to_f64();
    let n = samples.max(1) as f64;
    let mu_balance = dom
        .rectangles
        .iter()
        .enumerate()
        .map(|(j, (name, r))| {
            let mean = tally.mu_sum[j] / n;
            let var = (tally.mu_sq[j] / n - mean * mean).max(0.0);
            let estimate = area * mean;
            let std_error = area * (var / n).sqrt();
            let exact = r.mu().to_f64();
            MuBalance {
                rect: name.clone(),
                exact,
                estimate,
                std_error,
                pass: (estimate - exact).abs() <= 3.0 * std_error,
            }
        })
        .collect();
    Ok(PartitionReport {
        alpha: alpha.label(),
        samples,
        seed,
        closure_failures: tally.closure,
        subregion_checks: dom
            .subregions
            .iter()
            .enumerate()
            .map(|(j, s)| (s.label, tally.sub_total[j], tally.sub_fail[j]))
            .collect(),
        preimage_failures: tally.preimage,
        mu_balance,
        first_failure: tally.first,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ProductBoundWitness {
    /// Number of factors y_0 ⋯ y_{k−1}.
    pub k: usize,
    pub product: f64,
    pub bound: f64,
}

/// The five thresholds for y_0, y_0y_1, …, y_0⋯y_4 on the branch of α.
pub fn product_bounds(alpha: &AlphaParam) -> [Float; 5] {
    let c = alpha.consts();
    let prec = alpha.prec();
    let g = &c.big_g;
    let third = Float::with_val(prec, 3u32).recip();
    let last = c.five_g_minus_two().recip();
    if alpha.branch().at_most_one() {
        [
            c.two_minus_g(),
            Float::with_val(prec, g / Float::with_val(prec, 5u32 - g)),
            third,
            Float::with_val(prec, g / (Float::with_val(prec, g * 4u32) + 7u32)),
            last,
        ]
    } else {
        [
            c.two_minus_g(),
            Float::with_val(prec, g / Float::with_val(prec, g + 3u32)),
            third,
            Float::with_val(prec, g / (Float::with_val(prec, g * 2u32) + 5u32)),
            last,
        ]
    }
}

/// First k ≤ 5 whose product inequality holds along the Φ_α-orbit of `pt`.
pub fn five_product_bound(pt: &NEPoint, alpha: &AlphaParam) -> Result<ProductBoundWitness> {
    let bounds = product_bounds(alpha);
    five_product_bound_with(pt, alpha, &bounds)
}

pub fn five_product_bound_with(pt: &NEPoint, alpha: &AlphaParam, bounds: &[Float; 5]) -> Result<ProductBoundWitness> {
    let prec = alpha.prec();
    let mut cur = pt.clone();
    let mut product = Float::with_val(prec, 1u32);
    for (k, bound) in bounds.iter().enumerate() {
        if k > 0 {
            cur = ne_step(&cur, alpha)?;
        }
        product *= &cur.y;
        if product <= *bound {
            return Ok(ProductBoundWitness {
                k: k + 1,
                product: product.to_f64(),
                bound: bound.to_f64(),
            });
        }
    }
    Err(CfError::verification("product-bound", format!("no inequality holds at {pt}")))
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CAlphaReport {
    pub alpha: String,
    /// Branch formula 1 + min{…}.
    pub closed_form: f64,
    /// Minimum of 1 + xy over rectangle corners.
    pub corner_min: f64,
    /// Minimum over a grid covering every rectangle, edges included.
    pub grid_min: f64,
}

impl CAlphaReport {
    pub fn agrees(&self, tol: f64) -> bool {
        (self.closed_form - self.corner_min).abs() <= tol && (self.closed_form - self.grid_min).abs() <= tol
    }
}

/// C_α = min over Ω_α of 1 + xy in closed form.
pub fn c_alpha_closed_form(alpha: &AlphaParam) -> Float {
    let c = alpha.consts();
    let prec = alpha.prec();
    let a = alpha.value();
    let first = Float::with_val(prec, c.two_minus_g() * alpha.left());
    let second = if alpha.branch().at_most_one() {
        // G(α − 1)/(2 − α)
        Float::with_val(prec, &c.big_g * Float::with_val(prec, a - 1u32)) / Float::with_val(prec, 2u32 - a)
    } else {
        // (1 − α)/α
        Float::with_val(prec, 1u32 - a) / a
    };
    (if second < first { second } else { first }) + 1u32
}

pub fn c_alpha(alpha: &AlphaParam, grid: usize) -> Result<CAlphaReport> {
    let dom = omega_domain(alpha)?;
    let prec = alpha.prec();
    let mut corner: Option<Float> = None;
    let mut grid_min = f64::INFINITY;
    for (_, r) in &dom.rectangles {
        let m = r.min_one_plus_xy();
        corner = Some(match corner {
            Some(c) if c <= m => c,
            _ => m,
        });
        for i in 0..=grid {
            let x = Float::with_val(prec, &r.x.hi - &r.x.lo) * (i as f64 / grid as f64) + &r.x.lo;
            for j in 0..=grid {
                let y = Float::with_val(prec, &r.y.hi - &r.y.lo) * (j as f64 / grid as f64) + &r.y.lo;
                let v = (Float::with_val(prec, &x * &y) + 1u32).to_f64();
                grid_min = grid_min.min(v);
            }
        }
    }
    Ok(CAlphaReport {
        alpha: alpha.label(),
        closed_form: c_alpha_closed_form(alpha).to_f64(),
        corner_min: corner.expect("nonempty domain").to_f64(),
        grid_min,
    })
}

/// One point of an orbit cloud: iterate index and position.
#[derive(Debug, Clone, PartialEq)]
pub struct CloudPoint {
    pub k: usize,
    pub pt: NEPoint,
}

/// {Φ_α^k(x, 0) : x on a `grid`-point mesh of I_α, 0 ≤ k ≤ n}. Works for any
/// α > 0; orbits stop early once they reach 0.
pub fn orbit_cloud(alpha: &AlphaParam, grid: usize, n: usize) -> Result<Vec<CloudPoint>> {
    let prec = alpha.prec();
    let left = alpha.left();
    let mesh: Vec<usize> = (0..grid).collect();
    let orbits = mesh
        .par_iter()
        .map(|&j| {
            // midpoint mesh α − 2 + (2j + 1)/grid
            let x = Float::with_val(prec, (2 * j + 1) as f64) / grid as f64 + &left;
            let mut pt = NEPoint::new(x, Float::new(prec));
            let mut out = vec![CloudPoint { k: 0, pt: pt.clone() }];
            for k in 1..=n {
                // below 2^(−P/4) the iterate is rounding noise around an exact 0
                if pt.x.get_exp().is_none_or(|e| e < -((prec / 4) as i32)) {
                    break;
                }
                pt = ne_step(&pt, alpha)?;
                out.push(CloudPoint { k, pt: pt.clone() });
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(orbits.into_iter().flatten().collect())
}

/// Fraction of cloud points outside the closure of `dom`.
pub fn escape_fraction(cloud: &[CloudPoint], dom: &OmegaDomain) -> f64 {
    if cloud.is_empty() {
        return 0.0;
    }
    let out = cloud.iter().filter(|c| !dom.contains_closed(&c.pt)).count();
    out as f64 / cloud.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::digits::expand;

    const P: u32 = 256;

    fn f(v: f64) -> Float {
        Float::with_val(P, v)
    }

    fn pt(x: f64, y: f64) -> NEPoint {
        NEPoint::new(f(x), f(y))
    }

    fn alpha(s: &str) -> AlphaParam {
        AlphaParam::parse(s, P, false).unwrap()
    }

    #[test]
    fn special_domains_have_expected_rectangles() {
        let one = omega_domain(&AlphaParam::one(P)).unwrap();
        assert_eq!(one.rectangles.len(), 2);
        assert!(one.contains(&NEPoint::new(one.alpha.consts().g.clone(), f(1.0))));
        assert!(!one.contains(&pt(-0.5, 1.0)));
        let big = omega_domain(&AlphaParam::big_g(P)).unwrap();
        assert_eq!(big.rectangles.len(), 1);
        assert_eq!(big.rectangles[0].1.y.hi, 1);
        assert_eq!(omega_domain(&AlphaParam::g(P)).unwrap().subregions.len(), 5);
    }

    #[test]
    fn left_endpoint_row_is_inside() {
        for a in AlphaParam::grid(9, P) {
            if a.branch() == Branch::AtUpper {
                continue;
            }
            let dom = omega_domain(&a).unwrap();
            assert!(dom.contains(&NEPoint::new(a.left(), Float::new(P))), "{a}");
        }
    }

    #[test]
    fn high_case_split() {
        assert_eq!(omega_domain(&alpha("1.5")).unwrap().high_case, Some(HighCase::Six));
        assert_eq!(omega_domain(&alpha("1.2")).unwrap().high_case, Some(HighCase::Seven));
        assert_eq!(omega_domain(&alpha("1.2")).unwrap().subregions.len(), 7);
        assert_eq!(omega_domain(&alpha("1.5")).unwrap().subregions.len(), 6);
    }

    #[test]
    fn fibonacci_orbit() {
        let one = AlphaParam::one(P);
        let g = one.consts().g.clone();
        let s = ne_step(&NEPoint::new(g.clone(), f(0.0)), &one).unwrap();
        assert!(Float::with_val(P, &s.x - &g).abs() < 1e-70);
        assert_eq!(s.y, 1);
        let orbit = ne_orbit(&g, &one, 5).unwrap();
        let ys: Vec<f64> = orbit.iter().map(|p| p.y.to_f64()).collect();
        let want = [0.0, 1.0, 0.5, 2.0 / 3.0, 0.6, 0.625];
        for (a, b) in ys.iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(ne_orbit(&f(0.3), &one, 0).unwrap(), vec![pt(0.3, 0.0)]);
    }

    #[test]
    fn orbit_y_matches_denominator_ratio() {
        let a = alpha("0.8");
        let x = f(-0.737);
        let orbit = ne_orbit(&x, &a, 40).unwrap();
        let e = expand(&x, &a, 40).unwrap();
        let c = e.convergents();
        for (k, p) in orbit.iter().enumerate().skip(1) {
            let want = Float::with_val(P, &c[k].q) / &c[k + 1].q;
            assert!(Float::with_val(P, &want - &p.y).abs() < 1e-70);
        }
    }

    #[test]
    fn partition_smoke() {
        for a in ["g", "0.8", "1", "1.2", "1.5", "G"] {
            let a = alpha(a);
            let rep = verify_partition(&a, 4000, 3).unwrap();
            assert!(rep.pass(), "{a}: {rep:?}");
        }
    }

    #[test]
    fn product_witness_on_low_row() {
        let a = alpha("1.3");
        let w = five_product_bound(&pt(0.1, 0.2), &a).unwrap();
        assert_eq!(w.k, 1);
        let w = five_product_bound(&pt(0.4, 0.0), &a).unwrap();
        assert_eq!(w.k, 1);
    }

    #[test]
    fn c_alpha_values() {
        let g = c_alpha(&AlphaParam::g(P), 50).unwrap();
        let want = 2.0 * (5f64.sqrt() - 2.0);
        assert!((g.closed_form - want).abs() < 1e-12 && g.agrees(1e-6));
        let one = c_alpha(&AlphaParam::one(P), 50).unwrap();
        assert!((one.closed_form - 0.618_033_988_749_894_8).abs() < 1e-12 && one.agrees(1e-6));
        for a in AlphaParam::grid(17, P) {
            let r = c_alpha(&a, 20).unwrap();
            assert!(r.agrees(1e-6), "{r:?}");
            assert!(r.closed_form >= want - 1e-12);
        }
    }

    #[test]
    fn cloud_of_segment_and_escape() {
        let one = AlphaParam::one(P);
        let cloud = orbit_cloud(&one, 20, 0).unwrap();
        assert_eq!(cloud.len(), 20);
        assert!(cloud.iter().all(|c| c.pt.y == 0));
        let cloud = orbit_cloud(&one, 100, 10).unwrap();
        assert_eq!(escape_fraction(&cloud, &omega_domain(&one).unwrap()), 0.0);
    }
}
