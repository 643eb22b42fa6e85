//! Property tests for the invariants of expansions, the natural extension,
//! the invariant density and cylinders.

use oddcf::cylinders::{self, CylinderWord};
use oddcf::digits::{self, ConvergentPair};
use oddcf::interval::{Interval, IntervalSet};
use oddcf::measures::{self, DensityProfile};
use oddcf::natext::{self, NEPoint};
use oddcf::sampling::{stream_rng, uniform};
use oddcf::AlphaParam;
use proptest::prelude::*;
use rug::{Float, Integer, Rational};

const P: u32 = 256;

fn alpha_strategy() -> impl Strategy<Value = AlphaParam> {
    prop_oneof![
        1 => Just(AlphaParam::g(P)),
        1 => Just(AlphaParam::one(P)),
        1 => Just(AlphaParam::big_g(P)),
        // strictly inside (g, G)
        5 => (0.6181f64..1.6180).prop_map(|a| AlphaParam::from_f64(a, P).unwrap()),
    ]
}

/// A P-bit uniform point of I_α drawn from `seed`.
fn point(alpha: &AlphaParam, seed: u64) -> Float {
    let mut rng = stream_rng(seed, 0);
    uniform(&mut rng, &alpha.left(), alpha.value(), alpha.prec())
}

fn pair_at(convs: &[digits::Convergent], n: usize) -> ConvergentPair {
    // convs[k] has index k − 1
    ConvergentPair {
        n,
        p: convs[n + 1].p.clone(),
        q: convs[n + 1].q.clone(),
        p_prev: convs[n].p.clone(),
        q_prev: convs[n].q.clone(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn determinant_and_positivity(alpha in alpha_strategy(), seed in any::<u64>()) {
        let exp = digits::expand(&point(&alpha, seed), &alpha, 40).unwrap();
        let convs = exp.convergents();
        let mut sign = Integer::from(1);
        for n in 1..=exp.len() {
            sign *= -i32::from(exp.digits[n - 1].e());
            let s = pair_at(&convs, n);
            let det = Integer::from(&s.p_prev * &s.q) - Integer::from(&s.p * &s.q_prev);
            prop_assert_eq!(&det, &sign);
            prop_assert!(s.q > 0);
        }
    }

    #[test]
    fn round_trip_within_half_precision(alpha in alpha_strategy(), seed in any::<u64>()) {
        let x = point(&alpha, seed);
        let exp = digits::expand(&x, &alpha, 40).unwrap();
        let convs = exp.convergents();
        let tol = Float::with_val(P, Float::i_exp(1, -(P as i32) / 2));
        for n in [1, exp.len() / 2, exp.len()] {
            let tail = digits::residual(&x, &convs, n).unwrap();
            prop_assert!(alpha.in_interval(&tail) || tail.is_zero());
            let back = digits::evaluate(&exp.digits[..n], Some(&tail), P).unwrap();
            prop_assert!(Float::with_val(P, &back - &x).abs() < tol);
        }
        let back = digits::evaluate(&exp.digits, Some(&exp.tail), P).unwrap();
        prop_assert!(Float::with_val(P, &back - &x).abs() < tol);
    }

    #[test]
    fn denominators_grow_at_least_geometrically(alpha in alpha_strategy(), seed in any::<u64>()) {
        let exp = digits::expand(&point(&alpha, seed), &alpha, 50).unwrap();
        let c = alpha.consts();
        let mut bound = c.growth_prefactor.clone();
        for conv in exp.convergents().iter().skip(2) {
            bound *= &c.growth_rate;
            prop_assert!(Float::with_val(P, &conv.q) >= bound);
        }
    }

    /// |u|/(M_α q_n²) ≤ |x − p_n/q_n| ≤ |u|/(C_α q_n²) with u = φ^n(x) and
    /// M_α, C_α the extremes of 1 + xy over Ω_α.
    #[test]
    fn approximation_sandwich(alpha in alpha_strategy(), seed in any::<u64>()) {
        let x = point(&alpha, seed);
        let exp = digits::expand(&x, &alpha, 40).unwrap();
        let xr = exp.x0_rational();
        let convs = exp.convergents();
        let dom = natext::omega_domain(&alpha).unwrap();
        let lo = dom.max_one_plus_xy().recip();
        let hi = natext::c_alpha_closed_form(&alpha).recip();
        for n in 1..=exp.len() {
            let s = pair_at(&convs, n);
            let u = s.residual_exact(&xr).unwrap();
            if u == 0 {
                continue;
            }
            let err = Rational::from(&xr - Rational::from((s.p.clone(), s.q.clone()))).abs();
            // err q²/|u|
            let r = Float::with_val(P, err * Rational::from(s.q.square_ref()) / u.abs());
            prop_assert!(r >= lo && r <= hi, "n = {}: {}", n, r.to_f64());
        }
    }

    #[test]
    fn digits_stable_under_precision_doubling(alpha in alpha_strategy(), seed in any::<u64>()) {
        let x = point(&alpha, seed);
        let lo = digits::expand(&x, &alpha, 40).unwrap();
        prop_assume!(lo.near_ties.is_empty());
        let wide = alpha.with_precision(2 * P);
        let hi = digits::expand(&Float::with_val(2 * P, &x), &wide, 40).unwrap();
        prop_assert_eq!(lo.digits, hi.digits);
    }

    #[test]
    fn expansions_respect_digit_constraints(alpha in alpha_strategy(), seed in any::<u64>()) {
        let exp = digits::expand(&point(&alpha, seed), &alpha, 50).unwrap();
        prop_assert!(digits::validate_constraints(&exp).is_clean());
    }

    #[test]
    fn natural_extension_stays_in_domain(alpha in alpha_strategy(), seed in any::<u64>()) {
        let dom = natext::omega_domain(&alpha).unwrap();
        let mut rng = stream_rng(seed, 1);
        let mut pt = dom.sample(&mut rng);
        for _ in 0..20 {
            if pt.x.is_zero() {
                break;
            }
            let next = natext::ne_step(&pt, &alpha).unwrap();
            prop_assert!(dom.contains_closed(&next), "{} -> {}", pt, next);
            prop_assert_eq!(natext::preimages(&dom, &next).len(), 1);
            pt = next;
        }
    }

    #[test]
    fn orbit_y_is_denominator_ratio(alpha in alpha_strategy(), seed in any::<u64>()) {
        let x = point(&alpha, seed);
        let orbit = natext::ne_orbit(&x, &alpha, 30).unwrap();
        let exp = digits::expand(&x, &alpha, 30).unwrap();
        let convs = exp.convergents();
        for (k, p) in orbit.iter().enumerate().skip(1).take(exp.len()) {
            let y = Float::with_val(P, Rational::from((convs[k].q.clone(), convs[k + 1].q.clone())));
            prop_assert!(Float::with_val(P, &p.y - &y).abs() < Float::with_val(P, Float::i_exp(1, -(P as i32) / 2)));
        }
        let origin = NEPoint::new(x, Float::new(P));
        prop_assert_eq!(&orbit[0], &origin);
    }

    #[test]
    fn density_is_positive_and_normalised(alpha in alpha_strategy(), seed in any::<u64>()) {
        let prof = DensityProfile::new(&alpha).unwrap();
        let x = point(&alpha, seed);
        prop_assert!(prof.eval(&x).unwrap() > 0);
        let total = prof.integral(&alpha.left(), alpha.value()).to_f64();
        prop_assert!((total - 1.0).abs() < 1e-12);
        let cdf = prof.cdf(&x).to_f64();
        prop_assert!((0.0..=1.0).contains(&cdf));
    }

    #[test]
    fn nu_is_invariant_on_intervals(alpha in alpha_strategy(), s1 in any::<u64>(), s2 in any::<u64>()) {
        let (u, v) = (point(&alpha, s1), point(&alpha, s2));
        prop_assume!(u != v);
        let (lo, hi) = if u < v { (u, v) } else { (v, u) };
        let a = Interval::closed_open(lo, hi);
        let r = measures::check_invariance(&a, &alpha, 1e-8).unwrap();
        let direct = measures::nu_measure(&IntervalSet::single(a), &alpha).unwrap().to_f64();
        prop_assert!((r.nu_a - direct).abs() < 1e-15);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, ..ProptestConfig::default() })]

    /// Δ(ωb) ⊆ Δ(ω), and every prefix cylinder of x's expansion contains x
    /// with the Möbius image of the residual landing on x.
    #[test]
    fn cylinders_nest_and_contain_their_points(alpha in alpha_strategy(), seed in any::<u64>()) {
        let x = point(&alpha, seed);
        let exp = digits::expand(&x, &alpha, 8).unwrap();
        let convs = exp.convergents();
        let mut parent: Option<Interval> = None;
        for n in 1..=exp.len() {
            let word = CylinderWord(exp.digits[..n].to_vec());
            let c = cylinders::cylinder(&word, &alpha).unwrap();
            prop_assert!(c.status != cylinders::Emptiness::Empty);
            prop_assert!(c.delta.contains(&x), "x outside {} for {}", c.delta, word);
            let u = digits::residual(&x, &convs, n).unwrap();
            prop_assert!(c.image.contains(&u) || c.image.length().is_zero());
            let back = c.convergents.mobius(&u, P).unwrap();
            prop_assert!(Float::with_val(P, &back - &x).abs() < Float::with_val(P, Float::i_exp(1, -(P as i32) / 2)));
            if let Some(p) = &parent {
                let slack = Float::with_val(P, Float::i_exp(1, -(P as i32) / 2));
                prop_assert!(c.delta.lo >= Float::with_val(P, &p.lo - &slack));
                prop_assert!(c.delta.hi <= Float::with_val(P, &p.hi + &slack));
            }
            parent = Some(c.delta.clone());
        }
    }

    #[test]
    fn full_words_have_full_images(alpha in alpha_strategy(), seed in any::<u64>()) {
        let x = point(&alpha, seed);
        let hits = cylinders::full_cylinder_hitting(&x, &alpha, 12).unwrap();
        let exp = digits::expand(&x, &alpha, 12).unwrap();
        for k in hits {
            let word = CylinderWord(exp.digits[..k].to_vec());
            prop_assert!(cylinders::is_full(&word, &alpha).unwrap());
        }
    }
}
