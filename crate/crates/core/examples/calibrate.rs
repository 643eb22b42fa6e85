//! Fits the cylinder envelope constants and prints the fixture JSON.
//!
//!     cargo run --release -p oddcf --example calibrate > crates/core/fixtures/envelope.json
//!
//! Corpus: the 9-point α-grid plus g, 1, G; every word with |ω_i| ≤ 7 up to
//! rank 4; prefixes up to rank 10 of 100 uniformly drawn expansions per α.
//! Quasi-independence ratios use the full words of that corpus with five
//! random subintervals each. Observed extremes are widened by MARGIN.

use oddcf::cylinders::{self, CylinderInterval, CylinderWord, Envelope};
use oddcf::digits;
use oddcf::interval::Interval;
use oddcf::sampling::{stream_rng, uniform};
use oddcf::AlphaParam;
use rand::Rng;
use rug::Float;
use serde_json::json;

const PREC: u32 = 256;
const SEED: u64 = 20_240_501;
const MARGIN: f64 = 1.25;

struct Range {
    lo: f64,
    hi: f64,
}

impl Range {
    fn new() -> Self {
        Range {
            lo: f64::INFINITY,
            hi: f64::NEG_INFINITY,
        }
    }

    fn add(&mut self, v: f64) {
        self.lo = self.lo.min(v);
        self.hi = self.hi.max(v);
    }
}

fn main() {
    let mut ratio = Range::new();
    let mut decay = Range::new();
    let mut quasi = Range::new();
    let mut words = 0usize;
    for (ai, alpha) in AlphaParam::grid_with_specials(9, PREC).iter().enumerate() {
        let mut rng = stream_rng(SEED, ai as u64);
        let mut corpus: Vec<CylinderInterval> = Vec::new();
        for n in 1..=4 {
            corpus.extend(cylinders::enumerate_rank(alpha, n, 7, 1 << 20).expect("enumeration").cylinders);
        }
        for _ in 0..100 {
            let x = uniform(&mut rng, &alpha.left(), alpha.value(), PREC);
            let exp = digits::expand(&x, alpha, 10).expect("expansion");
            for n in 1..=exp.len() {
                let word = CylinderWord(exp.digits[..n].to_vec());
                corpus.push(cylinders::cylinder(&word, alpha).expect("cylinder"));
            }
        }
        for c in corpus.iter().filter(|c| c.is_nonempty()) {
            words += 1;
            let (r, d) = cylinders::scaling_values(c, alpha);
            ratio.add(r);
            decay.add(d);
            if cylinders::image_is_full(&c.image, alpha) {
                for _ in 0..5 {
                    let (u, v): (f64, f64) = (rng.gen(), rng.gen());
                    let lo = alpha.left().to_f64() + 2.0 * u.min(v);
                    let hi = alpha.left().to_f64() + 2.0 * u.max(v);
                    let a = Interval::closed_open(Float::with_val(PREC, lo), Float::with_val(PREC, hi));
                    quasi.add(cylinders::quasi_independence_value(&c.word, &a, alpha).expect("full word"));
                }
            }
        }
    }
    let envelope = Envelope {
        c3: ratio.lo / MARGIN,
        c4: ratio.hi * MARGIN,
        c5: decay.hi * MARGIN,
        c8: quasi.lo / MARGIN,
        c9: quasi.hi * MARGIN,
    };
    let out = json!({
        "envelope": envelope,
        "observed": {
            "ratio": [ratio.lo, ratio.hi],
            "decay_max": decay.hi,
            "quasi_independence": [quasi.lo, quasi.hi],
        },
        "margin": MARGIN,
        "seed": SEED,
        "precision_bits": PREC,
        "cylinders": words,
    });
    println!("{}", serde_json::to_string_pretty(&out).expect("json"));
}
