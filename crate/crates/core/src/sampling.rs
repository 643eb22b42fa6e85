//! Seeded random streams and uniform extended-precision samples.
//!
//! Work is split into a fixed number of chunks, each with its own ChaCha
//! stream derived from (seed, chunk index), so results do not depend on the
//! thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rug::integer::Order;
use rug::{Float, Integer};

/// Number of independent streams a sample budget is split into.
pub const STREAMS: u64 = 16;

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Sizes of the `STREAMS` chunks of `total` samples.
pub fn chunk_sizes(total: usize) -> Vec<usize> {
    let k = STREAMS as usize;
    (0..k).map(|i| total / k + usize::from(i < total % k)).collect()
}

/// Uniform sample of the open unit interval with `prec` random bits.
pub fn unit_open<R: Rng>(rng: &mut R, prec: u32) -> Float {
    let words = prec.div_ceil(64).max(1) as usize;
    let digits: Vec<u64> = (0..words).map(|_| rng.gen()).collect();
    let bits = 64 * words as u32;
    // (n + 1/2) / 2^bits lies strictly inside (0, 1)
    let n = Integer::from_digits(&digits, Order::Lsf) * 2u32 + 1u32;
    let mut u = Float::with_val(prec.max(bits + 1), n);
    u >>= bits + 1;
    Float::with_val(prec, u)
}

/// Uniform sample of (lo, hi).
pub fn uniform<R: Rng>(rng: &mut R, lo: &Float, hi: &Float, prec: u32) -> Float {
    let w = Float::with_val(prec, hi - lo);
    let u = unit_open(rng, prec);
    Float::with_val(prec, &w * &u) + lo
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: u64 = stream_rng(7, 1).gen();
        let b: u64 = stream_rng(7, 1).gen();
        let c: u64 = stream_rng(7, 2).gen();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn samples_stay_inside() {
        let mut rng = stream_rng(1, 0);
        let lo = Float::with_val(128, -1);
        let hi = Float::with_val(128, 3);
        for _ in 0..1000 {
            let x = uniform(&mut rng, &lo, &hi, 128);
            assert!(x > lo && x < hi);
        }
        assert_eq!(chunk_sizes(35).iter().sum::<usize>(), 35);
    }
}
