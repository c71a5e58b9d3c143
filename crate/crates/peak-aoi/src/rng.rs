//! Draw helpers shared by the samplers and the simulation engine.
//!
//! All floating-point randomness in this crate flows through these two
//! functions so that results are reproducible bit-for-bit: a uniform variate
//! is always the top 53 bits of one `next_u64` call, and exponential variates
//! always come from the inverse CDF. Callers supply the generator; the engine
//! uses ChaCha8 with one stream per simulated update (see [`crate::simulator`]).

use rand_core::RngCore;

const SCALE_53: f64 = 1.0 / (1u64 << 53) as f64;

/// Uniform draw on `[0, 1)` using the top 53 bits of a single `u64`.
#[inline]
pub fn unit53<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * SCALE_53
}

/// Exponential draw with rate `lambda` via the inverse CDF `-ln(1 - U) / lambda`.
///
/// `U in [0, 1)` keeps the argument of `ln` in `(0, 1]`, so the result is
/// finite and nonnegative.
#[inline]
pub fn exponential<R: RngCore + ?Sized>(rng: &mut R, lambda: f64) -> f64 {
    -(1.0 - unit53(rng)).ln() / lambda
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn unit53_range_and_determinism() {
        let mut a = ChaCha8Rng::seed_from_u64(7);
        let mut b = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10_000 {
            let u = unit53(&mut a);
            assert!((0.0..1.0).contains(&u));
            assert_eq!(u.to_bits(), unit53(&mut b).to_bits());
        }
    }

    #[test]
    fn exponential_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 200_000;
        let lambda = 2.5;
        let mean = (0..n).map(|_| exponential(&mut rng, lambda)).sum::<f64>() / n as f64;
        // E = 1/lambda = 0.4, sd of the mean ~ 0.4/sqrt(n) ~ 9e-4
        assert!((mean - 0.4).abs() < 5e-3, "mean {mean}");
    }

    #[test]
    fn exponential_is_zero_when_u_is_zero() {
        // u = 0 maps to -ln(1)/lambda = 0; no negative or NaN output.
        struct Zero;
        impl RngCore for Zero {
            fn next_u32(&mut self) -> u32 {
                0
            }
            fn next_u64(&mut self) -> u64 {
                0
            }
            fn fill_bytes(&mut self, dest: &mut [u8]) {
                dest.fill(0)
            }
            fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand_core::Error> {
                dest.fill(0);
                Ok(())
            }
        }
        assert_eq!(exponential(&mut Zero, 1.0), 0.0);
    }
}
