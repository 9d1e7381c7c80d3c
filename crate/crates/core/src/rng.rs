//! Deterministic random streams for Monte Carlo paths.
//!
//! Each path draws from a ChaCha stream selected by (master seed, path
//! index), so a batch of paths produces identical output no matter how the
//! paths are scheduled across worker threads. A mirrored stream negates
//! every symmetric draw and is used to verify odd symmetry of the samplers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Draws are kept this far inside the open unit interval so that logs and
/// power-law inversions stay finite.
const OPEN_CLAMP: f64 = 1e-12;

/// Seeded uniform source for one sample path.
pub struct PathRng {
    chacha: ChaCha8Rng,
    mirror: bool,
}

impl PathRng {
    /// Stream `stream` of the generator seeded by `master_seed`.
    pub fn new(master_seed: u64, stream: u64) -> Self {
        let mut chacha = ChaCha8Rng::seed_from_u64(master_seed);
        chacha.set_stream(stream);
        Self { chacha, mirror: false }
    }

    /// Same stream, but every symmetric draw comes back negated.
    pub fn mirrored(master_seed: u64, stream: u64) -> Self {
        let mut rng = Self::new(master_seed, stream);
        rng.mirror = true;
        rng
    }

    /// Uniform on (0,1). Unaffected by mirroring.
    pub fn uniform(&mut self) -> f64 {
        self.chacha.random::<f64>().clamp(OPEN_CLAMP, 1.0 - OPEN_CLAMP)
    }

    /// Uniform on (-1,1), odd under mirroring: the mirrored stream returns
    /// exactly the negated value for every draw.
    pub fn signed_uniform(&mut self) -> f64 {
        let u: f64 = self.chacha.random();
        let s = (2.0 * u - 1.0).clamp(-1.0 + OPEN_CLAMP, 1.0 - OPEN_CLAMP);
        if self.mirror { -s } else { s }
    }

    /// Exponential with the given rate.
    pub fn exponential(&mut self, rate: f64) -> f64 {
        debug_assert!(rate > 0.0);
        -self.uniform().ln() / rate
    }

    /// Standard normal, odd under mirroring.
    ///
    /// Polar form N = R sin(pi S) with R^2 ~ Exp(1/2) and S the symmetric
    /// uniform; sin is odd, so mirroring negates the draw exactly.
    pub fn normal(&mut self) -> f64 {
        let r = (-2.0 * self.uniform().ln()).sqrt();
        r * (std::f64::consts::PI * self.signed_uniform()).sin()
    }

    /// Poisson count with the given mean, by inversion of the exponential
    /// race. Used only where the arrival times themselves are not needed.
    pub fn poisson(&mut self, mean: f64) -> u64 {
        debug_assert!(mean >= 0.0);
        let mut count = 0;
        let mut acc = self.exponential(1.0);
        while acc < mean {
            count += 1;
            acc += self.exponential(1.0);
        }
        count
    }
}

/// Stable mixing of a master seed with a role tag (SplitMix64 step), for
/// experiments that need several independent stream families.
pub fn derive_seed(master: u64, tag: u64) -> u64 {
    let mut z = master ^ tag.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
