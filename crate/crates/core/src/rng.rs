//! SplitMix64 generator and seed mixing.
//!
//! The trace generator needs streams that are bit-identical on every platform
//! and easy to reproduce in another language, so the algorithm is spelled out
//! here rather than borrowed from a crate whose stream may change between
//! releases.
//!
//! ```text
//! next():   state += 0x9E3779B97F4A7C15
//!           z = state
//!           z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//!           z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//!           return z ^ (z >> 31)
//! mix(seed, stream) = finalize(seed + 0x9E3779B97F4A7C15 * (stream + 1))
//! unit():   (next() >> 11) * 2^-53              in [0, 1)
//! ```
//!
//! All arithmetic is wrapping 64-bit.

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn finalize(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the seed of substream `stream` from a run seed.
pub fn mix(seed: u64, stream: u64) -> u64 {
    finalize(seed.wrapping_add(GOLDEN_GAMMA.wrapping_mul(stream.wrapping_add(1))))
}

#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    /// Generator for substream `stream` of a run seeded with `seed`.
    pub fn substream(seed: u64, stream: u64) -> Self {
        Self::new(mix(seed, stream))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        finalize(self.state)
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`; returns `lo` when the interval is empty.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + self.unit() * (hi - lo)
    }
}
