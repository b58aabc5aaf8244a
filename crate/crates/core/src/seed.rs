//! Stable seed derivation.
//!
//! Every random draw in the simulator comes from a ChaCha stream keyed by a
//! hash of the quantities it depends on, so results never depend on call
//! order or thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Incremental hasher over 64-bit words.
#[derive(Clone, Copy, Debug)]
pub struct SeedHasher(u64);

impl SeedHasher {
    pub fn new(domain: u64) -> Self {
        SeedHasher(mix64(domain ^ GOLDEN))
    }

    pub fn word(mut self, w: u64) -> Self {
        self.0 = mix64(self.0.wrapping_add(GOLDEN) ^ mix64(w));
        self
    }

    pub fn float(self, v: f64) -> Self {
        // +0.0 and -0.0 hash identically
        let v = if v == 0.0 { 0.0 } else { v };
        self.word(v.to_bits())
    }

    pub fn finish(self) -> u64 {
        self.0
    }

    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }
}

/// Domain tags keep unrelated draws on unrelated streams.
pub mod domain {
    pub const SHADOWING: u64 = 0x5348_4144;
    pub const TAP_DELAYS: u64 = 0x4445_4C41;
    pub const FADING: u64 = 0x4641_4449;
    pub const JITTER: u64 = 0x4A49_5454;
    pub const PORT_PICK: u64 = 0x504F_5254;
    pub const SUBSETS: u64 = 0x5355_4253;
}
