//! Per-(grid point, trial, node) random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

/// Derives an independent ChaCha8 stream for every `(grid, trial, node)`
/// triple from one base seed.
///
/// The key is `base_seed` mixed with the grid index; the 64-bit ChaCha stream
/// id packs `trial` and `node` in its two halves, so distinct pairs can never
/// share a stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedPolicy {
    pub base_seed: u64,
}

impl SeedPolicy {
    pub fn new(base_seed: u64) -> Self {
        Self { base_seed }
    }

    pub fn stream(&self, grid_index: u32, trial: u32, node: u32) -> Stream {
        let key = splitmix64(self.base_seed ^ splitmix64(grid_index as u64));
        let mut rng = ChaCha8Rng::seed_from_u64(key);
        rng.set_stream(((trial as u64) << 32) | node as u64);
        rng
    }

    /// Stream for single-population experiments with no node structure.
    pub fn run_stream(&self, run: u32) -> Stream {
        self.stream(u32::MAX, run, u32::MAX)
    }
}

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
