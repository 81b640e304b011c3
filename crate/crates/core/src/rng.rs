//! Seeded random streams.
//!
//! Every random quantity in the crate is drawn from an [`RngStream`], a
//! (seed, stream id) pair backed by ChaCha8. The 64-bit seed is expanded to
//! the cipher key with `seed_from_u64` and the stream id selects the ChaCha
//! stream counter, so a pair names the same sequence on every platform.
//! Parallel work derives one substream per task and never shares a stream.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream ids reserved for the top-level commands.
pub mod streams {
    pub const MATRIX_GEN: u64 = 1;
    pub const SIGNAL: u64 = 2;
    pub const SPHERE: u64 = 3;
    pub const MSTAR: u64 = 4;
    pub const TRIALS: u64 = 5;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A reproducible random stream: identical (seed, stream_id) pairs yield
/// bitwise-identical sample sequences.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    /// Derive the `index`-th child stream. Children of distinct parents are
    /// kept apart by mixing the parent id through splitmix64.
    pub fn substream(&self, index: u64) -> Self {
        Self {
            seed: self.seed,
            stream_id: splitmix64(self.stream_id ^ splitmix64(index.wrapping_add(1))),
        }
    }

    /// Instantiate the generator for this stream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id.into());
        rng
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn identical_streams_repeat() {
        let a: Vec<u64> = RngStream::new(7, 3).rng().random_iter().take(16).collect();
        let b: Vec<u64> = RngStream::new(7, 3).rng().random_iter().take(16).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn distinct_streams_differ() {
        let a: Vec<u64> = RngStream::new(7, 3).rng().random_iter().take(4).collect();
        let b: Vec<u64> = RngStream::new(7, 4).rng().random_iter().take(4).collect();
        let c: Vec<u64> = RngStream::new(8, 3).rng().random_iter().take(4).collect();
        assert_ne!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn substreams_do_not_collide_with_siblings() {
        let base = RngStream::new(1, streams::TRIALS);
        let ids: Vec<u64> = (0..1000).map(|i| base.substream(i).stream_id).collect();
        let mut sorted = ids.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), ids.len());
    }
}
