use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::FiniteDistribution;

/// Reproducible i.i.d. sampling from a base distribution.
///
/// Every draw comes from a ChaCha8 stream selected by `(seed, stream_id,
/// substream)`, so results do not depend on how work is scheduled across threads.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeededSampler {
    pub seed: u64,
    pub stream_id: u64,
    pub base: FiniteDistribution,
}

impl SeededSampler {
    pub fn new(seed: u64, stream_id: u64, base: FiniteDistribution) -> Self {
        Self { seed, stream_id, base }
    }

    /// Generator for one independent substream.
    pub fn rng(&self, substream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(splitmix(self.stream_id ^ splitmix(substream)));
        rng
    }

    pub fn index_distribution(&self) -> Result<WeightedIndex<f64>> {
        WeightedIndex::new(self.base.weights())
            .map_err(|e| Error::InvalidDistribution(e.to_string()))
    }

    /// The first `count` symbol indices of substream 0.
    pub fn draw(&self, count: usize) -> Result<Vec<usize>> {
        self.draw_substream(0, count)
    }

    pub fn draw_substream(&self, substream: u64, count: usize) -> Result<Vec<usize>> {
        let dist = self.index_distribution()?;
        let mut rng = self.rng(substream);
        Ok((0..count).map(|_| dist.sample(&mut rng)).collect())
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
