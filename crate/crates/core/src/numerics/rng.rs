use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::NumericsError;

/// Seeded random stream backed by the ChaCha8 counter-based generator.
///
/// Gaussian draws use the ziggurat sampler of `rand_distr::StandardNormal`.
/// ChaCha's 64-bit stream parameter gives [`RngStream::substream`] disjoint
/// sequences for distinct ids under the same seed. [`RngStream::fork`]
/// instead re-keys the generator, which is how a chain carves internal
/// streams (regime, noise, minibatch) out of whatever stream it was given.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    rng: ChaCha8Rng,
}

const FORK_SALT: u64 = 0x2545_f491_4f6c_dd1d;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        RngStream { seed, stream, rng }
    }

    /// Sub-stream `id` of this stream's seed, starting from its beginning.
    pub fn substream(&self, id: u64) -> Self {
        Self::with_stream(self.seed, id)
    }

    /// Independent stream keyed by (seed, stream, tag).
    pub fn fork(&self, tag: u64) -> Self {
        let key = splitmix64(self.seed ^ splitmix64(self.stream ^ FORK_SALT))
            ^ splitmix64(tag.wrapping_add(FORK_SALT));
        Self::with_stream(key, tag)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    pub fn normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    pub fn fill_normal(&mut self, out: &mut [f64]) {
        for o in out.iter_mut() {
            *o = self.rng.sample(StandardNormal);
        }
    }

    /// `n` i.i.d. standard normal draws.
    pub fn standard_normal(&mut self, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n];
        self.fill_normal(&mut out);
        out
    }

    /// Uniform on [0, 1).
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Exponential with the given rate, by inversion.
    pub fn exponential(&mut self, rate: f64) -> f64 {
        // 1 - U lies in (0, 1], so the log is finite
        -(1.0 - self.uniform()).ln() / rate
    }

    /// Draws an index from a probability row by inverse CDF. A draw landing
    /// exactly on a cumulative threshold goes to the lower index.
    pub fn sample_categorical(&mut self, weights: &[f64]) -> Result<usize, NumericsError> {
        check_probability_row(weights)?;
        Ok(self.categorical_unchecked(weights))
    }

    /// Inverse-CDF draw without validating the weights.
    pub fn categorical_unchecked(&mut self, weights: &[f64]) -> usize {
        let u = self.uniform();
        let mut acc = 0.0;
        let mut last_positive = 0;
        for (i, w) in weights.iter().enumerate() {
            if *w > 0.0 {
                last_positive = i;
            }
            acc += w;
            if *w > 0.0 && u <= acc {
                return i;
            }
        }
        // rounding left the total a hair below u
        last_positive
    }

    /// Uniform sample of `amount` distinct indices from `0..length`.
    pub fn sample_indices(&mut self, length: usize, amount: usize) -> Vec<usize> {
        rand::seq::index::sample(&mut self.rng, length, amount).into_vec()
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }
}

pub(crate) fn check_probability_row(weights: &[f64]) -> Result<(), NumericsError> {
    for (index, &value) in weights.iter().enumerate() {
        if value < 0.0 || value.is_nan() {
            return Err(NumericsError::NegativeWeight { index, value });
        }
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(NumericsError::UnnormalizedWeights(total));
    }
    Ok(())
}
