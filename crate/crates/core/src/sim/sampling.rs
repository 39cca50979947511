//! Poisson variates and counter-based random streams.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{Exposures, PairedDataset, ParentModel};
use crate::error::Result;
use crate::model::SourceModel;
use crate::special::ln_factorial;

/// Means below this use sequential inversion, above it transformed rejection.
pub const INVERSION_LIMIT: f64 = 10.0;

/// Poisson(`mean`) sampler: inversion for small means, Hormann's PTRS
/// (transformed rejection with squeeze) for `mean >= 10`.
#[derive(Debug, Clone, Copy)]
pub struct PoissonSampler {
    mean: f64,
    method: Method,
}

#[derive(Debug, Clone, Copy)]
enum Method {
    Zero,
    Inversion { p0: f64 },
    Ptrs { b: f64, a: f64, inv_alpha: f64, v_r: f64, ln_mean: f64 },
}

impl PoissonSampler {
    /// `mean` must be finite and non-negative; a zero mean always yields 0.
    pub fn new(mean: f64) -> Self {
        assert!(mean >= 0.0 && mean.is_finite(), "Poisson mean must be finite and >= 0, got {mean}");
        let method = if mean == 0.0 {
            Method::Zero
        } else if mean < INVERSION_LIMIT {
            Method::Inversion { p0: (-mean).exp() }
        } else {
            let b = 0.931 + 2.53 * mean.sqrt();
            Method::Ptrs {
                b,
                a: -0.059 + 0.02483 * b,
                inv_alpha: 1.1239 + 1.1328 / (b - 3.4),
                v_r: 0.9277 - 3.6224 / (b - 2.0),
                ln_mean: mean.ln(),
            }
        };
        PoissonSampler { mean, method }
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        match self.method {
            Method::Zero => 0,
            Method::Inversion { p0 } => {
                let u: f64 = rng.random();
                let (mut k, mut p, mut cdf) = (0u64, p0, p0);
                // the tail beyond k = 200 is below 1e-150 for mean < 10
                while u > cdf && k < 200 {
                    k += 1;
                    p *= self.mean / k as f64;
                    cdf += p;
                }
                k
            }
            Method::Ptrs { b, a, inv_alpha, v_r, ln_mean } => loop {
                let u = rng.random::<f64>() - 0.5;
                let v: f64 = rng.random();
                let us = 0.5 - u.abs();
                let k = ((2.0 * a / us + b) * u + self.mean + 0.43).floor();
                if us >= 0.07 && v <= v_r {
                    return k as u64;
                }
                if k < 0.0 || (us < 0.013 && v > us) {
                    continue;
                }
                let lhs = v.ln() + inv_alpha.ln() - (a / (us * us) + b).ln();
                let rhs = -self.mean + k * ln_mean - ln_factorial(k as u64);
                if lhs <= rhs {
                    return k as u64;
                }
            },
        }
    }
}

/// Identifies one reproducible random stream: `stream` selects one of the
/// 2^64 ChaCha streams under the key derived from `key`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamSeed {
    pub key: u64,
    pub stream: u64,
}

impl StreamSeed {
    pub fn new(key: u64, stream: u64) -> Self {
        StreamSeed { key, stream }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.key);
        rng.set_stream(self.stream);
        rng
    }
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Key for one experiment, a function of the master seed and the parent and
/// dataset size only (not of the position of a cell in a grid).
pub fn parent_key(master: u64, parent: &ParentModel, n: usize) -> u64 {
    let mut h = mix64(master);
    for t in &parent.theta {
        h = mix64(h ^ t.to_bits());
    }
    for word in [parent.beta.to_bits(), n as u64] {
        h = mix64(h ^ word);
    }
    h
}

/// [`parent_key`] for the constant source model.
pub fn cell_key(master: u64, theta: f64, beta: f64, n: usize) -> u64 {
    parent_key(master, &ParentModel::constant(theta, beta), n)
}

/// Draws `S_i ~ Poisson((mu_i + beta) t_S)` and `B_i ~ Poisson(beta t_B)` on
/// the grid `x_i = 1..=n`.
pub fn sample_dataset_with<R: Rng + ?Sized>(
    parent: &ParentModel,
    model: &dyn SourceModel,
    n: usize,
    exposures: Exposures,
    rng: &mut R,
) -> Result<PairedDataset> {
    let x: Vec<f64> = (1..=n).map(|i| i as f64).collect();
    let (lambda, beta) = parent.expected_counts(model, &x, exposures)?;
    let mut s = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    let mut cache: Option<PoissonSampler> = None;
    for &mean in &lambda {
        let sampler = match cache {
            Some(c) if c.mean() == mean => c,
            _ => PoissonSampler::new(mean),
        };
        cache = Some(sampler);
        s.push(sampler.sample(rng));
    }
    let bkg = PoissonSampler::new(beta.first().copied().unwrap_or(0.0));
    for _ in 0..n {
        b.push(bkg.sample(rng));
    }
    PairedDataset::new(x, s, b, exposures)
}

/// [`sample_dataset_with`] on the stream `seed`; identical seeds give identical datasets.
pub fn sample_dataset(
    parent: &ParentModel,
    model: &dyn SourceModel,
    n: usize,
    exposures: Exposures,
    seed: StreamSeed,
) -> Result<PairedDataset> {
    sample_dataset_with(parent, model, n, exposures, &mut seed.rng())
}
