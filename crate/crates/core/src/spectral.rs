//! Monte-Carlo frequency samples from the RBF spectral density.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::KernelSpec;

/// Frequencies w_1..w_N, stored row-major as N rows of `dim` entries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralSample {
    dim: usize,
    frequencies: Vec<f64>,
    seed: u64,
}

impl SpectralSample {
    pub fn len(&self) -> usize {
        self.frequencies.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// The n-th frequency vector.
    pub fn frequency(&self, n: usize) -> &[f64] {
        &self.frequencies[n * self.dim..(n + 1) * self.dim]
    }

    /// All frequencies of a one-dimensional sample.
    pub fn scalars(&self) -> &[f64] {
        &self.frequencies
    }

    /// Projections w_nᵀx for every frequency.
    pub fn project_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dim);
        for (n, o) in out.iter_mut().enumerate() {
            *o = self.frequency(n).iter().zip(x).map(|(w, xi)| w * xi).sum();
        }
    }

    /// Cheap identity used to detect a frequency set being swapped mid-stream.
    pub fn fingerprint(&self) -> (u64, usize, usize) {
        (self.seed, self.len(), self.dim)
    }
}

/// Draw `n` scalar frequencies for a one-dimensional RBF kernel.
pub fn spectral_sample(spec: &KernelSpec, n: usize, seed: u64) -> Result<SpectralSample> {
    if spec.dim() != 1 {
        return Err(Error::Unsupported(format!(
            "scalar spectral sampling needs a 1D kernel, got dimension {}",
            spec.dim()
        )));
    }
    spectral_sample_ard(spec, n, seed)
}

/// Draw `n` frequency vectors from the ARD-RBF spectral density N(0, diag(1/ℓ²)).
///
/// Used by multidimensional streams, where the features are driven by wᵀx along
/// the pseudo-time path.
pub fn spectral_sample_ard(spec: &KernelSpec, n: usize, seed: u64) -> Result<SpectralSample> {
    if n == 0 {
        return Err(Error::input("spectral sample needs at least one frequency"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = spec.dim();
    let mut frequencies = Vec::with_capacity(n * dim);
    for _ in 0..n {
        for l in spec.lengthscales() {
            let z: f64 = StandardNormal.sample(&mut rng);
            frequencies.push(z / l);
        }
    }
    Ok(SpectralSample {
        dim,
        frequencies,
        seed,
    })
}

/// Monte-Carlo kernel estimate (σ²/N) Σ cos(wᵀ(x − x′)).
pub fn rff_kernel(spec: &KernelSpec, sample: &SpectralSample, x: &[f64], y: &[f64]) -> f64 {
    let n = sample.len();
    let s: f64 = (0..n)
        .map(|i| {
            let w = sample.frequency(i);
            let a: f64 = w.iter().zip(x).map(|(w, v)| w * v).sum();
            let b: f64 = w.iter().zip(y).map(|(w, v)| w * v).sum();
            a.cos() * b.cos() + a.sin() * b.sin()
        })
        .sum();
    spec.variance() * s / n as f64
}
