//! ARD squared-exponential kernel.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point in input space.
pub type Point = Vec<f64>;

/// Signal variance, per-dimension lengthscales and Gaussian observation noise.
///
/// A zero signal variance is accepted and describes the degenerate zero
/// process; it is useful for testing that evolved covariances stay at zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KernelParams", into = "KernelParams")]
pub struct KernelSpec {
    variance: f64,
    lengthscales: Vec<f64>,
    noise: f64,
}

/// Unvalidated kernel hyperparameters as they appear in config files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelParams {
    pub variance: f64,
    pub lengthscales: Vec<f64>,
    pub noise: f64,
}

impl TryFrom<KernelParams> for KernelSpec {
    type Error = Error;

    fn try_from(p: KernelParams) -> Result<Self> {
        KernelSpec::new(p.variance, p.lengthscales, p.noise)
    }
}

impl From<KernelSpec> for KernelParams {
    fn from(k: KernelSpec) -> Self {
        KernelParams {
            variance: k.variance,
            lengthscales: k.lengthscales,
            noise: k.noise,
        }
    }
}

impl KernelSpec {
    pub fn new(variance: f64, lengthscales: Vec<f64>, noise: f64) -> Result<Self> {
        if !(variance.is_finite() && variance >= 0.0) {
            return Err(Error::input(format!("kernel variance must be >= 0, got {variance}")));
        }
        if lengthscales.is_empty() {
            return Err(Error::input("kernel needs at least one lengthscale"));
        }
        if let Some(l) = lengthscales.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return Err(Error::input(format!("lengthscales must be > 0, got {l}")));
        }
        if !(noise.is_finite() && noise >= 0.0) {
            return Err(Error::input(format!("noise variance must be >= 0, got {noise}")));
        }
        Ok(KernelSpec {
            variance,
            lengthscales,
            noise,
        })
    }

    /// One-dimensional RBF kernel.
    pub fn rbf_1d(variance: f64, lengthscale: f64, noise: f64) -> Result<Self> {
        Self::new(variance, vec![lengthscale], noise)
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn lengthscales(&self) -> &[f64] {
        &self.lengthscales
    }

    pub fn noise(&self) -> f64 {
        self.noise
    }

    pub fn dim(&self) -> usize {
        self.lengthscales.len()
    }

    pub fn with_variance(&self, variance: f64) -> Result<Self> {
        Self::new(variance, self.lengthscales.clone(), self.noise)
    }

    pub fn with_noise(&self, noise: f64) -> Result<Self> {
        Self::new(self.variance, self.lengthscales.clone(), noise)
    }

    /// k(a, b). Callers guarantee matching dimensionality.
    #[inline]
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), self.dim());
        debug_assert_eq!(b.len(), self.dim());
        let r2: f64 = a
            .iter()
            .zip(b)
            .zip(&self.lengthscales)
            .map(|((x, y), l)| {
                let d = (x - y) / l;
                d * d
            })
            .sum();
        self.variance * (-0.5 * r2).exp()
    }

    /// Stationary profile k(d) of a one-dimensional kernel at lag `d`.
    #[inline]
    pub fn eval_lag(&self, d: f64) -> f64 {
        let z = d / self.lengthscales[0];
        self.variance * (-0.5 * z * z).exp()
    }

    pub(crate) fn check_points(&self, xs: &[Point], what: &str) -> Result<()> {
        if let Some((i, p)) = xs.iter().enumerate().find(|(_, p)| p.len() != self.dim()) {
            return Err(Error::input(format!(
                "{what}[{i}] has dimension {}, kernel expects {}",
                p.len(),
                self.dim()
            )));
        }
        Ok(())
    }
}

/// Kernel matrix with entries k(x1_i, x2_j).
pub fn kernel_eval(spec: &KernelSpec, x1: &[Point], x2: &[Point]) -> Result<DMatrix<f64>> {
    spec.check_points(x1, "x1")?;
    spec.check_points(x2, "x2")?;
    Ok(DMatrix::from_fn(x1.len(), x2.len(), |i, j| spec.eval(&x1[i], &x2[j])))
}

/// Prior variances k(x, x) for every input.
pub fn kernel_diag(spec: &KernelSpec, xs: &[Point]) -> DVector<f64> {
    DVector::from_element(xs.len(), spec.variance)
}

/// Wrap scalar inputs as one-dimensional points.
pub fn points_1d(xs: &[f64]) -> Vec<Point> {
    xs.iter().map(|&x| vec![x]).collect()
}
