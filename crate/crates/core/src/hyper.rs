//! Exact-GP marginal likelihood and a derivative-free hyperparameter search.

use nalgebra::{Cholesky, DVector};

use crate::error::{Error, Result};
use crate::kernel::{kernel_eval, KernelSpec, Point};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// log N(y | 0, K + σ_n² I).
pub fn log_marginal_likelihood(kernel: &KernelSpec, x: &[Point], y: &DVector<f64>) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::input("inputs and targets differ in length"));
    }
    let mut k = kernel_eval(kernel, x, x)?;
    for i in 0..x.len() {
        k[(i, i)] += kernel.noise();
    }
    let chol = Cholesky::new(k).ok_or_else(|| Error::Numerical("kernel matrix is not positive definite".into()))?;
    let alpha = chol.solve(y);
    Ok(-0.5 * y.dot(&alpha) - 0.5 * chol.ln_determinant() - 0.5 * x.len() as f64 * LN_2PI)
}

/// Coordinate-search settings.
#[derive(Clone, Copy, Debug)]
pub struct SearchOptions {
    pub sweeps: usize,
    pub iterations: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            sweeps: 3,
            iterations: 48,
        }
    }
}

/// Golden-section maximization of `f` on [lo, hi].
fn golden_max(mut f: impl FnMut(f64) -> f64, lo: f64, hi: f64, iterations: usize) -> f64 {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iterations {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        c
    } else {
        d
    }
}

/// Maximize the exact marginal likelihood over variance, lengthscales and
/// noise by log-scale golden-section coordinate search.
///
/// Brackets are set from the data: variances relative to var(y), lengthscales
/// relative to the input range of each dimension.
pub fn fit_hyperparameters(x: &[Point], y: &DVector<f64>, opts: &SearchOptions) -> Result<KernelSpec> {
    if x.len() < 2 || x.len() != y.len() {
        return Err(Error::input("hyperparameter fit needs at least two matching inputs and targets"));
    }
    let dim = x[0].len();
    let n = y.len() as f64;
    let mean = y.sum() / n;
    let var = (y.map(|v| (v - mean).powi(2)).sum() / n).max(1e-12);
    let ranges: Vec<f64> = (0..dim)
        .map(|d| {
            let (lo, hi) = x
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p[d]), b.max(p[d])));
            if hi > lo {
                hi - lo
            } else {
                1.0
            }
        })
        .collect();

    // theta = [ln σ², ln ℓ_1..ln ℓ_D, ln σ_n²]
    let mut theta: Vec<f64> = std::iter::once(var.ln())
        .chain(ranges.iter().map(|r| (r / 4.0).ln()))
        .chain(std::iter::once((0.1 * var).ln()))
        .collect();
    let mut bounds: Vec<(f64, f64)> = vec![((1e-3 * var).ln(), (1e2 * var).ln())];
    bounds.extend(ranges.iter().map(|r| ((1e-3 * r).ln(), (1e2 * r).ln())));
    bounds.push(((1e-6 * var).ln(), var.ln()));

    let spec_of = |t: &[f64]| KernelSpec::new(t[0].exp(), t[1..=dim].iter().map(|v| v.exp()).collect(), t[dim + 1].exp());
    let objective = |t: &[f64]| -> f64 {
        spec_of(t)
            .and_then(|k| log_marginal_likelihood(&k, x, y))
            .unwrap_or(f64::NEG_INFINITY)
    };

    for _ in 0..opts.sweeps {
        for i in 0..theta.len() {
            let (lo, hi) = bounds[i];
            let mut trial = theta.clone();
            let best = golden_max(
                |v| {
                    trial[i] = v;
                    objective(&trial)
                },
                lo,
                hi,
                opts.iterations,
            );
            let mut candidate = theta.clone();
            candidate[i] = best;
            if objective(&candidate) >= objective(&theta) {
                theta = candidate;
            }
        }
    }
    spec_of(&theta)
}
