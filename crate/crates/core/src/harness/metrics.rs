//! Predictive accuracy metrics.

use crate::error::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

fn check(n: usize, others: &[usize]) -> Result<()> {
    if n == 0 {
        return Err(Error::input("metric over an empty set"));
    }
    if others.iter().any(|m| *m != n) {
        return Err(Error::input("metric inputs differ in length"));
    }
    Ok(())
}

/// Root mean squared error.
pub fn metric_rmse(y: &[f64], pred: &[f64]) -> Result<f64> {
    check(y.len(), &[pred.len()])?;
    let mse = y.iter().zip(pred).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / y.len() as f64;
    Ok(mse.sqrt())
}

/// Mean negative log density of `y` under independent Gaussians.
pub fn metric_nlpd(y: &[f64], means: &[f64], vars: &[f64]) -> Result<f64> {
    check(y.len(), &[means.len(), vars.len()])?;
    if let Some(v) = vars.iter().find(|v| v.is_nan() || **v <= 0.0) {
        return Err(Error::input(format!("predictive variance {v} is not positive")));
    }
    let total: f64 = y
        .iter()
        .zip(means)
        .zip(vars)
        .map(|((y, m), v)| 0.5 * (LN_2PI + v.ln() + (y - m) * (y - m) / v))
        .sum();
    Ok(total / y.len() as f64)
}
