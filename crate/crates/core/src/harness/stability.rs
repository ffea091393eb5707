//! Long-horizon comparison of the direct matrix-ODE K_uu against the
//! RFF-assembled K_uu, both measured against double quadrature.

use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::covariance::{
    assemble_kuu, evolve_kuu_direct, evolve_rff_features, quadrature_kuu, DirectKuu, Driver, RffFeatures, TimeGrid,
};
use crate::error::{Error, Result};
use crate::hippo::{HippoOperator, Scheme};
use crate::kernel::KernelSpec;
use crate::spectral::spectral_sample;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StabilityOptions {
    pub order: usize,
    pub lengthscale: f64,
    pub variance: f64,
    pub dt: f64,
    pub horizon: f64,
    /// Spacing between recorded checkpoints.
    pub every: f64,
    pub rff_samples: usize,
    pub seed: u64,
    pub quadrature_nodes: usize,
    pub scheme: Scheme,
}

impl Default for StabilityOptions {
    fn default() -> Self {
        StabilityOptions {
            order: 8,
            lengthscale: 0.3,
            variance: 1.0,
            dt: 1e-3,
            horizon: 5.0,
            every: 0.25,
            rff_samples: 1000,
            seed: 0,
            quadrature_nodes: 256,
            scheme: Scheme::Bilinear,
        }
    }
}

/// Relative Frobenius deviations from the quadrature K_uu at time `t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviationPoint {
    pub step: usize,
    pub t: f64,
    /// Absent once the direct path has diverged.
    pub direct: Option<f64>,
    pub rff: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Divergence {
    pub step: usize,
    pub t: f64,
    pub norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub options: StabilityOptions,
    pub trajectory: Vec<DeviationPoint>,
    pub direct_divergence: Option<Divergence>,
}

fn relative_frobenius(a: &nalgebra::DMatrix<f64>, reference: &nalgebra::DMatrix<f64>) -> f64 {
    (a - reference).norm() / reference.norm()
}

/// Evolve both K_uu paths from t = dt to the horizon and record deviations at
/// each checkpoint. A divergent direct path is recorded, not raised.
pub fn stability_report(opts: &StabilityOptions) -> Result<StabilityReport> {
    if !(opts.dt > 0.0 && opts.horizon > opts.dt && opts.every >= opts.dt) {
        return Err(Error::input("need 0 < dt <= every and horizon > dt"));
    }
    let kernel = KernelSpec::rbf_1d(opts.variance, opts.lengthscale, 0.0)?;
    let op = HippoOperator::new(opts.order, opts.scheme, opts.dt)?;
    let sample = spectral_sample(&kernel, opts.rff_samples, opts.seed)?;
    let last = (opts.horizon / opts.dt).round() as usize;
    let every = ((opts.every / opts.dt).round() as usize).max(1);
    let mut checkpoints: Vec<usize> = (1..).map(|i| i * every).take_while(|&k| k < last).collect();
    checkpoints.push(last);

    let grid = |start, end| TimeGrid::new(opts.dt, 1, start, end, Driver::Time);
    let first = grid(1, checkpoints[0])?;
    let mut direct = Some(DirectKuu::start(&op, &kernel, &first)?);
    let mut features = RffFeatures::start(&op, &sample, &first)?;
    let mut divergence = None;
    let mut trajectory = Vec::with_capacity(checkpoints.len());

    for &k in &checkpoints {
        let t = k as f64 * opts.dt;
        let reference = quadrature_kuu(&kernel, opts.order, t, opts.quadrature_nodes)?;

        features = evolve_rff_features(&op, &sample, &grid(features.step_index(), k)?, &features)?;
        let rff = assemble_kuu(features.z(), features.z(), opts.variance, opts.rff_samples)?;

        let mut direct_dev = None;
        if let Some(state) = direct.take() {
            match evolve_kuu_direct(&op, &kernel, &grid(state.step_index(), k)?, &state) {
                Ok(next) => {
                    direct_dev = Some(relative_frobenius(next.kuu(), &reference));
                    direct = Some(next);
                }
                Err(Error::DirectOdeInstability { step, norm }) => {
                    divergence = Some(Divergence {
                        step,
                        t: step as f64 * opts.dt,
                        norm,
                    });
                }
                Err(e) => return Err(e),
            }
        }
        trajectory.push(DeviationPoint {
            step: k,
            t,
            direct: direct_dev,
            rff: relative_frobenius(&rff, &reference),
        });
    }
    Ok(StabilityReport {
        options: opts.clone(),
        trajectory,
        direct_divergence: divergence,
    })
}

impl StabilityReport {
    /// Write `stability.json` and `stability.csv` (columns step, t, direct, rff;
    /// an empty direct cell marks a diverged path).
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("stability.json"), serde_json::to_string_pretty(self)?)?;
        let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join("stability.csv"))?);
        writeln!(f, "step,t,direct,rff")?;
        for p in &self.trajectory {
            let d = p.direct.map(|v| v.to_string()).unwrap_or_default();
            writeln!(f, "{},{},{},{}", p.step, p.t, d, p.rff)?;
        }
        f.flush()?;
        Ok(())
    }
}
