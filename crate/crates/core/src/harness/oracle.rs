//! Self-checks against quadrature and exact-GP references.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::baselines::{dirac_covariances, InducingSet, Provenance};
use crate::covariance::{
    assemble_kuu, evolve_kuu_direct, evolve_rff_features, kfu_from_start, quadrature_kfu, quadrature_kuu, DirectKuu,
    Driver, RffFeatures, TimeGrid,
};
use crate::error::Result;
use crate::hippo::{evolve_coefficients, legs_basis_eval, CoefficientState, HippoOperator, Scheme};
use crate::kernel::{kernel_eval, points_1d, KernelSpec};
use crate::linalg::{JitterPolicy, SpdFactor};
use crate::quadrature::GaussLegendre;
use crate::spectral::spectral_sample;
use crate::streaming::{fit_first_task, online_update, predict, BasisTag, TaskCovariances};

#[derive(Clone, Debug, Serialize)]
pub struct OracleCheck {
    pub name: &'static str,
    /// Measured error; compared with `tolerance` using `<`.
    pub error: f64,
    pub tolerance: f64,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

fn check(name: &'static str, tolerance: f64, measured: Result<f64>) -> OracleCheck {
    match measured {
        Ok(error) => OracleCheck {
            name,
            error,
            tolerance,
            passed: error < tolerance,
            failure: None,
        },
        Err(e) => OracleCheck {
            name,
            error: f64::NAN,
            tolerance,
            passed: false,
            failure: Some(e.to_string()),
        },
    }
}

/// Run every oracle. Failures are reported in the result, never raised.
pub fn run_oracles(seed: u64) -> Vec<OracleCheck> {
    vec![
        check("basis-orthonormality", 1e-8, orthonormality()),
        check("coefficient-evolution", 1e-2, coefficient_evolution()),
        check("kfu-quadrature", 1e-2, kfu_quadrature()),
        check("kuu-rff-median", 5e-2, kuu_rff(seed)),
        check("kuu-direct-short-horizon", 0.1, kuu_direct()),
        check("dirac-streaming-exactness", 1e-6, dirac_streaming(seed)),
        check("full-gp-equivalence", 1e-8, full_gp(seed)),
    ]
}

fn orthonormality() -> Result<f64> {
    let rule = GaussLegendre::new(256)?;
    let mut worst: f64 = 0.0;
    for t in [0.5, 1.0, 7.3] {
        let (x, w) = rule.on(0.0, t);
        let g = legs_basis_eval(16, t, &x)?;
        for m in 0..16 {
            for n in 0..16 {
                let ip: f64 = (0..x.len()).map(|i| w[i] * g[(i, m)] * g[(i, n)] / t).sum();
                let target = if m == n { 1.0 } else { 0.0 };
                worst = worst.max((ip - target).abs());
            }
        }
    }
    Ok(worst)
}

fn sine(x: f64) -> f64 {
    (std::f64::consts::TAU * x).sin()
}

fn coefficient_evolution() -> Result<f64> {
    let (m, dt, steps) = (16, 1e-3, 1000);
    let op = HippoOperator::new(m, Scheme::Bilinear, dt)?;
    let signal: Vec<f64> = (1..=steps).map(|k| sine(k as f64 * dt)).collect();
    let c0 = CoefficientState::initial(m, 1, dt, signal[0]).c;
    let c = evolve_coefficients(&op, &signal, 1, 1, &c0)?.c;
    let (x, w) = GaussLegendre::new(256)?.on(0.0, 1.0);
    let g = legs_basis_eval(m, 1.0, &x)?;
    let reference = DVector::from_fn(m, |n, _| (0..x.len()).map(|i| w[i] * sine(x[i]) * g[(i, n)]).sum());
    Ok((c - reference).amax())
}

fn kfu_quadrature() -> Result<f64> {
    let (m, dt, steps) = (16, 1e-3, 1000);
    let kernel = KernelSpec::rbf_1d(1.0, 0.2, 0.0)?;
    let op = HippoOperator::new(m, Scheme::Bilinear, dt)?;
    let tracked: Vec<f64> = (0..20).map(|i| 0.025 + 0.05 * i as f64).collect();
    let grid = TimeGrid::new(dt, 1, 1, steps, Driver::Time)?;
    let kfu = kfu_from_start(&op, &kernel, &points_1d(&tracked), &grid)?;
    let mut reference = DMatrix::zeros(tracked.len(), m);
    for (i, x) in tracked.iter().enumerate() {
        reference.set_row(i, &quadrature_kfu(&kernel, &[*x], m, 1.0, 512)?.transpose());
    }
    Ok((kfu - &reference).norm() / reference.norm())
}

fn kuu_rff(seed: u64) -> Result<f64> {
    let (m, dt, steps, n) = (8, 1e-3, 1000, 10_000);
    let kernel = KernelSpec::rbf_1d(1.0, 0.3, 0.0)?;
    let op = HippoOperator::new(m, Scheme::Bilinear, dt)?;
    let sample = spectral_sample(&kernel, n, seed)?;
    let grid = TimeGrid::new(dt, 1, 1, steps, Driver::Time)?;
    let z = evolve_rff_features(&op, &sample, &grid, &RffFeatures::start(&op, &sample, &grid)?)?;
    let kuu = assemble_kuu(z.z(), z.z(), 1.0, n)?;
    SpdFactor::new(&kuu, "K_uu", &JitterPolicy::default())?;
    let reference = quadrature_kuu(&kernel, m, 1.0, 256)?;
    let mut err: Vec<f64> = (kuu - reference).iter().map(|v| v.abs()).collect();
    err.sort_by(f64::total_cmp);
    Ok(0.5 * (err[err.len() / 2 - 1] + err[err.len() / 2]))
}

fn kuu_direct() -> Result<f64> {
    let (m, dt, steps) = (8, 1e-4, 5000);
    let kernel = KernelSpec::rbf_1d(1.0, 0.3, 0.0)?;
    let op = HippoOperator::new(m, Scheme::Bilinear, dt)?;
    let grid = TimeGrid::new(dt, 1, 1, steps, Driver::Time)?;
    let out = evolve_kuu_direct(&op, &kernel, &grid, &DirectKuu::start(&op, &kernel, &grid)?)?;
    let reference = quadrature_kuu(&kernel, m, 0.5, 256)?;
    Ok((out.kuu() - &reference).norm() / reference.norm())
}

fn toy_series(n: usize, seed: u64) -> (Vec<f64>, DVector<f64>) {
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.1).expect("valid normal");
    let x: Vec<f64> = (0..n).map(|i| i as f64 / n as f64).collect();
    let y = DVector::from_iterator(n, x.iter().map(|&v| sine(v) + noise.sample(&mut rng)));
    (x, y)
}

fn rel(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

fn dirac_streaming(seed: u64) -> Result<f64> {
    let kernel = KernelSpec::rbf_1d(1.0, 0.2, 0.01)?;
    let (x, y) = toy_series(150, seed);
    let z = InducingSet::new(points_1d(&(0..20).map(|i| i as f64 / 19.0).collect::<Vec<_>>()), Provenance::Fixed)?;
    let basis = BasisTag::Dirac {
        locations: z.points().to_vec(),
    };
    let covs = |lo: usize, hi: usize| -> Result<TaskCovariances> {
        let (kfu, kuu) = dirac_covariances(&kernel, &points_1d(&x[lo..hi]), &z)?;
        Ok(TaskCovariances {
            basis: basis.clone(),
            kuu,
            kfu,
            kdiag: DVector::from_element(hi - lo, kernel.variance()),
        })
    };
    let batch = fit_first_task(&covs(0, 150)?, &y, &kernel)?.posterior;
    let mut q = fit_first_task(&covs(0, 50)?, &y.rows(0, 50).into_owned(), &kernel)?.posterior;
    for lo in [50, 100] {
        let c = covs(lo, lo + 50)?;
        q = online_update(&q, &c, &c.kuu.clone(), &y.rows(lo, 50).into_owned(), &kernel)?.posterior;
    }
    let mean = rel(
        &DMatrix::from_column_slice(20, 1, q.mean().as_slice()),
        &DMatrix::from_column_slice(20, 1, batch.mean().as_slice()),
    );
    Ok(mean.max(rel(q.cov(), batch.cov())))
}

fn full_gp(seed: u64) -> Result<f64> {
    let kernel = KernelSpec::rbf_1d(1.0, 0.2, 0.05)?;
    let (x, y) = toy_series(40, seed);
    let xs = points_1d(&x);
    let z = InducingSet::new(xs.clone(), Provenance::Fixed)?;
    let (kfu, kuu) = dirac_covariances(&kernel, &xs, &z)?;
    let covs = TaskCovariances {
        basis: BasisTag::Dirac {
            locations: xs.clone(),
        },
        kuu,
        kfu,
        kdiag: DVector::from_element(x.len(), kernel.variance()),
    };
    let q = fit_first_task(&covs, &y, &kernel)?.posterior;
    let test = points_1d(&[0.013, 0.37, 0.58, 0.991]);
    let (k_star, _) = dirac_covariances(&kernel, &test, &z)?;
    let sparse = predict(&q, &covs.basis, &k_star, &DVector::from_element(test.len(), kernel.variance()))?;

    let mut kxx = kernel_eval(&kernel, &xs, &xs)?;
    for i in 0..x.len() {
        kxx[(i, i)] += kernel.noise();
    }
    let f = SpdFactor::new(&kxx, "K_xx + noise", &JitterPolicy::default())?;
    let k_sx = kernel_eval(&kernel, &test, &xs)?;
    let mean = &k_sx * f.solve_vec(&y);
    let var = DVector::from_fn(test.len(), |i, _| {
        let row = k_sx.row(i).transpose();
        kernel.variance() - row.dot(&f.solve_vec(&row))
    });
    Ok((sparse.mean - mean).amax().max((sparse.var - var).amax()))
}
