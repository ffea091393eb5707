//! Build LegS K_fu and K_uu at one time and compare them with quadrature.

use hippo_gp::covariance::{
    assemble_kuu, evolve_rff_features, kfu_from_start, quadrature_kfu, quadrature_kuu, Driver, RffFeatures, TimeGrid,
};
use hippo_gp::hippo::{HippoOperator, Scheme};
use hippo_gp::kernel::points_1d;
use hippo_gp::spectral::spectral_sample;
use hippo_gp::KernelSpec;

fn main() -> hippo_gp::Result<()> {
    let (order, dt, steps) = (8, 1e-3, 1000);
    let kernel = KernelSpec::rbf_1d(1.0, 0.3, 0.1)?;
    let op = HippoOperator::new(order, Scheme::Bilinear, dt)?;
    let grid = TimeGrid::new(dt, 1, 1, steps, Driver::Time)?;
    let t = steps as f64 * dt;

    let xs = [0.1, 0.5, 0.9];
    let kfu = kfu_from_start(&op, &kernel, &points_1d(&xs), &grid)?;
    let reference = quadrature_kfu(&kernel, &xs[1..2], order, t, 256)?;
    let err = (kfu.row(1).transpose() - &reference).amax();
    println!("K_fu at x = 0.5, t = {t}: max error vs quadrature {err:.2e}");

    let exact = quadrature_kuu(&kernel, order, t, 256)?;
    // A single draw is noisy; average a few.
    for samples in [1000, 10000] {
        let mut total = 0.0;
        for seed in 0..4 {
            let sample = spectral_sample(&kernel, samples, seed)?;
            let first = TimeGrid::new(dt, 1, 1, 1, Driver::Time)?;
            let z = evolve_rff_features(&op, &sample, &grid, &RffFeatures::start(&op, &sample, &first)?)?;
            let kuu = assemble_kuu(z.z(), z.z(), kernel.variance(), samples)?;
            total += (&kuu - &exact).norm() / exact.norm();
        }
        println!("K_uu from {samples:>5} features: mean relative Frobenius error {:.2e}", total / 4.0);
    }
    Ok(())
}
