//! With the inducing locations held fixed, streaming batch after batch gives
//! the same posterior as one batch fit on all data.

use hippo_gp::kernel::{kernel_eval, points_1d};
use hippo_gp::streaming::{fit_first_task, online_update, predict, BasisTag, TaskCovariances};
use hippo_gp::{KernelSpec, Point};
use nalgebra::DVector;

fn covs(kernel: &KernelSpec, x: &[Point], z: &[Point]) -> hippo_gp::Result<TaskCovariances> {
    Ok(TaskCovariances {
        basis: BasisTag::Dirac { locations: z.to_vec() },
        kuu: kernel_eval(kernel, z, z)?,
        kfu: kernel_eval(kernel, x, z)?,
        kdiag: DVector::from_element(x.len(), kernel.variance()),
    })
}

fn main() -> hippo_gp::Result<()> {
    let kernel = KernelSpec::rbf_1d(1.0, 0.1, 0.01)?;
    let xs: Vec<f64> = (0..200).map(|i| i as f64 / 200.0).collect();
    let y = DVector::from_iterator(xs.len(), xs.iter().map(|t| (9.0 * t).sin()));
    let x = points_1d(&xs);
    let z = points_1d(&(0..12).map(|i| i as f64 / 11.0).collect::<Vec<_>>());
    let kzz = kernel_eval(&kernel, &z, &z)?;

    let batch = fit_first_task(&covs(&kernel, &x, &z)?, &y, &kernel)?.posterior;
    let mut q = fit_first_task(&covs(&kernel, &x[..40], &z)?, &y.rows(0, 40).into(), &kernel)?.posterior;
    for start in (40..200).step_by(40) {
        let part = covs(&kernel, &x[start..start + 40], &z)?;
        q = online_update(&q, &part, &kzz, &y.rows(start, 40).into(), &kernel)?.posterior;
    }
    println!("max |mean difference| {:.2e}", (batch.mean() - q.mean()).amax());
    println!("max |cov difference|  {:.2e}", (batch.cov() - q.cov()).amax());

    let grid = points_1d(&[0.25, 0.5, 0.75]);
    let test = covs(&kernel, &grid, &z)?;
    let p = predict(&q, &test.basis, &test.kfu, &test.kdiag)?;
    for (g, (m, v)) in grid.iter().zip(p.mean.iter().zip(p.var.iter())) {
        println!("f({:.2}) = {m:+.4} ± {:.4}  (true {:+.4})", g[0], v.sqrt(), (9.0 * g[0]).sin());
    }
    Ok(())
}
