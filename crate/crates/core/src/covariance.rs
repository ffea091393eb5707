//! Time evolution of interdomain prior covariances.
//!
//! All quantities are LegS projections of kernel sections, driven along a
//! scalar time axis: either the time itself (1D series) or an ordered path of
//! inputs assigned to pseudo-times k·dt (multidimensional streams).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hippo::{legs_basis_eval, HippoOperator, Scheme};
use crate::kernel::{KernelSpec, Point};
use crate::linalg::symmetrize_mut;
use crate::quadrature::GaussLegendre;
use crate::spectral::SpectralSample;

/// What the kernel is evaluated against at each step.
#[derive(Clone, Copy, Debug)]
pub enum Driver<'a> {
    /// The scalar time t_k = k·dt.
    Time,
    /// `path[k - 1]` is the input assigned to step k.
    Path(&'a [Point]),
}

/// Step range [start, end] with stride, over a driver.
#[derive(Clone, Copy, Debug)]
pub struct TimeGrid<'a> {
    pub dt: f64,
    pub stride: usize,
    pub start: usize,
    pub end: usize,
    pub driver: Driver<'a>,
}

impl<'a> TimeGrid<'a> {
    pub fn new(dt: f64, stride: usize, start: usize, end: usize, driver: Driver<'a>) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::input(format!("grid step must be > 0, got {dt}")));
        }
        if start == 0 || stride == 0 {
            return Err(Error::input("grid start and stride must be >= 1"));
        }
        if end < start {
            return Err(Error::input(format!("grid end {end} precedes start {start}")));
        }
        if !(end - start).is_multiple_of(stride) {
            return Err(Error::input(format!(
                "grid span {start}..{end} is not a multiple of stride {stride}"
            )));
        }
        if let Driver::Path(p) = driver {
            if p.len() < end {
                return Err(Error::input(format!(
                    "driver path has {} inputs, grid needs {end}",
                    p.len()
                )));
            }
        }
        Ok(TimeGrid {
            dt,
            stride,
            start,
            end,
            driver,
        })
    }

    /// Continue from this grid's end to `end`.
    pub fn continue_to(&self, end: usize) -> Result<Self> {
        TimeGrid::new(self.dt, self.stride, self.end, end, self.driver)
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    /// Write the driver input of step k into `buf` and return it.
    #[inline]
    fn input<'b>(&self, k: usize, buf: &'b mut [f64; 1]) -> &'b [f64]
    where
        'a: 'b,
    {
        match self.driver {
            Driver::Time => {
                buf[0] = k as f64 * self.dt;
                &buf[..]
            }
            Driver::Path(p) => &p[k - 1],
        }
    }

    fn check_operator(&self, op: &HippoOperator) -> Result<()> {
        if (op.dt() - self.dt).abs() > 1e-12 * self.dt {
            return Err(Error::input(format!(
                "operator step {} differs from grid step {}",
                op.dt(),
                self.dt
            )));
        }
        Ok(())
    }
}

/// Advance an M×C block across the grid, with `drive(k, out)` filling the
/// per-column driving samples at step k.
fn evolve_block(
    op: &HippoOperator,
    grid: &TimeGrid,
    block: &mut DMatrix<f64>,
    what: &str,
    mut drive: impl FnMut(usize, &mut [f64]),
) -> Result<()> {
    let cols = block.ncols();
    let mut now = vec![0.0; cols];
    let mut next = vec![0.0; cols];
    if grid.end > grid.start {
        drive(grid.start, &mut now);
    }
    let mut k = grid.start;
    while k < grid.end {
        let k1 = k + grid.stride;
        drive(k1, &mut next);
        if let Some(bad) = next.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: format!("{what} driver (column {bad})"),
                step: k1,
            });
        }
        op.step_block(k, grid.stride, block, &now, &next);
        std::mem::swap(&mut now, &mut next);
        k = k1;
    }
    Ok(())
}

/// K_fu rows for a fixed set of tracked inputs, stored column-wise (M × n).
#[derive(Clone, Debug, PartialEq)]
pub struct KfuRows {
    k: usize,
    coeffs: DMatrix<f64>,
}

impl KfuRows {
    /// Zero-order-hold state at the grid start: row n is k(x_n, x(t_start))·e0.
    pub fn start(op: &HippoOperator, kernel: &KernelSpec, tracked: &[Point], grid: &TimeGrid) -> Result<Self> {
        grid.check_operator(op)?;
        kernel.check_points(tracked, "tracked")?;
        let mut buf = [0.0];
        let x0 = grid.input(grid.start, &mut buf);
        check_driver_dim(kernel, x0)?;
        let mut coeffs = DMatrix::zeros(op.order(), tracked.len());
        for (j, x) in tracked.iter().enumerate() {
            coeffs[(0, j)] = kernel.eval(x, x0);
        }
        Ok(KfuRows {
            k: grid.start,
            coeffs,
        })
    }

    pub fn step_index(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.coeffs.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.ncols() == 0
    }

    /// n×M matrix of covariances between f(x_n) and the inducing variables.
    pub fn kfu(&self) -> DMatrix<f64> {
        self.coeffs.transpose()
    }
}

fn check_driver_dim(kernel: &KernelSpec, x: &[f64]) -> Result<()> {
    if x.len() != kernel.dim() {
        return Err(Error::input(format!(
            "driver input has dimension {}, kernel expects {}",
            x.len(),
            kernel.dim()
        )));
    }
    Ok(())
}

/// Evolve K_fu rows across the grid.
pub fn evolve_kfu(
    op: &HippoOperator,
    kernel: &KernelSpec,
    tracked: &[Point],
    grid: &TimeGrid,
    state: &KfuRows,
) -> Result<KfuRows> {
    grid.check_operator(op)?;
    kernel.check_points(tracked, "tracked")?;
    if state.k != grid.start {
        return Err(Error::state(format!(
            "K_fu state is at step {}, grid starts at {}",
            state.k, grid.start
        )));
    }
    if state.len() != tracked.len() {
        return Err(Error::state(format!(
            "K_fu state tracks {} inputs, {} supplied",
            state.len(),
            tracked.len()
        )));
    }
    let mut coeffs = state.coeffs.clone();
    let mut buf = [0.0];
    evolve_block(op, grid, &mut coeffs, "kernel", |k, out| {
        let x = grid.input(k, &mut buf);
        for (o, xn) in out.iter_mut().zip(tracked) {
            *o = kernel.eval(xn, x);
        }
    })?;
    Ok(KfuRows { k: grid.end, coeffs })
}

/// K_fu rows for `tracked` evolved from the grid start, returned as n×M.
pub fn kfu_from_start(op: &HippoOperator, kernel: &KernelSpec, tracked: &[Point], grid: &TimeGrid) -> Result<DMatrix<f64>> {
    let s = KfuRows::start(op, kernel, tracked, grid)?;
    Ok(evolve_kfu(op, kernel, tracked, grid, &s)?.kfu())
}

/// Projected random Fourier features Z (M × 2N, cos block then sin block).
#[derive(Clone, Debug, PartialEq)]
pub struct RffFeatures {
    k: usize,
    fingerprint: (u64, usize, usize),
    z: DMatrix<f64>,
}

impl RffFeatures {
    pub fn start(op: &HippoOperator, sample: &SpectralSample, grid: &TimeGrid) -> Result<Self> {
        grid.check_operator(op)?;
        let n = sample.len();
        let mut proj = vec![0.0; n];
        let mut buf = [0.0];
        let x0 = grid.input(grid.start, &mut buf);
        if x0.len() != sample.dim() {
            return Err(Error::input("driver and frequency dimensions differ"));
        }
        sample.project_into(x0, &mut proj);
        let mut z = DMatrix::zeros(op.order(), 2 * n);
        for (i, p) in proj.iter().enumerate() {
            z[(0, i)] = p.cos();
            z[(0, n + i)] = p.sin();
        }
        Ok(RffFeatures {
            k: grid.start,
            fingerprint: sample.fingerprint(),
            z,
        })
    }

    pub fn step_index(&self) -> usize {
        self.k
    }

    pub fn z(&self) -> &DMatrix<f64> {
        &self.z
    }

    pub fn samples(&self) -> usize {
        self.z.ncols() / 2
    }
}

/// Evolve RFF feature columns across the grid.
pub fn evolve_rff_features(
    op: &HippoOperator,
    sample: &SpectralSample,
    grid: &TimeGrid,
    state: &RffFeatures,
) -> Result<RffFeatures> {
    grid.check_operator(op)?;
    if state.fingerprint != sample.fingerprint() {
        return Err(Error::state("frequency set changed mid-stream"));
    }
    if state.k != grid.start {
        return Err(Error::state(format!(
            "feature state is at step {}, grid starts at {}",
            state.k, grid.start
        )));
    }
    let n = sample.len();
    let mut z = state.z.clone();
    let mut proj = vec![0.0; n];
    let mut buf = [0.0];
    evolve_block(op, grid, &mut z, "feature", |k, out| {
        sample.project_into(grid.input(k, &mut buf), &mut proj);
        for (i, p) in proj.iter().enumerate() {
            let (s, c) = p.sin_cos();
            out[i] = c;
            out[n + i] = s;
        }
    })?;
    Ok(RffFeatures {
        k: grid.end,
        fingerprint: state.fingerprint,
        z,
    })
}

/// (σ²/N)·Z_a Z_bᵀ. Equal snapshots give a symmetrized K_uu; different
/// snapshots of the same frequency set give the cross-covariance between
/// inducing variables defined at the two times.
pub fn assemble_kuu(z_a: &DMatrix<f64>, z_b: &DMatrix<f64>, variance: f64, n: usize) -> Result<DMatrix<f64>> {
    if z_a.ncols() != z_b.ncols() || z_a.ncols() != 2 * n {
        return Err(Error::input(format!(
            "feature snapshots have {} and {} columns, expected {}",
            z_a.ncols(),
            z_b.ncols(),
            2 * n
        )));
    }
    let mut k = z_a * z_b.transpose() * (variance / n as f64);
    if z_a == z_b {
        symmetrize_mut(&mut k);
    }
    Ok(k)
}

/// K_fu rows implied by the RFF kernel approximation itself:
/// (σ²/N)·[cos(Wx); sin(Wx)]ᵀ Zᵀ for each input x.
///
/// Together with [`assemble_kuu`] on the same snapshot this gives a joint
/// prior over (f, u) that is an exact Gram matrix, hence positive
/// semidefinite for any N.
pub fn kfu_from_features(sample: &SpectralSample, z: &DMatrix<f64>, variance: f64, x: &[Point]) -> Result<DMatrix<f64>> {
    let n = sample.len();
    if z.ncols() != 2 * n {
        return Err(Error::input(format!("feature snapshot has {} columns, expected {}", z.ncols(), 2 * n)));
    }
    if let Some(p) = x.iter().find(|p| p.len() != sample.dim()) {
        return Err(Error::input(format!("input of dimension {} for {}-dimensional frequencies", p.len(), sample.dim())));
    }
    let mut phi = DMatrix::zeros(2 * n, x.len());
    let mut proj = vec![0.0; n];
    for (j, p) in x.iter().enumerate() {
        sample.project_into(p, &mut proj);
        for (i, v) in proj.iter().enumerate() {
            let (s, c) = v.sin_cos();
            phi[(i, j)] = c;
            phi[(n + i, j)] = s;
        }
    }
    Ok((z * phi).transpose() * (variance / n as f64))
}

/// State of the direct matrix-ODE path: K_uu and the boundary coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct DirectKuu {
    k: usize,
    kuu: DMatrix<f64>,
    boundary: DVector<f64>,
}

impl DirectKuu {
    /// At the first step the window is shorter than any lengthscale of
    /// interest, so K_uu ≈ σ² e0 e0ᵀ and the boundary projection is the
    /// zero-order-hold k(t_start)·e0.
    pub fn start(op: &HippoOperator, kernel: &KernelSpec, grid: &TimeGrid) -> Result<Self> {
        grid.check_operator(op)?;
        direct_preconditions(kernel, grid)?;
        let m = op.order();
        let mut kuu = DMatrix::zeros(m, m);
        kuu[(0, 0)] = kernel.variance();
        let mut boundary = DVector::zeros(m);
        boundary[0] = kernel.eval_lag(grid.time(grid.start));
        Ok(DirectKuu {
            k: grid.start,
            kuu,
            boundary,
        })
    }

    pub fn step_index(&self) -> usize {
        self.k
    }

    pub fn kuu(&self) -> &DMatrix<f64> {
        &self.kuu
    }

    /// Parity-corrected boundary vector c_m = (−1)^m c̃_m.
    pub fn boundary(&self) -> DVector<f64> {
        parity(&self.boundary)
    }
}

fn direct_preconditions(kernel: &KernelSpec, grid: &TimeGrid) -> Result<()> {
    if kernel.dim() != 1 || !matches!(grid.driver, Driver::Time) {
        return Err(Error::Unsupported(
            "direct K_uu evolution needs a 1D kernel on the time axis".into(),
        ));
    }
    Ok(())
}

fn parity(c: &DVector<f64>) -> DVector<f64> {
    DVector::from_fn(c.len(), |m, _| if m % 2 == 0 { c[m] } else { -c[m] })
}

/// G = c Bᵀ + B cᵀ for the parity-corrected boundary vector.
fn boundary_term(op: &HippoOperator, c_tilde: &DVector<f64>) -> DMatrix<f64> {
    let c = parity(c_tilde);
    let cb = &c * op.b().transpose();
    &cb + cb.transpose()
}

/// Solve T X + X Tᵀ = R for lower-triangular T.
fn triangular_sylvester(t: &DMatrix<f64>, r: &DMatrix<f64>) -> DMatrix<f64> {
    let m = t.nrows();
    let mut x = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            let mut acc = r[(i, j)];
            for k in 0..i {
                acc -= t[(i, k)] * x[(k, j)];
            }
            for k in 0..j {
                acc -= x[(i, k)] * t[(j, k)];
            }
            x[(i, j)] = acc / (t[(i, i)] + t[(j, j)]);
        }
    }
    x
}

/// Step the matrix ODE dK/dt = (A K + K Aᵀ + c Bᵀ + B cᵀ)/t jointly with the
/// boundary recurrence driven by the lag profile k(t).
///
/// Experimental; the system is stiff and can diverge over long horizons.
pub fn evolve_kuu_direct(
    op: &HippoOperator,
    kernel: &KernelSpec,
    grid: &TimeGrid,
    state: &DirectKuu,
) -> Result<DirectKuu> {
    evolve_kuu_direct_observed(op, kernel, grid, state, |_, _| {})
}

/// [`evolve_kuu_direct`] calling `observe(k, K_uu)` after every step.
pub fn evolve_kuu_direct_observed(
    op: &HippoOperator,
    kernel: &KernelSpec,
    grid: &TimeGrid,
    state: &DirectKuu,
    mut observe: impl FnMut(usize, &DMatrix<f64>),
) -> Result<DirectKuu> {
    grid.check_operator(op)?;
    direct_preconditions(kernel, grid)?;
    if state.k != grid.start {
        return Err(Error::state(format!(
            "direct K_uu state is at step {}, grid starts at {}",
            state.k, grid.start
        )));
    }
    let m = op.order();
    let a = op.a();
    let limit = 1e6 * kernel.variance();
    let mut kuu = state.kuu.clone();
    let mut c = state.boundary.clone();
    let mut k = grid.start;
    let s = grid.stride;
    while k < grid.end {
        let k1 = k + s;
        let r0 = s as f64 / k as f64;
        let r1 = s as f64 / k1 as f64;
        let g_now = boundary_term(op, &c);
        op.step(k, s, &mut c, kernel.eval_lag(grid.time(k)), kernel.eval_lag(grid.time(k1)));
        let ak = a * &kuu;
        let drift = &ak + ak.transpose();
        kuu = match op.scheme() {
            Scheme::ForwardEuler => &kuu + (drift + g_now) * r0,
            Scheme::Bilinear => {
                let g_next = boundary_term(op, &c);
                let rhs = &kuu + (drift + g_now) * (0.5 * r0) + g_next * (0.5 * r1);
                let t = DMatrix::identity(m, m) * 0.5 - a * (0.5 * r1);
                triangular_sylvester(&t, &rhs)
            }
        };
        symmetrize_mut(&mut kuu);
        let norm = kuu.amax();
        if !norm.is_finite() || norm > limit {
            return Err(Error::DirectOdeInstability { step: k1, norm });
        }
        observe(k1, &kuu);
        k = k1;
    }
    Ok(DirectKuu {
        k: grid.end,
        kuu,
        boundary: c,
    })
}

/// Snapshot of evolved quantities at one step, as stored in stream checkpoints.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CovarianceState {
    pub t: f64,
    pub k: usize,
    pub kfu: Option<DMatrix<f64>>,
    pub features: Option<DMatrix<f64>>,
    pub kuu: Option<DMatrix<f64>>,
    pub boundary: Option<DVector<f64>>,
}

/// ∫₀ᵗ k(x, s) φ_m(s) ds for each m, by Gauss-Legendre quadrature.
pub fn quadrature_kfu(kernel: &KernelSpec, x: &[f64], m: usize, t: f64, nodes: usize) -> Result<DVector<f64>> {
    let (s, w) = GaussLegendre::new(nodes)?.on(0.0, t);
    let g = legs_basis_eval(m, t, &s)?;
    let kv: Vec<f64> = s.iter().map(|si| kernel.eval(x, &[*si])).collect();
    Ok(DVector::from_fn(m, |n, _| {
        (0..s.len()).map(|i| w[i] * kv[i] * g[(i, n)] / t).sum()
    }))
}

/// ∬ k(x, x′) φ_l(x) φ_m(x′) over [0,t]² by tensor Gauss-Legendre quadrature.
pub fn quadrature_kuu(kernel: &KernelSpec, m: usize, t: f64, nodes: usize) -> Result<DMatrix<f64>> {
    let (s, w) = GaussLegendre::new(nodes)?.on(0.0, t);
    let g = legs_basis_eval(m, t, &s)?;
    let phi = DMatrix::from_fn(s.len(), m, |i, n| w[i] * g[(i, n)] / t);
    let kss = DMatrix::from_fn(s.len(), s.len(), |i, j| kernel.eval(&[s[i]], &[s[j]]));
    let mut out = phi.transpose() * kss * &phi;
    symmetrize_mut(&mut out);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::points_1d;
    use crate::linalg::{JitterPolicy, SpdFactor};
    use crate::spectral::spectral_sample;
    use std::f64::consts::PI;

    fn op(m: usize, dt: f64) -> HippoOperator {
        HippoOperator::new(m, Scheme::Bilinear, dt).unwrap()
    }

    fn grid(dt: f64, end: usize) -> TimeGrid<'static> {
        TimeGrid::new(dt, 1, 1, end, Driver::Time).unwrap()
    }

    #[test]
    fn zero_variance_rows_stay_zero() {
        let k = KernelSpec::rbf_1d(0.0, 0.3, 0.0).unwrap();
        let x = points_1d(&[0.2, 0.9]);
        let rows = kfu_from_start(&op(6, 0.01), &k, &x, &grid(0.01, 100)).unwrap();
        assert_eq!(rows.amax(), 0.0);
    }

    #[test]
    fn constant_kernel_rows() {
        let k = KernelSpec::rbf_1d(1.0, 1e9, 0.0).unwrap();
        let x = points_1d(&[0.1, 0.5, 3.0]);
        let rows = kfu_from_start(&op(8, 1e-3), &k, &x, &grid(1e-3, 1000)).unwrap();
        for i in 0..3 {
            assert!((rows[(i, 0)] - 1.0).abs() < 1e-3);
            for m in 1..8 {
                assert!(rows[(i, m)].abs() < 1e-3);
            }
        }
    }

    #[test]
    fn rbf_row_matches_quadrature() {
        let k = KernelSpec::rbf_1d(1.0, 0.2, 0.0).unwrap();
        let rows = kfu_from_start(&op(16, 1e-3), &k, &points_1d(&[0.5]), &grid(1e-3, 1000)).unwrap();
        let oracle = quadrature_kfu(&k, &[0.5], 16, 1.0, 512).unwrap();
        assert!((rows.row(0).transpose() - oracle).amax() < 1e-2);
    }

    #[test]
    fn split_evolution_is_consistent() {
        let k = KernelSpec::rbf_1d(1.3, 0.25, 0.0).unwrap();
        let x = points_1d(&[0.05, 0.4, 0.77]);
        for scheme in [Scheme::Bilinear, Scheme::ForwardEuler] {
            let o = HippoOperator::new(10, scheme, 1e-3).unwrap();
            let g1 = TimeGrid::new(1e-3, 1, 1, 400, Driver::Time).unwrap();
            let s0 = KfuRows::start(&o, &k, &x, &g1).unwrap();
            let mid = evolve_kfu(&o, &k, &x, &g1, &s0).unwrap();
            let end = evolve_kfu(&o, &k, &x, &g1.continue_to(900).unwrap(), &mid).unwrap();
            let full = evolve_kfu(&o, &k, &x, &grid(1e-3, 900), &s0).unwrap();
            assert!((end.kfu() - full.kfu()).amax() <= 1e-12);
        }
    }

    #[test]
    fn mismatched_state_is_rejected() {
        let k = KernelSpec::rbf_1d(1.0, 0.3, 0.0).unwrap();
        let x = points_1d(&[0.1]);
        let o = op(4, 0.01);
        let s = KfuRows::start(&o, &k, &x, &grid(0.01, 10)).unwrap();
        let g = TimeGrid::new(0.01, 1, 5, 10, Driver::Time).unwrap();
        assert!(matches!(evolve_kfu(&o, &k, &x, &g, &s), Err(Error::State(_))));
        let g = grid(0.01, 10);
        assert!(matches!(
            evolve_kfu(&o, &k, &points_1d(&[0.1, 0.2]), &g, &s),
            Err(Error::State(_))
        ));
    }

    #[test]
    fn zero_frequency_features() {
        let k = KernelSpec::rbf_1d(1.0, 1e12, 0.0).unwrap();
        let s = spectral_sample(&k, 3, 1).unwrap();
        let o = op(8, 1e-3);
        let g = grid(1e-3, 1000);
        let f = evolve_rff_features(&o, &s, &g, &RffFeatures::start(&o, &s, &g).unwrap()).unwrap();
        for n in 0..3 {
            assert!((f.z()[(0, n)] - 1.0).abs() < 1e-3);
            assert!(f.z().column(3 + n).amax() < 1e-6);
        }
    }

    #[test]
    fn no_steps_leave_features_unchanged() {
        let k = KernelSpec::rbf_1d(1.0, 0.3, 0.0).unwrap();
        let s = spectral_sample(&k, 5, 2).unwrap();
        let o = op(6, 1e-3);
        let g = TimeGrid::new(1e-3, 1, 1, 1, Driver::Time).unwrap();
        let f0 = RffFeatures::start(&o, &s, &g).unwrap();
        assert_eq!(evolve_rff_features(&o, &s, &g, &f0).unwrap(), f0);
    }

    #[test]
    fn cosine_feature_matches_quadrature() {
        // The feature ODE is the K_fu ODE with the kernel section replaced by cos(wt).
        let o = op(16, 1e-3);
        let mut c = DMatrix::zeros(16, 1);
        c[(0, 0)] = (2.0 * PI * 1e-3).cos();
        let g = grid(1e-3, 1000);
        evolve_block(&o, &g, &mut c, "cos", |k, out| out[0] = (2.0 * PI * k as f64 * 1e-3).cos()).unwrap();
        let (x, w) = GaussLegendre::new(512).unwrap().on(0.0, 1.0);
        let basis = legs_basis_eval(16, 1.0, &x).unwrap();
        for m in 0..16 {
            let q: f64 = (0..x.len()).map(|i| w[i] * (2.0 * PI * x[i]).cos() * basis[(i, m)]).sum();
            assert!((c[(m, 0)] - q).abs() < 1e-2);
        }
    }

    #[test]
    fn changed_frequencies_rejected() {
        let k = KernelSpec::rbf_1d(1.0, 0.3, 0.0).unwrap();
        let o = op(4, 0.01);
        let g = grid(0.01, 10);
        let f0 = RffFeatures::start(&o, &spectral_sample(&k, 5, 2).unwrap(), &g).unwrap();
        let other = spectral_sample(&k, 5, 3).unwrap();
        assert!(matches!(evolve_rff_features(&o, &other, &g, &f0), Err(Error::State(_))));
    }

    #[test]
    fn assembled_gram_properties() {
        let k = KernelSpec::rbf_1d(1.0, 0.3, 0.0).unwrap();
        let s = spectral_sample(&k, 200, 9).unwrap();
        let o = op(8, 1e-2);
        let g = grid(1e-2, 100);
        let f = evolve_rff_features(&o, &s, &g, &RffFeatures::start(&o, &s, &g).unwrap()).unwrap();
        let kuu = assemble_kuu(f.z(), f.z(), 1.0, 200).unwrap();
        assert_eq!(kuu, kuu.transpose());
        assert!(kuu.diagonal().iter().all(|v| *v >= 0.0));
        assert_eq!(assemble_kuu(f.z(), f.z(), 0.0, 200).unwrap().amax(), 0.0);
        assert!(assemble_kuu(f.z(), f.z(), 1.0, 100).is_err());
        SpdFactor::new(&kuu, "K_uu", &JitterPolicy::default()).unwrap();
    }

    #[test]
    fn rff_kuu_matches_double_quadrature() {
        let k = KernelSpec::rbf_1d(1.0, 0.3, 0.0).unwrap();
        let s = spectral_sample(&k, 10_000, 4).unwrap();
        let o = op(8, 1e-3);
        let g = grid(1e-3, 1000);
        let f = evolve_rff_features(&o, &s, &g, &RffFeatures::start(&o, &s, &g).unwrap()).unwrap();
        let kuu = assemble_kuu(f.z(), f.z(), 1.0, 10_000).unwrap();
        let oracle = quadrature_kuu(&k, 8, 1.0, 128).unwrap();
        assert!((kuu - oracle).amax() < 5e-2);
    }

    #[test]
    fn direct_zero_variance_stays_zero() {
        let k = KernelSpec::rbf_1d(0.0, 0.3, 0.0).unwrap();
        let o = op(6, 1e-3);
        let g = grid(1e-3, 200);
        let d = evolve_kuu_direct(&o, &k, &g, &DirectKuu::start(&o, &k, &g).unwrap()).unwrap();
        assert_eq!(d.kuu().amax(), 0.0);
    }

    #[test]
    fn direct_short_horizon_matches_quadrature() {
        let k = KernelSpec::rbf_1d(1.0, 0.3, 0.0).unwrap();
        let o = op(8, 1e-4);
        let g = grid(1e-4, 5000);
        let d = evolve_kuu_direct(&o, &k, &g, &DirectKuu::start(&o, &k, &g).unwrap()).unwrap();
        let oracle = quadrature_kuu(&k, 8, 0.5, 128).unwrap();
        let rel = (d.kuu() - &oracle).norm() / oracle.norm();
        assert!(rel < 0.1, "relative error {rel}");
    }

    #[test]
    fn direct_rejects_multidimensional() {
        let k = KernelSpec::new(1.0, vec![1.0, 1.0], 0.0).unwrap();
        let o = op(4, 0.1);
        assert!(matches!(
            DirectKuu::start(&o, &k, &grid(0.1, 5)),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn sylvester_solution() {
        let t = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.4, 2.0, 0.0, -0.3, 0.7, 1.5]);
        let x = DMatrix::from_row_slice(3, 3, &[1.0, 0.2, -0.5, 0.2, 3.0, 0.1, -0.5, 0.1, 2.0]);
        let r = &t * &x + &x * t.transpose();
        assert!((triangular_sylvester(&t, &r) - x).amax() < 1e-13);
    }

    #[test]
    fn path_driver_matches_time_driver_in_1d() {
        let k = KernelSpec::rbf_1d(1.0, 0.3, 0.0).unwrap();
        let path: Vec<Point> = (1..=200).map(|i| vec![i as f64 * 0.005]).collect();
        let x = points_1d(&[0.3, 0.8]);
        let o = op(8, 0.005);
        let a = kfu_from_start(&o, &k, &x, &grid(0.005, 200)).unwrap();
        let g = TimeGrid::new(0.005, 1, 1, 200, Driver::Path(&path)).unwrap();
        let b = kfu_from_start(&o, &k, &x, &g).unwrap();
        assert!((a - b).amax() < 1e-14);
    }
}
