//! LegS operators, the scaled Legendre basis, and coefficient recurrences.
//!
//! The continuous dynamics are d/dt c = (A c + B f(t)) / t with
//!
//! ```text
//! A[n][k] = -sqrt((2n+1)(2k+1))   n > k
//! A[n][n] = -(n+1)
//! A[n][k] = 0                     n < k
//! B[n]    = sqrt(2n+1)
//! ```
//!
//! The diagonal is -(n+1); this is what makes a constant signal a fixed point
//! of the projection (c = e0 for f = 1).
//!
//! Time is discretized as t_k = k·dt with k >= 1. One step of stride s scales
//! the operator by s/k, so trajectories depend on the step index only and are
//! identical for any dt (timescale equivariance).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    ForwardEuler,
    #[default]
    Bilinear,
}

impl std::str::FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "forward-euler" => Ok(Scheme::ForwardEuler),
            "bilinear" => Ok(Scheme::Bilinear),
            other => Err(Error::input(format!("unknown scheme `{other}`"))),
        }
    }
}

/// Dense (A, B) of order `m`.
pub fn legs_operators(m: usize) -> Result<(DMatrix<f64>, DVector<f64>)> {
    if m == 0 {
        return Err(Error::input("operator order must be >= 1"));
    }
    let a = DMatrix::from_fn(m, m, |n, k| match n.cmp(&k) {
        std::cmp::Ordering::Greater => -(((2 * n + 1) * (2 * k + 1)) as f64).sqrt(),
        std::cmp::Ordering::Equal => -((n + 1) as f64),
        std::cmp::Ordering::Less => 0.0,
    });
    let b = DVector::from_fn(m, |n, _| ((2 * n + 1) as f64).sqrt());
    Ok((a, b))
}

/// A discretized LegS system.
///
/// Stepping exploits the rank-one structure of the strict lower triangle of A,
/// making both the product A·c and the implicit solve O(M) per column.
#[derive(Clone, Debug)]
pub struct HippoOperator {
    order: usize,
    a: DMatrix<f64>,
    b: DVector<f64>,
    roots: Vec<f64>,
    scheme: Scheme,
    dt: f64,
}

impl HippoOperator {
    pub fn new(order: usize, scheme: Scheme, dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::input(format!("step must be > 0, got {dt}")));
        }
        let (a, b) = legs_operators(order)?;
        let roots = (0..order).map(|n| ((2 * n + 1) as f64).sqrt()).collect();
        Ok(HippoOperator {
            order,
            a,
            b,
            roots,
            scheme,
            dt,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Time A(t) = A/t at step index k.
    pub fn a_at(&self, k: usize) -> DMatrix<f64> {
        &self.a / self.time(k)
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    /// y ← y + α·(A x) for one column.
    #[inline]
    fn add_a_times(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        let mut prefix = 0.0;
        for n in 0..self.order {
            let r = self.roots[n];
            y[n] += alpha * (-r * prefix - (n + 1) as f64 * x[n]);
            prefix += r * x[n];
        }
    }

    /// Advance every column of `state` (M×C) from step k to k+stride.
    ///
    /// `f_now[j]` and `f_next[j]` are the driving samples of column `j` at the
    /// two ends of the step; forward Euler ignores `f_next`.
    pub fn step_block(&self, k: usize, stride: usize, state: &mut DMatrix<f64>, f_now: &[f64], f_next: &[f64]) {
        debug_assert!(k >= 1 && stride >= 1);
        debug_assert_eq!(state.nrows(), self.order);
        let r0 = stride as f64 / k as f64;
        let r1 = stride as f64 / (k + stride) as f64;
        let m = self.order;
        match self.scheme {
            Scheme::ForwardEuler => {
                let mut scratch = vec![0.0; m];
                for (j, mut col) in state.column_iter_mut().enumerate() {
                    let c = col.as_mut_slice();
                    scratch.copy_from_slice(c);
                    self.add_a_times(r0, &scratch, c);
                    for (cn, root) in c.iter_mut().zip(&self.roots) {
                        *cn += r0 * root * f_now[j];
                    }
                }
            }
            Scheme::Bilinear => {
                // Explicit half-step and triangular solve fused per column, with
                // the per-row factors hoisted out of the column loop.
                let (a0, a1) = (0.5 * r0, 0.5 * r1);
                let keep: Vec<f64> = (0..m).map(|n| 1.0 - a0 * (n + 1) as f64).collect();
                let inv: Vec<f64> = (0..m).map(|n| 1.0 / (1.0 + a1 * (n + 1) as f64)).collect();
                let couple_old: Vec<f64> = self.roots.iter().map(|r| a0 * r).collect();
                let couple_new: Vec<f64> = (0..m).map(|n| a1 * self.roots[n] * inv[n]).collect();
                let roots_inv: Vec<f64> = (0..m).map(|n| self.roots[n] * inv[n]).collect();
                // One row-factor tuple per basis index, each column visited once.
                let rows: Vec<[f64; 6]> = (0..m)
                    .map(|n| [keep[n], couple_old[n], inv[n], roots_inv[n], couple_new[n], self.roots[n]])
                    .collect();
                let data = state.as_mut_slice();
                for ((c, fa), fb) in data.chunks_exact_mut(m).zip(f_now).zip(f_next) {
                    let drive = 0.5 * (r0 * fa + r1 * fb);
                    let (mut p_old, mut p_new) = (0.0, 0.0);
                    for (v, &[kn, cn, inv_n, dn, cnn, rn]) in c.iter_mut().zip(&rows) {
                        let old = *v;
                        let y = old * kn - cn * p_old;
                        p_old += rn * old;
                        let x = y * inv_n + drive * dn - cnn * p_new;
                        p_new += rn * x;
                        *v = x;
                    }
                }
            }
        }
    }

    /// Same as [`step_block`](Self::step_block) for a single vector.
    pub fn step(&self, k: usize, stride: usize, c: &mut DVector<f64>, f_now: f64, f_next: f64) {
        let mut m = DMatrix::from_column_slice(self.order, 1, c.as_slice());
        self.step_block(k, stride, &mut m, &[f_now], &[f_next]);
        c.copy_from_slice(m.as_slice());
    }
}

/// Projection coefficients at step k.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientState {
    pub c: DVector<f64>,
    pub k: usize,
    pub dt: f64,
}

impl CoefficientState {
    /// Zero-order-hold start at step k: the history before t_k is taken to be
    /// the constant f(t_k), whose projection is f(t_k)·e0.
    pub fn initial(order: usize, k: usize, dt: f64, f0: f64) -> Self {
        let mut c = DVector::zeros(order);
        c[0] = f0;
        CoefficientState { c, k, dt }
    }

    pub fn t(&self) -> f64 {
        self.k as f64 * self.dt
    }
}

/// Evolve coefficients of a sampled signal.
///
/// `signal[i]` is f at step `k0 + i`, `c0` the state at step `k0`. Steps of
/// `stride` samples are taken while samples remain.
pub fn evolve_coefficients(
    op: &HippoOperator,
    signal: &[f64],
    k0: usize,
    stride: usize,
    c0: &DVector<f64>,
) -> Result<CoefficientState> {
    let mut last = None;
    evolve_inner(op, signal, k0, stride, c0, |s| last = Some(s.clone()))?;
    Ok(last.expect("at least the initial state is emitted"))
}

/// Like [`evolve_coefficients`] but returns every intermediate state.
pub fn evolve_trajectory(
    op: &HippoOperator,
    signal: &[f64],
    k0: usize,
    stride: usize,
    c0: &DVector<f64>,
) -> Result<Vec<CoefficientState>> {
    let mut out = Vec::new();
    evolve_inner(op, signal, k0, stride, c0, |s| out.push(s.clone()))?;
    Ok(out)
}

fn evolve_inner(
    op: &HippoOperator,
    signal: &[f64],
    k0: usize,
    stride: usize,
    c0: &DVector<f64>,
    mut emit: impl FnMut(&CoefficientState),
) -> Result<()> {
    if k0 == 0 || stride == 0 {
        return Err(Error::input("start index and stride must be >= 1"));
    }
    if c0.len() != op.order() {
        return Err(Error::input(format!(
            "initial state has length {}, operator order is {}",
            c0.len(),
            op.order()
        )));
    }
    if signal.is_empty() {
        return Err(Error::input("signal has no samples"));
    }
    if let Some(i) = signal.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            what: "signal".into(),
            step: k0 + i,
        });
    }
    let mut state = CoefficientState {
        c: c0.clone(),
        k: k0,
        dt: op.dt(),
    };
    emit(&state);
    let mut i = 0;
    while i + stride < signal.len() {
        op.step(state.k, stride, &mut state.c, signal[i], signal[i + stride]);
        state.k += stride;
        i += stride;
        emit(&state);
    }
    Ok(())
}

/// P_0..P_{out.len()-1} at z by the three-term recurrence.
pub fn legendre(z: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = 1.0;
    if out.len() > 1 {
        out[1] = z;
    }
    for n in 1..out.len().saturating_sub(1) {
        let nf = n as f64;
        out[n + 1] = ((2.0 * nf + 1.0) * z * out[n] - nf * out[n - 1]) / (nf + 1.0);
    }
}

/// |xs|×M matrix of g_m(x) = sqrt(2m+1)·P_m(2x/t − 1).
pub fn legs_basis_eval(m: usize, t: f64, xs: &[f64]) -> Result<DMatrix<f64>> {
    if t.is_nan() || t <= 0.0 {
        return Err(Error::input(format!("basis time must be > 0, got {t}")));
    }
    let tol = 1e-12 * t;
    if let Some(x) = xs.iter().find(|x| !(**x >= -tol && **x <= t + tol)) {
        return Err(Error::input(format!("x = {x} lies outside [0, {t}]")));
    }
    let mut out = DMatrix::zeros(xs.len(), m);
    let mut p = vec![0.0; m];
    for (i, x) in xs.iter().enumerate() {
        legendre((2.0 * x / t - 1.0).clamp(-1.0, 1.0), &mut p);
        for n in 0..m {
            out[(i, n)] = ((2 * n + 1) as f64).sqrt() * p[n];
        }
    }
    Ok(out)
}

/// Σ_m c_m g_m(x) at the state's time.
pub fn reconstruct_signal(state: &CoefficientState, xs: &[f64]) -> Result<Vec<f64>> {
    let g = legs_basis_eval(state.c.len(), state.t(), xs)?;
    Ok((g * &state.c).iter().copied().collect())
}
