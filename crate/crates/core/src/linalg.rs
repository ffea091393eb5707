//! Symmetric positive-definite factorizations with escalating jitter.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{Error, Result};

/// Diagonal jitter escalation used when a Cholesky factorization fails.
///
/// The first attempt is always unjittered. Retries add
/// `initial · max(diag) · growth^r` for r = 0..max_retries.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JitterPolicy {
    pub initial: f64,
    pub growth: f64,
    pub max_retries: usize,
}

impl Default for JitterPolicy {
    fn default() -> Self {
        JitterPolicy {
            initial: 1e-10,
            growth: 10.0,
            max_retries: 6,
        }
    }
}

/// Cholesky factor of K + jitter·I.
#[derive(Clone, Debug)]
pub struct SpdFactor {
    chol: Cholesky<f64, Dyn>,
    jitter: f64,
}

impl SpdFactor {
    /// Factor a symmetric matrix, escalating jitter per `policy`.
    pub fn new(k: &DMatrix<f64>, name: &str, policy: &JitterPolicy) -> Result<Self> {
        let n = k.nrows();
        if n != k.ncols() {
            return Err(Error::input(format!("`{name}` is {}x{}, not square", n, k.ncols())));
        }
        if k.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("`{name}` has non-finite entries")));
        }
        let scale = k.amax().max(f64::MIN_POSITIVE);
        let asym = (k - k.transpose()).amax();
        if asym > 1e-10 * scale {
            return Err(Error::input(format!(
                "`{name}` is not symmetric (max asymmetry {asym:e})"
            )));
        }
        if let Some(chol) = Cholesky::new(k.clone()) {
            return Ok(SpdFactor { chol, jitter: 0.0 });
        }
        let maxdiag = k.diagonal().max().max(f64::MIN_POSITIVE);
        let mut jitter = policy.initial * maxdiag;
        for _ in 0..policy.max_retries {
            let mut kj = k.clone();
            for i in 0..n {
                kj[(i, i)] += jitter;
            }
            if let Some(chol) = Cholesky::new(kj) {
                return Ok(SpdFactor { chol, jitter });
            }
            jitter *= policy.growth;
        }
        Err(Error::NotPositiveDefinite {
            matrix: name.to_string(),
            min_eigenvalue: min_eigenvalue(k),
            jitter: jitter / policy.growth,
        })
    }

    pub fn dim(&self) -> usize {
        self.chol.l_dirty().nrows()
    }

    /// Lower-triangular factor L with LLᵀ = K + jitter·I.
    pub fn l(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn log_det(&self) -> f64 {
        self.chol.ln_determinant()
    }

    pub fn solve(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.chol.solve(b)
    }

    pub fn solve_vec(&self, b: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(b)
    }

    /// L⁻¹B.
    pub fn solve_lower(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut x = b.clone();
        self.chol.l_dirty().solve_lower_triangular_mut(&mut x);
        x
    }

    pub fn solve_lower_vec(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut x = b.clone();
        self.chol.l_dirty().solve_lower_triangular_mut(&mut x);
        x
    }

    /// L⁻ᵀB.
    pub fn solve_upper(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut x = b.clone();
        self.chol.l_dirty().tr_solve_lower_triangular_mut(&mut x);
        x
    }

    pub fn solve_upper_vec(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut x = b.clone();
        self.chol.l_dirty().tr_solve_lower_triangular_mut(&mut x);
        x
    }

    /// (K + jitter·I)⁻¹.
    pub fn inverse(&self) -> DMatrix<f64> {
        self.chol.inverse()
    }
}

/// Result of [`psd_solve`].
#[derive(Clone, Debug)]
pub struct PsdSolution {
    pub solution: DMatrix<f64>,
    pub log_det: f64,
    pub jitter: f64,
}

impl PsdSolution {
    pub fn jittered(&self) -> bool {
        self.jitter > 0.0
    }
}

/// Solve K X = B for symmetric positive (semi)definite K.
pub fn psd_solve(k: &DMatrix<f64>, rhs: &DMatrix<f64>, policy: &JitterPolicy) -> Result<PsdSolution> {
    if rhs.nrows() != k.nrows() {
        return Err(Error::input(format!(
            "rhs has {} rows, matrix is {}x{}",
            rhs.nrows(),
            k.nrows(),
            k.ncols()
        )));
    }
    let f = SpdFactor::new(k, "K", policy)?;
    Ok(PsdSolution {
        solution: f.solve(rhs),
        log_det: f.log_det(),
        jitter: f.jitter(),
    })
}

/// (K + Kᵀ)/2.
pub fn symmetrize(k: &DMatrix<f64>) -> DMatrix<f64> {
    (k + k.transpose()) * 0.5
}

pub fn symmetrize_mut(k: &mut DMatrix<f64>) {
    let n = k.nrows();
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (k[(i, j)] + k[(j, i)]);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
}

/// Smallest eigenvalue of the symmetric part of `k`.
pub fn min_eigenvalue(k: &DMatrix<f64>) -> f64 {
    if k.is_empty() {
        return f64::NAN;
    }
    SymmetricEigen::new(symmetrize(k)).eigenvalues.min()
}
