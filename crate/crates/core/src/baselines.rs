//! Standard inducing points: covariances and selection strategies.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{kernel_eval, KernelSpec, Point};

const MIN_SEPARATION: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Resampled,
    PivotedCholesky,
    Fixed,
}

/// Pairwise-distinct inducing locations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InducingSet {
    points: Vec<Point>,
    provenance: Provenance,
}

fn too_close(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt() <= MIN_SEPARATION
}

impl InducingSet {
    pub fn new(points: Vec<Point>, provenance: Provenance) -> Result<Self> {
        for i in 0..points.len() {
            for j in 0..i {
                if too_close(&points[i], &points[j]) {
                    return Err(Error::input(format!("inducing points {j} and {i} coincide")));
                }
            }
        }
        Ok(InducingSet { points, provenance })
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }
}

/// (K_fu, K_uu) = (k(X, Z), k(Z, Z)).
pub fn dirac_covariances(kernel: &KernelSpec, x: &[Point], z: &InducingSet) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    // Re-check: an InducingSet may have been deserialized.
    InducingSet::new(z.points.clone(), z.provenance)?;
    Ok((kernel_eval(kernel, x, &z.points)?, kernel_eval(kernel, &z.points, &z.points)?))
}

/// Uniform draw of `m` points without replacement from old ∪ new.
///
/// Pool elements that coincide with an already chosen point are skipped and
/// the draw continues with the next element of the shuffled pool.
pub fn select_inducing_resample(old: &[Point], new: &[Point], m: usize, seed: u64) -> Result<InducingSet> {
    let pool: Vec<&Point> = old.iter().chain(new).collect();
    if pool.len() < m {
        return Err(Error::input(format!("pool of {} points is smaller than M = {m}", pool.len())));
    }
    let mut order: Vec<usize> = (0..pool.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut chosen: Vec<Point> = Vec::with_capacity(m);
    for i in order {
        if chosen.len() == m {
            break;
        }
        if chosen.iter().all(|c| !too_close(c, pool[i])) {
            chosen.push(pool[i].clone());
        }
    }
    if chosen.len() < m {
        return Err(Error::input(format!("pool has only {} distinct points, M = {m}", chosen.len())));
    }
    InducingSet::new(chosen, Provenance::Resampled)
}

/// Result of greedy pivoted-Cholesky selection.
#[derive(Clone, Debug)]
pub struct PivotedSelection {
    pub set: InducingSet,
    /// Candidate indices in selection order.
    pub pivots: Vec<usize>,
    /// Residual trace before any pivot, then after each.
    pub residual_traces: Vec<f64>,
    /// Set when the residual vanished before `m` pivots were found.
    pub truncated: bool,
}

/// Greedy pivoted Cholesky of k(candidates, candidates), ties to the lowest index.
pub fn select_inducing_pivchol(kernel: &KernelSpec, candidates: &[Point], m: usize) -> Result<PivotedSelection> {
    if candidates.len() < m {
        return Err(Error::input(format!(
            "{} candidates, cannot select M = {m}",
            candidates.len()
        )));
    }
    kernel.check_points(candidates, "candidates")?;
    let n = candidates.len();
    let mut resid: Vec<f64> = candidates.iter().map(|x| kernel.eval(x, x)).collect();
    let mut factor: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut pivots = Vec::with_capacity(m);
    let mut traces = vec![resid.iter().sum::<f64>()];
    let mut truncated = false;
    let mut taken = vec![false; n];
    while pivots.len() < m {
        let mut best = None;
        for (i, r) in resid.iter().enumerate() {
            if !taken[i] && best.is_none_or(|b: usize| *r > resid[b]) {
                best = Some(i);
            }
        }
        let p = best.expect("fewer pivots than candidates");
        if resid[p] < 1e-12 {
            truncated = true;
            break;
        }
        let d = resid[p].sqrt();
        let col: Vec<f64> = (0..n)
            .map(|i| {
                if taken[i] {
                    return 0.0;
                }
                let s: f64 = factor.iter().map(|l| l[i] * l[p]).sum();
                (kernel.eval(&candidates[i], &candidates[p]) - s) / d
            })
            .collect();
        taken[p] = true;
        for i in 0..n {
            resid[i] = if taken[i] { 0.0 } else { (resid[i] - col[i] * col[i]).max(0.0) };
        }
        factor.push(col);
        pivots.push(p);
        traces.push(resid.iter().sum());
    }
    let set = InducingSet::new(pivots.iter().map(|&i| candidates[i].clone()).collect(), Provenance::PivotedCholesky)?;
    Ok(PivotedSelection {
        set,
        pivots,
        residual_traces: traces,
        truncated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::points_1d;
    use proptest::prelude::*;
    use rand::Rng;

    fn rbf() -> KernelSpec {
        KernelSpec::rbf_1d(1.7, 0.5, 0.1).unwrap()
    }

    #[test]
    fn covariances_at_data() {
        let x = points_1d(&[0.0, 0.4, 1.3]);
        let z = InducingSet::new(x.clone(), Provenance::Fixed).unwrap();
        let (kfu, kuu) = dirac_covariances(&rbf(), &x, &z).unwrap();
        assert_eq!(kfu, kuu);
        assert!(kuu.diagonal().iter().all(|v| *v == 1.7));
    }

    #[test]
    fn one_lengthscale_apart() {
        let z = InducingSet::new(points_1d(&[0.0]), Provenance::Fixed).unwrap();
        let (kfu, _) = dirac_covariances(&rbf(), &points_1d(&[0.5]), &z).unwrap();
        assert!((kfu[(0, 0)] - 1.7 * (-0.5f64).exp()).abs() < 1e-14);
    }

    #[test]
    fn duplicates_rejected() {
        assert!(InducingSet::new(points_1d(&[0.0, 1.0, 0.0]), Provenance::Fixed).is_err());
    }

    #[test]
    fn resample_without_new_points_returns_old_set() {
        let old = points_1d(&[0.1, 0.5, 0.9, 1.4]);
        let s = select_inducing_resample(&old, &[], 4, 3).unwrap();
        let mut got: Vec<f64> = s.points().iter().map(|p| p[0]).collect();
        got.sort_by(f64::total_cmp);
        assert_eq!(got, vec![0.1, 0.5, 0.9, 1.4]);
        assert_eq!(s, select_inducing_resample(&old, &[], 4, 3).unwrap());
        assert!(select_inducing_resample(&old, &[], 5, 3).is_err());
    }

    #[test]
    fn resample_skips_coincident_pool_entries() {
        let old = points_1d(&[0.0, 1.0]);
        let new = points_1d(&[0.0, 1.0, 2.0]);
        let s = select_inducing_resample(&old, &new, 3, 7).unwrap();
        assert_eq!(s.len(), 3);
        assert!(select_inducing_resample(&old, &new, 4, 7).is_err());
    }

    #[test]
    fn resample_is_uniform() {
        let pool = points_1d(&(0..10).map(f64::from).collect::<Vec<_>>());
        let (m, trials) = (3usize, 1000usize);
        let mut counts = [0usize; 10];
        for seed in 0..trials as u64 {
            for p in select_inducing_resample(&pool[..4], &pool[4..], m, seed).unwrap().points() {
                counts[p[0] as usize] += 1;
            }
        }
        let pr = m as f64 / 10.0;
        let mean = trials as f64 * pr;
        let sd = (trials as f64 * pr * (1.0 - pr)).sqrt();
        for c in counts {
            assert!((c as f64 - mean).abs() <= 3.0 * sd, "count {c}");
        }
    }

    #[test]
    fn first_pivot_is_lowest_index() {
        let c = points_1d(&[0.3, 0.1, 0.9]);
        assert_eq!(select_inducing_pivchol(&rbf(), &c, 2).unwrap().pivots[0], 0);
    }

    #[test]
    fn full_pivoting_reconstructs() {
        let c = points_1d(&[0.0, 1.0, 2.0, 3.0, 4.0]);
        let s = select_inducing_pivchol(&rbf(), &c, 5).unwrap();
        assert!(*s.residual_traces.last().unwrap() < 1e-8);
        assert!(!s.truncated);
    }

    #[test]
    fn vanishing_residual_truncates() {
        let k = KernelSpec::rbf_1d(1.0, 1e9, 0.0).unwrap();
        let s = select_inducing_pivchol(&k, &points_1d(&[0.0, 0.5, 1.0]), 3).unwrap();
        assert!(s.truncated);
        assert_eq!(s.set.len(), 1);
    }

    #[test]
    fn beats_random_pivots_on_average() {
        let k = KernelSpec::rbf_1d(1.0, 0.3, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let c: Vec<Point> = (0..60).map(|_| vec![rng.random_range(0.0..5.0)]).collect();
        let m = 8;
        let greedy = *select_inducing_pivchol(&k, &c, m).unwrap().residual_traces.last().unwrap();
        let kcc = kernel_eval(&k, &c, &c).unwrap();
        let mut total = 0.0;
        for trial in 0..50 {
            let s = select_inducing_resample(&c, &[], m, trial).unwrap();
            let kzz = kernel_eval(&k, s.points(), s.points()).unwrap();
            let kcz = kernel_eval(&k, &c, s.points()).unwrap();
            let q = &kcz * kzz.cholesky().unwrap().solve(&kcz.transpose());
            total += (&kcc - q).trace();
        }
        assert!(greedy <= total / 50.0);
    }

    proptest! {
        #[test]
        fn residual_trace_non_increasing(xs in prop::collection::vec(-3.0f64..3.0, 5..30), m in 1usize..5) {
            let c = points_1d(&xs);
            let s = select_inducing_pivchol(&rbf(), &c, m).unwrap();
            for w in s.residual_traces.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-12);
            }
        }
    }
}
