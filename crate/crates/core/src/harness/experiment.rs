//! Continual-learning runs and their reports.

use std::path::Path;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::baselines::{dirac_covariances, select_inducing_pivchol, select_inducing_resample, InducingSet};
use crate::covariance::{assemble_kuu, evolve_rff_features, kfu_from_features, kfu_from_start, Driver, RffFeatures, TimeGrid};
use crate::error::{Error, Result};
use crate::harness::config::{ExperimentConfig, KfuSource, Method, Metric};
use crate::harness::data::{load_series_csv, make_synthetic, Dataset};
use crate::harness::metrics::{metric_nlpd, metric_rmse};
use crate::harness::tasks::{prepare_stream, SortCriterion, TaskBatch, TaskStream, TimeAxis};
use crate::hippo::{HippoOperator, Scheme};
use crate::hyper::{fit_hyperparameters, SearchOptions};
use crate::kernel::{kernel_eval, KernelParams, KernelSpec, Point};
use crate::spectral::{spectral_sample_ard, SpectralSample};
use crate::streaming::{fit_first_task, online_update, predict, BasisTag, GaussianPosterior, Prediction, TaskCovariances};

/// Predictive moments of the targets (latent variance plus noise).
#[derive(Clone, Debug)]
pub struct TargetPrediction {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

/// A method that consumes tasks one at a time.
pub trait ContinualLearner {
    fn learn(&mut self, task: &TaskBatch) -> Result<()>;
    fn predict(&self, x: &[Point]) -> Result<TargetPrediction>;
    fn posterior(&self) -> Option<&GaussianPosterior>;
}

fn to_targets(p: Prediction, noise: f64) -> TargetPrediction {
    TargetPrediction {
        mean: p.mean.iter().copied().collect(),
        var: p.var.iter().map(|v| v + noise).collect(),
    }
}

fn kdiag(kernel: &KernelSpec, n: usize) -> DVector<f64> {
    DVector::from_element(n, kernel.variance())
}

/// LegS inducing variables with RFF-assembled K_uu.
pub struct HippoLearner<'s> {
    kernel: KernelSpec,
    op: HippoOperator,
    sample: SpectralSample,
    stride: usize,
    driver: Driver<'s>,
    features: Option<RffFeatures>,
    posterior: Option<GaussianPosterior>,
    kfu_source: KfuSource,
}

impl<'s> HippoLearner<'s> {
    pub fn new(kernel: KernelSpec, order: usize, rff_samples: usize, scheme: Scheme, stream: &'s TaskStream, seed: u64) -> Result<Self> {
        let driver = match &stream.axis {
            TimeAxis::Series => Driver::Time,
            TimeAxis::Path(p) => Driver::Path(p),
        };
        Ok(HippoLearner {
            sample: spectral_sample_ard(&kernel, rff_samples, seed)?,
            op: HippoOperator::new(order, scheme, stream.dt)?,
            kernel,
            stride: stream.stride,
            driver,
            features: None,
            posterior: None,
            kfu_source: KfuSource::default(),
        })
    }

    pub fn with_kfu_source(mut self, source: KfuSource) -> Self {
        self.kfu_source = source;
        self
    }

    fn grid(&self, start: usize, end: usize) -> Result<TimeGrid<'s>> {
        TimeGrid::new(self.op.dt(), self.stride, start, end, self.driver)
    }

    pub fn step(&self) -> Option<usize> {
        self.features.as_ref().map(RffFeatures::step_index)
    }

    /// K_fu rows at the current boundary for arbitrary inputs.
    pub fn kfu(&self, x: &[Point]) -> Result<DMatrix<f64>> {
        let f = self.features.as_ref().ok_or_else(|| Error::state("no task learned yet"))?;
        self.kfu_at(f, x)
    }

    fn kfu_at(&self, f: &RffFeatures, x: &[Point]) -> Result<DMatrix<f64>> {
        match self.kfu_source {
            KfuSource::Features => kfu_from_features(&self.sample, f.z(), self.kernel.variance(), x),
            KfuSource::Ode => kfu_from_start(&self.op, &self.kernel, x, &self.grid(1, f.step_index())?),
        }
    }

    pub fn feature_snapshot(&self) -> Option<&DMatrix<f64>> {
        self.features.as_ref().map(RffFeatures::z)
    }

    pub fn order(&self) -> usize {
        self.op.order()
    }
}

impl ContinualLearner for HippoLearner<'_> {
    fn learn(&mut self, task: &TaskBatch) -> Result<()> {
        let n = self.sample.len();
        let old = self.features.take();
        let new = match &old {
            None => {
                let g = self.grid(1, task.end_step)?;
                evolve_rff_features(&self.op, &self.sample, &g, &RffFeatures::start(&self.op, &self.sample, &g)?)?
            }
            Some(f) => evolve_rff_features(&self.op, &self.sample, &self.grid(f.step_index(), task.end_step)?, f)?,
        };
        let kuu = assemble_kuu(new.z(), new.z(), self.kernel.variance(), n)?;
        let kfu = self.kfu_at(&new, &task.train_x)?;
        let covs = TaskCovariances {
            basis: BasisTag::Hippo {
                step: task.end_step,
                dt: self.op.dt(),
            },
            kuu,
            kfu,
            kdiag: kdiag(&self.kernel, task.train_x.len()),
        };
        let y = DVector::from_column_slice(&task.train_y);
        let fit = match (&self.posterior, &old) {
            (Some(q), Some(f)) => {
                let cross = assemble_kuu(f.z(), new.z(), self.kernel.variance(), n)?;
                online_update(q, &covs, &cross, &y, &self.kernel)?
            }
            _ => fit_first_task(&covs, &y, &self.kernel)?,
        };
        self.features = Some(new);
        self.posterior = Some(fit.posterior);
        Ok(())
    }

    fn predict(&self, x: &[Point]) -> Result<TargetPrediction> {
        let q = self.posterior.as_ref().ok_or_else(|| Error::state("no task learned yet"))?;
        let p = predict(q, q.basis(), &self.kfu(x)?, &kdiag(&self.kernel, x.len()))?;
        Ok(to_targets(p, self.kernel.noise()))
    }

    fn posterior(&self) -> Option<&GaussianPosterior> {
        self.posterior.as_ref()
    }
}

/// How a Dirac learner picks inducing points at each task.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Selection {
    Resample,
    PivotedCholesky,
}

/// Standard inducing points re-selected at every task boundary.
pub struct DiracLearner {
    kernel: KernelSpec,
    order: usize,
    selection: Selection,
    seed: u64,
    tasks_seen: u64,
    inducing: Option<InducingSet>,
    posterior: Option<GaussianPosterior>,
}

impl DiracLearner {
    pub fn new(kernel: KernelSpec, order: usize, selection: Selection, seed: u64) -> Self {
        DiracLearner {
            kernel,
            order,
            selection,
            seed,
            tasks_seen: 0,
            inducing: None,
            posterior: None,
        }
    }

    pub fn inducing(&self) -> Option<&InducingSet> {
        self.inducing.as_ref()
    }
}

impl ContinualLearner for DiracLearner {
    fn learn(&mut self, task: &TaskBatch) -> Result<()> {
        let old: &[Point] = self.inducing.as_ref().map_or(&[], |z| z.points());
        let pool = old.len() + task.train_x.len();
        let m = self.order.min(pool);
        let z = match self.selection {
            Selection::Resample => {
                select_inducing_resample(old, &task.train_x, m, self.seed.wrapping_add(self.tasks_seen))?
            }
            Selection::PivotedCholesky => {
                let cands: Vec<Point> = old.iter().chain(&task.train_x).cloned().collect();
                select_inducing_pivchol(&self.kernel, &cands, m)?.set
            }
        };
        let (kfu, kuu) = dirac_covariances(&self.kernel, &task.train_x, &z)?;
        let covs = TaskCovariances {
            basis: BasisTag::Dirac {
                locations: z.points().to_vec(),
            },
            kuu,
            kfu,
            kdiag: kdiag(&self.kernel, task.train_x.len()),
        };
        let y = DVector::from_column_slice(&task.train_y);
        let fit = match (&self.posterior, &self.inducing) {
            (Some(q), Some(z_old)) => {
                let cross = kernel_eval(&self.kernel, z_old.points(), z.points())?;
                online_update(q, &covs, &cross, &y, &self.kernel)?
            }
            _ => fit_first_task(&covs, &y, &self.kernel)?,
        };
        self.inducing = Some(z);
        self.posterior = Some(fit.posterior);
        self.tasks_seen += 1;
        Ok(())
    }

    fn predict(&self, x: &[Point]) -> Result<TargetPrediction> {
        let q = self.posterior.as_ref().ok_or_else(|| Error::state("no task learned yet"))?;
        let z = self.inducing.as_ref().expect("inducing set exists with posterior");
        let kfu = kernel_eval(&self.kernel, x, z.points())?;
        let p = predict(q, q.basis(), &kfu, &kdiag(&self.kernel, x.len()))?;
        Ok(to_targets(p, self.kernel.noise()))
    }

    fn posterior(&self) -> Option<&GaussianPosterior> {
        self.posterior.as_ref()
    }
}

/// Metrics on the test split of `eval_task` after learning `after_task`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricEntry {
    pub eval_task: usize,
    pub after_task: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rmse: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nlpd: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FailureMarker {
    pub task: usize,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultsReport {
    pub config: ExperimentConfig,
    pub metrics: Vec<MetricEntry>,
    pub timing_seconds: Vec<f64>,
    pub version: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hyperparameters: Option<KernelParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failed_at: Option<FailureMarker>,
}

impl ResultsReport {
    /// Entry for (eval_task, after_task), both 1-based.
    pub fn entry(&self, eval_task: usize, after_task: usize) -> Option<&MetricEntry> {
        self.metrics
            .iter()
            .find(|e| e.eval_task == eval_task && e.after_task == after_task)
    }

    /// Mean NLPD over all tasks evaluated after `after_task`.
    pub fn mean_nlpd_after(&self, after_task: usize) -> Option<f64> {
        let v: Vec<f64> = self
            .metrics
            .iter()
            .filter(|e| e.after_task == after_task)
            .filter_map(|e| e.nlpd)
            .collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    /// The metric payload without timings, for reproducibility comparisons.
    pub fn metrics_json(&self) -> String {
        serde_json::to_string(&self.metrics).expect("metrics serialize")
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.json"), serde_json::to_string_pretty(self)?)?;
        let mut w = csv::Writer::from_path(dir.join("metrics.csv")).map_err(|e| Error::Numerical(e.to_string()))?;
        let fmt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        w.write_record(["method", "eval_task", "after_task", "rmse", "nlpd"])
            .map_err(|e| Error::Numerical(e.to_string()))?;
        for e in &self.metrics {
            w.write_record([
                self.config.method.to_string(),
                e.eval_task.to_string(),
                e.after_task.to_string(),
                fmt(e.rmse),
                fmt(e.nlpd),
            ])
            .map_err(|e| Error::Numerical(e.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Load or generate the configured dataset.
pub fn load_dataset(config: &ExperimentConfig) -> Result<Dataset> {
    match (&config.csv, &config.synthetic) {
        (Some(p), None) => load_series_csv(p),
        (None, Some(name)) => make_synthetic(name, &config.synthetic_params, config.seed),
        _ => Err(Error::input("one of `csv` or `synthetic` is required")),
    }
}

/// Kernel used by the similarity orderings before any fit: unit variance and
/// per-dimension lengthscales equal to the input standard deviation.
pub fn sorting_kernel(data: &Dataset) -> Result<KernelSpec> {
    let n = data.len().max(1) as f64;
    let ls = (0..data.dim())
        .map(|d| {
            let m = data.x.iter().map(|p| p[d]).sum::<f64>() / n;
            let v = data.x.iter().map(|p| (p[d] - m).powi(2)).sum::<f64>() / n;
            if v > 0.0 {
                v.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    KernelSpec::new(1.0, ls, 0.0)
}

/// Order and split the configured dataset.
pub fn build_stream(config: &ExperimentConfig, data: &Dataset) -> Result<TaskStream> {
    let sort_kernel = match config.sort {
        SortCriterion::KernelMax | SortCriterion::KernelMin => Some(sorting_kernel(data)?),
        _ => None,
    };
    prepare_stream(data, config.tasks, config.sort, sort_kernel.as_ref(), config.dt, config.stride, config.seed)
}

/// Fixed kernel from the config, or an exact-GP fit on task 1.
pub fn task_one_kernel(config: &ExperimentConfig, stream: &TaskStream) -> Result<KernelSpec> {
    match &config.kernel {
        Some(k) => KernelSpec::try_from(k.clone()),
        None => {
            let t1 = &stream.batches[0];
            fit_hyperparameters(&t1.train_x, &DVector::from_column_slice(&t1.train_y), &SearchOptions::default())
        }
    }
}

/// Build the configured learner over a prepared stream.
pub fn make_learner<'s>(config: &ExperimentConfig, kernel: KernelSpec, stream: &'s TaskStream) -> Result<Box<dyn ContinualLearner + 's>> {
    Ok(match config.method {
        Method::Ohsgpr => Box::new(HippoLearner::new(
            kernel,
            config.inducing,
            config.rff_samples,
            config.scheme,
            stream,
            config.seed,
        )?
        .with_kfu_source(config.kfu_source)),
        Method::OsgprResample => Box::new(DiracLearner::new(kernel, config.inducing, Selection::Resample, config.seed)),
        Method::OvcPivchol => Box::new(DiracLearner::new(kernel, config.inducing, Selection::PivotedCholesky, config.seed)),
    })
}

/// Run the full stream: fit on task 1, update on each later task, and after
/// each task evaluate the held-out points of every task seen so far.
///
/// Errors inside the stream do not abort the report; they are recorded in
/// `failed_at` and the metrics gathered so far are kept.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ResultsReport> {
    config.validate()?;
    let data = load_dataset(config)?;
    let stream = build_stream(config, &data)?;
    let mut report = ResultsReport {
        config: config.clone(),
        metrics: Vec::new(),
        timing_seconds: Vec::new(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        hyperparameters: None,
        failed_at: None,
    };
    let kernel = match task_one_kernel(config, &stream) {
        Ok(k) => k,
        Err(e) => {
            report.failed_at = Some(FailureMarker {
                task: 1,
                error: e.in_task(1).to_string(),
            });
            return Ok(report);
        }
    };
    report.hyperparameters = Some(kernel.clone().into());
    let mut learner = make_learner(config, kernel, &stream)?;
    for (j, task) in stream.batches.iter().enumerate() {
        let start = Instant::now();
        let result = learner.learn(task).and_then(|_| evaluate(&*learner, &stream.batches[..=j], config, &mut report));
        report.timing_seconds.push(start.elapsed().as_secs_f64());
        if let Err(e) = result {
            report.failed_at = Some(FailureMarker {
                task: task.index,
                error: e.in_task(task.index).to_string(),
            });
            break;
        }
    }
    Ok(report)
}

fn evaluate(learner: &dyn ContinualLearner, seen: &[TaskBatch], config: &ExperimentConfig, report: &mut ResultsReport) -> Result<()> {
    let after = seen.last().map_or(0, |t| t.index);
    let all_x: Vec<Point> = seen.iter().flat_map(|t| t.test_x.iter().cloned()).collect();
    if all_x.is_empty() {
        return Ok(());
    }
    let pred = learner.predict(&all_x)?;
    let mut offset = 0;
    for t in seen {
        let n = t.test_x.len();
        if n == 0 {
            continue;
        }
        let mean = &pred.mean[offset..offset + n];
        let var = &pred.var[offset..offset + n];
        offset += n;
        let rmse = config
            .metrics
            .contains(&Metric::Rmse)
            .then(|| metric_rmse(&t.test_y, mean))
            .transpose()?;
        let nlpd = config
            .metrics
            .contains(&Metric::Nlpd)
            .then(|| metric_nlpd(&t.test_y, mean, var))
            .transpose()?;
        if rmse.is_some_and(|v| !v.is_finite()) || nlpd.is_some_and(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: format!("metrics of task {}", t.index),
                step: after,
            });
        }
        report.metrics.push(MetricEntry {
            eval_task: t.index,
            after_task: after,
            rmse,
            nlpd,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::data::SyntheticParams;

    fn small(method: Method) -> ExperimentConfig {
        ExperimentConfig {
            synthetic_params: SyntheticParams {
                points: 200,
                noise_std: 0.2,
                ..SyntheticParams::default()
            },
            tasks: 4,
            inducing: 10,
            rff_samples: 300,
            method,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn report_is_lower_triangular_and_finite() {
        for m in [Method::Ohsgpr, Method::OsgprResample, Method::OvcPivchol] {
            let r = run_experiment(&small(m)).unwrap();
            assert!(r.failed_at.is_none(), "{m}: {:?}", r.failed_at);
            assert_eq!(r.metrics.len(), 10);
            for j in 1..=4 {
                for i in 1..=j {
                    let e = r.entry(i, j).unwrap();
                    assert!(e.rmse.unwrap().is_finite() && e.nlpd.unwrap().is_finite());
                }
            }
            assert_eq!(r.timing_seconds.len(), 4);
        }
    }

    #[test]
    fn single_task_matches_direct_fit() {
        let mut c = small(Method::OvcPivchol);
        c.tasks = 1;
        let r = run_experiment(&c).unwrap();
        let data = load_dataset(&c).unwrap();
        let stream = build_stream(&c, &data).unwrap();
        let kernel = task_one_kernel(&c, &stream).unwrap();
        let mut l = DiracLearner::new(kernel, c.inducing, Selection::PivotedCholesky, c.seed);
        l.learn(&stream.batches[0]).unwrap();
        let t = &stream.batches[0];
        let p = l.predict(&t.test_x).unwrap();
        assert_eq!(r.entry(1, 1).unwrap().nlpd.unwrap(), metric_nlpd(&t.test_y, &p.mean, &p.var).unwrap());
    }

    #[test]
    fn method_swap_keeps_splits() {
        let a = small(Method::Ohsgpr);
        let b = small(Method::OsgprResample);
        let sa = build_stream(&a, &load_dataset(&a).unwrap()).unwrap();
        let sb = build_stream(&b, &load_dataset(&b).unwrap()).unwrap();
        assert_eq!(sa, sb);
    }

    #[test]
    fn failure_is_recorded() {
        let mut c = small(Method::Ohsgpr);
        c.kernel = Some(KernelParams {
            variance: 1.0,
            lengthscales: vec![0.5, 0.5],
            noise: 0.1,
        });
        let r = run_experiment(&c).unwrap();
        assert_eq!(r.failed_at.as_ref().map(|f| f.task), Some(1));
    }

    #[test]
    fn writes_json_and_csv() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = small(Method::OvcPivchol);
        c.tasks = 2;
        let r = run_experiment(&c).unwrap();
        r.write(dir.path()).unwrap();
        let back: ResultsReport = serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
        assert_eq!(back.metrics, r.metrics);
        let csv = std::fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
        assert_eq!(csv.lines().count(), 1 + r.metrics.len());
    }
}
