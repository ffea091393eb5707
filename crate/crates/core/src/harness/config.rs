//! Experiment configuration in its JSON form.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::data::SyntheticParams;
use crate::harness::tasks::SortCriterion;
use crate::hippo::Scheme;
use crate::kernel::KernelParams;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    #[default]
    Ohsgpr,
    OsgprResample,
    OvcPivchol,
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ohsgpr" => Ok(Method::Ohsgpr),
            "osgpr-resample" => Ok(Method::OsgprResample),
            "ovc-pivchol" => Ok(Method::OvcPivchol),
            other => Err(Error::input(format!(
                "unknown method `{other}` (expected ohsgpr, osgpr-resample or ovc-pivchol)"
            ))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.pad(match self {
            Method::Ohsgpr => "ohsgpr",
            Method::OsgprResample => "osgpr-resample",
            Method::OvcPivchol => "ovc-pivchol",
        })
    }
}

/// How the streaming LegS learner obtains K_fu.
///
/// `features` projects the same RFF feature snapshot that builds K_uu, so the
/// joint prior over (f, u) stays a Gram matrix. `ode` evolves the exact-kernel
/// recurrence per input; it mixes exact and sampled kernels and can make the
/// joint prior indefinite when the RFF sample is small.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KfuSource {
    #[default]
    Features,
    Ode,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    Rmse,
    Nlpd,
}

fn default_tasks() -> usize {
    10
}
fn default_inducing() -> usize {
    20
}
fn default_rff() -> usize {
    1000
}
fn default_stride() -> usize {
    1
}
fn default_metrics() -> Vec<Metric> {
    vec![Metric::Rmse, Metric::Nlpd]
}

/// One experiment. Exactly one of `csv` and `synthetic` selects the data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    /// Generator name: `sine-mix` or `piecewise-trend`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<String>,
    #[serde(default)]
    pub synthetic_params: SyntheticParams,
    #[serde(default = "default_tasks")]
    pub tasks: usize,
    #[serde(default)]
    pub method: Method,
    /// Number of inducing variables M.
    #[serde(default = "default_inducing")]
    pub inducing: usize,
    #[serde(default = "default_rff")]
    pub rff_samples: usize,
    /// Step size; defaults to span(task 1)/|task 1| for series and 1 for
    /// multidimensional inputs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default = "default_stride")]
    pub stride: usize,
    #[serde(default)]
    pub scheme: Scheme,
    #[serde(default)]
    pub kfu_source: KfuSource,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub sort: SortCriterion,
    #[serde(default = "default_metrics")]
    pub metrics: Vec<Metric>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// Fixed hyperparameters. For series the lengthscale is in normalized
    /// time, where task 1 spans (0, 1]. Fitted on task 1 when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelParams>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            csv: None,
            synthetic: Some("sine-mix".into()),
            synthetic_params: SyntheticParams::default(),
            tasks: default_tasks(),
            method: Method::default(),
            inducing: default_inducing(),
            rff_samples: default_rff(),
            dt: None,
            stride: default_stride(),
            scheme: Scheme::default(),
            kfu_source: KfuSource::default(),
            seed: 0,
            sort: SortCriterion::default(),
            metrics: default_metrics(),
            output: None,
            kernel: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        let c: ExperimentConfig = serde_json::from_str(s)?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.csv, &self.synthetic) {
            (Some(_), Some(_)) => return Err(Error::input("set only one of `csv` and `synthetic`")),
            (None, None) => return Err(Error::input("one of `csv` or `synthetic` is required")),
            _ => {}
        }
        if self.tasks == 0 {
            return Err(Error::input("`tasks` must be >= 1"));
        }
        if self.inducing == 0 {
            return Err(Error::input("`inducing` must be >= 1"));
        }
        if self.rff_samples == 0 {
            return Err(Error::input("`rff_samples` must be >= 1"));
        }
        if self.stride == 0 {
            return Err(Error::input("`stride` must be >= 1"));
        }
        if let Some(dt) = self.dt {
            if !(dt.is_finite() && dt > 0.0) {
                return Err(Error::input("`dt` must be > 0"));
            }
        }
        if let Some(k) = &self.kernel {
            crate::kernel::KernelSpec::try_from(k.clone())?;
        }
        Ok(())
    }
}
