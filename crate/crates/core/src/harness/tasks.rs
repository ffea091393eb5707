//! Task construction: ordering, splitting, and pseudo-time assignment.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::data::Dataset;
use crate::kernel::{KernelSpec, Point};

/// Ordering applied to inputs before they are split into tasks.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SortCriterion {
    #[default]
    GivenOrder,
    FirstDimension,
    L2Origin,
    KernelMax,
    KernelMin,
    Random,
}

impl std::str::FromStr for SortCriterion {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.into()))
            .map_err(|_| Error::input(format!("unknown sorting criterion `{s}`")))
    }
}

/// Permutation of `x` under `criterion`; ties go to the lowest original index.
///
/// `kernel` is needed only by the kernel-similarity chains, `seed` only by
/// `random`.
pub fn sort_multidim(x: &[Point], criterion: SortCriterion, kernel: Option<&KernelSpec>, seed: u64) -> Result<Vec<usize>> {
    let n = x.len();
    let mut idx: Vec<usize> = (0..n).collect();
    match criterion {
        SortCriterion::GivenOrder => {}
        SortCriterion::FirstDimension => idx.sort_by(|&a, &b| x[a][0].total_cmp(&x[b][0])),
        SortCriterion::L2Origin => {
            let norm = |p: &Point| p.iter().map(|v| v * v).sum::<f64>();
            idx.sort_by(|&a, &b| norm(&x[a]).total_cmp(&norm(&x[b])));
        }
        SortCriterion::Random => idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed)),
        SortCriterion::KernelMax | SortCriterion::KernelMin => {
            let k = kernel.ok_or_else(|| Error::input("kernel-similarity sorting needs a kernel"))?;
            k.check_points(x, "inputs")?;
            let better: fn(f64, f64) -> bool = if criterion == SortCriterion::KernelMax {
                |a, b| a > b
            } else {
                |a, b| a < b
            };
            idx = similarity_chain(x, k, better);
        }
    }
    Ok(idx)
}

fn similarity_chain(x: &[Point], k: &KernelSpec, better: fn(f64, f64) -> bool) -> Vec<usize> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let origin = vec![0.0; k.dim()];
    let mut used = vec![false; n];
    let mut out = Vec::with_capacity(n);
    let mut anchor = origin;
    for _ in 0..n {
        let mut best: Option<(usize, f64)> = None;
        for i in 0..n {
            if used[i] {
                continue;
            }
            let s = k.eval(&x[i], &anchor);
            if best.is_none_or(|(_, b)| better(s, b)) {
                best = Some((i, s));
            }
        }
        let (i, _) = best.expect("unvisited point remains");
        used[i] = true;
        out.push(i);
        anchor = x[i].clone();
    }
    out
}

/// A contiguous slice of the ordered data with its held-out points.
#[derive(Clone, Debug, PartialEq)]
pub struct TaskBatch {
    /// 1-based task index.
    pub index: usize,
    pub train_x: Vec<Point>,
    pub train_y: Vec<f64>,
    pub test_x: Vec<Point>,
    pub test_y: Vec<f64>,
    /// Last step index covered by this task.
    pub end_step: usize,
}

/// Contiguous batches with sizes differing by at most one, larger first.
/// Within a batch every 10th point (local indices 9, 19, …) is held out.
pub fn split_tasks(data: &Dataset, tasks: usize) -> Result<Vec<TaskBatch>> {
    if tasks == 0 || tasks > data.len() {
        return Err(Error::input(format!("cannot split {} points into {tasks} tasks", data.len())));
    }
    let base = data.len() / tasks;
    let extra = data.len() % tasks;
    let mut out = Vec::with_capacity(tasks);
    let mut start = 0;
    for t in 0..tasks {
        let size = base + usize::from(t < extra);
        let mut b = TaskBatch {
            index: t + 1,
            train_x: Vec::new(),
            train_y: Vec::new(),
            test_x: Vec::new(),
            test_y: Vec::new(),
            end_step: 0,
        };
        for (local, i) in (start..start + size).enumerate() {
            if local % 10 == 9 {
                b.test_x.push(data.x[i].clone());
                b.test_y.push(data.y[i]);
            } else {
                b.train_x.push(data.x[i].clone());
                b.train_y.push(data.y[i]);
            }
        }
        out.push(b);
        start += size;
    }
    Ok(out)
}

/// How the HiPPO recurrences traverse the stream.
#[derive(Clone, Debug, PartialEq)]
pub enum TimeAxis {
    /// Inputs are (normalized) times; driver is the scalar time.
    Series,
    /// Training inputs in pseudo-time order, `path[k-1]` at step k.
    Path(Vec<Point>),
}

/// Ordered tasks with step boundaries.
#[derive(Clone, Debug, PartialEq)]
pub struct TaskStream {
    pub dt: f64,
    pub stride: usize,
    pub axis: TimeAxis,
    pub batches: Vec<TaskBatch>,
    /// Affine map applied to series inputs: x' = (x − offset)/scale.
    pub time_map: Option<(f64, f64)>,
}

/// Smallest step on the stride lattice 1, 1+s, 1+2s, … that is ≥ k.
fn lattice_ceil(k: usize, stride: usize) -> usize {
    1 + (k.max(1) - 1).div_ceil(stride) * stride
}

fn lattice_floor(k: usize, stride: usize) -> usize {
    1 + (k.max(1) - 1) / stride * stride
}

/// Order, split and assign step boundaries.
///
/// One-dimensional data is a time series: the order must be strictly
/// increasing after sorting, inputs are mapped so task 1 spans (0, 1], and
/// the boundary of task j is the step nearest its last input.
/// Multidimensional training inputs get pseudo-times k·dt in stream order.
pub fn prepare_stream(
    data: &Dataset,
    tasks: usize,
    criterion: SortCriterion,
    sort_kernel: Option<&KernelSpec>,
    dt: Option<f64>,
    stride: usize,
    seed: u64,
) -> Result<TaskStream> {
    if data.is_empty() {
        return Err(Error::input("dataset is empty"));
    }
    if stride == 0 {
        return Err(Error::input("stride must be >= 1"));
    }
    let perm = sort_multidim(&data.x, criterion, sort_kernel, seed)?;
    let ordered = Dataset {
        x: perm.iter().map(|&i| data.x[i].clone()).collect(),
        y: perm.iter().map(|&i| data.y[i]).collect(),
    };
    if data.dim() == 1 {
        series_stream(ordered, tasks, dt, stride)
    } else {
        path_stream(ordered, tasks, dt, stride)
    }
}

fn series_stream(mut data: Dataset, tasks: usize, dt: Option<f64>, stride: usize) -> Result<TaskStream> {
    if data.x.windows(2).any(|w| w[1][0].partial_cmp(&w[0][0]) != Some(std::cmp::Ordering::Greater)) {
        return Err(Error::input(
            "series inputs must be strictly increasing; sort by first-dimension",
        ));
    }
    let n1 = {
        let base = data.len() / tasks.max(1);
        base + usize::from(!data.len().is_multiple_of(tasks.max(1)))
    };
    if n1 < 2 {
        return Err(Error::input("first task needs at least two points to fix the time scale"));
    }
    let first = data.x[0][0];
    let last1 = data.x[n1 - 1][0];
    let h = (last1 - first) / (n1 - 1) as f64;
    let offset = first - h;
    let scale = last1 - offset;
    for p in &mut data.x {
        p[0] = (p[0] - offset) / scale;
    }
    let dt = dt.unwrap_or(1.0 / n1 as f64);
    let mut batches = split_tasks(&data, tasks)?;
    let mut prev = 0;
    for b in &mut batches {
        let t_end = b
            .train_x
            .iter()
            .chain(&b.test_x)
            .map(|p| p[0])
            .fold(f64::NEG_INFINITY, f64::max);
        let k = ((t_end / dt).round() as usize).max(prev + 1);
        b.end_step = lattice_ceil(k, stride);
        prev = b.end_step;
    }
    Ok(TaskStream {
        dt,
        stride,
        axis: TimeAxis::Series,
        batches,
        time_map: Some((offset, scale)),
    })
}

fn path_stream(data: Dataset, tasks: usize, dt: Option<f64>, stride: usize) -> Result<TaskStream> {
    let mut batches = split_tasks(&data, tasks)?;
    let mut path = Vec::new();
    let mut prev = 0;
    for b in &mut batches {
        path.extend(b.train_x.iter().cloned());
        let k = lattice_floor(path.len(), stride);
        if k <= prev {
            return Err(Error::input(format!(
                "task {} adds no step at stride {stride}",
                b.index
            )));
        }
        b.end_step = k;
        prev = k;
    }
    Ok(TaskStream {
        dt: dt.unwrap_or(1.0),
        stride,
        axis: TimeAxis::Path(path),
        batches,
        time_map: None,
    })
}
