//! Series datasets: CSV ingestion and synthetic generators.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::Point;

/// Row-ordered inputs and targets.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub x: Vec<Point>,
    pub y: Vec<f64>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.first().map_or(0, Vec::len)
    }
}

/// Read a CSV with header `x0[,x1,...],y`.
pub fn load_series_csv(path: &Path) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_path(path).map_err(csv_error)?;
    let header = rdr.headers().map_err(csv_error)?.clone();
    let cols: Vec<&str> = header.iter().map(str::trim).collect();
    let dim = cols.len().saturating_sub(1);
    let valid = dim >= 1
        && cols.last() == Some(&"y")
        && cols[..dim].iter().enumerate().all(|(i, c)| *c == format!("x{i}"));
    if !valid {
        return Err(Error::Parse {
            line: 1,
            message: format!("header must be `x0[,x1,...],y`, got `{}`", cols.join(",")),
        });
    }
    let mut x = Vec::new();
    let mut y = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_error)?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != dim + 1 {
            return Err(Error::Parse {
                line,
                message: format!("expected {} fields, found {}", dim + 1, rec.len()),
            });
        }
        let mut vals = Vec::with_capacity(dim + 1);
        for field in rec.iter() {
            let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
                line,
                message: format!("`{field}` is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line,
                    message: format!("non-finite value `{field}`"),
                });
            }
            vals.push(v);
        }
        y.push(vals.pop().expect("dim + 1 >= 2 fields"));
        x.push(vals);
    }
    Ok(Dataset { x, y })
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse {
            line,
            message: format!("{other:?}"),
        },
    }
}

/// Write a dataset in the format read by [`load_series_csv`]. Values use the
/// shortest representation that parses back to the same bits.
pub fn write_series_csv(path: &Path, data: &Dataset) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    let mut header: Vec<String> = (0..data.dim()).map(|i| format!("x{i}")).collect();
    header.push("y".into());
    w.write_record(&header).map_err(csv_error)?;
    for (x, y) in data.x.iter().zip(&data.y) {
        let row: Vec<String> = x.iter().chain(std::iter::once(y)).map(|v| v.to_string()).collect();
        w.write_record(&row).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// Parameters of the synthetic generators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticParams {
    pub points: usize,
    /// Cycles per unit input (sine-mix).
    pub frequencies: Vec<f64>,
    pub amplitudes: Vec<f64>,
    pub phases: Vec<f64>,
    pub noise_std: f64,
    /// Number of linear pieces (piecewise-trend).
    pub segments: usize,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        SyntheticParams {
            points: 1000,
            frequencies: vec![2.0, 12.0],
            amplitudes: vec![1.0, 0.5],
            phases: vec![0.0, 0.0],
            noise_std: 0.5,
            segments: 5,
        }
    }
}

/// Generate `sine-mix` or `piecewise-trend` on a uniform grid over [0, 1).
pub fn make_synthetic(name: &str, params: &SyntheticParams, seed: u64) -> Result<Dataset> {
    let n = params.points;
    if n == 0 {
        return Err(Error::input("synthetic dataset needs at least one point"));
    }
    if params.noise_std.is_nan() || params.noise_std < 0.0 {
        return Err(Error::input("noise_std must be >= 0"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, params.noise_std).map_err(|e| Error::input(e.to_string()))?;
    let xs: Vec<f64> = (0..n).map(|i| i as f64 / n as f64).collect();
    let signal: Vec<f64> = match name {
        "sine-mix" => {
            let p = params;
            if p.amplitudes.len() != p.frequencies.len() {
                return Err(Error::input("sine-mix needs one amplitude per frequency"));
            }
            if !p.phases.is_empty() && p.phases.len() != p.frequencies.len() {
                return Err(Error::input("sine-mix phases must be empty or one per frequency"));
            }
            xs.iter()
                .map(|x| {
                    (0..p.frequencies.len())
                        .map(|j| {
                            let phase = p.phases.get(j).copied().unwrap_or(0.0);
                            p.amplitudes[j] * (std::f64::consts::TAU * p.frequencies[j] * x + phase).sin()
                        })
                        .sum()
                })
                .collect()
        }
        "piecewise-trend" => {
            let segs = params.segments.max(1);
            let unit = Normal::new(0.0, 1.0).expect("unit normal");
            let slopes: Vec<f64> = (0..segs).map(|_| 3.0 * unit.sample(&mut rng)).collect();
            let mut knots = vec![0.0];
            for (j, s) in slopes.iter().enumerate() {
                knots.push(knots[j] + s / segs as f64);
            }
            xs.iter()
                .map(|x| {
                    let pos = x * segs as f64;
                    let j = (pos.floor() as usize).min(segs - 1);
                    knots[j] + slopes[j] * (pos - j as f64) / segs as f64
                        + 0.3 * (std::f64::consts::TAU * 8.0 * x).sin()
                })
                .collect()
        }
        other => return Err(Error::input(format!("unknown synthetic dataset `{other}`"))),
    };
    let y = signal.iter().map(|s| s + noise.sample(&mut rng)).collect();
    Ok(Dataset {
        x: xs.into_iter().map(|x| vec![x]).collect(),
        y,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn reads_rows_in_order() {
        let f = write("x0,y\n0.5,1\n0.1,2\n0.9,3\n");
        let d = load_series_csv(f.path()).unwrap();
        assert_eq!(d.x, vec![vec![0.5], vec![0.1], vec![0.9]]);
        assert_eq!(d.y, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn infers_dimension() {
        let f = write("x0,x1,y\n1,2,3\n");
        assert_eq!(load_series_csv(f.path()).unwrap().dim(), 2);
    }

    #[test]
    fn malformed_row_cites_line() {
        let mut s = String::from("x0,y\n");
        for i in 0..15 {
            s.push_str(&format!("{i},{i}\n"));
        }
        s.push_str("16,abc\n");
        let err = load_series_csv(write(&s).path()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 17, .. }), "{err:?}");
    }

    #[test]
    fn nan_cell_rejected() {
        let err = load_series_csv(write("x0,y\n1,NaN\n").path()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn bad_header_rejected() {
        assert!(load_series_csv(write("t,y\n1,2\n").path()).is_err());
    }

    #[test]
    fn noiseless_single_sine() {
        let p = SyntheticParams {
            points: 400,
            frequencies: vec![1.0],
            amplitudes: vec![1.0],
            phases: vec![0.0],
            noise_std: 0.0,
            ..SyntheticParams::default()
        };
        let d = make_synthetic("sine-mix", &p, 0).unwrap();
        let m = d.y.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        assert!((m - 1.0).abs() < 1e-3);
    }

    #[test]
    fn deterministic_given_seed() {
        let p = SyntheticParams::default();
        assert_eq!(make_synthetic("sine-mix", &p, 4).unwrap(), make_synthetic("sine-mix", &p, 4).unwrap());
        assert_eq!(
            make_synthetic("piecewise-trend", &p, 4).unwrap(),
            make_synthetic("piecewise-trend", &p, 4).unwrap()
        );
        assert!(make_synthetic("nope", &p, 4).is_err());
    }

    #[test]
    fn signal_power() {
        let p = SyntheticParams {
            points: 10_000,
            noise_std: 0.3,
            ..SyntheticParams::default()
        };
        let d = make_synthetic("sine-mix", &p, 1).unwrap();
        let n = d.len() as f64;
        let mean = d.y.iter().sum::<f64>() / n;
        let var = d.y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let expect = 0.5 * (1.0 + 0.25) + 0.09;
        assert!((var - expect).abs() < 0.05 * expect, "{var} vs {expect}");
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let d = make_synthetic("sine-mix", &SyntheticParams::default(), 9).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        write_series_csv(f.path(), &d).unwrap();
        assert_eq!(load_series_csv(f.path()).unwrap(), d);
    }
}
