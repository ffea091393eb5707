//! Continual regression on three-dimensional inputs ordered into a stream by
//! kernel similarity.

use hippo_gp::harness::config::{ExperimentConfig, Method};
use hippo_gp::harness::data::{write_series_csv, Dataset};
use hippo_gp::harness::experiment::run_experiment;
use hippo_gp::harness::tasks::SortCriterion;
use rand::{Rng, SeedableRng};

fn main() -> hippo_gp::Result<()> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    let x: Vec<Vec<f64>> = (0..600).map(|_| (0..3).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
    let y = x
        .iter()
        .map(|p| p[0].sin() * p[1].cos() + 0.3 * p[2] + 0.1 * rng.random_range(-1.0..1.0))
        .collect();
    let dir = std::env::temp_dir().join("hippo-gp-multidim");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("data.csv");
    write_series_csv(&path, &Dataset { x, y })?;

    println!("{:<16} {:>12} {:>12}", "method", "NLPD task 1", "mean final");
    for method in [Method::Ohsgpr, Method::OsgprResample, Method::OvcPivchol] {
        let config = ExperimentConfig {
            csv: Some(path.clone()),
            synthetic: None,
            tasks: 5,
            inducing: 32,
            sort: SortCriterion::KernelMax,
            method,
            ..ExperimentConfig::default()
        };
        let r = run_experiment(&config)?;
        let first = r.entry(1, 5).and_then(|e| e.nlpd).unwrap_or(f64::NAN);
        let mean = r.mean_nlpd_after(5).unwrap_or(f64::NAN);
        println!("{method:<16} {first:>12.4} {mean:>12.4}");
    }
    Ok(())
}
