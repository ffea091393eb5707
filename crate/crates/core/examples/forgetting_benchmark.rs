//! Compare forgetting across the three streaming methods on a sine mixture.
//!
//! ```text
//! cargo run --release --example forgetting_benchmark -- [seed]
//! ```

use hippo_gp::harness::config::{ExperimentConfig, Method};
use hippo_gp::harness::experiment::run_experiment;

fn main() -> hippo_gp::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let tasks = 10;
    println!("{:<16} {:>10} {:>10} {:>12}", "method", "task1@1", "task1@10", "mean past");
    for method in [Method::Ohsgpr, Method::OsgprResample, Method::OvcPivchol] {
        let config = ExperimentConfig {
            method,
            seed,
            ..ExperimentConfig::default()
        };
        let r = run_experiment(&config)?;
        if let Some(f) = &r.failed_at {
            println!("{method:<16} failed at task {}: {}", f.task, f.error);
            continue;
        }
        let first = r.entry(1, 1).and_then(|e| e.nlpd).unwrap_or(f64::NAN);
        let last = r.entry(1, tasks).and_then(|e| e.nlpd).unwrap_or(f64::NAN);
        let mean = r.mean_nlpd_after(tasks).unwrap_or(f64::NAN);
        println!("{method:<16} {first:>10.4} {last:>10.4} {mean:>12.4}");
        if seed == 0 && method == Method::Ohsgpr {
            if let Some(k) = &r.hyperparameters {
                println!("  hyperparameters: {k:?}");
            }
        }
    }
    Ok(())
}
