//! Stream a noisy series through the LegS learner task by task and report
//! how well each earlier task is still predicted.
//!
//! ```text
//! cargo run --release --example streaming_time_series -- [series.csv]
//! ```
//!
//! Without an argument a piecewise trend is generated.

use hippo_gp::harness::config::ExperimentConfig;
use hippo_gp::harness::experiment::run_experiment;

fn main() -> hippo_gp::Result<()> {
    let mut config = ExperimentConfig {
        synthetic: Some("piecewise-trend".into()),
        tasks: 5,
        inducing: 16,
        ..ExperimentConfig::default()
    };
    if let Some(path) = std::env::args().nth(1) {
        config.csv = Some(path.into());
        config.synthetic = None;
    }
    let report = run_experiment(&config)?;
    let tasks = report.timing_seconds.len();
    print!("{:>8}", "eval\\after");
    for j in 1..=tasks {
        print!("{j:>9}");
    }
    println!();
    for i in 1..=tasks {
        print!("{i:>10}");
        for j in 1..=tasks {
            match report.entry(i, j).and_then(|e| e.nlpd) {
                Some(v) => print!("{v:>9.3}"),
                None => print!("{:>9}", ""),
            }
        }
        println!();
    }
    let total: f64 = report.timing_seconds.iter().sum();
    println!("total update time {total:.3}s");
    Ok(())
}
