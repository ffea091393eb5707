use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hippo_gp::harness::config::{ExperimentConfig, Method};
use hippo_gp::harness::experiment::run_experiment;
use hippo_gp::harness::oracle::run_oracles;
use hippo_gp::harness::stability::{stability_report, StabilityOptions};
use hippo_gp::hippo::Scheme;

#[derive(Parser)]
#[command(name = "hippo-gp", version, about = "Streaming sparse GP regression with LegS inducing variables")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one continual-learning experiment and write report.json and metrics.csv.
    Run(RunArgs),
    /// Check the numerical core against quadrature and exact-GP references.
    Oracle(OracleArgs),
    /// Track direct-ODE and RFF K_uu deviations over a long horizon.
    StabilityReport(StabilityArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment config; defaults describe the sine-mix benchmark.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    method: Option<Method>,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write oracle.json here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct StabilityArgs {
    /// JSON file with stability options; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "stability")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    order: Option<usize>,
    #[arg(long)]
    lengthscale: Option<f64>,
    #[arg(long)]
    rff_samples: Option<usize>,
    #[arg(long)]
    scheme: Option<Scheme>,
}

fn run(args: RunArgs) -> hippo_gp::Result<ExitCode> {
    let mut config = match &args.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = args.seed {
        config.seed = s;
    }
    if let Some(m) = args.method {
        config.method = m;
    }
    let out = args
        .out
        .or_else(|| config.output.clone())
        .unwrap_or_else(|| PathBuf::from("results"));
    let report = run_experiment(&config)?;
    report.write(&out)?;
    let tasks = report.timing_seconds.len();
    for j in 1..=tasks {
        if let Some(v) = report.mean_nlpd_after(j) {
            println!("after task {j:>3}: mean NLPD over seen tasks {v:.4}");
        }
    }
    println!("report written to {}", out.display());
    if let Some(f) = &report.failed_at {
        eprintln!("stream failed at task {}: {}", f.task, f.error);
        return Ok(ExitCode::FAILURE);
    }
    Ok(ExitCode::SUCCESS)
}

fn oracle(args: OracleArgs) -> hippo_gp::Result<ExitCode> {
    let checks = run_oracles(args.seed);
    for c in &checks {
        let tag = if c.passed { "PASS" } else { "FAIL" };
        match &c.failure {
            Some(e) => println!("{tag} {:<28} error: {e}", c.name),
            None => println!("{tag} {:<28} {:.3e} < {:.1e}", c.name, c.error, c.tolerance),
        }
    }
    if let Some(dir) = args.out {
        std::fs::create_dir_all(&dir)?;
        std::fs::write(dir.join("oracle.json"), serde_json::to_string_pretty(&checks)?)?;
    }
    Ok(if checks.iter().all(|c| c.passed) {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn stability(args: StabilityArgs) -> hippo_gp::Result<ExitCode> {
    let mut opts: StabilityOptions = match &args.config {
        Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?)?,
        None => StabilityOptions::default(),
    };
    if let Some(v) = args.seed {
        opts.seed = v;
    }
    if let Some(v) = args.horizon {
        opts.horizon = v;
    }
    if let Some(v) = args.dt {
        opts.dt = v;
    }
    if let Some(v) = args.order {
        opts.order = v;
    }
    if let Some(v) = args.lengthscale {
        opts.lengthscale = v;
    }
    if let Some(v) = args.rff_samples {
        opts.rff_samples = v;
    }
    if let Some(v) = args.scheme {
        opts.scheme = v;
    }
    let report = stability_report(&opts)?;
    println!("{:>8} {:>14} {:>14}", "t", "direct", "rff");
    for p in &report.trajectory {
        let d = p.direct.map(|v| format!("{v:.4e}")).unwrap_or_else(|| "diverged".into());
        println!("{:>8.3} {:>14} {:>14.4e}", p.t, d, p.rff);
    }
    match &report.direct_divergence {
        Some(d) => println!("direct path diverged at step {} (t = {:.4}, |K|max = {:.3e})", d.step, d.t, d.norm),
        None => println!("direct path stayed bounded to t = {}", opts.horizon),
    }
    report.write(&args.out)?;
    println!("trajectories written to {}", args.out.display());
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Oracle(a) => oracle(a),
        Command::StabilityReport(a) => stability(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
