//! Benchmark CLI: runs the R-sweep experiment harness and writes CSV or JSON
//! reports.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use dpgm::bench::{
    emit_report, run_experiment, to_json_string, write_csv, Algorithm, ExperimentConfig,
    ReportFormat,
};
use dpgm::Error;

#[derive(Parser, Debug)]
#[command(
    name = "dpgm-bench",
    version,
    about = "Benchmark differentially private geometric-median estimators on synthetic data"
)]
struct Cli {
    /// Number of data points.
    #[arg(long)]
    n: Option<usize>,

    /// Dimension.
    #[arg(long)]
    d: Option<usize>,

    /// Comma-separated list of a-priori radii R to sweep.
    #[arg(long = "sweep-R", value_delimiter = ',')]
    sweep_r: Option<Vec<f64>>,

    /// Discretization / grid-floor parameter.
    #[arg(long)]
    r: Option<f64>,

    /// Privacy parameter epsilon (for (epsilon, delta)-DP budgets).
    #[arg(long)]
    eps: Option<f64>,

    /// Privacy parameter delta.
    #[arg(long)]
    delta: Option<f64>,

    /// zCDP budget rho (alternative to eps/delta).
    #[arg(long)]
    rho: Option<f64>,

    /// Failure probability beta.
    #[arg(long)]
    beta: Option<f64>,

    /// Repetitions per (algorithm, R) cell.
    #[arg(long)]
    reps: Option<usize>,

    /// Comma-separated algorithms: dpgd-baseline, loc-dpgd,
    /// loc-cutting-plane, sinvs.
    #[arg(long, value_delimiter = ',')]
    algos: Option<Vec<String>>,

    /// Base RNG seed.
    #[arg(long)]
    seed: Option<u64>,

    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Output format.
    #[arg(long, value_parser = ["csv", "json"])]
    format: Option<String>,

    /// JSON config file mirroring the experiment config; explicit flags
    /// override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
}

fn build_config(cli: &Cli) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                Error::InvalidArgument(format!("cannot read config {}: {e}", path.display()))
            })?;
            serde_json::from_str::<ExperimentConfig>(&text)
                .map_err(|e| Error::InvalidArgument(format!("bad config file: {e}")))?
        }
        None => ExperimentConfig {
            n: 1000,
            d: 10,
            sweep_r: vec![100.0],
            r: 0.05,
            epsilon: None,
            delta: None,
            rho: None,
            beta: 0.05,
            reps: 10,
            algorithms: vec![Algorithm::DpgdBaseline, Algorithm::LocDpgd],
            seed: 0,
            record_timing: true,
        },
    };
    if let Some(n) = cli.n {
        cfg.n = n;
    }
    if let Some(d) = cli.d {
        cfg.d = d;
    }
    if let Some(sweep) = &cli.sweep_r {
        cfg.sweep_r = sweep.clone();
    }
    if let Some(r) = cli.r {
        cfg.r = r;
    }
    if let Some(e) = cli.eps {
        cfg.epsilon = Some(e);
    }
    if let Some(d) = cli.delta {
        cfg.delta = Some(d);
    }
    if let Some(rho) = cli.rho {
        cfg.rho = Some(rho);
    }
    if let Some(b) = cli.beta {
        cfg.beta = b;
    }
    if let Some(reps) = cli.reps {
        cfg.reps = reps;
    }
    if let Some(algos) = &cli.algos {
        cfg.algorithms = algos
            .iter()
            .map(|s| Algorithm::parse(s))
            .collect::<Result<_, _>>()?;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), Error> {
    let cfg = build_config(cli)?;
    cfg.validate()?;
    let format = match cli.format.as_deref() {
        Some("json") => ReportFormat::Json,
        _ => ReportFormat::Csv,
    };
    let report = run_experiment(&cfg)?;
    match &cli.out {
        Some(path) => emit_report(&report, format, path)?,
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            match format {
                ReportFormat::Csv => write_csv(&report, &mut lock)?,
                ReportFormat::Json => lock.write_all(to_json_string(&report)?.as_bytes())?,
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Io(_) | Error::Csv(_) => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}
