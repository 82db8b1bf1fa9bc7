use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use netdp::experiments::{
    parse_kv, run_experiment, write_output, ExperimentConfig, ExperimentKind,
};
use netdp::Error;

/// Runs a privacy-accounting or protocol experiment and writes its results.
#[derive(Debug, Parser)]
#[command(name = "netdp", version)]
struct Cli {
    /// bounds_sweep, empirical_sweep, protocol_mc, sgd_compare or sigma_search.
    #[arg(long)]
    experiment: Option<String>,
    /// Flat `key = value` file; may also set experiment, seed, runs, workers, out and unchecked.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    runs: Option<usize>,
    /// Output root; results go to `<out>/<experiment>/<timestamp>-<seed>/`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Evaluate bounds outside their validity window, tagging the rows.
    #[arg(long)]
    unchecked: bool,
    /// Override one experiment parameter, e.g. `--set n_grid=10,100`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

struct Resolved {
    config: ExperimentConfig,
    out: PathBuf,
}

fn parse_field<T: std::str::FromStr>(key: &str, value: &str) -> netdp::Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{value}`")))
}

fn resolve(cli: Cli) -> netdp::Result<Resolved> {
    let mut params = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            parse_kv(&text)?
        }
        None => Default::default(),
    };
    for kv in &cli.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        params.insert(k.trim().to_string(), v.trim().to_string());
    }
    let mut take = |key: &str| params.remove(key);
    let experiment = cli
        .experiment
        .or_else(|| take("experiment"))
        .ok_or_else(|| Error::Config("no experiment given".into()))?;
    let kind: ExperimentKind = experiment.parse()?;
    let seed = match (cli.seed, take("seed")) {
        (Some(s), _) => s,
        (None, Some(s)) => parse_field("seed", &s)?,
        (None, None) => 0,
    };
    let runs = match (cli.runs, take("runs")) {
        (Some(r), _) => Some(r),
        (None, Some(r)) => Some(parse_field("runs", &r)?),
        (None, None) => None,
    };
    let workers = match (cli.workers, take("workers")) {
        (Some(w), _) => w,
        (None, Some(w)) => parse_field("workers", &w)?,
        (None, None) => 0,
    };
    let file_unchecked = match take("unchecked") {
        Some(u) => parse_field::<bool>("unchecked", &u)?,
        None => false,
    };
    let out = match (cli.out, take("out")) {
        (Some(o), _) => o,
        (None, Some(o)) => PathBuf::from(o),
        (None, None) => PathBuf::from("results"),
    };
    Ok(Resolved {
        config: ExperimentConfig {
            kind,
            params,
            seed,
            runs,
            workers,
            unchecked: cli.unchecked || file_unchecked,
        },
        out,
    })
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Infeasible(_) => 3,
        Error::Config(_) | Error::InvalidArgument(_) | Error::OutOfRange { .. } => 2,
        Error::Io(_) | Error::Json(_) | Error::Csv(_) => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let resolved = match resolve(cli) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code(&e));
        }
    };
    let cfg = &resolved.config;
    match run_experiment(cfg).and_then(|out| write_output(cfg, &out, &resolved.out)) {
        Ok(dir) => {
            println!("{}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            if cfg.kind == ExperimentKind::SigmaSearch {
                let kind = match e {
                    Error::Infeasible(_) => "infeasible",
                    _ => "error",
                };
                println!(
                    "{}",
                    serde_json::json!({ "error": kind, "message": e.to_string() })
                );
            }
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
