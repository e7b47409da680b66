use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use wigner_harness::{run, ExperimentConfig, ExperimentKind, HarnessError};

#[derive(Parser, Debug)]
#[command(name = "wfluct", version, about = "Entry fluctuations of functions of Wigner matrices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Predicted functionals and entry laws, no sampling
    Predict(Args),
    /// Monte Carlo entries of f(X)
    EntryMc(Args),
    /// Covariances of rescaled resolvent entries
    ResolventField(Args),
    /// Covariances of the Schur complement field
    SchurField(Args),
    /// CLT for normalized quadratic forms
    QfClt(Args),
    /// Cumulant expansion of E ξφ(ξ)
    Decoupling(Args),
    /// Finite-N correction rates
    Decay(Args),
    /// Helffer-Sjöstrand reconstruction against the spectral path
    HsCheck(Args),
}

#[derive(clap::Args, Debug)]
struct Args {
    /// TOML configuration; the subcommand's preset is used without it
    #[arg(long)]
    config: Option<PathBuf>,
    /// Matrix dimensions, comma separated
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    #[arg(long)]
    replicas: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// JSON result path; stdout when absent
    #[arg(long)]
    out: Option<PathBuf>,
    /// Raw per-replica CSV path
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Run replicas on a single thread
    #[arg(long)]
    serial: bool,
    /// Print the resolved configuration as TOML and exit
    #[arg(long)]
    print_config: bool,
}

impl Command {
    fn split(self) -> (ExperimentKind, Args) {
        match self {
            Command::Predict(a) => (ExperimentKind::Predict, a),
            Command::EntryMc(a) => (ExperimentKind::EntryMc, a),
            Command::ResolventField(a) => (ExperimentKind::ResolventField, a),
            Command::SchurField(a) => (ExperimentKind::SchurField, a),
            Command::QfClt(a) => (ExperimentKind::QfClt, a),
            Command::Decoupling(a) => (ExperimentKind::Decoupling, a),
            Command::Decay(a) => (ExperimentKind::Decay, a),
            Command::HsCheck(a) => (ExperimentKind::HsCheck, a),
        }
    }
}

fn load(kind: ExperimentKind, args: Args) -> Result<ExperimentConfig, HarnessError> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::from_toml(&std::fs::read_to_string(path)?, Some(kind))?,
        None => ExperimentConfig::preset(kind),
    };
    if cfg.kind != kind {
        return Err(HarnessError::Config(format!("config is for {}, not {}", cfg.kind.as_str(), kind.as_str())));
    }
    if let Some(n) = args.n {
        cfg.n = n;
    }
    if let Some(r) = args.replicas {
        cfg.replicas = r;
    }
    if let Some(s) = args.seed {
        cfg.master_seed = s;
    }
    if args.out.is_some() {
        cfg.output = args.out;
    }
    if args.csv.is_some() {
        cfg.csv = args.csv;
    }
    if args.serial {
        cfg.parallel = false;
    }
    Ok(cfg)
}

fn execute(kind: ExperimentKind, args: Args) -> Result<bool, HarnessError> {
    let print_only = args.print_config;
    let cfg = load(kind, args)?;
    if print_only {
        print!("{}", cfg.to_toml()?);
        return Ok(true);
    }
    let result = run(&cfg)?;
    let json = result.to_json()?;
    match &cfg.output {
        Some(path) => std::fs::write(path, json + "\n")?,
        None => println!("{json}"),
    }
    if !result.passed() {
        eprintln!("{}", serde_json::to_string_pretty(&result.failures())?);
    }
    Ok(result.passed())
}

fn main() -> ExitCode {
    let (kind, args) = Cli::parse().command.split();
    match execute(kind, args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("wfluct: {e}");
            ExitCode::from(2)
        }
    }
}
