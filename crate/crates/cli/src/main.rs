//! `augope` command-line driver: experiment grids, Δ analysis, closed-form
//! verification and environment listing.

use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use augope::environments::{EnvConfig, EnvKind};
use augope::harness::export::{output_path, render, write_rows, Format, Record};
use augope::harness::{delta_analysis, run_grid, verify_theorems, ExperimentConfig};
use augope::OpeError;
use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "augope", version, about = "Off-policy evaluation with counterfactual annotations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the (bias, excess variance) grid for every estimator and policy pair.
    RunGrid(RunArgs),
    /// Compare DM⁺-IS against the best baseline on each grid cell.
    Delta(RunArgs),
    /// Check the closed-form bias and variance expressions against simulation.
    VerifyTheorems(VerifyArgs),
    /// List the available environments.
    ListEnvs,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// JSON experiment configuration; unknown keys are rejected.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Environment to use, replacing the configured one when the kind differs.
    #[arg(long, value_name = "NAME")]
    env: Option<EnvKind>,
    /// Root seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Trials per policy pair and cell.
    #[arg(long)]
    trials: Option<usize>,
    /// Worker threads; the output does not depend on this.
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory; results go to standard output when neither this nor the config sets one.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Output format.
    #[arg(long, default_value = "csv", value_parser = parse_format)]
    format: Format,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// Root seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Simulated datasets per check.
    #[arg(long, default_value_t = 100_000)]
    trials: usize,
    /// Samples per dataset.
    #[arg(long, default_value_t = 100)]
    n: usize,
}

fn parse_format(s: &str) -> Result<Format, OpeError> {
    s.parse()
}

/// Failure classes mapped to exit codes.
enum Failure {
    Config(OpeError),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 1,
            Failure::Runtime(_) => 2,
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Config(e) => format!("configuration error: {e}"),
            Failure::Runtime(e) => format!("run failed: {e}"),
        }
    }
}

fn runtime(e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(e.to_string())
}

fn load_config(args: &RunArgs) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path).map_err(Failure::Config)?,
        None => ExperimentConfig::for_env(args.env.unwrap_or(EnvKind::TwoContext)),
    };
    if let Some(kind) = args.env {
        if cfg.env.kind() != kind {
            cfg.env = EnvConfig::default_for(kind);
        }
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(trials) = args.trials {
        cfg.trials = trials;
    }
    if let Some(workers) = args.workers {
        cfg.workers = Some(workers);
    }
    if let Some(out) = &args.out {
        cfg.output = Some(out.clone());
    }
    Ok(cfg)
}

fn emit<R: Record>(rows: &[R], kind: &str, env: EnvKind, cfg: &ExperimentConfig, format: Format) -> Result<(), Failure> {
    match &cfg.output {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| runtime(format!("cannot create {}: {e}", dir.display())))?;
            let path = output_path(dir, kind, env.name(), format);
            write_rows(rows, &path, format).map_err(runtime)?;
            eprintln!("wrote {}", path.display());
        }
        None => {
            let text = render(rows, format).map_err(runtime)?;
            match std::io::stdout().write_all(text.as_bytes()) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => return Err(runtime(e)),
                _ => {}
            }
        }
    }
    Ok(())
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::RunGrid(args) => {
            let cfg = load_config(&args)?;
            let exp = cfg.resolve().map_err(Failure::Config)?;
            let result = run_grid(&exp).map_err(runtime)?;
            emit(&result.rows, "grid", exp.env.kind, &cfg, args.format)
        }
        Command::Delta(args) => {
            let cfg = load_config(&args)?;
            let exp = cfg.resolve_for_delta().map_err(Failure::Config)?;
            let result = delta_analysis(&exp).map_err(runtime)?;
            emit(&result.rows, "delta", exp.env.kind, &cfg, args.format)
        }
        Command::VerifyTheorems(args) => {
            if args.trials < 2 || args.n == 0 {
                return Err(Failure::Config(OpeError::Config("verify needs at least 2 trials and a positive n".into())));
            }
            let report = verify_theorems(args.seed, args.trials, args.n).map_err(runtime)?;
            print!("{}", report.render());
            if report.all_passed() {
                Ok(())
            } else {
                Err(runtime("some checks disagree with their closed forms"))
            }
        }
        Command::ListEnvs => {
            for kind in EnvKind::ALL {
                let env = EnvConfig::default_for(kind).build().map_err(runtime)?;
                let shape = env.spec.shape();
                println!(
                    "{:<12} contexts {:>5}  actions {}  n {:>4}  policy pairs {}",
                    kind.name(),
                    shape.n_contexts,
                    shape.n_actions,
                    kind.default_n(),
                    env.suite.len()
                );
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
