use std::io::{ErrorKind, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use madl_core::data::AssetClass;
use madl_core::metrics::{format_table, MetricsReport};
use madl_core::orchestrator::{fold_plan_csv, load_assets, plan_run, read_equity_csv, run, RunConfig};
use madl_core::Error;

/// Walk-forward training, backtesting and reporting for MADL-trained forecasters.
#[derive(Parser)]
#[command(name = "madl", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train, backtest and write every artifact and report.
    Run(ConfigArgs),
    /// Print the fold plan of every asset and model.
    Plan(ConfigArgs),
    /// Check the config and input files without training.
    Validate(ConfigArgs),
    /// Recompute the report row of an exported equity.csv.
    Metrics(MetricsArgs),
}

#[derive(Args)]
struct ConfigArgs {
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ClassArg {
    Equity,
    Crypto,
}

#[derive(Args)]
struct MetricsArgs {
    equity_csv: PathBuf,
    /// Sets periods per year: 252 for equity, 365 for crypto.
    #[arg(long, value_enum, default_value = "equity")]
    asset_class: ClassArg,
    #[arg(long, default_value = "strategy")]
    label: String,
}

fn log(record: serde_json::Value) {
    eprintln!("{record}");
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 2,
        Error::Data { .. } | Error::Planning(_) | Error::Io(_) => 3,
        Error::Divergence { .. } | Error::Numeric(_) => 4,
        Error::Shape { .. } | Error::Usage(_) | Error::Format { .. } => 1,
    }
}

enum Failure {
    Core(Error),
    /// Stdout was closed by the reader, e.g. `madl plan cfg.toml | head`.
    Closed,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

fn emit(text: &str) -> Result<(), Failure> {
    let mut out = std::io::stdout().lock();
    out.write_all(text.as_bytes())
        .and_then(|()| out.flush())
        .map_err(|e| match e.kind() {
            ErrorKind::BrokenPipe => Failure::Closed,
            _ => Failure::Core(e.into()),
        })
}

fn load(args: &ConfigArgs) -> Result<RunConfig, Error> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(jobs) = args.jobs {
        cfg.jobs = Some(jobs);
    }
    if let Some(dir) = &args.output_dir {
        cfg.output_dir = dir.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(command: Command) -> Result<(), Failure> {
    match command {
        Command::Run(args) => {
            let cfg = load(&args)?;
            let summary = run(&cfg, &|mut r| {
                r["level"] = json!("info");
                log(r)
            })?;
            let report =
                std::fs::read_to_string(summary.output_dir.join("report.txt")).map_err(Error::from)?;
            emit(&report)?;
        }
        Command::Plan(args) => {
            let cfg = load(&args)?;
            let assets = load_assets(&cfg)?;
            for job in plan_run(&cfg, &assets)? {
                emit(&format!(
                    "# {} {}\n{}",
                    job.symbol,
                    job.family.as_str(),
                    fold_plan_csv(&job)?
                ))?;
            }
        }
        Command::Validate(args) => {
            let cfg = load(&args)?;
            let assets = load_assets(&cfg)?;
            let jobs = plan_run(&cfg, &assets)?;
            let folds: usize = jobs.iter().map(|j| j.folds.len()).sum();
            let status = json!({"status": "ok", "assets": assets.len(), "jobs": jobs.len(), "folds": folds});
            emit(&format!("{status}\n"))?;
        }
        Command::Metrics(args) => {
            let class = match args.asset_class {
                ClassArg::Equity => AssetClass::Equity,
                ClassArg::Crypto => AssetClass::Crypto,
            };
            let line = read_equity_csv(&args.equity_csv)?;
            let report = MetricsReport::from_equity(&line, class.periods_per_year() as f64)?;
            emit(&format_table(&[(args.label, report)]))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) | Err(Failure::Closed) => ExitCode::SUCCESS,
        Err(Failure::Core(e)) => {
            let code = exit_code(&e);
            log(json!({
                "level": "error",
                "kind": e.kind(),
                "message": e.to_string(),
                "exit_code": code,
            }));
            ExitCode::from(code)
        }
    }
}
