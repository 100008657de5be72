use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use maslov_eta_cli::run::{check, run, run_sweep};
use maslov_eta_cli::scenario::{SweepAxis, SweepSpec};
use maslov_eta_cli::{CliError, Report, Scenario, Timings};

#[derive(Parser)]
#[command(name = "maslov-eta", version, about = "Maslov-index and eta-form scenario runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output directory for report files.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Override the scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Report format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Subcommand)]
enum Command {
    /// Run the task of a scenario file.
    Run {
        /// Scenario file (TOML, or JSON with a `.json` extension).
        file: PathBuf,
    },
    /// Sweep one numerical parameter of a scenario.
    Sweep {
        /// Scenario file.
        file: PathBuf,
        /// Swept parameter.
        #[arg(long, value_enum)]
        axis: SweepAxis,
        /// Comma-separated values (defaults to the scenario's sweep values).
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Validation(format!("cannot write {}: {e}", path.display())))
}

fn emit(cli: &Cli, report: &Report, timings: &Timings) -> Result<(), CliError> {
    std::fs::create_dir_all(&cli.out).map_err(|e| CliError::Validation(format!("cannot create {}: {e}", cli.out.display())))?;
    match cli.format {
        Format::Json => write(&cli.out.join("report.json"), &report.to_json())?,
        Format::Csv => {
            write(&cli.out.join("identities.csv"), &report.identities_csv())?;
            if let Some(s) = report.sweep_csv() {
                write(&cli.out.join("sweep.csv"), &s)?;
            }
        }
    }
    let t = serde_json::to_string_pretty(timings).expect("timings serialise to JSON");
    write(&cli.out.join("timings.json"), &(t + "\n"))
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::Validation(format!("thread pool: {e}")))?;
    }
    let file = match &cli.command {
        Command::Run { file } | Command::Sweep { file, .. } => file,
    };
    let (mut scenario, dir) = Scenario::from_file(file)?;
    if let Some(seed) = cli.seed {
        scenario.params.seed = seed;
    }
    let (report, timings) = match &cli.command {
        Command::Run { .. } => run(&scenario, &dir)?,
        Command::Sweep { axis, values, .. } => {
            let values = match values {
                Some(v) => v.clone(),
                None => scenario
                    .sweep
                    .as_ref()
                    .filter(|s| s.axis == *axis)
                    .map(|s| s.values.clone())
                    .ok_or_else(|| CliError::Validation("no sweep values given and none in the scenario for this axis".into()))?,
            };
            run_sweep(&scenario, &dir, SweepSpec { axis: *axis, values })?
        }
    };
    emit(cli, &report, &timings)?;
    check(&report)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("maslov-eta: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
