use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use sensornet_cli::config::{Overrides, ReportFormat, ScenarioConfig};
use sensornet_cli::report;
use sensornet_cli::run::{self, Command as RunCommand};
use sensornet_cli::sweep;

/// Deterministic simulator for entangled sensor networks: stabilizer
/// verification of distributed resource states under adversaries, private
/// estimation of linear phase functions, and Fisher-information audits.
///
/// Exit code 0 means the run completed; accept/reject is data in the
/// report, not an exit status. Errors exit nonzero.
#[derive(Parser)]
#[command(name = "sensornet", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Scenario config, TOML
    #[arg(long, short)]
    config: PathBuf,
    /// Override the master seed
    #[arg(long)]
    seed: Option<u64>,
    /// Override the repetition count
    #[arg(long)]
    reps: Option<usize>,
    /// Override the output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the report formats (comma separated)
    #[arg(long, value_delimiter = ',')]
    formats: Option<Vec<ReportFormat>>,
}

#[derive(Subcommand)]
enum Command {
    /// Run verification repetitions of the configured resource
    Verify(#[command(flatten)] CommonArgs),
    /// Run the full sensing protocol and estimate the phase function
    Sense(#[command(flatten)] CommonArgs),
    /// Fisher information of a configured state family, with an
    /// independent finite-difference cross-check
    Qfi(#[command(flatten)] CommonArgs),
    /// Measure the privacy leakage of the state surviving verification
    PrivacyAudit(#[command(flatten)] CommonArgs),
    /// Rerun a scenario with one numeric config field swept over values
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        /// Dotted path of the field to sweep, e.g. verification.c
        #[arg(long)]
        axis: String,
        /// Comma-separated numeric values
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
}

fn main() {
    if let Err(e) = real_main() {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn real_main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Verify(common) => single(common, RunCommand::Verify),
        Command::Sense(common) => single(common, RunCommand::Sense),
        Command::Qfi(common) => single(common, RunCommand::Qfi),
        Command::PrivacyAudit(common) => single(common, RunCommand::PrivacyAudit),
        Command::Sweep {
            common,
            axis,
            values,
        } => run_sweep(common, &axis, &values),
    }
}

fn overrides_of(common: &CommonArgs) -> Overrides {
    Overrides {
        seed: common.seed,
        reps: common.reps,
        out: common.out.clone(),
        formats: common.formats.clone(),
    }
}

fn read_config(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn single(common: CommonArgs, command: RunCommand) -> Result<()> {
    let text = read_config(&common.config)?;
    let mut config = ScenarioConfig::parse(&text)?;
    config.apply(&overrides_of(&common));
    let scenario = config.resolve()?;

    let started = Instant::now();
    let outcome = run::run_scenario(&scenario, command)?;
    eprintln!(
        "{}: {} repetition(s) in {:.1?}",
        command.name(),
        outcome.report.repetitions.len(),
        started.elapsed()
    );

    let written = report::emit(&outcome.report, &outcome.per_test_logs, "report")?;
    for path in written {
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn run_sweep(common: CommonArgs, axis: &str, values: &[f64]) -> Result<()> {
    let text = read_config(&common.config)?;
    let overrides = overrides_of(&common);

    let started = Instant::now();
    let outcome = sweep::run_sweep(&text, &overrides, axis, values)?;
    eprintln!(
        "sweep over {axis}: {} point(s) in {:.1?}",
        outcome.points.len(),
        started.elapsed()
    );

    let table = sweep::render_sweep_table(&outcome)?;
    let dir = outcome
        .points
        .first()
        .and_then(|p| p.run.report.scenario.output.directory.clone())
        .map(PathBuf::from);
    match dir {
        None => print!("{table}"),
        Some(dir) => {
            fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
            let path = dir.join("sweep_summary.csv");
            fs::write(&path, table).with_context(|| format!("writing {}", path.display()))?;
            eprintln!("wrote {}", path.display());
            for (i, point) in outcome.points.iter().enumerate() {
                let written = report::emit(
                    &point.run.report,
                    &point.run.per_test_logs,
                    &format!("report_point{i:02}"),
                )?;
                for path in written {
                    eprintln!("wrote {}", path.display());
                }
            }
        }
    }
    Ok(())
}
