use std::path::PathBuf;
use std::process::ExitCode;

use cbsp::commands::{self, Bundle, CliError, Outcome, Overrides};
use cbsp_core::controllability::MetricKind;
use clap::{Args, Parser, Subcommand};

/// Chlorine booster station placement.
#[derive(Parser)]
#[command(name = "cbsp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run manifest (JSON).
    config: PathBuf,
    /// Output directory, overriding the manifest.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Stations per hydraulic step.
    #[arg(long)]
    stations: Option<usize>,
    /// Metric to use; repeat for several.
    #[arg(long, value_parser = parse_metric)]
    metric: Vec<MetricKind>,
    /// Water-quality step in seconds.
    #[arg(long)]
    wq_step: Option<f64>,
    /// Weighting coefficients μ1,μ2,μ3,μ4.
    #[arg(long, value_parser = parse_mu)]
    mu: Option<[f64; 4]>,
    /// Random seeds for `compare`, comma separated.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Worker threads.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Check parsing, mass balance and segmentation feasibility.
    Validate(Common),
    /// Solve every scenario and weigh the selected sets.
    Place(Common),
    /// Re-weigh the timelines of a previous `place` run.
    Weigh(Common),
    /// Greedy against random draws and the whole pool.
    Compare(Common),
    /// Replacement for a failed station.
    Backup(Common),
    /// Network counts and state dimensions.
    Summary {
        #[command(flatten)]
        common: Common,
        /// Write A and the state labels of this hydraulic step.
        #[arg(long)]
        dump_step: Option<usize>,
        /// Scenario for `--dump-step`; defaults to the first.
        #[arg(long)]
        scenario: Option<String>,
    },
}

fn parse_mu(s: &str) -> Result<[f64; 4], String> {
    let values: Vec<f64> = s.split(',').map(|v| v.trim().parse::<f64>().map_err(|e| e.to_string())).collect::<Result<_, _>>()?;
    values.try_into().map_err(|v: Vec<f64>| format!("expected 4 comma-separated values, got {}", v.len()))
}

fn parse_metric(s: &str) -> Result<MetricKind, String> {
    s.parse().map_err(|_| format!("unknown metric `{s}` (trace or logdet)"))
}

impl Common {
    fn load(&self) -> Result<Bundle, CliError> {
        let overrides = Overrides {
            output: self.out.clone(),
            stations: self.stations,
            metrics: (!self.metric.is_empty()).then(|| self.metric.clone()),
            wq_step: self.wq_step,
            mu: self.mu,
            seeds: self.seeds.clone(),
            jobs: self.jobs,
        };
        Bundle::load(&self.config, &overrides)
    }
}

fn run(cli: Cli) -> Result<Outcome, CliError> {
    match cli.command {
        Command::Validate(c) => commands::cmd_validate(&c.load()?),
        Command::Place(c) => commands::cmd_place(&c.load()?),
        Command::Weigh(c) => commands::cmd_weigh(&c.load()?),
        Command::Compare(c) => commands::cmd_compare(&c.load()?),
        Command::Backup(c) => commands::cmd_backup(&c.load()?),
        Command::Summary { common, dump_step, scenario } => {
            commands::cmd_summary(&common.load()?, dump_step.map(|k| (scenario, k)))
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(outcome) => {
            for m in &outcome.messages {
                println!("{m}");
            }
            for f in &outcome.files {
                eprintln!("wrote {}", f.display());
            }
            if outcome.failed {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
