use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ncs_aoi::experiments::{
    cmd_analyze, cmd_meas_curve, cmd_simulate, cmd_sweep, cmd_table1, Report, Settings,
};
use ncs_aoi::Error;

#[derive(Parser)]
#[command(
    name = "ncs-aoi",
    version,
    about = "Estimation error vs Age of Information experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Zero-wait vs MEAS for A = 1 over a list of p.
    Table1(Common),
    /// MEAS waiting function g(y), continuous and floored.
    MeasCurve {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        y_max: Option<u64>,
    },
    /// Analytic and simulated error over (A, p, policy).
    Sweep(Common),
    /// One simulation run.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Write the per-cycle log here (full mode only).
        #[arg(long)]
        cycle_log: Option<PathBuf>,
    },
    /// Analytic quantities at one operating point.
    Analyze(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long, value_delimiter = ',')]
    p: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    a: Vec<f64>,
    #[arg(long)]
    a_file: Vec<PathBuf>,
    #[arg(long)]
    dist_file: Option<PathBuf>,
    #[arg(long)]
    sigma2: Option<f64>,
    /// zero-wait, const:<g> or meas; repeat or comma-separate for sweeps.
    #[arg(long, value_delimiter = ',')]
    policy: Vec<String>,
    #[arg(long)]
    max_wait: Option<u64>,
    #[arg(long)]
    cycles: Option<u64>,
    #[arg(long)]
    warmup: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    mass_floor: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// fast (renewal-cycle) or full (slot-level).
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    divergence_threshold: Option<f64>,
    #[arg(long)]
    threads: Option<usize>,
    /// TOML file with default settings; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Exit with status 3 if any row is flagged as diverged.
    #[arg(long)]
    strict: bool,
}

impl Common {
    fn settings(&self) -> Result<Settings, Error> {
        let mut s = match &self.config {
            Some(path) => Settings::from_toml_file(path)?,
            None => Settings::default(),
        };
        if !self.p.is_empty() {
            s.p = self.p.clone();
        }
        if !self.a.is_empty() || !self.a_file.is_empty() {
            s.a = self.a.clone();
            s.a_file = self.a_file.clone();
        }
        if !self.policy.is_empty() {
            s.policy = self.policy.clone();
        }
        if self.dist_file.is_some() {
            s.dist_file = self.dist_file.clone();
        }
        macro_rules! take {
            ($($field:ident),*) => { $(if let Some(v) = self.$field.clone() { s.$field = v; })* };
        }
        take!(
            sigma2,
            max_wait,
            cycles,
            warmup,
            seed,
            mass_floor,
            epsilon,
            mode,
            divergence_threshold
        );
        if self.threads.is_some() {
            s.threads = self.threads;
        }
        Ok(s)
    }
}

fn execute(cli: Cli) -> Result<(Report, Option<PathBuf>, bool), Error> {
    let (common, report) = match &cli.command {
        Command::Table1(c) => (c, cmd_table1(&c.settings()?)?),
        Command::MeasCurve { common, y_max } => {
            let mut s = common.settings()?;
            if let Some(y) = y_max {
                s.y_max = *y;
            }
            (common, cmd_meas_curve(&s)?)
        }
        Command::Sweep(c) => (c, cmd_sweep(&c.settings()?)?),
        Command::Simulate { common, cycle_log } => (
            common,
            cmd_simulate(&common.settings()?, cycle_log.as_deref())?,
        ),
        Command::Analyze(c) => (c, cmd_analyze(&c.settings()?)?),
    };
    Ok((report, common.out.clone(), common.strict))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok((report, out, strict)) => {
            match out {
                Some(path) => {
                    if let Err(e) = std::fs::write(&path, &report.csv) {
                        eprintln!("error: {}: {e}", path.display());
                        return ExitCode::from(1);
                    }
                }
                None => print!("{}", report.csv),
            }
            if report.diverged {
                eprintln!("warning: at least one run diverged");
                if strict {
                    return ExitCode::from(3);
                }
            }
            ExitCode::SUCCESS
        }
        Err(e @ Error::Io(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
