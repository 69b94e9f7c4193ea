//! `confcurve`: meta-analysis with combined p-value functions.
//!
//! Exit codes: 0 success, 1 internal error, 2 input error, 3 some method
//! did not converge (rows are still written and flagged).

mod commands;
mod input;
mod output;

use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use confcurve::simulate::Adjust;
use confcurve::{AnyMethod, Grid, Orientation, Tau2Method};

use commands::{Het, Settings, SimSettings};
use output::{Format, Table};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("internal error: {0}")]
    Internal(String),
    #[error("cannot write output: {0}")]
    Output(String),
}

impl CliError {
    pub fn internal(e: impl std::fmt::Display) -> Self {
        CliError::Internal(e.to_string())
    }

    pub fn output(e: impl std::fmt::Display) -> Self {
        CliError::Output(e.to_string())
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Internal(_) | CliError::Output(_) => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "confcurve",
    version,
    about = "Meta-analysis with combined p-value functions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Point estimate, confidence interval and curve diagnostics per method.
    Analyze(AnalyzeArgs),
    /// Confidence curves of every study and method on a grid (long format).
    Drapery(GridArgs),
    /// Confidence density of one combination method on a grid.
    Density(GridArgs),
    /// Monte Carlo performance of the methods over a scenario grid.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Tau2Arg {
    Dl,
    Reml,
}

#[derive(Debug, Args)]
struct DataArgs {
    /// Study CSV with columns id,estimate,se or id,e_t,n_t,e_c,n_c ("-" reads stdin).
    input: PathBuf,
    /// Comma separated methods, or "all".
    #[arg(long, default_value = "all", value_parser = parse_methods)]
    method: MethodList,
    #[arg(long, default_value = "less", value_parser = parse_orientation)]
    alternative: Orientation,
    #[arg(long, default_value_t = 0.95, value_parser = parse_level)]
    level: f64,
    #[arg(long, value_enum, default_value = "none")]
    het: Het,
    /// Between-study variance estimator for additive adjustment and the
    /// random effects comparators.
    #[arg(long, value_enum, default_value = "reml")]
    tau2: Tau2Arg,
    /// Exact mid-p inputs from the 2x2 counts.
    #[arg(long)]
    exact: bool,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug, Args)]
struct OutArgs {
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    data: DataArgs,
}

#[derive(Debug, Args)]
struct GridArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Evaluation grid LO:HI:N.
    #[arg(long, allow_hyphen_values = true)]
    grid: Option<Grid>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Numbers of studies.
    #[arg(long, value_delimiter = ',', default_value = "3,5,10,20,50")]
    k: Vec<usize>,
    /// Numbers of large studies.
    #[arg(long, value_delimiter = ',', default_value = "0,1,2")]
    n_large: Vec<usize>,
    /// Relative heterogeneity levels, each in [0, 1).
    #[arg(long, value_delimiter = ',', default_value = "0,0.3,0.6,0.9")]
    i2: Vec<f64>,
    /// Skew normal shape parameters of the true effects.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "0",
        allow_hyphen_values = true
    )]
    shape: Vec<f64>,
    /// Mean true effect.
    #[arg(long, default_value_t = 0.2, allow_hyphen_values = true)]
    theta: f64,
    /// Repetitions per scenario.
    #[arg(long, default_value_t = 1000)]
    n_sim: usize,
    #[arg(long, default_value = "none")]
    adjust: Adjust,
    #[arg(long, default_value = "all", value_parser = parse_methods)]
    method: MethodList,
    #[arg(long, default_value = "greater", value_parser = parse_orientation)]
    alternative: Orientation,
    #[arg(long, default_value_t = 0.95, value_parser = parse_level)]
    level: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Worker threads; falls back to CONFCURVE_THREADS, then to all cores.
    #[arg(long, env = "CONFCURVE_THREADS")]
    threads: Option<usize>,
    #[command(flatten)]
    out: OutArgs,
}

/// Parsed `--method` value.
#[derive(Debug, Clone)]
struct MethodList(Vec<AnyMethod>);

fn parse_methods(s: &str) -> Result<MethodList, String> {
    AnyMethod::parse_list(s).map(MethodList)
}

fn parse_orientation(s: &str) -> Result<Orientation, String> {
    s.parse()
}

fn parse_level(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err("level must lie strictly between 0 and 1".into())
    }
}

impl DataArgs {
    fn settings(&self) -> Settings {
        Settings {
            methods: self.method.0.clone(),
            orientation: self.alternative,
            level: self.level,
            het: self.het,
            tau2: match self.tau2 {
                Tau2Arg::Dl => Tau2Method::Dl,
                Tau2Arg::Reml => Tau2Method::Reml,
            },
            exact: self.exact,
        }
    }

    fn dataset(&self) -> Result<input::Dataset, CliError> {
        let path = &self.input;
        if path.as_os_str() == "-" {
            let mut buf = Vec::new();
            io::stdin()
                .read_to_end(&mut buf)
                .map_err(|e| CliError::Input(format!("cannot read stdin: {e}")))?;
            input::read_dataset(buf.as_slice())
        } else {
            let file = File::open(path)
                .map_err(|e| CliError::Input(format!("cannot open {}: {e}", path.display())))?;
            input::read_dataset(file)
        }
    }
}

fn emit(table: &Table, out: &OutArgs) -> Result<(), CliError> {
    match &out.out {
        Some(path) => {
            let file = File::create(path)
                .map_err(|e| CliError::Output(format!("{}: {e}", path.display())))?;
            let mut w = BufWriter::new(file);
            table.write(&mut w, out.format)?;
            w.flush().map_err(CliError::output)
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            table.write(&mut lock, out.format)?;
            lock.flush().map_err(CliError::output)
        }
    }
}

fn run(cli: Cli) -> Result<bool, CliError> {
    let (table, converged, out) = match &cli.command {
        Command::Analyze(a) => {
            let (t, ok) = commands::analyze_table(&a.data.dataset()?, &a.data.settings())?;
            (t, ok, &a.data.out)
        }
        Command::Drapery(a) => {
            let (t, ok) = commands::drapery_table(&a.data.dataset()?, &a.data.settings(), a.grid)?;
            (t, ok, &a.data.out)
        }
        Command::Density(a) => {
            let mut settings = a.data.settings();
            if a.data.method.0.len() == AnyMethod::ALL.len() {
                settings.methods = vec![AnyMethod::Combined(confcurve::Method::Edgington)];
            }
            let (t, ok) = commands::density_table(&a.data.dataset()?, &settings, a.grid)?;
            (t, ok, &a.data.out)
        }
        Command::Simulate(a) => {
            if a.n_sim == 0 {
                return Err(CliError::Input("--n-sim must be at least 1".into()));
            }
            if a.threads == Some(0) {
                return Err(CliError::Input("--threads must be at least 1".into()));
            }
            let cfg = SimSettings {
                ks: a.k.clone(),
                n_large: a.n_large.clone(),
                i2: a.i2.clone(),
                shape: a.shape.clone(),
                theta: a.theta,
                n_sim: a.n_sim,
                seed: a.seed,
                adjust: a.adjust,
                level: a.level,
                orientation: a.alternative,
                methods: a.method.0.clone(),
                threads: a.threads,
            };
            let (t, ok) = commands::simulate_table(&cfg)?;
            (t, ok, &a.out)
        }
    };
    emit(&table, out)?;
    Ok(converged)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("warning: some methods did not converge; affected rows are flagged");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
