//! Front end for simulation, testing, region and Monte Carlo experiments
//! with the entry game.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use config::{config_err, parse_assignments, ConfigError, Method, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "mcot", version, about = "Exact Monte Carlo optimal-transport inference for incomplete models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub options: Overrides,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Simulate an entry-game data set (data.csv, data.json).
    Simulate,
    /// Test one parameter value on a data set (test.json).
    Test,
    /// Outer and exact confidence regions on a grid (region.csv, region.json).
    Region,
    /// Coverage of the test at the true parameter (coverage.csv, coverage.json).
    Coverage,
    /// Rejection rate of an alternative by the outer test (power.csv, power.json).
    Power,
}

#[derive(Debug, Default, Args)]
pub struct Overrides {
    /// JSON configuration file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Sample size(s), comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    pub n: Vec<usize>,
    /// Number of Monte Carlo draws.
    #[arg(long = "S", global = true)]
    pub draws: Option<usize>,
    /// Test level(s), comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    pub alpha: Vec<f64>,
    /// Grid axis `name:lower:upper:count`; repeat for more axes.
    #[arg(long, global = true)]
    pub grid: Vec<String>,
    /// Fixed parameter `name=value` for region grids; repeatable.
    #[arg(long, global = true)]
    pub fixed: Vec<String>,
    /// Equilibrium selection: uniform, first or adversarial_greedy.
    #[arg(long, global = true)]
    pub selection: Option<String>,
    #[arg(long = "lambda-x", global = true)]
    pub lambda_x: Option<f64>,
    /// Wall-clock budget per parameter value; unfinished draws count against
    /// acceptance and outputs are no longer reproducible.
    #[arg(long = "time-cap-secs", global = true)]
    pub time_cap_secs: Option<f64>,
    /// Data set CSV for `test` and `region`.
    #[arg(long, global = true)]
    pub data: Option<PathBuf>,
    /// Tested parameter, e.g. `beta0=0.6,beta1=0.6,delta=0.3`.
    #[arg(long, global = true)]
    pub theta: Option<String>,
    #[arg(long = "theta-true", global = true)]
    pub theta_true: Option<String>,
    #[arg(long = "theta-alt", global = true)]
    pub theta_alt: Option<String>,
    #[arg(long, global = true)]
    pub players: Option<usize>,
    /// Replications for `coverage` and `power`.
    #[arg(long, global = true)]
    pub replications: Option<usize>,
    /// Critical-value methods (cx, ncx), comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    pub methods: Vec<String>,
    /// Record wall-clock times in the JSON outputs.
    #[arg(long, global = true)]
    pub timings: bool,
}

impl Overrides {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = self.threads {
            c.threads = v;
        }
        if let Some(v) = &self.out {
            c.out = v.clone();
        }
        if !self.n.is_empty() {
            c.n = self.n.clone();
        }
        if let Some(v) = self.draws {
            c.draws = v;
        }
        if !self.alpha.is_empty() {
            c.alpha = self.alpha.clone();
        }
        if !self.grid.is_empty() {
            c.grid = self.grid.clone();
        }
        if !self.fixed.is_empty() {
            c.fixed = parse_assignments(&self.fixed.join(","))?;
        }
        if let Some(v) = &self.selection {
            c.selection = v.clone();
        }
        if let Some(v) = self.lambda_x {
            c.lambda_x = v;
        }
        if let Some(v) = self.time_cap_secs {
            c.time_cap_secs = Some(v);
        }
        if let Some(v) = &self.data {
            c.data = Some(v.clone());
        }
        if let Some(v) = &self.theta {
            c.theta = Some(parse_assignments(v)?);
        }
        if let Some(v) = &self.theta_true {
            c.theta_true = parse_assignments(v)?;
        }
        if let Some(v) = &self.theta_alt {
            c.theta_alt = Some(parse_assignments(v)?);
        }
        if let Some(v) = self.players {
            c.players = v;
        }
        if let Some(v) = self.replications {
            c.replications = v;
        }
        if !self.methods.is_empty() {
            c.methods = self
                .methods
                .iter()
                .map(|m| match m.as_str() {
                    "cx" => Ok(Method::Cx),
                    "ncx" => Ok(Method::Ncx),
                    other => Err(config_err!("unknown method {other:?} (expected cx or ncx)")),
                })
                .collect::<Result<_>>()?;
        }
        if self.timings {
            c.timings = true;
        }
        c.validate()?;
        Ok(c)
    }
}

pub fn execute(command: Command, cfg: &RunConfig) -> Result<()> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build()?;
    pool.install(|| match command {
        Command::Simulate => commands::write_simulate(cfg, &commands::simulate(cfg)?),
        Command::Test => commands::write_test(cfg, &commands::test(cfg)?),
        Command::Region => commands::write_region(cfg, &commands::region(cfg)?),
        Command::Coverage => commands::write_coverage(cfg, &commands::coverage(cfg)?),
        Command::Power => commands::write_power(cfg, &commands::power(cfg)?),
    })
}

/// Exit code for an error: 2 for configuration problems, 1 otherwise.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    if err.chain().any(|e| e.downcast_ref::<ConfigError>().is_some()) {
        2
    } else {
        1
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = cli
        .options
        .resolve()
        .and_then(|cfg| execute(cli.command, &cfg));
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code(&e)
        }
    }
}
