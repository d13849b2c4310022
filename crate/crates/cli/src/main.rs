mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::{CliConfig, DEFAULT_CONFIG};

fn config_help() -> String {
    format!("Configuration keys and defaults (all optional; flags take precedence):\n\n{DEFAULT_CONFIG}")
}

#[derive(Debug, Parser)]
#[command(
    name = "quickdraw",
    version,
    about = "Quick-Draw bandit simulations, sweeps, benchmarks and off-policy evaluation"
)]
#[command(after_long_help = config_help(), after_help = "Run `quickdraw --help` for every config key and its default.")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML config file; keys not given keep their defaults.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Number of seeds per ensemble.
    #[arg(long, global = true)]
    seeds: Option<usize>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Comma-separated policy kinds.
    #[arg(long, global = true, value_delimiter = ',')]
    policies: Option<Vec<String>>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run every policy on every seed and write ensemble.csv.
    Simulate {
        /// Add a wall_time column (not reproducible across runs).
        #[arg(long)]
        timing: bool,
    },
    /// Run one ensemble per value of a parameter and write sweep.csv.
    Sweep {
        /// sigma_noise, alpha, rho_x, rho_t, ell_x or ell_t.
        #[arg(long)]
        var: Option<String>,
        /// Comma-separated values.
        #[arg(long)]
        values: Option<String>,
    },
    /// Time Quick-Draw against full-history GP-UCB and write bench.csv.
    Bench {
        /// Comma-separated horizons.
        #[arg(long)]
        tmax: Option<String>,
    },
    /// Off-policy evaluation by inverse propensity scoring; writes ope.csv
    /// and ope_summary.csv.
    Ope {
        /// Logged-data CSV (columns named by [ope.schema]).
        log: Option<PathBuf>,
        /// Evaluate on a generated log instead ([ope.synthetic]).
        #[arg(long, conflicts_with = "log")]
        synthetic: bool,
    },
}

/// Exit status 1: the run itself failed.
/// Exit status 2: the invocation or configuration was invalid.
pub enum Failure {
    Run(String),
    Usage(String),
}

impl From<quickdraw::Error> for Failure {
    fn from(e: quickdraw::Error) -> Self {
        if is_input(&e) {
            Failure::Usage(e.to_string())
        } else {
            Failure::Run(e.to_string())
        }
    }
}

fn is_input(e: &quickdraw::Error) -> bool {
    match e {
        quickdraw::Error::Input(_) => true,
        quickdraw::Error::AtRound { source, .. } | quickdraw::Error::AtSeed { source, .. } => is_input(source),
        _ => false,
    }
}

fn parse_list<T: std::str::FromStr>(flag: &str, raw: &str) -> Result<Vec<T>, Failure> {
    let items: Vec<&str> = raw.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    if items.is_empty() {
        return Err(Failure::Usage(format!("--{flag} needs at least one value")));
    }
    items.iter().map(|s| s.parse().map_err(|_| Failure::Usage(format!("--{flag}: cannot parse {s:?}")))).collect()
}

fn load_config(cli: &Cli) -> Result<CliConfig, Failure> {
    let mut cfg = match &cli.common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", path.display())))?;
            CliConfig::parse(&text).map_err(Failure::Usage)?
        }
        None => CliConfig::default(),
    };
    let c = &cli.common;
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(n) = c.seeds {
        cfg.seeds = n;
    }
    if let Some(out) = &c.out {
        cfg.out = out.to_string_lossy().into_owned();
    }
    if let Some(p) = &c.policies {
        cfg.policies = p.iter().map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
    }
    match &cli.command {
        Command::Sweep { var, values } => {
            if let Some(v) = var {
                cfg.sweep.var = v.clone();
            }
            if let Some(v) = values {
                cfg.sweep.values = parse_list("values", v)?;
            }
        }
        Command::Bench { tmax: Some(t) } => cfg.bench.tmax = parse_list("tmax", t)?,
        Command::Ope { log: Some(path), .. } => cfg.ope.log = path.to_string_lossy().into_owned(),
        _ => {}
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let cfg = load_config(cli)?;
    let go = || match &cli.command {
        Command::Simulate { timing } => commands::simulate(&cfg, *timing),
        Command::Sweep { .. } => commands::sweep(&cfg),
        Command::Bench { .. } => commands::bench(&cfg),
        Command::Ope { synthetic, .. } => commands::ope(&cfg, *synthetic),
    };
    match cli.common.jobs {
        Some(0) => Err(Failure::Usage("--jobs must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Failure::Run(format!("cannot start worker pool: {e}")))?
            .install(go),
        None => go(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Run(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
