//! `cbd`: contextuality decisions and quantifiers from the command line.
//!
//! Exit codes: 0 noncontextual (or success), 1 contextual, 2 error.

mod commands;
mod render;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use cbd_core::coupling::CouplingPolicy;
use cbd_core::polytope::DEFAULT_VERTEX_CAP;

#[derive(Debug, Parser)]
#[command(name = "cbd", version, about = "Contextuality-by-default decisions and quantifiers")]
struct Cli {
    #[command(flatten)]
    config: RunConfig,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Float,
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Table,
}

#[derive(Debug, Clone, Args)]
pub struct RunConfig {
    /// Arithmetic used by the LP solver.
    #[arg(long, global = true, value_enum, default_value_t = Mode::Float)]
    pub mode: Mode,

    /// LP feasibility tolerance in float mode (ignored in exact mode).
    #[arg(long, global = true, default_value_t = 1e-7)]
    pub eps: f64,

    /// Largest number of deterministic global assignments to enumerate.
    #[arg(long, global = true, default_value_t = DEFAULT_VERTEX_CAP)]
    pub cap: u128,

    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate a scenario and optionally a behavior on it.
    Validate {
        scenario: PathBuf,
        #[arg(long)]
        behavior: Option<PathBuf>,
    },
    /// Print the extended scenario.
    Extend { scenario: PathBuf },
    /// Decide noncontextuality of a behavior.
    Check {
        behavior: PathBuf,
        #[arg(long)]
        extended: bool,
        #[arg(long, default_value = "maximal", value_parser = parse_policy)]
        policy: CouplingPolicy,
        /// Include witnesses and certificates.
        #[arg(long)]
        witness: bool,
    },
    /// Compute contextuality quantifiers.
    Quantify {
        behavior: PathBuf,
        /// Comma-separated subset of cf, neg, l1u, l1max, l1tot, mu, m.
        #[arg(long, default_value = "cf,neg,l1u,l1max,mu,m")]
        measures: String,
        /// Apply cf, neg and the l1 measures to the lifted extended behavior.
        #[arg(long)]
        extended: bool,
        #[arg(long)]
        witness: bool,
    },
    /// Evaluate the closed-form n-cycle criteria from correlators.
    Ncycle {
        #[arg(long)]
        n: usize,
        /// n pair correlators ⟨i (i+1)⟩.
        #[arg(long, allow_hyphen_values = true)]
        pair: String,
        /// n shared single expectations, or 2n per-context ones (⟨i⟩, ⟨i+1⟩ for each context i).
        #[arg(long, allow_hyphen_values = true)]
        singles: Option<String>,
    },
    /// Sample behaviors and report agreement between decision paths.
    Random {
        scenario: PathBuf,
        #[arg(long, default_value_t = 100)]
        count: usize,
        /// Total-variation size of the disturbance injected into one context.
        #[arg(long, default_value_t = 0.0)]
        disturbance: f64,
    },
}

fn parse_policy(s: &str) -> Result<CouplingPolicy, String> {
    s.parse()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = &cli.config;
    if cfg.eps.is_nan() || cfg.eps <= 0.0 || cfg.cap < 1 {
        eprintln!("error: --eps must be positive and --cap at least 1");
        return ExitCode::from(2);
    }
    let result = match &cli.command {
        Command::Validate { scenario, behavior } => commands::validate(cfg, scenario, behavior.as_deref()),
        Command::Extend { scenario } => commands::extend(cfg, scenario),
        Command::Check {
            behavior,
            extended,
            policy,
            witness,
        } => commands::check(cfg, behavior, *extended, *policy, *witness),
        Command::Quantify {
            behavior,
            measures,
            extended,
            witness,
        } => commands::quantify(cfg, behavior, measures, *extended, *witness),
        Command::Ncycle { n, pair, singles } => commands::ncycle(cfg, *n, pair, singles.as_deref()),
        Command::Random {
            scenario,
            count,
            disturbance,
        } => commands::random(cfg, scenario, *count, *disturbance),
    };
    match result {
        Ok(out) => {
            println!("{}", render::render(&out.report, cfg.format));
            ExitCode::from(out.code)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
