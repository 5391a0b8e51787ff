//! Configuration-driven batch runner for the kahler-core suites.
//!
//! Exit status: 0 when every checked tolerance passes, 1 when a check fails
//! or a computation errors out, 2 for configuration and I/O problems.

pub mod commands;
pub mod config;
pub mod summary;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::Report;
pub use config::{Command, Overrides, RunConfig, Settings};
pub use summary::{Item, Summary};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error(transparent)]
    Run(#[from] kahler_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Run(_) => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "kahler", version, about = "Numerical checks for Kähler–Einstein potentials on the ball and radial domains")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Sub,
}

#[derive(Debug, Subcommand)]
pub enum Sub {
    /// Pointwise curvature, PDE and defining-function identities.
    Verify(Flags),
    /// Rescaling along a boundary sequence, Gronwall envelope, pluriharmonicity.
    Scale(Flags),
    /// Holomorphy of the vector field and completeness probes of its flow.
    Flow(Flags),
    /// Radial Monge–Ampère solves and boundary behaviour.
    Solve(Flags),
    /// Merge earlier JSON summaries into one claim table.
    Report(Flags),
}

#[derive(Debug, Args, Clone, Default)]
pub struct Flags {
    /// JSON config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory (default: out).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub dim: Option<usize>,
    /// Solver tolerance (flow: ODE, solve: Newton).
    #[arg(long)]
    pub tol: Option<f64>,
}

/// Result of one command.
#[derive(Debug)]
pub enum Output {
    Summary(Summary),
    Report(Report),
}

impl Output {
    pub fn pass(&self) -> bool {
        match self {
            Output::Summary(s) => s.pass,
            Output::Report(r) => r.pass,
        }
    }

    pub fn lines(&self) -> Vec<String> {
        let (mut lines, warnings) = match self {
            Output::Summary(s) => (s.items.iter().map(Item::line).collect::<Vec<_>>(), &s.warnings),
            Output::Report(r) => (
                r.claims
                    .iter()
                    .map(|c| {
                        let m = c.measured.map_or("vacuous".to_string(), |m| format!("{m:.3e}"));
                        format!(
                            "[{}] {} ({} items): worst {m} {} {:.1e}",
                            if c.pass { "PASS" } else { "FAIL" },
                            c.claim,
                            c.items,
                            c.comparison.symbol(),
                            c.tolerance
                        )
                    })
                    .collect(),
                &r.warnings,
            ),
        };
        lines.extend(warnings.iter().map(|w| format!("warning: {w}")));
        lines
    }
}

/// Resolves settings for `command` from an optional config file and flags.
pub fn settings(command: Command, flags: &Flags) -> Result<Settings, CliError> {
    let cfg = match &flags.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let over = Overrides {
        seed: flags.seed,
        out: flags.out.clone(),
        dim: flags.dim,
        tol: flags.tol,
    };
    config::resolve(command, cfg, over)
}

pub fn execute(s: &Settings) -> Result<Output, CliError> {
    Ok(match s.command {
        Command::Verify => Output::Summary(commands::verify(s)?),
        Command::Scale => Output::Summary(commands::scale(s)?),
        Command::Flow => Output::Summary(commands::flow_cmd(s)?),
        Command::Solve => Output::Summary(commands::solve(s)?),
        Command::Report => Output::Report(commands::report(s)?),
    })
}

/// Parses `args`, runs, prints the item lines and returns the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let (command, flags) = match cli.command {
        Sub::Verify(f) => (Command::Verify, f),
        Sub::Scale(f) => (Command::Scale, f),
        Sub::Flow(f) => (Command::Flow, f),
        Sub::Solve(f) => (Command::Solve, f),
        Sub::Report(f) => (Command::Report, f),
    };
    let result = settings(command, &flags).and_then(|s| execute(&s));
    match result {
        Ok(out) => {
            for line in out.lines() {
                println!("{line}");
            }
            if out.pass() {
                0
            } else {
                1
            }
        }
        Err(e) => {
            eprintln!("kahler {}: {e}", command.name());
            e.exit_code()
        }
    }
}
