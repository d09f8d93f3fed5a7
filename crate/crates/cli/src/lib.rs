//! Command-line front end for the homolock simulator.

pub mod commands;
pub mod output;
pub mod selftest;
pub mod svg;

use std::io::IsTerminal;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::{CliError, Invocation};

#[derive(Debug, Parser)]
#[command(
    name = "homolock",
    version,
    about = "Homodyne-locked OPO squeezing simulator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Two-mode homodyne error signal versus cavity detuning.
    Sweep(CommonArgs),
    /// Quadrature noise spectra (analytic, optionally simulated).
    Spectrum(CommonArgs),
    /// Closed-loop lock simulation.
    Lock(CommonArgs),
    /// Feed-forward squeezer transfer and output state.
    Squeezer(CommonArgs),
    /// Run the built-in invariant checks.
    Selftest,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Config file; the bundled two-mode example is used when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Also write SVG plots.
    #[arg(long)]
    pub svg: bool,
    /// RNG seed, overriding `run.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override a config value: `section.key=value`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

impl From<CommonArgs> for Invocation {
    fn from(a: CommonArgs) -> Self {
        Invocation {
            config: a.config,
            out: a.out,
            svg: a.svg,
            seed: a.seed,
            overrides: a.overrides,
        }
    }
}

fn use_color() -> bool {
    std::env::var_os("NO_COLOR").is_none_or(|v| v.is_empty()) && std::io::stdout().is_terminal()
}

fn paint(text: &str, code: &str) -> String {
    if use_color() {
        format!("\x1b[{code}m{text}\x1b[0m")
    } else {
        text.to_string()
    }
}

fn selftest() -> Result<String, CliError> {
    let checks = selftest::run_checks();
    for c in &checks {
        let tag = if c.passed {
            paint("PASS", "32")
        } else {
            paint("FAIL", "31")
        };
        println!("{tag} {} ({})", c.name, c.detail);
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    if failed > 0 {
        return Err(CliError::SelfTest(failed));
    }
    Ok(format!("selftest: {} checks passed", checks.len()))
}

/// Runs a parsed command and returns the process exit code.
pub fn run(cli: Cli) -> u8 {
    let result = match cli.command {
        Command::Sweep(a) => commands::cmd_sweep(&a.into()),
        Command::Spectrum(a) => commands::cmd_spectrum(&a.into()),
        Command::Lock(a) => commands::cmd_lock(&a.into()),
        Command::Squeezer(a) => commands::cmd_squeezer(&a.into()),
        Command::Selftest => selftest(),
    };
    match result {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("homolock: {e}");
            e.exit_code()
        }
    }
}
