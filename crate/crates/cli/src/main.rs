//! `leofl`: runs one simulator subcommand against a scenario file and writes
//! its CSV outputs into `--out`.
//!
//! Exit codes: 0 success, 1 configuration error, 2 runtime error,
//! 3 failed built-in check (`verify-bound`).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use leofl_core::analysis::write_atomic;
use leofl_core::scenario::{
    cmd_compare_oma, cmd_outage, cmd_rate, cmd_train, cmd_verify_bound, cmd_visibility,
    CommandOutput, ScenarioConfig, Sweep,
};
use leofl_core::Error;

#[derive(Debug, Parser)]
#[command(name = "leofl", version, about = "LEO federated-learning simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Scenario file (TOML).
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long, value_name = "DIR", default_value = ".")]
    out: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Satellite/server contact windows.
    Visibility(Common),
    /// Outage probability, closed form against Monte-Carlo.
    Outage {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        trials: Option<u64>,
        /// Transmit-power sweep in dBm, `start:stop:step`.
        #[arg(long)]
        sweep: Option<String>,
    },
    /// Per-rank NOMA and OMA rates versus transmit power.
    Rate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        sweep: Option<String>,
    },
    /// Full protocol run.
    Train(Common),
    /// Convergence-bound experiment; exits 3 if the bound or a lemma fails.
    VerifyBound(Common),
    /// NOMA against OMA over a sweep of group sizes.
    CompareOma {
        #[command(flatten)]
        common: Common,
        /// Group sizes, `start:stop:step`.
        #[arg(long)]
        sweep: Option<String>,
    },
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config { .. } => Failure::Config(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn load(common: &Common) -> Result<ScenarioConfig, Failure> {
    let mut cfg = ScenarioConfig::load(&common.config).map_err(|e| match e {
        Error::Io(io) => Failure::Config(format!("{}: {io}", common.config.display())),
        other => Failure::from(other),
    })?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn sweep(text: &Option<String>) -> Result<Option<Sweep>, Failure> {
    text.as_deref()
        .map(Sweep::parse)
        .transpose()
        .map_err(Failure::from)
}

fn write_outputs(out: &CommandOutput, dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir)
        .map_err(|e| Failure::Runtime(format!("{}: {e}", dir.display())))?;
    for f in &out.files {
        let path = dir.join(&f.name);
        write_atomic(&path, &f.bytes).map_err(Failure::from)?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool, Failure> {
    let (common, output) = match &cli.command {
        Command::Visibility(c) => (c, cmd_visibility(&load(c)?)?),
        Command::Outage {
            common,
            trials,
            sweep: s,
        } => {
            if trials == &Some(0) {
                return Err(Failure::Config("--trials must be positive".into()));
            }
            (common, cmd_outage(&load(common)?, sweep(s)?, *trials)?)
        }
        Command::Rate { common, sweep: s } => (common, cmd_rate(&load(common)?, sweep(s)?)?),
        Command::Train(c) => (c, cmd_train(&load(c)?)?),
        Command::VerifyBound(c) => (c, cmd_verify_bound(&load(c)?)?),
        Command::CompareOma { common, sweep: s } => {
            (common, cmd_compare_oma(&load(common)?, sweep(s)?)?)
        }
    };
    write_outputs(&output, &common.out)?;
    print!("{}", output.summary);
    Ok(output.check_passed)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(Failure::Config(m)) => {
            eprintln!("config error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
