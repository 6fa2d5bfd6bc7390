//! Subcommand implementations. Each writes its CSV or report to `out`.

use std::fmt;
use std::io::{self, Write};

use eavesim::analytics::{heatmap_mu_epsilon, sweep_epsilon};
use eavesim::attacks::run_noise_injection_scenario;
use eavesim::protocol::run_session;
use eavesim::report::{write_heatmap_csv, write_injection_csv, write_session_csv, write_sweep_csv};
use eavesim::validation::{run_all, run_criterion, ValidationOptions};
use eavesim::RandomStream;

use crate::config::{ConfigError, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SIMULATION: i32 = 3;
pub const EXIT_VALIDATION: i32 = 4;

#[derive(Debug)]
pub enum CommandError {
    Config(ConfigError),
    Simulation(eavesim::Error),
    Io(io::Error),
    /// At least one acceptance criterion failed.
    Validation {
        failed: Vec<u8>,
    },
}

impl CommandError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CommandError::Config(_) => EXIT_CONFIG,
            CommandError::Simulation(_) | CommandError::Io(_) => EXIT_SIMULATION,
            CommandError::Validation { .. } => EXIT_VALIDATION,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CommandError::Config(_) => "config",
            CommandError::Simulation(_) => "simulation",
            CommandError::Io(_) => "io",
            CommandError::Validation { .. } => "validation",
        }
    }

    /// Single-line `key=value` description for stderr.
    pub fn machine_line(&self) -> String {
        let key = match self {
            CommandError::Config(e) => e.key().map(|k| format!(" key={k}")).unwrap_or_default(),
            _ => String::new(),
        };
        let message = self.to_string().replace('"', "'");
        format!("error kind={}{key} message=\"{message}\"", self.kind())
    }
}

impl fmt::Display for CommandError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CommandError::Config(e) => e.fmt(f),
            CommandError::Simulation(e) => e.fmt(f),
            CommandError::Io(e) => e.fmt(f),
            CommandError::Validation { failed } => {
                let ids: Vec<String> = failed.iter().map(u8::to_string).collect();
                write!(f, "failed criteria: {}", ids.join(", "))
            }
        }
    }
}

impl std::error::Error for CommandError {}

impl From<ConfigError> for CommandError {
    fn from(e: ConfigError) -> Self {
        CommandError::Config(e)
    }
}

impl From<eavesim::Error> for CommandError {
    fn from(e: eavesim::Error) -> Self {
        CommandError::Simulation(e)
    }
}

impl From<io::Error> for CommandError {
    fn from(e: io::Error) -> Self {
        CommandError::Io(e)
    }
}

pub type CommandResult = Result<(), CommandError>;

/// `config.sessions` independent sessions; session i uses the stream
/// derived from (seed, i).
pub fn cmd_run<W: Write>(config: &RunConfig, out: &mut W) -> CommandResult {
    let stats = (0..config.sessions)
        .map(|i| run_session(&config.session, &RandomStream::derive(config.seed, i as u64, 0)))
        .collect::<eavesim::Result<Vec<_>>>()?;
    let attack = &config.session.attack;
    write_session_csv(
        out,
        attack.kind.name(),
        attack.kind.eps(),
        config.session.source.mu(),
        &stats,
    )?;
    Ok(())
}

pub fn cmd_sweep<W: Write>(config: &RunConfig, workers: usize, out: &mut W) -> CommandResult {
    let sweep = sweep_epsilon(&config.session, &config.eps_grid, config.trials, config.seed, workers)?;
    write_sweep_csv(out, &sweep)?;
    Ok(())
}

pub fn cmd_heatmap<W: Write>(config: &RunConfig, workers: usize, out: &mut W) -> CommandResult {
    let cells = heatmap_mu_epsilon(
        &config.session,
        &config.mu_grid,
        &config.eps_grid,
        config.heatmap_mode,
        config.trials,
        config.seed,
        workers,
    )?;
    write_heatmap_csv(out, &cells)?;
    Ok(())
}

/// One scenario per configured offset, all sharing the calibration stream.
pub fn cmd_noise_injection<W: Write>(config: &RunConfig, out: &mut W) -> CommandResult {
    let mut rows = Vec::new();
    for &mv in &config.injection_offsets_mv {
        let steps = (mv / config.injection.step_mv()).round() as u32;
        let inj = config.injection.at_step(steps)?;
        rows.extend(run_noise_injection_scenario(
            &config.session,
            &inj,
            &config.injection_eps_grid,
            config.seed,
        )?);
    }
    write_injection_csv(out, &rows)?;
    Ok(())
}

/// Prints one line per criterion; fails if any criterion fails.
/// Runs every criterion, or only `criterion` when given.
pub fn cmd_validate<W: Write>(opts: &ValidationOptions, criterion: Option<u8>, out: &mut W) -> CommandResult {
    let reports = match criterion {
        Some(id) => vec![run_criterion(id, opts)?],
        None => run_all(opts)?,
    };
    for r in &reports {
        writeln!(out, "{r}")?;
    }
    let failed: Vec<u8> = reports.iter().filter(|r| !r.passed).map(|r| r.id).collect();
    writeln!(
        out,
        "{} of {} criteria passed",
        reports.len() - failed.len(),
        reports.len()
    )?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CommandError::Validation { failed })
    }
}
