use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use eavesim::validation::{ValidationOptions, DEFAULT_TRIALS};
use eavesim_cli::commands::{
    cmd_heatmap, cmd_noise_injection, cmd_run, cmd_sweep, cmd_validate, CommandError, CommandResult,
};
use eavesim_cli::config::{parse_config, ConfigError, RunConfig};

/// Variable-strength eavesdropping simulator for time-bin BB84.
#[derive(Parser)]
#[command(name = "eavesim", version)]
struct Cli {
    /// TOML config file. Without one, every key takes its default.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed. Overrides SIM_SEED and the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file. Defaults to the config's `output`, then stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Detected pulses per session or grid point. For `validate`, sifted
    /// bits per point in the criteria judged on standard-error bands.
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Worker threads for sweeps; 0 uses one per core.
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Run independent sessions and write one CSV row per session.
    Run,
    /// Sweep the attack strength over `sweep.eps_grid`.
    Sweep,
    /// Tabulate (G, Q) over `sweep.mu_grid` x `sweep.eps_grid`.
    Heatmap,
    /// Calibration-stage noise injection followed by live sessions.
    NoiseInjection,
    /// Run the acceptance suite.
    Validate {
        /// Run only this criterion (1-11).
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=11))]
        criterion: Option<u8>,
    },
}

fn load(cli: &Cli) -> Result<RunConfig, CommandError> {
    let text = match &cli.config {
        Some(path) => {
            fs::read_to_string(path).map_err(|e| ConfigError::Parse(format!("cannot read {}: {e}", path.display())))?
        }
        None => String::new(),
    };
    let mut config = parse_config(&text)?;
    if let Ok(s) = std::env::var("SIM_SEED") {
        config.seed = s.trim().parse().map_err(|_| ConfigError::Validation {
            key: "SIM_SEED".into(),
            message: format!("`{s}` is not an unsigned 64-bit integer"),
        })?;
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(trials) = cli.trials {
        if trials == 0 {
            return Err(ConfigError::Validation {
                key: "session.trials".into(),
                message: "must be at least 1".into(),
            }
            .into());
        }
        config.trials = trials;
        config.session.n_pulses = trials;
    }
    if let Some(out) = &cli.out {
        config.output = Some(out.clone());
    }
    Ok(config)
}

fn execute(cli: &Cli) -> CommandResult {
    let config = load(cli)?;
    let mut sink: Box<dyn Write> = match &config.output {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    let result = match cli.command {
        Command::Run => cmd_run(&config, &mut sink),
        Command::Sweep => cmd_sweep(&config, cli.workers, &mut sink),
        Command::Heatmap => cmd_heatmap(&config, cli.workers, &mut sink),
        Command::NoiseInjection => cmd_noise_injection(&config, &mut sink),
        Command::Validate { criterion } => {
            let opts = ValidationOptions {
                trials: cli.trials.unwrap_or(DEFAULT_TRIALS),
                seed: config.seed,
                workers: cli.workers,
            };
            cmd_validate(&opts, criterion, &mut sink)
        }
    };
    sink.flush()?;
    result
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.machine_line());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
