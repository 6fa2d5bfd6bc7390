//! Run configuration.
//!
//! Configs are TOML documents with one table per section. Every key is
//! optional; see the README for the full schema and defaults. Unknown keys
//! are rejected so that typos do not silently fall back to defaults.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use toml::{Table, Value};

use eavesim::analytics::Source;
use eavesim::attacks::{
    AttackKind, AttackStrategy, BasisPolicy, NoiseInjection, Schedule, DEFAULT_MAX_STEPS, DEFAULT_STEP_MV,
    DEFAULT_V_PI_V, DEFAULT_WORKING_VOLTAGE_V,
};
use eavesim::pointer::{Observable, PointerKind, PointerShape};
use eavesim::protocol::{NoiseConfig, ProtocolVariant, SessionConfig, DEFAULT_ABORT_THRESHOLD, DEFAULT_Q_ENV};
use eavesim::source::{SourceConfig, DEFAULT_MU};
use eavesim::validation::DEFAULT_SEED;

pub const DEFAULT_TRIALS: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub enum ConfigError {
    /// The document is not valid TOML.
    Parse(String),
    /// A value is out of range or of the wrong type.
    Validation {
        key: String,
        message: String,
    },
    UnknownKey(String),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Parse(m) => write!(f, "malformed config: {m}"),
            ConfigError::Validation { key, message } => write!(f, "invalid value for `{key}`: {message}"),
            ConfigError::UnknownKey(k) => write!(f, "unknown key `{k}`"),
        }
    }
}

impl std::error::Error for ConfigError {}

impl ConfigError {
    pub fn key(&self) -> Option<&str> {
        match self {
            ConfigError::Validation { key, .. } | ConfigError::UnknownKey(key) => Some(key),
            ConfigError::Parse(_) => None,
        }
    }
}

fn invalid(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Validation {
        key: key.to_string(),
        message: message.into(),
    }
}

/// Maps a simulator parameter error onto the config key it came from.
fn from_core(fallback: &str, e: eavesim::Error) -> ConfigError {
    match e {
        eavesim::Error::InvalidParameter { name, value, reason } => invalid(name, format!("{value}: {reason}")),
        other => invalid(fallback, other.to_string()),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Session template. `n_pulses` equals `trials`.
    pub session: SessionConfig,
    /// Detected pulses per session or grid point.
    pub trials: usize,
    /// Independent sessions executed by `run`.
    pub sessions: usize,
    pub eps_grid: Vec<f64>,
    pub mu_grid: Vec<f64>,
    pub heatmap_mode: Source,
    pub injection: NoiseInjection,
    pub injection_offsets_mv: Vec<f64>,
    pub injection_eps_grid: Vec<f64>,
    pub seed: u64,
    pub output: Option<PathBuf>,
}

const SCHEMA: &[(&str, &[&str])] = &[
    ("", &["seed", "output", "variant"]),
    (
        "attack",
        &[
            "kind", "eps", "policy", "schedule", "pointer", "delta", "lambda1", "lambda2",
        ],
    ),
    ("source", &["mu"]),
    ("noise", &["q_env_z", "q_env_x", "eve_readout"]),
    ("session", &["trials", "sessions", "abort_threshold", "basis_bias"]),
    ("sweep", &["eps_grid", "mu_grid", "mode"]),
    (
        "injection",
        &[
            "offsets_mv",
            "step_mv",
            "max_steps",
            "working_voltage_v",
            "v_pi_v",
            "eps_grid",
        ],
    ),
];

/// Flattens the document into dotted keys after checking them against the
/// schema.
fn flatten(doc: Table) -> Result<BTreeMap<String, Value>, ConfigError> {
    let sections: BTreeMap<&str, &[&str]> = SCHEMA.iter().copied().collect();
    let mut out = BTreeMap::new();
    for (key, value) in doc {
        match value {
            Value::Table(inner) if sections.contains_key(key.as_str()) && !key.is_empty() => {
                for (k, v) in inner {
                    let dotted = format!("{key}.{k}");
                    if !sections[key.as_str()].contains(&k.as_str()) {
                        return Err(ConfigError::UnknownKey(dotted));
                    }
                    out.insert(dotted, v);
                }
            }
            v => {
                if !sections[""].contains(&key.as_str()) {
                    return Err(ConfigError::UnknownKey(key));
                }
                out.insert(key, v);
            }
        }
    }
    Ok(out)
}

struct Fields(BTreeMap<String, Value>);

impl Fields {
    fn float(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        match self.0.get(key) {
            None => Ok(default),
            Some(Value::Float(v)) => Ok(*v),
            Some(Value::Integer(v)) => Ok(*v as f64),
            Some(_) => Err(invalid(key, "expected a number")),
        }
    }

    fn count(&self, key: &str, default: u64) -> Result<u64, ConfigError> {
        match self.0.get(key) {
            None => Ok(default),
            Some(Value::Integer(v)) if *v >= 0 => Ok(*v as u64),
            Some(Value::Integer(_)) => Err(invalid(key, "must be non-negative")),
            Some(_) => Err(invalid(key, "expected an integer")),
        }
    }

    fn positive_count(&self, key: &str, default: u64) -> Result<usize, ConfigError> {
        match self.count(key, default)? {
            0 => Err(invalid(key, "must be at least 1")),
            n => Ok(n as usize),
        }
    }

    fn boolean(&self, key: &str, default: bool) -> Result<bool, ConfigError> {
        match self.0.get(key) {
            None => Ok(default),
            Some(Value::Boolean(b)) => Ok(*b),
            Some(_) => Err(invalid(key, "expected true or false")),
        }
    }

    fn string(&self, key: &str) -> Result<Option<&str>, ConfigError> {
        match self.0.get(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s)),
            Some(_) => Err(invalid(key, "expected a string")),
        }
    }

    fn choice<T: Copy>(&self, key: &str, options: &[(&str, T)]) -> Result<Option<T>, ConfigError> {
        let Some(s) = self.string(key)? else {
            return Ok(None);
        };
        options
            .iter()
            .find(|(name, _)| *name == s)
            .map(|&(_, v)| Some(v))
            .ok_or_else(|| {
                let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
                invalid(key, format!("`{s}` is not one of {}", names.join(", ")))
            })
    }

    fn floats(&self, key: &str, default: &[f64]) -> Result<Vec<f64>, ConfigError> {
        let Some(v) = self.0.get(key) else {
            return Ok(default.to_vec());
        };
        let Value::Array(items) = v else {
            return Err(invalid(key, "expected an array of numbers"));
        };
        if items.is_empty() {
            return Err(invalid(key, "must not be empty"));
        }
        items
            .iter()
            .map(|item| match item {
                Value::Float(f) if f.is_finite() => Ok(*f),
                Value::Integer(i) => Ok(*i as f64),
                _ => Err(invalid(key, "expected an array of finite numbers")),
            })
            .collect()
    }
}

fn default_eps_grid() -> Vec<f64> {
    (0..=10).map(|k| k as f64 / 10.0).collect()
}

const DEFAULT_MU_GRID: [f64; 6] = [0.01, 0.1, 0.5, 1.0, 5.0, 10.0];
const DEFAULT_INJECTION_EPS: [f64; 5] = [0.0, 0.05, 0.1, 0.15, 0.2];

fn attack(f: &Fields, variant: ProtocolVariant) -> Result<AttackStrategy, ConfigError> {
    #[derive(Clone, Copy)]
    enum Kind {
        None,
        Guess,
        Partial,
        Weak,
        InterceptResend,
        PnsPartial,
    }
    let kind = f
        .choice(
            "attack.kind",
            &[
                ("none", Kind::None),
                ("guess", Kind::Guess),
                ("partial", Kind::Partial),
                ("weak", Kind::Weak),
                ("intercept-resend", Kind::InterceptResend),
                ("pns-partial", Kind::PnsPartial),
            ],
        )?
        .unwrap_or(Kind::Partial);
    // Eve watches the key basis of the simplified protocol; otherwise she
    // picks at random.
    let default_policy = match variant {
        ProtocolVariant::StandardBB84 => BasisPolicy::RandomBasis,
        ProtocolVariant::SimplifiedBB84 => BasisPolicy::FixedZ,
    };
    let policy = f
        .choice(
            "attack.policy",
            &[("random", BasisPolicy::RandomBasis), ("fixed-z", BasisPolicy::FixedZ)],
        )?
        .unwrap_or(default_policy);
    let schedule = f
        .choice(
            "attack.schedule",
            &[("bernoulli", Schedule::Bernoulli), ("duty-cycle", Schedule::DutyCycle)],
        )?
        .unwrap_or_default();
    let eps = f.float("attack.eps", 0.0)?;
    let pointer = f
        .choice(
            "attack.pointer",
            &[
                ("gaussian", PointerKind::Gaussian),
                ("rect", PointerKind::Rect),
                ("triangle", PointerKind::Triangle),
            ],
        )?
        .unwrap_or(PointerKind::Gaussian);
    let delta = f.float("attack.delta", 1.0)?;
    let shape = PointerShape::with_position_std(pointer, delta).map_err(|e| from_core("attack.delta", e))?;
    let obs = Observable::new(f.float("attack.lambda1", 1.0)?, f.float("attack.lambda2", -1.0)?)
        .map_err(|e| from_core("attack.lambda2", e))?;
    let kind = match kind {
        Kind::None => AttackKind::NoAttack,
        Kind::Guess => AttackKind::GuessOnly,
        Kind::Partial => AttackKind::Partial { eps },
        Kind::Weak => AttackKind::Weak { shape, eps, obs },
        Kind::InterceptResend => AttackKind::InterceptResend,
        Kind::PnsPartial => AttackKind::PnsPartial { eps },
    };
    Ok(AttackStrategy::new(kind, policy)
        .map_err(|e| from_core("attack.eps", e))?
        .with_schedule(schedule))
}

/// Parses and validates a config document, filling defaults.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let doc: Table = text
        .parse()
        .map_err(|e: toml::de::Error| ConfigError::Parse(e.message().to_string()))?;
    let f = Fields(flatten(doc)?);

    let variant = f
        .choice(
            "variant",
            &[
                ("standard", ProtocolVariant::StandardBB84),
                ("simplified", ProtocolVariant::SimplifiedBB84),
            ],
        )?
        .unwrap_or_default();
    let attack = attack(&f, variant)?;
    let source = SourceConfig::new(f.float("source.mu", DEFAULT_MU)?).map_err(|e| from_core("source.mu", e))?;
    let noise = NoiseConfig {
        eve_readout: f.boolean("noise.eve_readout", true)?,
        ..NoiseConfig::new(
            f.float("noise.q_env_z", DEFAULT_Q_ENV)?,
            f.float("noise.q_env_x", DEFAULT_Q_ENV)?,
        )
        .map_err(|e| from_core("noise", e))?
    };
    let trials = f.positive_count("session.trials", DEFAULT_TRIALS as u64)?;
    let session = SessionConfig {
        variant,
        source,
        noise,
        attack,
        n_pulses: trials,
        basis_bias: f.float("session.basis_bias", 0.5)?,
        abort_threshold: f.float("session.abort_threshold", DEFAULT_ABORT_THRESHOLD)?,
    };
    session.validate().map_err(|e| from_core("session", e))?;

    let eps_grid = f.floats("sweep.eps_grid", &default_eps_grid())?;
    for &eps in &eps_grid {
        attack
            .with_eps(eps)
            .map_err(|_| invalid("sweep.eps_grid", format!("{eps} is out of range for the attack")))?;
    }
    let mu_grid = f.floats("sweep.mu_grid", &DEFAULT_MU_GRID)?;
    if let Some(&mu) = mu_grid.iter().find(|&&mu| mu <= 0.0) {
        return Err(invalid(
            "sweep.mu_grid",
            format!("{mu} is not a positive photon number"),
        ));
    }
    let heatmap_mode = f
        .choice(
            "sweep.mode",
            &[("analytic", Source::Analytic), ("monte-carlo", Source::MonteCarlo)],
        )?
        .unwrap_or(Source::Analytic);

    let step_mv = f.float("injection.step_mv", DEFAULT_STEP_MV)?;
    let max_steps = f.count("injection.max_steps", DEFAULT_MAX_STEPS as u64)?;
    let max_steps = u32::try_from(max_steps).map_err(|_| invalid("injection.max_steps", "too large"))?;
    let injection = NoiseInjection::new(
        0.0,
        step_mv,
        max_steps,
        f.float("injection.working_voltage_v", DEFAULT_WORKING_VOLTAGE_V)?,
        f.float("injection.v_pi_v", DEFAULT_V_PI_V)?,
    )
    .map_err(|e| from_core("injection", e))?;
    let default_offsets: Vec<f64> = (0..=max_steps).map(|k| k as f64 * step_mv).collect();
    let injection_offsets_mv = f.floats("injection.offsets_mv", &default_offsets)?;
    for &mv in &injection_offsets_mv {
        NoiseInjection::new(mv, step_mv, max_steps, injection.working_voltage_v, injection.v_pi_v)
            .map_err(|e| invalid("injection.offsets_mv", e.to_string()))?;
    }
    let injection_eps_grid = f.floats("injection.eps_grid", &DEFAULT_INJECTION_EPS)?;
    for &eps in &injection_eps_grid {
        if !(0.0..=1.0).contains(&eps) {
            return Err(invalid("injection.eps_grid", format!("{eps} is outside [0, 1]")));
        }
    }

    Ok(RunConfig {
        session,
        trials,
        sessions: f.positive_count("session.sessions", 1)?,
        eps_grid,
        mu_grid,
        heatmap_mode,
        injection,
        injection_offsets_mv,
        injection_eps_grid,
        seed: f.count("seed", DEFAULT_SEED)?,
        output: f.string("output")?.map(PathBuf::from),
    })
}
