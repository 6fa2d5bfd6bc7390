//! BB84 sessions over a time-bin channel: preparation, attack, detection,
//! sifting and scoring.
//!
//! Session length is counted in detected pulses. Vacuum pulses never reach
//! Bob, so the photon number of each simulated pulse is drawn from the
//! Poisson distribution conditioned on n ≥ 1.

use crate::attacks::{apply_attack, AttackStrategy, PulseSlot};
use crate::error::{check_range, Error, Result};
use crate::quantum::{dm_from_state, projective_measure, Basis, BasisState, Bit, DensityMatrix};
use crate::rng::RandomStream;
use crate::source::{pns_split, sample_nonvacuum_photon_number, SourceConfig};

pub const DEFAULT_ABORT_THRESHOLD: f64 = 0.11;
pub const DEFAULT_Q_ENV: f64 = 0.07;
pub const DEFAULT_N_PULSES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ProtocolVariant {
    #[default]
    StandardBB84,
    /// Key from the time basis only; the phase basis monitors errors.
    SimplifiedBB84,
}

impl ProtocolVariant {
    pub fn name(self) -> &'static str {
        match self {
            ProtocolVariant::StandardBB84 => "standard",
            ProtocolVariant::SimplifiedBB84 => "simplified",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PulseRecord {
    pub alice_bit: Bit,
    pub alice_basis: Basis,
    pub photon_n: u64,
    /// Eve's recorded bit; a coin flip when she did not measure.
    pub eve_bit: Bit,
    pub eve_measured: bool,
    pub eve_basis: Option<Basis>,
    pub bob_basis: Basis,
    /// `None` on a null detection.
    pub bob_bit: Option<Bit>,
}

/// Classical error model for the detection stage.
///
/// Bob's outcome is flipped with probability `q_env_z` or `q_env_x` for the
/// basis he measured in, plus `injected_x` on the phase line while a bias
/// offset is applied. When `eve_readout` is set, Eve's own detectors share
/// the same per-basis error rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseConfig {
    pub q_env_z: f64,
    pub q_env_x: f64,
    pub eve_readout: bool,
    pub injected_x: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            q_env_z: DEFAULT_Q_ENV,
            q_env_x: DEFAULT_Q_ENV,
            eve_readout: true,
            injected_x: 0.0,
        }
    }
}

impl NoiseConfig {
    pub fn new(q_env_z: f64, q_env_x: f64) -> Result<Self> {
        NoiseConfig {
            q_env_z,
            q_env_x,
            ..Default::default()
        }
        .validated()
    }

    pub fn none() -> Self {
        NoiseConfig {
            q_env_z: 0.0,
            q_env_x: 0.0,
            eve_readout: true,
            injected_x: 0.0,
        }
    }

    pub fn validated(self) -> Result<Self> {
        check_range("noise.q_env_z", self.q_env_z, 0.0, 0.5)?;
        check_range("noise.q_env_x", self.q_env_x, 0.0, 0.5)?;
        check_range("noise.injected_x", self.injected_x, 0.0, 0.5)?;
        Ok(self)
    }

    /// Flip probability of Bob's outcome in `basis`.
    pub fn bob_flip(&self, basis: Basis) -> f64 {
        match basis {
            Basis::Z => self.q_env_z,
            Basis::X => (self.q_env_x + self.injected_x).min(0.5),
        }
    }

    /// Flip probability of Eve's readout in `basis`.
    pub fn eve_flip(&self, basis: Basis) -> f64 {
        if !self.eve_readout {
            return 0.0;
        }
        match basis {
            Basis::Z => self.q_env_z,
            Basis::X => self.q_env_x,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionConfig {
    pub variant: ProtocolVariant,
    pub source: SourceConfig,
    pub noise: NoiseConfig,
    pub attack: AttackStrategy,
    /// Number of detected pulses.
    pub n_pulses: usize,
    /// Probability of choosing the time basis, for Alice and Bob alike.
    pub basis_bias: f64,
    pub abort_threshold: f64,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            variant: ProtocolVariant::StandardBB84,
            source: SourceConfig::default(),
            noise: NoiseConfig::default(),
            attack: AttackStrategy::none(),
            n_pulses: DEFAULT_N_PULSES,
            basis_bias: 0.5,
            abort_threshold: DEFAULT_ABORT_THRESHOLD,
        }
    }
}

impl SessionConfig {
    pub fn validate(&self) -> Result<()> {
        self.noise.validated()?;
        if self.n_pulses == 0 {
            return Err(Error::InvalidParameter {
                name: "session.n_pulses",
                value: 0.0,
                reason: "at least one pulse is required",
            });
        }
        if !(self.basis_bias > 0.0 && self.basis_bias < 1.0) {
            return Err(Error::InvalidParameter {
                name: "session.basis_bias",
                value: self.basis_bias,
                reason: "must lie strictly between 0 and 1",
            });
        }
        check_range("session.abort_threshold", self.abort_threshold, 0.0, 1.0)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SessionStats {
    pub variant: ProtocolVariant,
    /// Length of the sifted key string.
    pub sifted_len: usize,
    /// Basis-matched detections in the time basis.
    pub z_len: usize,
    /// Basis-matched detections in the phase basis.
    pub x_len: usize,
    pub qber_z: f64,
    pub qber_x: f64,
    /// Error rate over every basis-matched detection.
    pub qber_combined: f64,
    /// Fraction of key bits Eve holds correctly.
    pub gain: f64,
    pub aborted: bool,
    /// Three binomial standard errors of the monitored error rate.
    pub ci_halfwidth: f64,
}

/// √(p(1−p)/n), zero for an empty sample.
pub fn binomial_stderr(p: f64, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        (p * (1.0 - p) / n as f64).sqrt()
    }
}

impl SessionStats {
    /// The error rate compared against the abort threshold: the combined
    /// rate for standard BB84, the phase-basis rate for the simplified variant.
    pub fn monitored_qber(&self) -> f64 {
        match self.variant {
            ProtocolVariant::StandardBB84 => self.qber_combined,
            ProtocolVariant::SimplifiedBB84 => self.qber_x,
        }
    }

    pub fn monitored_len(&self) -> usize {
        match self.variant {
            ProtocolVariant::StandardBB84 => self.z_len + self.x_len,
            ProtocolVariant::SimplifiedBB84 => self.x_len,
        }
    }

    pub fn monitored_stderr(&self) -> f64 {
        binomial_stderr(self.monitored_qber(), self.monitored_len())
    }

    pub fn qber_z_stderr(&self) -> f64 {
        binomial_stderr(self.qber_z, self.z_len)
    }

    pub fn qber_x_stderr(&self) -> f64 {
        binomial_stderr(self.qber_x, self.x_len)
    }

    pub fn gain_stderr(&self) -> f64 {
        binomial_stderr(self.gain, self.sifted_len)
    }
}

/// Alice's random bit and basis. `basis_bias` is the probability of Z.
pub fn alice_prepare(basis_bias: f64, rng: &mut RandomStream) -> (Bit, Basis, BasisState) {
    let bit = rng.fair_bit();
    let basis = if rng.bernoulli(basis_bias) { Basis::Z } else { Basis::X };
    (bit, basis, BasisState::encode(basis, bit))
}

/// Passive basis choice followed by a Born-rule measurement.
pub fn bob_measure(rho: &DensityMatrix, basis_bias: f64, rng: &mut RandomStream) -> Result<(Basis, Bit)> {
    let basis = if rng.bernoulli(basis_bias) { Basis::Z } else { Basis::X };
    Ok((basis, bob_measure_in(rho, basis, rng)?))
}

/// Born-rule measurement in a given basis.
pub fn bob_measure_in(rho: &DensityMatrix, basis: Basis, rng: &mut RandomStream) -> Result<Bit> {
    projective_measure(rho, basis, rng).map(|(bit, _)| bit)
}

#[derive(Default)]
struct Tally {
    n: usize,
    errors: usize,
    eve_correct: usize,
}

impl Tally {
    fn add(&mut self, r: &PulseRecord, bob: Bit) {
        self.n += 1;
        self.errors += (bob != r.alice_bit) as usize;
        self.eve_correct += (r.eve_bit == r.alice_bit) as usize;
    }

    fn rate(count: usize, n: usize) -> f64 {
        if n == 0 {
            0.0
        } else {
            count as f64 / n as f64
        }
    }
}

/// Sifts on matching bases and scores the surviving records.
///
/// Standard BB84 keys on every matched record and aborts on the combined
/// error rate. The simplified variant keys on the time basis only, and aborts
/// on the phase-basis error rate.
pub fn sift_and_score(records: &[PulseRecord], variant: ProtocolVariant, abort_threshold: f64) -> Result<SessionStats> {
    let mut z = Tally::default();
    let mut x = Tally::default();
    for r in records {
        let Some(bob) = r.bob_bit else { continue };
        if r.alice_basis != r.bob_basis {
            continue;
        }
        match r.alice_basis {
            Basis::Z => z.add(r, bob),
            Basis::X => x.add(r, bob),
        }
    }
    let (sifted_len, eve_correct) = match variant {
        ProtocolVariant::StandardBB84 => (z.n + x.n, z.eve_correct + x.eve_correct),
        ProtocolVariant::SimplifiedBB84 => (z.n, z.eve_correct),
    };
    if sifted_len == 0 {
        return Err(Error::EmptySiftedKey);
    }
    let mut stats = SessionStats {
        variant,
        sifted_len,
        z_len: z.n,
        x_len: x.n,
        qber_z: Tally::rate(z.errors, z.n),
        qber_x: Tally::rate(x.errors, x.n),
        qber_combined: Tally::rate(z.errors + x.errors, z.n + x.n),
        gain: Tally::rate(eve_correct, sifted_len),
        aborted: false,
        ci_halfwidth: 0.0,
    };
    stats.aborted = stats.monitored_qber() > abort_threshold;
    stats.ci_halfwidth = 3.0 * stats.monitored_stderr();
    Ok(stats)
}

/// Stream tags for the parties of a session.
const ALICE: u64 = 1;
const SOURCE: u64 = 2;
const EVE: u64 = 3;
const BOB: u64 = 4;
const NOISE: u64 = 5;
const EVE_NOISE: u64 = 6;

/// Simulates `config.n_pulses` detected pulses.
///
/// Each party draws from its own child of `rng`, and the noise streams take
/// one uniform per pulse whether or not it is used. Two sessions that differ
/// only in noise levels therefore see the same pulses and flip a nested set
/// of outcomes.
pub fn simulate_pulses(config: &SessionConfig, rng: &RandomStream) -> Result<Vec<PulseRecord>> {
    config.validate()?;
    let mut alice = rng.fork(ALICE);
    let mut source = rng.fork(SOURCE);
    let mut eve = rng.fork(EVE);
    let mut bob = rng.fork(BOB);
    let mut noise = rng.fork(NOISE);
    let mut eve_noise = rng.fork(EVE_NOISE);

    let mut records = Vec::with_capacity(config.n_pulses);
    for index in 0..config.n_pulses {
        let (alice_bit, alice_basis, state) = alice_prepare(config.basis_bias, &mut alice);
        let photon_n = sample_nonvacuum_photon_number(&config.source, &mut source);
        let rho = dm_from_state(state);
        let slot = PulseSlot {
            index,
            total: config.n_pulses,
        };
        let out = apply_attack(&config.attack, &rho, alice_basis, photon_n, slot, &mut eve)?;

        let mut eve_bit = out.eve_bit;
        let u_eve = eve_noise.uniform();
        if let Some(b) = out.eve_basis {
            if u_eve < config.noise.eve_flip(b) {
                eve_bit ^= 1;
            }
        }

        // Bob receives whatever Eve forwards; a split pulse still carries
        // at least one photon.
        let (_, to_bob) = pns_split(photon_n);
        let u_bob = noise.uniform();
        let (bob_basis, bob_bit) = if to_bob >= 1 {
            let (basis, bit) = bob_measure(&out.rho_out, config.basis_bias, &mut bob)?;
            let flipped = if u_bob < config.noise.bob_flip(basis) {
                bit ^ 1
            } else {
                bit
            };
            (basis, Some(flipped))
        } else {
            (Basis::Z, None)
        };

        records.push(PulseRecord {
            alice_bit,
            alice_basis,
            photon_n,
            eve_bit,
            eve_measured: out.eve_measured,
            eve_basis: out.eve_basis,
            bob_basis,
            bob_bit,
        });
    }
    Ok(records)
}

/// One session: simulate, sift and score.
pub fn run_session(config: &SessionConfig, rng: &RandomStream) -> Result<SessionStats> {
    let records = simulate_pulses(config, rng)?;
    sift_and_score(&records, config.variant, config.abort_threshold)
}
