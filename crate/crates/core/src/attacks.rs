//! Eve's strategies and their per-pulse application.
//!
//! A partial measurement of strength ε can be scheduled either as an
//! independent Bernoulli(ε) choice per pulse or as a duty cycle that measures
//! the first ⌊εN⌋ of N pulses. The duty cycle is the time-division
//! realisation of a beamsplitter tap, with R = t/T playing the role of ε.

use crate::channels::{intercept_resend, weak_channel_in_basis, ChannelStrength};
use crate::error::{check_positive, check_range, Error, Result};
use crate::pointer::{Observable, PointerShape};
use crate::protocol::{run_session, SessionConfig};
use crate::quantum::{projective_measure, Basis, Bit, DensityMatrix};
use crate::rng::RandomStream;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AttackKind {
    NoAttack,
    GuessOnly,
    Partial {
        eps: f64,
    },
    Weak {
        shape: PointerShape,
        eps: f64,
        obs: Observable,
    },
    InterceptResend,
    PnsPartial {
        eps: f64,
    },
}

impl AttackKind {
    pub fn name(&self) -> &'static str {
        match self {
            AttackKind::NoAttack => "none",
            AttackKind::GuessOnly => "guess",
            AttackKind::Partial { .. } => "partial",
            AttackKind::Weak { .. } => "weak",
            AttackKind::InterceptResend => "intercept-resend",
            AttackKind::PnsPartial { .. } => "pns-partial",
        }
    }

    /// Interaction strength, when the strategy has one.
    pub fn eps(&self) -> Option<f64> {
        match *self {
            AttackKind::Partial { eps } | AttackKind::Weak { eps, .. } | AttackKind::PnsPartial { eps } => Some(eps),
            AttackKind::InterceptResend => Some(1.0),
            AttackKind::NoAttack | AttackKind::GuessOnly => None,
        }
    }

    fn validate(self) -> Result<Self> {
        match self {
            AttackKind::Partial { eps } | AttackKind::PnsPartial { eps } => {
                ChannelStrength::new(eps)?;
            }
            AttackKind::Weak { eps, .. } if !(eps.is_finite() && eps >= 0.0) => {
                return Err(Error::InvalidParameter {
                    name: "attack.eps",
                    value: eps,
                    reason: "pointer displacement must be finite and non-negative",
                });
            }
            _ => {}
        }
        Ok(self)
    }
}

/// How Eve picks her measurement basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BasisPolicy {
    #[default]
    RandomBasis,
    FixedZ,
}

/// Which pulses a partial measurement touches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Schedule {
    #[default]
    Bernoulli,
    DutyCycle,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttackStrategy {
    pub kind: AttackKind,
    pub policy: BasisPolicy,
    pub schedule: Schedule,
    pub injection: Option<NoiseInjection>,
}

impl Default for AttackStrategy {
    fn default() -> Self {
        AttackStrategy {
            kind: AttackKind::NoAttack,
            policy: BasisPolicy::RandomBasis,
            schedule: Schedule::Bernoulli,
            injection: None,
        }
    }
}

impl AttackStrategy {
    pub fn new(kind: AttackKind, policy: BasisPolicy) -> Result<Self> {
        Ok(AttackStrategy {
            kind: kind.validate()?,
            policy,
            ..Default::default()
        })
    }

    pub fn none() -> Self {
        Self::default()
    }

    pub fn partial(eps: f64, policy: BasisPolicy) -> Result<Self> {
        Self::new(AttackKind::Partial { eps }, policy)
    }

    pub fn weak(shape: PointerShape, eps: f64, policy: BasisPolicy) -> Result<Self> {
        Self::new(
            AttackKind::Weak {
                shape,
                eps,
                obs: Observable::default(),
            },
            policy,
        )
    }

    pub fn intercept_resend(policy: BasisPolicy) -> Self {
        AttackStrategy {
            kind: AttackKind::InterceptResend,
            policy,
            ..Default::default()
        }
    }

    pub fn pns_partial(eps: f64, policy: BasisPolicy) -> Result<Self> {
        Self::new(AttackKind::PnsPartial { eps }, policy)
    }

    pub fn with_schedule(mut self, schedule: Schedule) -> Self {
        self.schedule = schedule;
        self
    }

    pub fn with_injection(mut self, injection: Option<NoiseInjection>) -> Self {
        self.injection = injection;
        self
    }

    /// Same strategy at a different strength. Strategies without a strength
    /// are returned unchanged.
    pub fn with_eps(&self, eps: f64) -> Result<Self> {
        let kind = match self.kind {
            AttackKind::Partial { .. } => AttackKind::Partial { eps },
            AttackKind::PnsPartial { .. } => AttackKind::PnsPartial { eps },
            AttackKind::Weak { shape, obs, .. } => AttackKind::Weak { shape, eps, obs },
            other => other,
        };
        Ok(AttackStrategy {
            kind: kind.validate()?,
            ..*self
        })
    }
}

/// Position of a pulse within its session, used by duty-cycle schedules.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PulseSlot {
    pub index: usize,
    pub total: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttackOutcome {
    pub eve_bit: Bit,
    pub eve_measured: bool,
    /// Basis of Eve's readout, when she measured.
    pub eve_basis: Option<Basis>,
    pub rho_out: DensityMatrix,
}

fn pick_basis(policy: BasisPolicy, rng: &mut RandomStream) -> Basis {
    match policy {
        BasisPolicy::FixedZ => Basis::Z,
        BasisPolicy::RandomBasis => {
            if rng.fair_bit() == 0 {
                Basis::Z
            } else {
                Basis::X
            }
        }
    }
}

fn guess(rho_in: &DensityMatrix, rng: &mut RandomStream) -> AttackOutcome {
    AttackOutcome {
        eve_bit: rng.fair_bit(),
        eve_measured: false,
        eve_basis: None,
        rho_out: *rho_in,
    }
}

fn partial(
    eps: f64,
    strategy: &AttackStrategy,
    rho_in: &DensityMatrix,
    slot: PulseSlot,
    rng: &mut RandomStream,
) -> Result<AttackOutcome> {
    let measure = match strategy.schedule {
        Schedule::Bernoulli => rng.bernoulli(eps),
        Schedule::DutyCycle => slot.index < (eps * slot.total as f64).floor() as usize,
    };
    if !measure {
        return Ok(guess(rho_in, rng));
    }
    let basis = pick_basis(strategy.policy, rng);
    let (eve_bit, rho_out) = intercept_resend(rho_in, basis, rng)?;
    Ok(AttackOutcome {
        eve_bit,
        eve_measured: true,
        eve_basis: Some(basis),
        rho_out,
    })
}

/// Applies Eve's strategy to one non-vacuum pulse.
pub fn apply_attack(
    strategy: &AttackStrategy,
    rho_in: &DensityMatrix,
    alice_basis: Basis,
    photon_n: u64,
    slot: PulseSlot,
    rng: &mut RandomStream,
) -> Result<AttackOutcome> {
    match strategy.kind {
        AttackKind::NoAttack | AttackKind::GuessOnly => Ok(guess(rho_in, rng)),
        AttackKind::Partial { eps } => partial(eps, strategy, rho_in, slot, rng),
        AttackKind::InterceptResend => {
            let basis = pick_basis(strategy.policy, rng);
            let (eve_bit, rho_out) = intercept_resend(rho_in, basis, rng)?;
            Ok(AttackOutcome {
                eve_bit,
                eve_measured: true,
                eve_basis: Some(basis),
                rho_out,
            })
        }
        AttackKind::Weak { shape, eps, obs } => {
            let basis = pick_basis(strategy.policy, rng);
            let p0 = rho_in.outcome_probability(basis, 0);
            let branch: Bit = if rng.uniform() < p0 { 0 } else { 1 };
            let x = shape.sample_position(eps * obs.eigenvalue(branch), rng);
            Ok(AttackOutcome {
                eve_bit: obs.decode(&shape, eps, x),
                eve_measured: true,
                eve_basis: Some(basis),
                rho_out: weak_channel_in_basis(rho_in, basis, &shape, eps, &obs)?,
            })
        }
        AttackKind::PnsPartial { eps } => match photon_n {
            0 => Ok(guess(rho_in, rng)),
            1 => partial(eps, strategy, rho_in, slot, rng),
            _ => {
                // The stored photon is read out in Alice's basis once it is
                // announced; Bob's photons are untouched.
                let (eve_bit, _) = projective_measure(rho_in, alice_basis, rng)?;
                Ok(AttackOutcome {
                    eve_bit,
                    eve_measured: true,
                    eve_basis: Some(alice_basis),
                    rho_out: *rho_in,
                })
            }
        },
    }
}

/// When an injection is active. Only the calibration stage is modelled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InjectionPhase {
    #[default]
    CalibrationOnly,
}

pub const DEFAULT_STEP_MV: f64 = 20.0;
pub const DEFAULT_MAX_STEPS: u32 = 10;
pub const DEFAULT_WORKING_VOLTAGE_V: f64 = 0.92;
pub const DEFAULT_V_PI_V: f64 = 1.0;

/// A voltage offset Eve applies to Bob's interferometer bias during
/// calibration. The offset is a whole number of steps above the working point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseInjection {
    voltage_offset_mv: f64,
    step_mv: f64,
    max_steps: u32,
    pub working_voltage_v: f64,
    pub v_pi_v: f64,
    pub active_during: InjectionPhase,
}

impl NoiseInjection {
    pub fn new(
        voltage_offset_mv: f64,
        step_mv: f64,
        max_steps: u32,
        working_voltage_v: f64,
        v_pi_v: f64,
    ) -> Result<Self> {
        let step_mv = check_positive("injection.step_mv", step_mv)?;
        let offset = check_range(
            "injection.offset_mv",
            voltage_offset_mv,
            0.0,
            step_mv * max_steps as f64,
        )?;
        let steps = offset / step_mv;
        if (steps - steps.round()).abs() > 1e-9 {
            return Err(Error::InvalidParameter {
                name: "injection.offset_mv",
                value: offset,
                reason: "offset must be a whole number of voltage steps",
            });
        }
        Ok(NoiseInjection {
            voltage_offset_mv: offset,
            step_mv,
            max_steps,
            working_voltage_v: check_range("injection.working_voltage_v", working_voltage_v, 0.0, f64::MAX)?,
            v_pi_v: check_positive("injection.v_pi_v", v_pi_v)?,
            active_during: InjectionPhase::CalibrationOnly,
        })
    }

    /// `steps` increments of the default 20 mV step above 0.92 V, with V_π = 1 V.
    pub fn from_steps(steps: u32) -> Result<Self> {
        Self::new(
            steps as f64 * DEFAULT_STEP_MV,
            DEFAULT_STEP_MV,
            DEFAULT_MAX_STEPS,
            DEFAULT_WORKING_VOLTAGE_V,
            DEFAULT_V_PI_V,
        )
    }

    /// Same settings at a different number of steps.
    pub fn at_step(&self, steps: u32) -> Result<Self> {
        Self::new(
            steps as f64 * self.step_mv,
            self.step_mv,
            self.max_steps,
            self.working_voltage_v,
            self.v_pi_v,
        )
    }

    pub fn voltage_offset_mv(&self) -> f64 {
        self.voltage_offset_mv
    }

    pub fn step_mv(&self) -> f64 {
        self.step_mv
    }

    pub fn max_steps(&self) -> u32 {
        self.max_steps
    }

    pub fn applied_voltage_v(&self) -> f64 {
        self.working_voltage_v + self.voltage_offset_mv / 1000.0
    }
}

/// Extra phase-basis error probability caused by the bias offset, assuming a
/// linear voltage-to-phase response with half-wave voltage V_π.
pub fn injected_x_qber(inj: &NoiseInjection) -> f64 {
    let phase = std::f64::consts::PI * inj.voltage_offset_mv / (1000.0 * inj.v_pi_v);
    0.5 * (1.0 - phase.cos())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InjectionRow {
    pub eps: f64,
    pub offset_mv: f64,
    pub injected_qber_x: f64,
    pub calibrated_qber_x: f64,
    pub calibrated_stderr: f64,
    /// Phase-basis records behind the calibrated rate.
    pub calibrated_n: usize,
    pub live_qber_x: f64,
    pub live_stderr: f64,
    pub live_n: usize,
}

/// Grid index reserved for the calibration stage's random stream.
const CALIBRATION_STREAM: u64 = u64::MAX;

/// Two-stage scenario: a calibration session with the injection active and no
/// eavesdropping, then one live session per ε with the injection removed and
/// a partial measurement of strength ε.
///
/// The calibration stream depends only on `master_seed`, so runs at
/// different offsets see identical pulses and their measured QBERs are
/// ordered like the injected error rates.
pub fn run_noise_injection_scenario(
    base: &SessionConfig,
    inj: &NoiseInjection,
    eps_grid: &[f64],
    master_seed: u64,
) -> Result<Vec<InjectionRow>> {
    let injected = injected_x_qber(inj);
    let mut calibration = base.clone();
    calibration.attack = AttackStrategy {
        kind: AttackKind::NoAttack,
        ..base.attack
    };
    calibration.noise.injected_x = injected;
    let cal = run_session(&calibration, &RandomStream::derive(master_seed, CALIBRATION_STREAM, 0))?;

    let live_template = AttackStrategy {
        kind: AttackKind::Partial { eps: 0.0 },
        injection: None,
        ..base.attack
    };
    eps_grid
        .iter()
        .enumerate()
        .map(|(k, &eps)| {
            let mut live = base.clone();
            live.noise.injected_x = 0.0;
            live.attack = live_template.with_eps(eps)?;
            let stats = run_session(&live, &RandomStream::derive(master_seed, k as u64, 0))?;
            Ok(InjectionRow {
                eps,
                offset_mv: inj.voltage_offset_mv(),
                injected_qber_x: injected,
                calibrated_qber_x: cal.qber_x,
                calibrated_stderr: cal.qber_x_stderr(),
                calibrated_n: cal.x_len,
                live_qber_x: stats.qber_x,
                live_stderr: stats.qber_x_stderr(),
                live_n: stats.x_len,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{dm_from_state, BasisState};

    const SLOT: PulseSlot = PulseSlot { index: 0, total: 1 };

    #[test]
    fn strength_validation() {
        assert!(AttackStrategy::partial(1.5, BasisPolicy::RandomBasis).is_err());
        assert!(AttackStrategy::pns_partial(-0.1, BasisPolicy::RandomBasis).is_err());
        let g = PointerShape::gaussian(1.0).unwrap();
        assert!(AttackStrategy::weak(g, 4.0, BasisPolicy::RandomBasis).is_ok());
        assert!(AttackStrategy::weak(g, -1.0, BasisPolicy::RandomBasis).is_err());
        let p = AttackStrategy::partial(0.3, BasisPolicy::FixedZ).unwrap();
        assert_eq!(p.with_eps(0.6).unwrap().kind, AttackKind::Partial { eps: 0.6 });
        assert!(p.with_eps(2.0).is_err());
    }

    #[test]
    fn no_attack_passes_state_and_guesses() {
        let mut rng = RandomStream::new(1);
        let rho = dm_from_state(BasisState::Plus);
        let n = 10_000;
        let mut ones = 0;
        for _ in 0..n {
            let out = apply_attack(&AttackStrategy::none(), &rho, Basis::X, 1, SLOT, &mut rng).unwrap();
            assert!(!out.eve_measured);
            assert_eq!(out.rho_out, rho);
            ones += out.eve_bit as usize;
        }
        assert!((ones as f64 / n as f64 - 0.5).abs() < 3.0 * (0.25 / n as f64).sqrt());
    }

    #[test]
    fn full_partial_fixed_z_on_early() {
        let s = AttackStrategy::partial(1.0, BasisPolicy::FixedZ).unwrap();
        let mut rng = RandomStream::new(2);
        let early = dm_from_state(BasisState::Early);
        for _ in 0..100 {
            let out = apply_attack(&s, &early, Basis::Z, 1, SLOT, &mut rng).unwrap();
            assert_eq!(out.eve_bit, 0);
            assert!(out.eve_measured);
            assert_eq!(out.rho_out, early);
        }
    }

    #[test]
    fn full_partial_fixed_z_on_plus_disturbs_x() {
        // Born enumeration: Eve's Z readout of |+⟩ is fair, and either
        // resent eigenstate gives Bob's X measurement a ½ error chance.
        let s = AttackStrategy::partial(1.0, BasisPolicy::FixedZ).unwrap();
        let mut rng = RandomStream::new(3);
        let plus = dm_from_state(BasisState::Plus);
        let n = 10_000;
        let mut errors = 0;
        let mut late = 0;
        for _ in 0..n {
            let out = apply_attack(&s, &plus, Basis::X, 1, SLOT, &mut rng).unwrap();
            let early = dm_from_state(BasisState::Early);
            let lt = dm_from_state(BasisState::Late);
            assert!(out.rho_out == early || out.rho_out == lt);
            late += (out.rho_out == lt) as usize;
            let (bit, _) = projective_measure(&out.rho_out, Basis::X, &mut rng).unwrap();
            errors += bit as usize;
        }
        let tol = 3.0 * (0.25 / n as f64).sqrt();
        assert!((errors as f64 / n as f64 - 0.5).abs() < tol);
        assert!((late as f64 / n as f64 - 0.5).abs() < tol);
    }

    #[test]
    fn pns_multiphoton_is_free_information() {
        let s = AttackStrategy::pns_partial(0.3, BasisPolicy::RandomBasis).unwrap();
        let mut rng = RandomStream::new(4);
        for state in BasisState::ALL {
            let rho = dm_from_state(state);
            let out = apply_attack(&s, &rho, state.basis(), 3, SLOT, &mut rng).unwrap();
            assert!(out.eve_measured);
            assert_eq!(out.eve_bit, state.bit());
            assert_eq!(out.rho_out, rho);
        }
    }

    #[test]
    fn duty_cycle_measures_leading_fraction() {
        let s = AttackStrategy::partial(0.3, BasisPolicy::FixedZ)
            .unwrap()
            .with_schedule(Schedule::DutyCycle);
        let mut rng = RandomStream::new(5);
        let rho = dm_from_state(BasisState::Early);
        let measured: Vec<bool> = (0..10)
            .map(|index| {
                apply_attack(&s, &rho, Basis::Z, 1, PulseSlot { index, total: 10 }, &mut rng)
                    .unwrap()
                    .eve_measured
            })
            .collect();
        assert_eq!(
            measured,
            [true, true, true, false, false, false, false, false, false, false]
        );
    }

    #[test]
    fn injection_curve() {
        let zero = NoiseInjection::from_steps(0).unwrap();
        assert_eq!(injected_x_qber(&zero), 0.0);
        // A quarter-wave offset erases the interference; a half-wave offset
        // swaps the interferometer outputs.
        let quarter = NoiseInjection::new(250.0, 50.0, 10, 0.92, 0.5).unwrap();
        assert!((injected_x_qber(&quarter) - 0.5).abs() < 1e-15);
        let half_wave = NoiseInjection::new(500.0, 50.0, 10, 0.92, 0.5).unwrap();
        assert!((injected_x_qber(&half_wave) - 1.0).abs() < 1e-15);
        let values: Vec<f64> = (1..=10)
            .map(|k| injected_x_qber(&NoiseInjection::from_steps(k).unwrap()))
            .collect();
        assert!(values.windows(2).all(|w| w[1] > w[0]));
        assert!(values[0] > 0.0);
        let full = NoiseInjection::from_steps(10).unwrap();
        assert!((full.applied_voltage_v() - 1.12).abs() < 1e-12);
    }

    #[test]
    fn injection_validation() {
        assert!(NoiseInjection::from_steps(11).is_err());
        assert!(NoiseInjection::new(30.0, 20.0, 10, 0.92, 1.0).is_err());
        assert!(NoiseInjection::new(40.0, 20.0, 10, 0.92, 0.0).is_err());
    }
}
