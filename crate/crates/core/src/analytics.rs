//! Closed-form predictions, exact expectations, sweeps and heatmaps.
//!
//! Besides the textbook closed forms, [`expected_stats`] evaluates the exact
//! expectation of every session statistic for any [`SessionConfig`] by
//! enumerating Alice's state, Eve's branches and Bob's Born probabilities.
//! Monte-Carlo rows are checked against it.

use rayon::prelude::*;
use statrs::function::erf::erfc;

use crate::attacks::{AttackKind, BasisPolicy};
use crate::channels::weak_channel_in_basis;
use crate::error::{check_positive, check_range, Error, Result};
use crate::pointer::{overlap_chi, Observable, PointerShape};
use crate::protocol::{binomial_stderr, run_session, NoiseConfig, ProtocolVariant, SessionConfig};
use crate::quantum::{dm_from_state, Basis, BasisState, Bit, DensityMatrix};
use crate::rng::RandomStream;
use crate::source::SourceConfig;

/// Standard normal CDF.
fn phi(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

fn strength(eps: f64) -> Result<f64> {
    check_range("attack.eps", eps, 0.0, 1.0)
}

/// Partial attack with a random-basis Eve in standard BB84: (G, Q) =
/// (1/2 + ε/4, ε/4).
pub fn analytic_partial(eps: f64) -> Result<(f64, f64)> {
    let eps = strength(eps)?;
    Ok((0.5 + eps / 4.0, eps / 4.0))
}

/// Partial attack with Eve fixed on the time basis in simplified BB84:
/// (G, Q_X) = (1/2 + ε/2, ε/2). The time-basis error rate stays at zero.
pub fn analytic_partial_fixed_z(eps: f64) -> Result<(f64, f64)> {
    let eps = strength(eps)?;
    Ok((0.5 + eps / 2.0, eps / 2.0))
}

/// Partial attack on single-photon pulses combined with photon-number
/// splitting, per detected pulse:
///
/// ```text
/// G = [P(1)(1/2 + ε/4) + P(n>1)] / P(n>0)
/// Q = ε P(1) / (4 P(n>0))
/// ```
pub fn pns_partial_analytic(mu: f64, eps: f64) -> Result<(f64, f64)> {
    let source = SourceConfig::new(mu)?;
    let eps = strength(eps)?;
    let (p1, pm, pd) = (source.p_single(), source.p_multi(), source.p_nonvacuum());
    Ok(((p1 * (0.5 + eps / 4.0) + pm) / pd, eps * p1 / (4.0 * pd)))
}

/// Weak attack with a Gaussian pointer at s = ε/Δ.
///
/// With a random-basis Eve in standard BB84, G = 1/4 + Φ(s)/2 and
/// Q = (1 − e^{−s²/2})/4. With Eve fixed on the time basis in simplified
/// BB84, G = Φ(s) and Q_X = (1 − e^{−s²/2})/2.
pub fn analytic_weak_gaussian(eps_over_delta: f64, policy: BasisPolicy) -> Result<(f64, f64)> {
    let s = check_range("attack.eps", eps_over_delta, 0.0, f64::MAX)?;
    let disturbance = -(-0.5 * s * s).exp_m1();
    Ok(match policy {
        BasisPolicy::RandomBasis => (0.25 + 0.5 * phi(s), 0.25 * disturbance),
        BasisPolicy::FixedZ => (phi(s), 0.5 * disturbance),
    })
}

/// Weak attack with an arbitrary pointer, under the same conventions as
/// [`analytic_weak_gaussian`]. Eve reads the right bit with probability p_c
/// when her basis matches Alice's, and a mismatched state reaches Bob with
/// its coherence scaled by χ₀₁.
pub fn analytic_weak(shape: &PointerShape, eps: f64, obs: &Observable, policy: BasisPolicy) -> Result<(f64, f64)> {
    let chi = overlap_chi(shape, eps, obs, 0, 1)?;
    let p_c = 0.5 * (obs.decode_probability(shape, eps, 0, 0) + obs.decode_probability(shape, eps, 1, 1));
    Ok(match policy {
        BasisPolicy::RandomBasis => (0.25 + 0.5 * p_c, 0.25 * (1.0 - chi)),
        BasisPolicy::FixedZ => (p_c, 0.5 * (1.0 - chi)),
    })
}

/// Q/G.
pub fn efficiency(q: f64, g: f64) -> Result<f64> {
    if g == 0.0 {
        return Err(Error::DivisionByZeroGain);
    }
    Ok(q / g)
}

/// Exact expectations of the session statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Expected {
    pub variant: ProtocolVariant,
    pub gain: f64,
    pub qber_z: f64,
    pub qber_x: f64,
    pub qber_combined: f64,
}

impl Expected {
    /// Counterpart of [`crate::protocol::SessionStats::monitored_qber`].
    pub fn monitored_qber(&self) -> f64 {
        match self.variant {
            ProtocolVariant::StandardBB84 => self.qber_combined,
            ProtocolVariant::SimplifiedBB84 => self.qber_x,
        }
    }
}

/// One of Eve's possible actions on a pulse.
struct Branch {
    weight: f64,
    /// Probability that Eve's raw bit equals Alice's.
    eve_correct: f64,
    eve_basis: Option<Basis>,
    rho_out: DensityMatrix,
}

fn policy_bases(policy: BasisPolicy) -> &'static [(Basis, f64)] {
    match policy {
        BasisPolicy::RandomBasis => &[(Basis::Z, 0.5), (Basis::X, 0.5)],
        BasisPolicy::FixedZ => &[(Basis::Z, 1.0)],
    }
}

fn projective_branches(out: &mut Vec<Branch>, weight: f64, policy: BasisPolicy, rho: &DensityMatrix, bit: Bit) {
    for &(e, pe) in policy_bases(policy) {
        for o in [0, 1] {
            let p = rho.outcome_probability(e, o);
            if p > 0.0 {
                out.push(Branch {
                    weight: weight * pe * p,
                    eve_correct: (o == bit) as u8 as f64,
                    eve_basis: Some(e),
                    rho_out: dm_from_state(BasisState::encode(e, o)),
                });
            }
        }
    }
}

fn pass_through(out: &mut Vec<Branch>, weight: f64, rho: &DensityMatrix) {
    out.push(Branch {
        weight,
        eve_correct: 0.5,
        eve_basis: None,
        rho_out: *rho,
    });
}

fn partial_branches(out: &mut Vec<Branch>, weight: f64, eps: f64, policy: BasisPolicy, rho: &DensityMatrix, bit: Bit) {
    pass_through(out, weight * (1.0 - eps), rho);
    projective_branches(out, weight * eps, policy, rho, bit);
}

fn eve_branches(config: &SessionConfig, state: BasisState) -> Result<Vec<Branch>> {
    let rho = dm_from_state(state);
    let bit = state.bit();
    let policy = config.attack.policy;
    let mut out = Vec::new();
    match config.attack.kind {
        AttackKind::NoAttack | AttackKind::GuessOnly => pass_through(&mut out, 1.0, &rho),
        AttackKind::Partial { eps } => partial_branches(&mut out, 1.0, eps, policy, &rho, bit),
        AttackKind::InterceptResend => projective_branches(&mut out, 1.0, policy, &rho, bit),
        AttackKind::Weak { shape, eps, obs } => {
            for &(e, pe) in policy_bases(policy) {
                let eve_correct = (0..2)
                    .map(|branch| rho.outcome_probability(e, branch) * obs.decode_probability(&shape, eps, branch, bit))
                    .sum();
                out.push(Branch {
                    weight: pe,
                    eve_correct,
                    eve_basis: Some(e),
                    rho_out: weak_channel_in_basis(&rho, e, &shape, eps, &obs)?,
                });
            }
        }
        AttackKind::PnsPartial { eps } => {
            let s = &config.source;
            let single = s.p_single() / s.p_nonvacuum();
            partial_branches(&mut out, single, eps, policy, &rho, bit);
            out.push(Branch {
                weight: 1.0 - single,
                eve_correct: 1.0,
                eve_basis: Some(state.basis()),
                rho_out: rho,
            });
        }
    }
    Ok(out)
}

fn through_flip(p: f64, flip: f64) -> f64 {
    p * (1.0 - flip) + (1.0 - p) * flip
}

/// Exact expected statistics of [`run_session`] for `config`.
///
/// Duty-cycle schedules are treated as measuring a fraction ε of pulses.
pub fn expected_stats(config: &SessionConfig) -> Result<Expected> {
    config.validate()?;
    let noise: &NoiseConfig = &config.noise;
    // [Z, X] per-basis expectations over sifted records.
    let mut err = [0.0; 2];
    let mut gain = [0.0; 2];
    for (slot, basis) in [Basis::Z, Basis::X].into_iter().enumerate() {
        for bit in [0, 1] {
            let state = BasisState::encode(basis, bit);
            for b in eve_branches(config, state)? {
                let bob_wrong = b.rho_out.outcome_probability(basis, 1 - bit);
                err[slot] += 0.5 * b.weight * through_flip(bob_wrong, noise.bob_flip(basis));
                let eve = match b.eve_basis {
                    Some(e) => through_flip(b.eve_correct, noise.eve_flip(e)),
                    None => b.eve_correct,
                };
                gain[slot] += 0.5 * b.weight * eve;
            }
        }
    }
    // Matching probability of each basis, for Alice and Bob choosing alike.
    let wz = config.basis_bias.powi(2);
    let wx = (1.0 - config.basis_bias).powi(2);
    let combined = |v: [f64; 2]| (wz * v[0] + wx * v[1]) / (wz + wx);
    Ok(Expected {
        variant: config.variant,
        gain: match config.variant {
            ProtocolVariant::StandardBB84 => combined(gain),
            ProtocolVariant::SimplifiedBB84 => gain[0],
        },
        qber_z: err[0],
        qber_x: err[1],
        qber_combined: combined(err),
    })
}

/// Ordinary least-squares fit y = slope·x + intercept with its R².
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> LinearFit {
    assert_eq!(xs.len(), ys.len(), "fit needs paired samples");
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    LinearFit {
        slope,
        intercept: my - slope * mx,
        r_squared: if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    MonteCarlo,
    Analytic,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::MonteCarlo => "monte_carlo",
            Source::Analytic => "analytic",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub eps: f64,
    pub mu: Option<f64>,
    pub q: f64,
    pub g: f64,
    /// `None` when g = 0.
    pub q_over_g: Option<f64>,
    pub q_stderr: f64,
    pub g_stderr: f64,
    pub source: Source,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn by_source(&self, source: Source) -> impl Iterator<Item = &SweepRow> {
        self.rows.iter().filter(move |r| r.source == source)
    }
}

/// Runs `f(0..n)` on a pool of `workers` threads (0 = one per core) and
/// returns the results in index order.
pub fn parallel_map<T, F>(n: usize, workers: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::ThreadPool(e.to_string()))?;
    pool.install(|| (0..n).into_par_iter().map(&f).collect())
}

fn mu_column(config: &SessionConfig) -> Option<f64> {
    matches!(config.attack.kind, AttackKind::PnsPartial { .. }).then(|| config.source.mu())
}

/// Sweeps the attack strength over `eps_grid`. Each grid point runs one
/// session of `trials` detected pulses with the stream derived from
/// (`seed`, grid index) and contributes a Monte-Carlo row followed by the
/// matching exact-expectation row.
pub fn sweep_epsilon(
    config: &SessionConfig,
    eps_grid: &[f64],
    trials: usize,
    seed: u64,
    workers: usize,
) -> Result<SweepResult> {
    if eps_grid.is_empty() {
        return Err(Error::InvalidParameter {
            name: "sweep.eps_grid",
            value: 0.0,
            reason: "grid must not be empty",
        });
    }
    let points = parallel_map(eps_grid.len(), workers, |k| {
        let eps = eps_grid[k];
        let cfg = SessionConfig {
            attack: config.attack.with_eps(eps)?,
            n_pulses: trials,
            ..config.clone()
        };
        let mu = mu_column(&cfg);
        let stats = run_session(&cfg, &RandomStream::derive(seed, k as u64, 0))?;
        let (q, g) = (stats.monitored_qber(), stats.gain);
        let mc = SweepRow {
            eps,
            mu,
            q,
            g,
            q_over_g: efficiency(q, g).ok(),
            q_stderr: stats.monitored_stderr(),
            g_stderr: stats.gain_stderr(),
            source: Source::MonteCarlo,
        };
        let exp = expected_stats(&cfg)?;
        let (q, g) = (exp.monitored_qber(), exp.gain);
        let analytic = SweepRow {
            eps,
            mu,
            q,
            g,
            q_over_g: efficiency(q, g).ok(),
            q_stderr: 0.0,
            g_stderr: 0.0,
            source: Source::Analytic,
        };
        Ok([mc, analytic])
    })?;
    Ok(SweepResult {
        rows: points.into_iter().flatten().collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatmapCell {
    pub mu: f64,
    pub eps: f64,
    pub g: f64,
    pub q: f64,
    pub g_stderr: f64,
    pub q_stderr: f64,
    /// Records behind `g` and `q`; zero for analytic cells.
    pub n_g: usize,
    pub n_q: usize,
    pub mode: Source,
}

fn closed_form_regime(config: &SessionConfig) -> bool {
    matches!(config.attack.kind, AttackKind::PnsPartial { .. })
        && config.variant == ProtocolVariant::StandardBB84
        && config.attack.policy == BasisPolicy::RandomBasis
        && config.basis_bias == 0.5
        && config.noise.bob_flip(Basis::Z) == 0.0
        && config.noise.bob_flip(Basis::X) == 0.0
}

/// (G, Q) over μ × ε in row-major order (μ outer, ε inner).
///
/// Analytic cells use the photon-number-splitting closed form when the
/// configuration is in its regime and [`expected_stats`] otherwise.
/// Monte-Carlo cells run `trials` detected pulses each, with the stream
/// derived from (`seed`, cell index).
pub fn heatmap_mu_epsilon(
    config: &SessionConfig,
    mu_grid: &[f64],
    eps_grid: &[f64],
    mode: Source,
    trials: usize,
    seed: u64,
    workers: usize,
) -> Result<Vec<HeatmapCell>> {
    if mu_grid.is_empty() || eps_grid.is_empty() {
        return Err(Error::InvalidParameter {
            name: "sweep.mu_grid",
            value: mu_grid.len() as f64,
            reason: "grids must not be empty",
        });
    }
    for &mu in mu_grid {
        check_positive("source.mu", mu)?;
    }
    parallel_map(mu_grid.len() * eps_grid.len(), workers, |cell| {
        let (mu, eps) = (mu_grid[cell / eps_grid.len()], eps_grid[cell % eps_grid.len()]);
        let cfg = SessionConfig {
            source: SourceConfig::new(mu)?,
            attack: config.attack.with_eps(eps)?,
            n_pulses: trials,
            ..config.clone()
        };
        let analytic = |g: f64, q: f64| HeatmapCell {
            mu,
            eps,
            g,
            q,
            g_stderr: 0.0,
            q_stderr: 0.0,
            n_g: 0,
            n_q: 0,
            mode,
        };
        Ok(match mode {
            Source::Analytic if closed_form_regime(&cfg) => {
                let (g, q) = pns_partial_analytic(mu, eps)?;
                analytic(g, q)
            }
            Source::Analytic => {
                let e = expected_stats(&cfg)?;
                analytic(e.gain, e.monitored_qber())
            }
            Source::MonteCarlo => {
                let s = run_session(&cfg, &RandomStream::derive(seed, cell as u64, 0))?;
                HeatmapCell {
                    mu,
                    eps,
                    g: s.gain,
                    q: s.monitored_qber(),
                    g_stderr: s.gain_stderr(),
                    q_stderr: s.monitored_stderr(),
                    n_g: s.sifted_len,
                    n_q: s.monitored_len(),
                    mode,
                }
            }
        })
    })
}

/// Whether `observed` lies within three binomial standard errors of
/// `expected` for `n` samples.
pub fn within_three_sigma(observed: f64, expected: f64, n: usize) -> bool {
    (observed - expected).abs() <= 3.0 * binomial_stderr(expected, n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attacks::AttackStrategy;
    use crate::pointer::PointerKind;

    fn zero_noise(variant: ProtocolVariant, attack: AttackStrategy) -> SessionConfig {
        SessionConfig {
            variant,
            noise: NoiseConfig::none(),
            attack,
            ..Default::default()
        }
    }

    #[test]
    fn partial_closed_form_examples() {
        assert_eq!(analytic_partial(0.0).unwrap(), (0.5, 0.0));
        assert_eq!(analytic_partial(1.0).unwrap(), (0.75, 0.25));
        assert_eq!(analytic_partial(0.5).unwrap(), (0.625, 0.125));
        assert!(analytic_partial(1.2).is_err());
        let (g, q) = analytic_partial(1.0).unwrap();
        assert!((efficiency(q, g).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(efficiency(0.0, 0.5).unwrap(), 0.0);
        assert_eq!(efficiency(0.1, 0.0), Err(Error::DivisionByZeroGain));
    }

    #[test]
    fn engine_reproduces_partial_closed_forms() {
        for eps in [0.0, 0.2, 0.5, 0.9, 1.0] {
            let random = zero_noise(
                ProtocolVariant::StandardBB84,
                AttackStrategy::partial(eps, BasisPolicy::RandomBasis).unwrap(),
            );
            let e = expected_stats(&random).unwrap();
            let (g, q) = analytic_partial(eps).unwrap();
            assert!((e.gain - g).abs() < 1e-14 && (e.qber_combined - q).abs() < 1e-14);

            let fixed = zero_noise(
                ProtocolVariant::SimplifiedBB84,
                AttackStrategy::partial(eps, BasisPolicy::FixedZ).unwrap(),
            );
            let e = expected_stats(&fixed).unwrap();
            let (g, q) = analytic_partial_fixed_z(eps).unwrap();
            assert!((e.gain - g).abs() < 1e-14 && (e.qber_x - q).abs() < 1e-14);
            assert!(e.qber_z.abs() < 1e-14);
        }
    }

    #[test]
    fn pns_closed_form() {
        // Pmf oracle at μ = 0.2, ε = 1.
        let p0 = (-0.2f64).exp();
        let (p1, pd) = (0.2 * p0, 1.0 - p0);
        let pm = pd - p1;
        let (g_ref, q_ref) = ((p1 * 0.75 + pm) / pd, p1 / (4.0 * pd));
        assert!((g_ref - 0.774_17).abs() < 1e-5 && (q_ref - 0.225_83).abs() < 1e-5);
        let (g, q) = pns_partial_analytic(0.2, 1.0).unwrap();
        assert!((g - g_ref).abs() < 1e-14 && (q - q_ref).abs() < 1e-14);

        let (g, q) = pns_partial_analytic(1e-6, 0.4).unwrap();
        let (gp, qp) = analytic_partial(0.4).unwrap();
        assert!((g - gp).abs() < 1e-6 && (q - qp).abs() < 1e-6);
        for eps in [0.0, 0.5, 1.0] {
            let (g, q) = pns_partial_analytic(10.0, eps).unwrap();
            assert!(g > 0.999 && q < 5e-4);
        }
        assert!(pns_partial_analytic(0.0, 0.5).is_err());
    }

    #[test]
    fn engine_reproduces_pns_closed_form() {
        for mu in [0.01, 0.5, 3.0] {
            for eps in [0.0, 0.4, 1.0] {
                let cfg = SessionConfig {
                    source: SourceConfig::new(mu).unwrap(),
                    ..zero_noise(
                        ProtocolVariant::StandardBB84,
                        AttackStrategy::pns_partial(eps, BasisPolicy::RandomBasis).unwrap(),
                    )
                };
                let e = expected_stats(&cfg).unwrap();
                let (g, q) = pns_partial_analytic(mu, eps).unwrap();
                assert!((e.gain - g).abs() < 1e-13 && (e.qber_combined - q).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn weak_gaussian_limits() {
        for policy in [BasisPolicy::RandomBasis, BasisPolicy::FixedZ] {
            assert_eq!(analytic_weak_gaussian(0.0, policy).unwrap(), (0.5, 0.0));
        }
        let (g, q) = analytic_weak_gaussian(40.0, BasisPolicy::RandomBasis).unwrap();
        assert!((g - 0.75).abs() < 1e-15 && (q - 0.25).abs() < 1e-15);
        assert!(analytic_weak_gaussian(-1.0, BasisPolicy::FixedZ).is_err());
    }

    #[test]
    fn general_weak_matches_gaussian_and_engine() {
        let g1 = PointerShape::gaussian(1.0).unwrap();
        let obs = Observable::default();
        for s in [0.0, 0.3, 1.0, 2.5] {
            for (policy, variant) in [
                (BasisPolicy::RandomBasis, ProtocolVariant::StandardBB84),
                (BasisPolicy::FixedZ, ProtocolVariant::SimplifiedBB84),
            ] {
                let (g, q) = analytic_weak_gaussian(s, policy).unwrap();
                let (g2, q2) = analytic_weak(&g1, s, &obs, policy).unwrap();
                assert!((g - g2).abs() < 1e-14 && (q - q2).abs() < 1e-14);
                for kind in PointerKind::ALL {
                    let shape = PointerShape::with_position_std(kind, 1.0).unwrap();
                    let (g, q) = analytic_weak(&shape, s, &obs, policy).unwrap();
                    let cfg = zero_noise(variant, AttackStrategy::weak(shape, s, policy).unwrap());
                    let e = expected_stats(&cfg).unwrap();
                    assert!((e.gain - g).abs() < 1e-12, "{kind:?} s={s}");
                    assert!((e.monitored_qber() - q).abs() < 1e-12, "{kind:?} s={s}");
                }
            }
        }
    }

    #[test]
    fn rect_weak_equals_partial_at_matching_strength() {
        let l = 2.5;
        let rect = PointerShape::rect(l, 0.0).unwrap();
        for eps in [0.1, 0.5, 1.0] {
            let (g, q) = analytic_weak(&rect, eps, &Observable::default(), BasisPolicy::RandomBasis).unwrap();
            let (gp, qp) = analytic_partial(2.0 * eps / l).unwrap();
            assert!((g - gp).abs() < 1e-14 && (q - qp).abs() < 1e-14);
        }
    }

    #[test]
    fn engine_noise_composition() {
        let cfg = SessionConfig {
            variant: ProtocolVariant::SimplifiedBB84,
            noise: NoiseConfig::new(0.07, 0.07).unwrap(),
            attack: AttackStrategy::partial(0.2, BasisPolicy::FixedZ).unwrap(),
            ..Default::default()
        };
        let e = expected_stats(&cfg).unwrap();
        // Attack error 0.1 composed with an independent 0.07 flip.
        assert!((e.qber_x - (0.1 + 0.07 - 2.0 * 0.1 * 0.07)).abs() < 1e-14);
        assert!((e.qber_z - 0.07).abs() < 1e-14);
        // Eve's readout is flipped like Bob's.
        assert!((e.gain - (0.8 * 0.5 + 0.2 * 0.93)).abs() < 1e-14);
    }

    #[test]
    fn engine_handles_biased_bases() {
        let cfg = SessionConfig {
            basis_bias: 0.8,
            ..zero_noise(
                ProtocolVariant::StandardBB84,
                AttackStrategy::intercept_resend(BasisPolicy::FixedZ),
            )
        };
        let e = expected_stats(&cfg).unwrap();
        let (wz, wx) = (0.64, 0.04);
        assert!((e.qber_combined - wx * 0.5 / (wz + wx)).abs() < 1e-14);
        assert!((e.gain - (wz + wx * 0.5) / (wz + wx)).abs() < 1e-14);
    }

    #[test]
    fn fit_recovers_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x - 1.0).collect();
        let f = linear_fit(&xs, &ys);
        assert!((f.slope - 2.0).abs() < 1e-14 && (f.intercept + 1.0).abs() < 1e-14);
        assert!((f.r_squared - 1.0).abs() < 1e-14);
    }

    #[test]
    fn sweep_partial_matches_closed_form() {
        let cfg = zero_noise(
            ProtocolVariant::StandardBB84,
            AttackStrategy::partial(0.0, BasisPolicy::RandomBasis).unwrap(),
        );
        let grid = [0.0, 0.5, 1.0];
        let r = sweep_epsilon(&cfg, &grid, 20_000, 17, 2).unwrap();
        assert_eq!(r.rows.len(), 6);
        for row in r.by_source(Source::MonteCarlo) {
            let (g, q) = analytic_partial(row.eps).unwrap();
            assert!((row.g - g).abs() <= 3.0 * row.g_stderr.max(binomial_stderr(g, 10_000)));
            assert!((row.q - q).abs() <= 3.0 * binomial_stderr(q, 10_000).max(1e-12));
        }
        let analytic: Vec<f64> = r.by_source(Source::Analytic).map(|r| r.g).collect();
        assert_eq!(analytic, [0.5, 0.625, 0.75]);
    }

    #[test]
    fn sweep_without_attack_reports_environment() {
        let cfg = SessionConfig::default();
        let r = sweep_epsilon(&cfg, &[0.0, 0.5], 20_000, 3, 1).unwrap();
        for row in r.by_source(Source::MonteCarlo) {
            assert!((row.q - 0.07).abs() <= 3.0 * row.q_stderr);
        }
    }

    #[test]
    fn sweep_is_independent_of_worker_count() {
        let cfg = SessionConfig {
            attack: AttackStrategy::partial(0.0, BasisPolicy::RandomBasis).unwrap(),
            ..Default::default()
        };
        let grid = [0.1, 0.2, 0.3, 0.4, 0.5];
        let a = sweep_epsilon(&cfg, &grid, 2_000, 5, 1).unwrap();
        let b = sweep_epsilon(&cfg, &grid, 2_000, 5, 4).unwrap();
        assert_eq!(a, b);
        assert!(sweep_epsilon(&cfg, &[], 10, 5, 1).is_err());
    }

    #[test]
    fn heatmap_corners_and_order() {
        let cfg = zero_noise(
            ProtocolVariant::StandardBB84,
            AttackStrategy::pns_partial(0.0, BasisPolicy::RandomBasis).unwrap(),
        );
        let mus = [1e-6, 10.0];
        let eps = [0.0, 1.0];
        let h = heatmap_mu_epsilon(&cfg, &mus, &eps, Source::Analytic, 1, 0, 1).unwrap();
        let coords: Vec<(f64, f64)> = h.iter().map(|c| (c.mu, c.eps)).collect();
        assert_eq!(coords, [(1e-6, 0.0), (1e-6, 1.0), (10.0, 0.0), (10.0, 1.0)]);
        assert!((h[0].g - 0.5).abs() < 1e-6 && h[0].q.abs() < 1e-12);
        assert!(h[3].g > 0.999);
    }

    #[test]
    fn heatmap_interior_point_agrees() {
        let cfg = zero_noise(
            ProtocolVariant::StandardBB84,
            AttackStrategy::pns_partial(0.0, BasisPolicy::RandomBasis).unwrap(),
        );
        let mc = heatmap_mu_epsilon(&cfg, &[0.5], &[0.5], Source::MonteCarlo, 20_000, 21, 1).unwrap()[0];
        let (g, q) = pns_partial_analytic(0.5, 0.5).unwrap();
        assert!((mc.g - g).abs() <= 3.0 * mc.g_stderr);
        assert!((mc.q - q).abs() <= 3.0 * mc.q_stderr);
    }
}
