//! Monte-Carlo sessions against exact expectations.

use eavesim::analytics::{analytic_partial_fixed_z, expected_stats, linear_fit, sweep_epsilon, Source};
use eavesim::attacks::{
    injected_x_qber, run_noise_injection_scenario, AttackStrategy, BasisPolicy, NoiseInjection, Schedule,
};
use eavesim::pointer::{PointerKind, PointerShape};
use eavesim::protocol::{binomial_stderr, run_session, NoiseConfig, ProtocolVariant, SessionConfig, SessionStats};
use eavesim::source::SourceConfig;
use eavesim::RandomStream;

fn session(cfg: &SessionConfig, seed: u64) -> SessionStats {
    run_session(cfg, &RandomStream::new(seed)).unwrap()
}

fn assert_close(observed: f64, expected: f64, n: usize, what: &str) {
    let band = 3.0 * binomial_stderr(expected, n);
    assert!(
        (observed - expected).abs() <= band,
        "{what}: {observed} vs {expected} (band {band})"
    );
}

fn standard(attack: AttackStrategy, n: usize) -> SessionConfig {
    SessionConfig {
        noise: NoiseConfig::none(),
        attack,
        n_pulses: n,
        ..Default::default()
    }
}

#[test]
fn every_strategy_matches_its_expectation() {
    let gaussian = PointerShape::gaussian(1.0).unwrap();
    let triangle = PointerShape::with_position_std(PointerKind::Triangle, 1.0).unwrap();
    let strategies = [
        AttackStrategy::none(),
        AttackStrategy::partial(0.6, BasisPolicy::RandomBasis).unwrap(),
        AttackStrategy::partial(0.6, BasisPolicy::FixedZ).unwrap(),
        AttackStrategy::intercept_resend(BasisPolicy::RandomBasis),
        AttackStrategy::weak(gaussian, 0.8, BasisPolicy::RandomBasis).unwrap(),
        AttackStrategy::weak(triangle, 1.5, BasisPolicy::FixedZ).unwrap(),
        AttackStrategy::pns_partial(0.5, BasisPolicy::RandomBasis).unwrap(),
    ];
    for (k, attack) in strategies.into_iter().enumerate() {
        for variant in [ProtocolVariant::StandardBB84, ProtocolVariant::SimplifiedBB84] {
            let cfg = SessionConfig {
                variant,
                source: SourceConfig::new(0.5).unwrap(),
                noise: NoiseConfig::new(0.03, 0.05).unwrap(),
                attack,
                n_pulses: 20_000,
                ..Default::default()
            };
            let s = session(&cfg, 100 + k as u64);
            let e = expected_stats(&cfg).unwrap();
            let what = format!("{} {:?}", attack.kind.name(), variant);
            assert_close(s.gain, e.gain, s.sifted_len, &what);
            assert_close(s.qber_z, e.qber_z, s.z_len, &what);
            assert_close(s.qber_x, e.qber_x, s.x_len, &what);
        }
    }
}

#[test]
fn full_partial_equals_intercept_resend() {
    let a = session(
        &standard(AttackStrategy::partial(1.0, BasisPolicy::RandomBasis).unwrap(), 20_000),
        1,
    );
    let b = session(
        &standard(AttackStrategy::intercept_resend(BasisPolicy::RandomBasis), 20_000),
        2,
    );
    let n = a.sifted_len.min(b.sifted_len);
    // Difference of two independent estimates.
    let band = |p: f64| 3.0 * (2.0f64).sqrt() * binomial_stderr(p, n);
    assert!((a.gain - b.gain).abs() <= band(0.75));
    assert!((a.qber_combined - b.qber_combined).abs() <= band(0.25));
}

#[test]
fn pns_at_low_mu_degenerates_to_partial() {
    let eps = 0.6;
    let pns = SessionConfig {
        source: SourceConfig::new(1e-3).unwrap(),
        ..standard(
            AttackStrategy::pns_partial(eps, BasisPolicy::RandomBasis).unwrap(),
            20_000,
        )
    };
    let s = session(&pns, 3);
    let partial = expected_stats(&standard(
        AttackStrategy::partial(eps, BasisPolicy::RandomBasis).unwrap(),
        1,
    ))
    .unwrap();
    assert_close(s.gain, partial.gain, s.sifted_len, "gain");
    assert_close(s.qber_combined, partial.qber_combined, s.sifted_len, "qber");
}

#[test]
fn duty_cycle_matches_bernoulli() {
    for eps in [0.25, 0.7] {
        let bernoulli = standard(AttackStrategy::partial(eps, BasisPolicy::RandomBasis).unwrap(), 20_000);
        let duty = SessionConfig {
            attack: bernoulli.attack.with_schedule(Schedule::DutyCycle),
            ..bernoulli.clone()
        };
        let e = expected_stats(&bernoulli).unwrap();
        let s = session(&duty, 4);
        assert_close(s.gain, e.gain, s.sifted_len, "duty gain");
        assert_close(s.qber_combined, e.qber_combined, s.sifted_len, "duty qber");
    }
}

#[test]
fn injection_scenario_rows() {
    let base = SessionConfig {
        variant: ProtocolVariant::SimplifiedBB84,
        attack: AttackStrategy::partial(0.0, BasisPolicy::FixedZ).unwrap(),
        n_pulses: 40_000,
        ..Default::default()
    };
    let q_env = base.noise.q_env_x;
    let grid = [0.0, 0.1, 0.2];

    let rows = run_noise_injection_scenario(&base, &NoiseInjection::from_steps(0).unwrap(), &grid, 9).unwrap();
    assert_eq!(rows.len(), 3);
    assert_close(rows[0].live_qber_x, q_env, rows[0].live_n, "eps 0 live");
    // The attack's ε/2 error composes with the environmental flip.
    let (_, q_attack) = analytic_partial_fixed_z(0.2).unwrap();
    let live = q_attack + q_env - 2.0 * q_attack * q_env;
    assert_close(rows[2].live_qber_x, live, rows[2].live_n, "eps 0.2 live");

    let inj = NoiseInjection::from_steps(5).unwrap();
    let rows = run_noise_injection_scenario(&base, &inj, &grid, 9).unwrap();
    assert_close(
        rows[0].calibrated_qber_x,
        q_env + injected_x_qber(&inj),
        rows[0].calibrated_n,
        "calibration",
    );
    assert!(rows.iter().all(|r| r.calibrated_qber_x == rows[0].calibrated_qber_x));
}

#[test]
fn sweeps_are_monotone_and_linear() {
    let grid: Vec<f64> = (0..9).map(|k| k as f64 / 8.0).collect();
    let cfg = standard(AttackStrategy::partial(0.0, BasisPolicy::RandomBasis).unwrap(), 20_000);
    let r = sweep_epsilon(&cfg, &grid, 20_000, 11, 0).unwrap();
    let mc: Vec<_> = r.by_source(Source::MonteCarlo).collect();
    let q: Vec<f64> = mc.iter().map(|r| r.q).collect();
    let g: Vec<f64> = mc.iter().map(|r| r.g).collect();
    assert!(linear_fit(&grid, &q).r_squared > 0.99);
    assert!(linear_fit(&grid, &g).r_squared > 0.99);
    for row in r.by_source(Source::Analytic).collect::<Vec<_>>().windows(2) {
        assert!(row[1].q >= row[0].q && row[1].g >= row[0].g);
    }
}

#[test]
fn weak_gaussian_sweep_is_monotone() {
    let grid = [0.0, 0.5, 1.0, 1.5, 2.0, 3.0];
    let cfg = standard(
        AttackStrategy::weak(PointerShape::gaussian(1.0).unwrap(), 0.0, BasisPolicy::RandomBasis).unwrap(),
        100_000,
    );
    let r = sweep_epsilon(&cfg, &grid, 100_000, 12, 0).unwrap();
    let mc: Vec<_> = r.by_source(Source::MonteCarlo).collect();
    let exact: Vec<_> = r.by_source(Source::Analytic).collect();
    for w in exact.windows(2) {
        assert!(w[1].q >= w[0].q && w[1].g >= w[0].g);
    }
    // Adjacent Monte-Carlo points can only invert within their noise.
    for w in mc.windows(2) {
        assert!(w[1].q >= w[0].q - 3.0 * (w[0].q_stderr + w[1].q_stderr));
        assert!(w[1].g >= w[0].g - 3.0 * (w[0].g_stderr + w[1].g_stderr));
    }
    for (m, e) in mc.iter().zip(&exact) {
        assert!((m.g - e.g).abs() <= 3.0 * binomial_stderr(e.g, 50_000).max(m.g_stderr));
    }
}

#[test]
fn environmental_noise_is_additive_without_attack() {
    let cfg = SessionConfig {
        noise: NoiseConfig::new(0.05, 0.09).unwrap(),
        n_pulses: 40_000,
        ..Default::default()
    };
    let s = session(&cfg, 13);
    assert_close(s.qber_z, 0.05, s.z_len, "z");
    assert_close(s.qber_x, 0.09, s.x_len, "x");
}

#[test]
fn qber_stays_within_bounds() {
    for eps in [0.0, 0.5, 1.0] {
        let s = session(
            &standard(AttackStrategy::partial(eps, BasisPolicy::RandomBasis).unwrap(), 10_000),
            14,
        );
        assert!(s.qber_combined <= 0.25 + 3.0 * binomial_stderr(0.25, s.sifted_len));
    }
    let erased = SessionConfig {
        noise: NoiseConfig::new(0.5, 0.5).unwrap(),
        n_pulses: 10_000,
        ..Default::default()
    };
    assert!(session(&erased, 15).qber_combined <= 0.5 + 3.0 * binomial_stderr(0.5, 5_000));
}
