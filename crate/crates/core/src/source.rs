//! Weak coherent source statistics and photon-number splitting.

use rand_distr::{Distribution, Poisson};

use crate::error::{check_positive, Result};
use crate::rng::RandomStream;

pub const DEFAULT_MU: f64 = 0.1;

/// Mean photon number per pulse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceConfig {
    mu: f64,
}

impl Default for SourceConfig {
    fn default() -> Self {
        SourceConfig { mu: DEFAULT_MU }
    }
}

impl SourceConfig {
    pub fn new(mu: f64) -> Result<Self> {
        Ok(SourceConfig {
            mu: check_positive("source.mu", mu)?,
        })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn p_vacuum(&self) -> f64 {
        (-self.mu).exp()
    }

    pub fn p_single(&self) -> f64 {
        poisson_pmf(1, self.mu)
    }

    /// P(n > 0), evaluated without cancellation for small μ.
    pub fn p_nonvacuum(&self) -> f64 {
        -(-self.mu).exp_m1()
    }

    /// P(n > 1).
    pub fn p_multi(&self) -> f64 {
        // 1 − e^{−μ}(1 + μ); the series form avoids cancellation at small μ.
        if self.mu < 1e-2 {
            let mut term = self.mu * self.mu / 2.0;
            let mut sum = 0.0;
            for k in 3..40 {
                sum += term;
                term *= self.mu / k as f64;
            }
            sum * (-self.mu).exp()
        } else {
            1.0 - (-self.mu).exp() * (1.0 + self.mu)
        }
    }
}

/// e^{−μ} μⁿ / n!, evaluated in log space.
pub fn poisson_pmf(n: u64, mu: f64) -> f64 {
    if n == 0 {
        return (-mu).exp();
    }
    let ln_fact: f64 = (2..=n).map(|k| (k as f64).ln()).sum();
    (n as f64 * mu.ln() - mu - ln_fact).exp()
}

/// Poisson(μ) photon number.
pub fn sample_photon_number(mu: f64, rng: &mut RandomStream) -> u64 {
    let dist = Poisson::new(mu).expect("mu validated by SourceConfig");
    dist.sample(rng) as u64
}

/// Photon number conditioned on n ≥ 1, by inversion of the truncated
/// Poisson CDF. One uniform draw per pulse regardless of μ.
pub fn sample_nonvacuum_photon_number(source: &SourceConfig, rng: &mut RandomStream) -> u64 {
    let mu = source.mu();
    let u = rng.uniform() * source.p_nonvacuum();
    let mut n = 1u64;
    let mut term = source.p_single();
    let mut cdf = term;
    while u >= cdf {
        n += 1;
        term *= mu / n as f64;
        if term == 0.0 && n as f64 > mu {
            break;
        }
        cdf += term;
    }
    n
}

/// Splits a pulse: Eve keeps one photon of a multi-photon pulse and forwards
/// the rest. Single-photon and vacuum pulses are forwarded whole.
pub fn pns_split(n: u64) -> (u64, u64) {
    if n >= 2 {
        (1, n - 1)
    } else {
        (0, n)
    }
}
