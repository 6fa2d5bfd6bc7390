//! Continuous pointer wavefunctions for probe-based measurements.
//!
//! A pointer |φ⟩ = ∫ φ(x)|x⟩ dx coupled to an observable with eigenvalues
//! λᵢ ends up displaced to φ(x − ελᵢ) on branch i. Tracing it out multiplies
//! the off-diagonal elements of the qubit state by the overlap
//!
//! ```text
//! χᵢⱼ = ∫ φ(x − ελᵢ) φ(x − ελⱼ) dx
//! ```
//!
//! Rectangular and triangular templates are rescaled to unit L² norm, so
//! their amplitudes are 1/√L on the rect support and √(3/2L³)(L − |x − x₀|)
//! on the triangle support.

use rand_distr::{Distribution, StandardNormal};
use statrs::function::erf::erfc;

use crate::error::{check_positive, Error, Result};
use crate::quadrature::{integrate_segments, DEFAULT_BUDGET, DEFAULT_TOL};
use crate::quantum::Bit;
use crate::rng::RandomStream;

/// Gaussian tails beyond this many widths are below 1e-20 of the overlap.
const GAUSSIAN_CUTOFF: f64 = 14.0;

/// Pointer family, without its dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointerKind {
    Gaussian,
    Rect,
    Triangle,
}

impl PointerKind {
    pub const ALL: [PointerKind; 3] = [PointerKind::Gaussian, PointerKind::Rect, PointerKind::Triangle];

    pub fn name(self) -> &'static str {
        match self {
            PointerKind::Gaussian => "gaussian",
            PointerKind::Rect => "rect",
            PointerKind::Triangle => "triangle",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PointerShape {
    /// φ(x) = (2πΔ²)^(−1/4) exp(−x²/4Δ²), centred at 0.
    Gaussian { width: f64 },
    /// Flat amplitude on |x − x₀| < L/2.
    Rect { width: f64, center: f64 },
    /// Amplitude ∝ L − |x − x₀| on |x − x₀| < L.
    Triangle { width: f64, center: f64 },
}

impl PointerShape {
    pub fn gaussian(width: f64) -> Result<Self> {
        Ok(PointerShape::Gaussian {
            width: check_positive("pointer.width", width)?,
        })
    }

    pub fn rect(width: f64, center: f64) -> Result<Self> {
        Ok(PointerShape::Rect {
            width: check_positive("pointer.width", width)?,
            center: finite("pointer.center", center)?,
        })
    }

    pub fn triangle(width: f64, center: f64) -> Result<Self> {
        Ok(PointerShape::Triangle {
            width: check_positive("pointer.width", width)?,
            center: finite("pointer.center", center)?,
        })
    }

    /// Pointer of the given family centred at 0 whose position distribution
    /// has standard deviation `spread`. Shapes built this way can be compared
    /// at the same ε/Δ.
    pub fn with_position_std(kind: PointerKind, spread: f64) -> Result<Self> {
        let spread = check_positive("pointer.delta", spread)?;
        match kind {
            PointerKind::Gaussian => Self::gaussian(spread),
            PointerKind::Rect => Self::rect(12f64.sqrt() * spread, 0.0),
            PointerKind::Triangle => Self::triangle(10f64.sqrt() * spread, 0.0),
        }
    }

    pub fn kind(&self) -> PointerKind {
        match self {
            PointerShape::Gaussian { .. } => PointerKind::Gaussian,
            PointerShape::Rect { .. } => PointerKind::Rect,
            PointerShape::Triangle { .. } => PointerKind::Triangle,
        }
    }

    pub fn width(&self) -> f64 {
        match *self {
            PointerShape::Gaussian { width }
            | PointerShape::Rect { width, .. }
            | PointerShape::Triangle { width, .. } => width,
        }
    }

    pub fn center(&self) -> f64 {
        match *self {
            PointerShape::Gaussian { .. } => 0.0,
            PointerShape::Rect { center, .. } | PointerShape::Triangle { center, .. } => center,
        }
    }

    pub fn name(&self) -> &'static str {
        self.kind().name()
    }

    /// Standard deviation of the position distribution |φ(x)|².
    pub fn position_std(&self) -> f64 {
        match *self {
            PointerShape::Gaussian { width } => width,
            PointerShape::Rect { width, .. } => width / 12f64.sqrt(),
            PointerShape::Triangle { width, .. } => width / 10f64.sqrt(),
        }
    }

    /// Unit-L²-norm amplitude at `x`.
    pub fn amplitude(&self, x: f64) -> f64 {
        match *self {
            PointerShape::Gaussian { width } => {
                (2.0 * std::f64::consts::PI * width * width).powf(-0.25) * (-x * x / (4.0 * width * width)).exp()
            }
            PointerShape::Rect { width, center } => {
                if (x - center).abs() < 0.5 * width {
                    width.sqrt().recip()
                } else {
                    0.0
                }
            }
            PointerShape::Triangle { width, center } => {
                let d = (x - center).abs();
                if d < width {
                    (1.5 / width.powi(3)).sqrt() * (width - d)
                } else {
                    0.0
                }
            }
        }
    }

    /// Points where the amplitude shifted by `shift` has a kink, jump or
    /// effective support edge.
    pub fn breakpoints(&self, shift: f64) -> Vec<f64> {
        match *self {
            PointerShape::Gaussian { width } => {
                vec![shift - GAUSSIAN_CUTOFF * width, shift, shift + GAUSSIAN_CUTOFF * width]
            }
            PointerShape::Rect { width, center } => {
                vec![center + shift - 0.5 * width, center + shift + 0.5 * width]
            }
            PointerShape::Triangle { width, center } => {
                vec![center + shift - width, center + shift, center + shift + width]
            }
        }
    }

    /// P(x ≥ threshold) when x is distributed as |φ(x − shift)|².
    pub fn prob_above(&self, threshold: f64, shift: f64) -> f64 {
        match *self {
            PointerShape::Gaussian { width } => 0.5 * erfc((threshold - shift) / (width * std::f64::consts::SQRT_2)),
            PointerShape::Rect { width, center } => {
                ((center + shift + 0.5 * width - threshold) / width).clamp(0.0, 1.0)
            }
            PointerShape::Triangle { width, center } => {
                let u = ((threshold - center - shift) / width).clamp(-1.0, 1.0);
                if u <= 0.0 {
                    1.0 - 0.5 * (1.0 + u).powi(3)
                } else {
                    0.5 * (1.0 - u).powi(3)
                }
            }
        }
    }

    /// Draws a pointer position from |φ(x − shift)|².
    pub fn sample_position(&self, shift: f64, rng: &mut RandomStream) -> f64 {
        match *self {
            PointerShape::Gaussian { width } => {
                let z: f64 = StandardNormal.sample(rng);
                shift + width * z
            }
            PointerShape::Rect { width, center } => center + shift + width * (rng.uniform() - 0.5),
            PointerShape::Triangle { width, center } => {
                // |x − x₀ − shift| / L has density 3(1 − u)² on [0, 1].
                let u = rng.uniform();
                let dist = width * (1.0 - (1.0 - u).cbrt());
                let sign = if rng.fair_bit() == 0 { 1.0 } else { -1.0 };
                center + shift + sign * dist
            }
        }
    }
}

fn finite(name: &'static str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::InvalidParameter {
            name,
            value: v,
            reason: "must be finite",
        })
    }
}

/// Eigenvalues (λ₁, λ₂) attached to bit 0 and bit 1 of the measured basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observable {
    pub eigenvalues: (f64, f64),
}

impl Default for Observable {
    fn default() -> Self {
        Observable {
            eigenvalues: (1.0, -1.0),
        }
    }
}

impl Observable {
    pub fn new(lambda1: f64, lambda2: f64) -> Result<Self> {
        let l1 = finite("pointer.lambda1", lambda1)?;
        let l2 = finite("pointer.lambda2", lambda2)?;
        if l1 == l2 {
            return Err(Error::InvalidParameter {
                name: "pointer.lambda2",
                value: l2,
                reason: "eigenvalues must differ",
            });
        }
        Ok(Observable { eigenvalues: (l1, l2) })
    }

    pub fn eigenvalue(&self, bit: Bit) -> f64 {
        if bit == 0 {
            self.eigenvalues.0
        } else {
            self.eigenvalues.1
        }
    }

    /// Decodes a pointer reading to the branch whose displaced centre is
    /// nearer. Readings exactly at the midpoint decode to bit 0.
    pub fn decode(&self, shape: &PointerShape, eps: f64, x: f64) -> Bit {
        let (l1, l2) = self.eigenvalues;
        let mid = shape.center() + 0.5 * eps * (l1 + l2);
        let zero_side = if l1 > l2 { x >= mid } else { x <= mid };
        if zero_side {
            0
        } else {
            1
        }
    }

    /// Probability that a reading on branch `branch` decodes to `bit`.
    pub fn decode_probability(&self, shape: &PointerShape, eps: f64, branch: Bit, bit: Bit) -> f64 {
        let (l1, l2) = self.eigenvalues;
        let mid = shape.center() + 0.5 * eps * (l1 + l2);
        let above = shape.prob_above(mid, eps * self.eigenvalue(branch));
        let p_zero = if l1 > l2 { above } else { 1.0 - above };
        if bit == 0 {
            p_zero
        } else {
            1.0 - p_zero
        }
    }
}

/// χᵢⱼ by numerical quadrature of the displaced-amplitude product.
pub fn overlap_chi_quadrature(shape: &PointerShape, eps: f64, obs: &Observable, i: Bit, j: Bit) -> Result<f64> {
    let (si, sj) = (eps * obs.eigenvalue(i), eps * obs.eigenvalue(j));
    let mut pts = shape.breakpoints(si);
    pts.extend(shape.breakpoints(sj));
    let v = integrate_segments(
        |x| shape.amplitude(x - si) * shape.amplitude(x - sj),
        &pts,
        DEFAULT_TOL,
        DEFAULT_BUDGET,
    )?;
    Ok(v.clamp(-1.0, 1.0))
}

/// Response function χᵢⱼ = ⟨φ(x − ελᵢ)|φ(x − ελⱼ)⟩.
///
/// Closed forms for the Gaussian and rectangular pointers, quadrature for the
/// triangle.
pub fn overlap_chi(shape: &PointerShape, eps: f64, obs: &Observable, i: Bit, j: Bit) -> Result<f64> {
    if eps < 0.0 || !eps.is_finite() {
        return Err(Error::InvalidParameter {
            name: "attack.eps",
            value: eps,
            reason: "pointer displacement must be finite and non-negative",
        });
    }
    if i == j {
        return Ok(1.0);
    }
    let d = eps * (obs.eigenvalue(i) - obs.eigenvalue(j)).abs();
    match *shape {
        PointerShape::Gaussian { width } => Ok((-d * d / (8.0 * width * width)).exp()),
        PointerShape::Rect { width, .. } => Ok((1.0 - d / width).max(0.0)),
        PointerShape::Triangle { .. } => overlap_chi_quadrature(shape, eps, obs, i, j),
    }
}

/// Samples Eve's pointer reading on branch `lambda` and decodes it against
/// the pointer centre: bit 0 iff x ≥ x₀.
pub fn sample_outcome(shape: &PointerShape, eps: f64, lambda: f64, rng: &mut RandomStream) -> (f64, Bit) {
    let x = shape.sample_position(eps * lambda, rng);
    let bit = if x >= shape.center() { 0 } else { 1 };
    (x, bit)
}

/// Amplitude at `x`.
pub fn amplitude(shape: &PointerShape, x: f64) -> f64 {
    shape.amplitude(x)
}
