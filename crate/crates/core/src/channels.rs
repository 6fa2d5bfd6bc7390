//! Eavesdropping channels acting on a single qubit.

use crate::error::{check_range, Result};
use crate::pointer::{overlap_chi, Observable, PointerShape};
use crate::quantum::{
    apply_kraus, dm_from_state, hadamard, projective_measure, Basis, BasisState, Bit, DensityMatrix, Matrix2, Projector,
};
use crate::rng::RandomStream;

/// Interaction strength ε ∈ [0, 1], shared by the monitoring (δ) and partial
/// (γ) channels.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct ChannelStrength(f64);

impl ChannelStrength {
    pub fn new(eps: f64) -> Result<Self> {
        check_range("attack.eps", eps, 0.0, 1.0).map(ChannelStrength)
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// M(ρ) = (1 − δ)ρ + δ Σᵢ Aᵢ ρ Aᵢ† with Aᵢ = Pᵢ/√2 over the four BB84
/// projectors, applied through the generic Kraus machinery.
pub fn monitoring_channel(rho: &DensityMatrix, delta: f64) -> Result<DensityMatrix> {
    let delta = ChannelStrength::new(delta)?.value();
    let mut ops = Vec::with_capacity(5);
    ops.push(Matrix2::identity().scale((1.0 - delta).sqrt()));
    for p in Projector::bb84_set() {
        ops.push(p.matrix.scale((0.5 * delta).sqrt()));
    }
    apply_kraus(rho, &ops)
}

/// P(ρ) = (1 − γ)ρ + Σᵢ (γ/2) Pᵢ ρ Pᵢ, evaluated directly as an affine map.
pub fn partial_channel(rho: &DensityMatrix, gamma: f64) -> Result<DensityMatrix> {
    let gamma = ChannelStrength::new(gamma)?.value();
    let projected = Projector::bb84_set()
        .iter()
        .fold(Matrix2::ZERO, |acc, p| acc + p.matrix * *rho.matrix() * p.matrix);
    let out = rho.matrix().scale(1.0 - gamma) + projected.scale(0.5 * gamma);
    Ok(DensityMatrix::from_channel_output(out))
}

/// Exact probe-based weak measurement of the Z-basis observable: the
/// diagonal is kept and the coherences are multiplied by χ₀₁.
///
/// `eps` is the pointer displacement and is not limited to [0, 1].
pub fn weak_channel_exact(
    rho: &DensityMatrix,
    shape: &PointerShape,
    eps: f64,
    obs: &Observable,
) -> Result<DensityMatrix> {
    let chi01 = overlap_chi(shape, eps, obs, 0, 1)?;
    let chi10 = overlap_chi(shape, eps, obs, 1, 0)?;
    let mut m = *rho.matrix();
    m.0[0][1] *= chi01;
    m.0[1][0] *= chi10;
    Ok(DensityMatrix::from_channel_output(m))
}

/// Weak measurement of the observable diagonal in `basis`.
pub fn weak_channel_in_basis(
    rho: &DensityMatrix,
    basis: Basis,
    shape: &PointerShape,
    eps: f64,
    obs: &Observable,
) -> Result<DensityMatrix> {
    match basis {
        Basis::Z => weak_channel_exact(rho, shape, eps, obs),
        Basis::X => {
            let h = hadamard();
            let rotated = DensityMatrix::from_channel_output(rho.matrix().conjugate_by(&h));
            let out = weak_channel_exact(&rotated, shape, eps, obs)?;
            Ok(DensityMatrix::from_channel_output(out.matrix().conjugate_by(&h)))
        }
    }
}

/// Projective measurement in `eve_basis` followed by re-preparation of the
/// observed eigenstate.
pub fn intercept_resend(
    state_in: &DensityMatrix,
    eve_basis: Basis,
    rng: &mut RandomStream,
) -> Result<(Bit, DensityMatrix)> {
    let (bit, _) = projective_measure(state_in, eve_basis, rng)?;
    Ok((bit, dm_from_state(BasisState::encode(eve_basis, bit))))
}

/// Complete dephasing in `basis`: the average of the re-prepared states.
pub fn dephase(rho: &DensityMatrix, basis: Basis) -> DensityMatrix {
    let out = [0, 1].iter().fold(Matrix2::ZERO, |acc, &b| {
        let p = Projector::new(basis, b);
        acc + p.matrix * *rho.matrix() * p.matrix
    });
    DensityMatrix::from_channel_output(out)
}
