//! Single-qubit states, projectors and measurements in the time-bin encoding.
//!
//! The computational basis is {|e⟩, |l⟩} (early / late arrival). The phase
//! basis is |±⟩ = (|e⟩ ± |l⟩)/√2. Bit 0 is carried by |e⟩ and |+⟩, bit 1 by
//! |l⟩ and |−⟩.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::rng::RandomStream;

pub type ComplexAmplitude = Complex64;

/// A classical bit, always 0 or 1.
pub type Bit = u8;

/// Tolerance for Hermiticity, unit trace and positivity.
pub const STRUCTURE_TOL: f64 = 1e-12;
/// Tolerance for the Kraus completeness relation.
pub const COMPLETENESS_TOL: f64 = 1e-10;

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Dense 2×2 complex matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Matrix2(pub [[Complex64; 2]; 2]);

impl Matrix2 {
    pub const ZERO: Matrix2 = Matrix2([[Complex64::new(0.0, 0.0); 2]; 2]);

    pub fn identity() -> Self {
        Self::real([[1.0, 0.0], [0.0, 1.0]])
    }

    pub fn real(m: [[f64; 2]; 2]) -> Self {
        Matrix2([[c(m[0][0]), c(m[0][1])], [c(m[1][0]), c(m[1][1])]])
    }

    /// Outer product |u⟩⟨v|.
    pub fn outer(u: [Complex64; 2], v: [Complex64; 2]) -> Self {
        Matrix2(u.map(|ui| v.map(|vj| ui * vj.conj())))
    }

    pub fn adjoint(&self) -> Self {
        let m = &self.0;
        Matrix2([[m[0][0].conj(), m[1][0].conj()], [m[0][1].conj(), m[1][1].conj()]])
    }

    pub fn trace(&self) -> Complex64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = *self;
        out.0.iter_mut().flatten().for_each(|z| *z *= s);
        out
    }

    /// Largest element-wise modulus of the difference.
    pub fn max_abs_diff(&self, other: &Matrix2) -> f64 {
        (*self - *other)
            .0
            .iter()
            .flatten()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// Sandwich `a · self · a†`.
    pub fn conjugate_by(&self, a: &Matrix2) -> Self {
        *a * *self * a.adjoint()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

impl Add for Matrix2 {
    type Output = Matrix2;
    fn add(self, rhs: Matrix2) -> Matrix2 {
        let mut out = self;
        for i in 0..2 {
            for j in 0..2 {
                out.0[i][j] += rhs.0[i][j];
            }
        }
        out
    }
}

impl Sub for Matrix2 {
    type Output = Matrix2;
    fn sub(self, rhs: Matrix2) -> Matrix2 {
        self + rhs.scale(-1.0)
    }
}

impl Mul for Matrix2 {
    type Output = Matrix2;
    fn mul(self, rhs: Matrix2) -> Matrix2 {
        let (a, b) = (&self.0, &rhs.0);
        Matrix2(a.map(|row| [0, 1].map(|j| row[0] * b[0][j] + row[1] * b[1][j])))
    }
}

/// Measurement / preparation basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Basis {
    /// Time basis {|e⟩, |l⟩}.
    Z,
    /// Phase basis {|+⟩, |−⟩}.
    X,
}

impl Basis {
    pub fn other(self) -> Basis {
        match self {
            Basis::Z => Basis::X,
            Basis::X => Basis::Z,
        }
    }
}

/// The four BB84 kets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BasisState {
    Early,
    Late,
    Plus,
    Minus,
}

impl BasisState {
    pub const ALL: [BasisState; 4] = [BasisState::Early, BasisState::Late, BasisState::Plus, BasisState::Minus];

    pub fn encode(basis: Basis, bit: Bit) -> Self {
        match (basis, bit) {
            (Basis::Z, 0) => BasisState::Early,
            (Basis::Z, _) => BasisState::Late,
            (Basis::X, 0) => BasisState::Plus,
            (Basis::X, _) => BasisState::Minus,
        }
    }

    pub fn basis(self) -> Basis {
        match self {
            BasisState::Early | BasisState::Late => Basis::Z,
            BasisState::Plus | BasisState::Minus => Basis::X,
        }
    }

    pub fn bit(self) -> Bit {
        match self {
            BasisState::Early | BasisState::Plus => 0,
            BasisState::Late | BasisState::Minus => 1,
        }
    }

    /// Amplitudes in the {|e⟩, |l⟩} basis.
    pub fn ket(self) -> [Complex64; 2] {
        match self {
            BasisState::Early => [c(1.0), c(0.0)],
            BasisState::Late => [c(0.0), c(1.0)],
            BasisState::Plus => [c(FRAC_1_SQRT_2), c(FRAC_1_SQRT_2)],
            BasisState::Minus => [c(FRAC_1_SQRT_2), c(-FRAC_1_SQRT_2)],
        }
    }
}

/// Rank-one projector onto a BB84 ket.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projector {
    pub matrix: Matrix2,
    pub label: (Basis, Bit),
}

impl Projector {
    pub fn new(basis: Basis, bit: Bit) -> Self {
        let ket = BasisState::encode(basis, bit).ket();
        Projector {
            matrix: Matrix2::outer(ket, ket),
            label: (basis, bit),
        }
    }

    /// {P_e, P_l, P_+, P_−}.
    pub fn bb84_set() -> [Projector; 4] {
        [
            Projector::new(Basis::Z, 0),
            Projector::new(Basis::Z, 1),
            Projector::new(Basis::X, 0),
            Projector::new(Basis::X, 1),
        ]
    }
}

/// A valid qubit density matrix: Hermitian, unit trace, positive semidefinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix(Matrix2);

impl DensityMatrix {
    /// Validates `m` against the density-matrix invariants.
    pub fn new(m: Matrix2) -> Result<Self> {
        if !m.is_finite() {
            return Err(Error::InvalidDensityMatrix("non-finite entry".into()));
        }
        if m.max_abs_diff(&m.adjoint()) > STRUCTURE_TOL {
            return Err(Error::InvalidDensityMatrix("not Hermitian".into()));
        }
        let tr = m.trace();
        if (tr.re - 1.0).abs() > STRUCTURE_TOL || tr.im.abs() > STRUCTURE_TOL {
            return Err(Error::InvalidDensityMatrix(format!("trace {tr}")));
        }
        let dm = DensityMatrix(m);
        let (lo, _) = dm.eigenvalues();
        if lo < -STRUCTURE_TOL {
            return Err(Error::InvalidDensityMatrix(format!("negative eigenvalue {lo:e}")));
        }
        Ok(dm)
    }

    pub fn from_state(s: BasisState) -> Self {
        let ket = s.ket();
        DensityMatrix(Matrix2::outer(ket, ket))
    }

    pub fn maximally_mixed() -> Self {
        DensityMatrix(Matrix2::real([[0.5, 0.0], [0.0, 0.5]]))
    }

    /// ρ = (I + r·σ)/2 for a Bloch vector with |r| ≤ 1.
    pub fn from_bloch(r: [f64; 3]) -> Result<Self> {
        let [x, y, z] = r;
        Self::new(Matrix2([
            [c(0.5 * (1.0 + z)), Complex64::new(0.5 * x, -0.5 * y)],
            [Complex64::new(0.5 * x, 0.5 * y), c(0.5 * (1.0 - z))],
        ]))
    }

    /// Uniform draw from the Bloch ball (mixed states included).
    pub fn random(rng: &mut RandomStream) -> Self {
        loop {
            let r = [
                2.0 * rng.uniform() - 1.0,
                2.0 * rng.uniform() - 1.0,
                2.0 * rng.uniform() - 1.0,
            ];
            if r.iter().map(|v| v * v).sum::<f64>() <= 1.0 {
                if let Ok(rho) = Self::from_bloch(r) {
                    return rho;
                }
            }
        }
    }

    pub fn bloch(&self) -> [f64; 3] {
        let m = &self.0 .0;
        [2.0 * m[1][0].re, 2.0 * m[1][0].im, (m[0][0] - m[1][1]).re]
    }

    pub fn matrix(&self) -> &Matrix2 {
        &self.0
    }

    pub fn element(&self, i: usize, j: usize) -> Complex64 {
        self.0 .0[i][j]
    }

    /// Ascending eigenvalues.
    pub fn eigenvalues(&self) -> (f64, f64) {
        hermitian_eigenvalues(&self.0)
    }

    /// Born probability trace(P ρ).
    pub fn probability(&self, p: &Projector) -> f64 {
        (p.matrix * self.0).trace().re
    }

    /// Probability of reading `bit` when measuring in `basis`.
    pub fn outcome_probability(&self, basis: Basis, bit: Bit) -> f64 {
        self.probability(&Projector::new(basis, bit)).clamp(0.0, 1.0)
    }

    /// Trusted constructor for channel outputs that are valid by construction
    /// up to rounding. Re-symmetrises and renormalises.
    pub(crate) fn from_channel_output(m: Matrix2) -> Self {
        let herm = (m + m.adjoint()).scale(0.5);
        let tr = herm.trace().re;
        DensityMatrix(herm.scale(1.0 / tr))
    }
}

fn hermitian_eigenvalues(m: &Matrix2) -> (f64, f64) {
    let a = m.0[0][0].re;
    let d = m.0[1][1].re;
    let b = m.0[0][1];
    let mean = 0.5 * (a + d);
    let radius = (0.25 * (a - d) * (a - d) + b.norm_sqr()).sqrt();
    (mean - radius, mean + radius)
}

/// |s⟩⟨s|.
pub fn dm_from_state(s: BasisState) -> DensityMatrix {
    DensityMatrix::from_state(s)
}

/// Σᵢ Aᵢ ρ Aᵢ†, after checking Σᵢ Aᵢ†Aᵢ = I.
pub fn apply_kraus(rho: &DensityMatrix, ops: &[Matrix2]) -> Result<DensityMatrix> {
    let completeness = ops.iter().fold(Matrix2::ZERO, |acc, a| acc + a.adjoint() * *a);
    let deviation = completeness.max_abs_diff(&Matrix2::identity());
    if deviation > COMPLETENESS_TOL {
        return Err(Error::KrausNotTracePreserving { deviation });
    }
    let out = ops
        .iter()
        .fold(Matrix2::ZERO, |acc, a| acc + rho.matrix().conjugate_by(a));
    Ok(DensityMatrix::from_channel_output(out))
}

/// Born-rule measurement in `basis`. Returns the outcome and the post-measurement
/// state P_b ρ P_b / trace(P_b ρ).
pub fn projective_measure(rho: &DensityMatrix, basis: Basis, rng: &mut RandomStream) -> Result<(Bit, DensityMatrix)> {
    let p0 = rho.outcome_probability(basis, 0);
    let bit: Bit = if rng.uniform() < p0 { 0 } else { 1 };
    let proj = Projector::new(basis, bit);
    let prob = rho.probability(&proj);
    if prob < 1e-14 {
        return Err(Error::DegenerateOutcome { probability: prob });
    }
    let post = rho.matrix().conjugate_by(&proj.matrix).scale(1.0 / prob);
    Ok((bit, DensityMatrix::from_channel_output(post)))
}

/// ½ Σ |eigenvalues(a − b)|.
pub fn trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> f64 {
    let (lo, hi) = hermitian_eigenvalues(&(*a.matrix() - *b.matrix()));
    (0.5 * (lo.abs() + hi.abs())).min(1.0)
}

/// Unitary mapping the Z basis onto the X basis (Hadamard).
pub(crate) fn hadamard() -> Matrix2 {
    Matrix2::real([[FRAC_1_SQRT_2, FRAC_1_SQRT_2], [FRAC_1_SQRT_2, -FRAC_1_SQRT_2]])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &Matrix2, b: [[f64; 2]; 2], tol: f64) -> bool {
        a.max_abs_diff(&Matrix2::real(b)) < tol
    }

    #[test]
    fn basis_states_as_density_matrices() {
        assert!(close(
            dm_from_state(BasisState::Early).matrix(),
            [[1.0, 0.0], [0.0, 0.0]],
            1e-15
        ));
        assert!(close(
            dm_from_state(BasisState::Plus).matrix(),
            [[0.5, 0.5], [0.5, 0.5]],
            1e-15
        ));
        assert!(close(
            dm_from_state(BasisState::Minus).matrix(),
            [[0.5, -0.5], [-0.5, 0.5]],
            1e-15
        ));
    }

    #[test]
    fn mutually_unbiased_overlaps() {
        for s in BasisState::ALL {
            for t in BasisState::ALL {
                let (u, v) = (s.ket(), t.ket());
                let overlap = (u[0].conj() * v[0] + u[1].conj() * v[1]).norm_sqr();
                let expected = if s == t {
                    1.0
                } else if s.basis() == t.basis() {
                    0.0
                } else {
                    0.5
                };
                assert!((overlap - expected).abs() < 1e-15, "{s:?} {t:?}");
            }
        }
    }

    #[test]
    fn projector_algebra() {
        let set = Projector::bb84_set();
        let mut sum = Matrix2::ZERO;
        for p in &set {
            assert!((p.matrix * p.matrix).max_abs_diff(&p.matrix) < STRUCTURE_TOL);
            assert!(p.matrix.max_abs_diff(&p.matrix.adjoint()) < STRUCTURE_TOL);
            sum = sum + p.matrix;
        }
        assert!(sum.max_abs_diff(&Matrix2::identity().scale(2.0)) < STRUCTURE_TOL);
        for basis in [Basis::Z, Basis::X] {
            let prod = Projector::new(basis, 0).matrix * Projector::new(basis, 1).matrix;
            assert!(prod.max_abs_diff(&Matrix2::ZERO) < STRUCTURE_TOL);
        }
    }

    #[test]
    fn rejects_invalid_matrices() {
        assert!(DensityMatrix::new(Matrix2::real([[1.0, 0.0], [0.0, 0.5]])).is_err());
        assert!(DensityMatrix::new(Matrix2::real([[0.5, 0.1], [0.0, 0.5]])).is_err());
        assert!(DensityMatrix::new(Matrix2::real([[0.5, 0.6], [0.6, 0.5]])).is_err());
        assert!(DensityMatrix::new(Matrix2::real([[f64::NAN, 0.0], [0.0, 0.5]])).is_err());
        assert!(DensityMatrix::from_bloch([0.3, -0.2, 0.5]).is_ok());
    }

    #[test]
    fn identity_channel() {
        let rho = DensityMatrix::from_bloch([0.1, 0.4, -0.3]).unwrap();
        let out = apply_kraus(&rho, &[Matrix2::identity()]).unwrap();
        assert!(out.matrix().max_abs_diff(rho.matrix()) < 1e-15);
    }

    #[test]
    fn z_dephasing_of_plus() {
        let rho = dm_from_state(BasisState::Plus);
        let ops = [Projector::new(Basis::Z, 0).matrix, Projector::new(Basis::Z, 1).matrix];
        let out = apply_kraus(&rho, &ops).unwrap();
        assert!(close(out.matrix(), [[0.5, 0.0], [0.0, 0.5]], 1e-15));
    }

    #[test]
    fn incomplete_kraus_set_is_rejected() {
        let rho = dm_from_state(BasisState::Plus);
        let ops = [Projector::new(Basis::Z, 0).matrix];
        assert!(matches!(
            apply_kraus(&rho, &ops),
            Err(Error::KrausNotTracePreserving { .. })
        ));
    }

    #[test]
    fn four_projector_kraus_matches_direct_sum() {
        // Oracle: explicit real-arithmetic evaluation of Σ P ρ P / 2 written out
        // entry by entry for a real-symmetric ρ = [[a, b], [b, d]].
        let mut rng = RandomStream::new(5);
        for _ in 0..200 {
            let (x, z) = (rng.uniform() - 0.5, rng.uniform() - 0.5);
            let rho = DensityMatrix::from_bloch([x, 0.0, z]).unwrap();
            let (a, b, d) = (0.5 * (1.0 + z), 0.5 * x, 0.5 * (1.0 - z));
            // Z part: diag(a, d). X part: P+ρP+ + P-ρP- = [[s, t], [t, s]] with
            // s = (a + d)/2, t = b.
            let s = 0.5 * (a + d);
            let expected = [[0.5 * (a + s), 0.5 * b], [0.5 * b, 0.5 * (d + s)]];
            let ops: Vec<Matrix2> = Projector::bb84_set()
                .iter()
                .map(|p| p.matrix.scale(FRAC_1_SQRT_2))
                .collect();
            let out = apply_kraus(&rho, &ops).unwrap();
            assert!(close(out.matrix(), expected, 1e-14));
        }
    }

    #[test]
    fn eigenstate_measurement_is_certain() {
        let mut rng = RandomStream::new(1);
        for _ in 0..100 {
            let (bit, post) = projective_measure(&dm_from_state(BasisState::Early), Basis::Z, &mut rng).unwrap();
            assert_eq!(bit, 0);
            assert!(close(post.matrix(), [[1.0, 0.0], [0.0, 0.0]], 1e-15));
        }
    }

    #[test]
    fn plus_in_z_is_fair() {
        let mut rng = RandomStream::new(2);
        let n = 10_000;
        let ones: usize = (0..n)
            .map(|_| {
                projective_measure(&dm_from_state(BasisState::Plus), Basis::Z, &mut rng)
                    .unwrap()
                    .0 as usize
            })
            .sum();
        let freq = ones as f64 / n as f64;
        assert!((freq - 0.5).abs() < 3.0 * (0.25 / n as f64).sqrt());
    }

    #[test]
    fn born_probabilities_sum_to_one() {
        let mut rng = RandomStream::new(3);
        for _ in 0..1000 {
            let rho = DensityMatrix::random(&mut rng);
            for basis in [Basis::Z, Basis::X] {
                let total = rho.outcome_probability(basis, 0) + rho.outcome_probability(basis, 1);
                assert!((total - 1.0).abs() < STRUCTURE_TOL);
            }
        }
    }

    #[test]
    fn trace_distance_examples() {
        let e = dm_from_state(BasisState::Early);
        let l = dm_from_state(BasisState::Late);
        let p = dm_from_state(BasisState::Plus);
        assert!(trace_distance(&p, &p).abs() < 1e-15);
        assert!((trace_distance(&e, &l) - 1.0).abs() < 1e-15);
        // Difference [[.5, -.5], [-.5, -.5]] has eigenvalues ±√(1/2).
        assert!((trace_distance(&e, &p) - 0.5f64.sqrt()).abs() < 1e-15);
    }
}
