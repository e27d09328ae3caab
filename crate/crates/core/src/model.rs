//! Two-qubit Hamiltonian, propagators, gates and Born probabilities.
//!
//! Basis order is |SS⟩, |S T₀⟩, |T₀ S⟩, |T₀ T₀⟩ with the left qubit as the
//! first tensor factor, and σ_z|S⟩ = +|S⟩, σ_z|T₀⟩ = −|T₀⟩. Energies are cyclic
//! frequencies in MHz; evolution over `t` µs uses `exp(−i 2π H t)`.

use nalgebra::{Matrix2, Matrix4, Vector4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{ensure_finite, invalid, Error, Result};

pub type C64 = Complex64;
pub type Mat2 = Matrix2<C64>;
pub type Mat4 = Matrix4<C64>;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };
const I: C64 = C64 { re: 0.0, im: 1.0 };

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoQubitParams {
    pub j_left: f64,
    pub j_right: f64,
    pub dbz_left: f64,
    pub dbz_right: f64,
    pub j_coupling: f64,
    #[serde(default)]
    pub eps_left: Option<f64>,
    #[serde(default)]
    pub eps_right: Option<f64>,
}

impl TwoQubitParams {
    pub fn new(j_left: f64, j_right: f64, dbz_left: f64, dbz_right: f64, j_coupling: f64) -> Self {
        Self {
            j_left,
            j_right,
            dbz_left,
            dbz_right,
            j_coupling,
            eps_left: None,
            eps_right: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure_finite("j_left", self.j_left)?;
        ensure_finite("j_right", self.j_right)?;
        ensure_finite("dbz_left", self.dbz_left)?;
        ensure_finite("dbz_right", self.dbz_right)?;
        ensure_finite("j_coupling", self.j_coupling)?;
        for (name, v) in [
            ("j_left", self.j_left),
            ("j_right", self.j_right),
            ("j_coupling", self.j_coupling),
        ] {
            if v < 0.0 {
                return Err(invalid(name, format!("must be non-negative, got {v}")));
            }
        }
        Ok(())
    }
}

/// Coefficient in front of `(σ_zL − I)⊗(σ_zR − I)`.
///
/// With `ConditionalShift` the coefficient is `J_RL/4`, so flipping the
/// control from S to T₀ shifts the target's exchange by exactly `J_RL`. With
/// `Literal` it is `J_RL/2` and the shift is `2·J_RL`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingConvention {
    #[default]
    ConditionalShift,
    Literal,
}

impl CouplingConvention {
    pub fn coefficient(self, j_coupling: f64) -> f64 {
        match self {
            Self::ConditionalShift => j_coupling / 4.0,
            Self::Literal => j_coupling / 2.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Qubit {
    Left,
    Right,
}

impl Qubit {
    pub fn other(self) -> Self {
        match self {
            Self::Left => Self::Right,
            Self::Right => Self::Left,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

/// State of the control qubit in the conditional-frequency formula.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlState {
    Singlet,
    Triplet,
}

impl ControlState {
    /// `r_C`: 0 for |S⟩, 1 for |T₀⟩.
    pub fn r(self) -> f64 {
        match self {
            Self::Singlet => 0.0,
            Self::Triplet => 1.0,
        }
    }
}

pub fn pauli(axis: Axis) -> Mat2 {
    match axis {
        Axis::X => Mat2::new(ZERO, ONE, ONE, ZERO),
        Axis::Y => Mat2::new(ZERO, -I, I, ZERO),
        Axis::Z => Mat2::new(ONE, ZERO, ZERO, -ONE),
    }
}

pub fn kron(a: &Mat2, b: &Mat2) -> Mat4 {
    let k = a.kronecker(b);
    Mat4::from_fn(|r, c| k[(r, c)])
}

/// Lift a single-qubit operator onto the two-qubit space.
pub fn embed(op: &Mat2, which: Qubit) -> Mat4 {
    match which {
        Qubit::Left => kron(op, &Mat2::identity()),
        Qubit::Right => kron(&Mat2::identity(), op),
    }
}

pub fn build_hamiltonian(params: &TwoQubitParams) -> Mat4 {
    build_hamiltonian_with(params, CouplingConvention::default())
}

pub fn build_hamiltonian_with(params: &TwoQubitParams, convention: CouplingConvention) -> Mat4 {
    let sx = pauli(Axis::X);
    let sz = pauli(Axis::Z);
    let half = |v: f64| C64::new(v / 2.0, 0.0);

    let mut h = embed(&sz, Qubit::Left) * half(params.j_left)
        + embed(&sx, Qubit::Left) * half(params.dbz_left)
        + embed(&sz, Qubit::Right) * half(params.j_right)
        + embed(&sx, Qubit::Right) * half(params.dbz_right);
    // (σ_z − I)⊗(σ_z − I) = diag(0, 0, 0, 4)
    h[(3, 3)] += C64::new(4.0 * convention.coefficient(params.j_coupling), 0.0);
    h
}

fn hermitian_deviation(h: &Mat4) -> f64 {
    let mut dev = 0.0_f64;
    for r in 0..4 {
        for c in 0..4 {
            dev = dev.max((h[(r, c)] - h[(c, r)].conj()).norm());
        }
    }
    dev
}

/// `exp(−i 2π H t)` by Hermitian eigendecomposition.
pub fn propagator(h: &Mat4, t: f64) -> Result<Mat4> {
    ensure_finite("t", t)?;
    let scale = h.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let dev = hermitian_deviation(h);
    if dev > 1e-12 * scale {
        return Err(Error::NotHermitian(dev));
    }
    let eig = h.symmetric_eigen();
    let phases = eig
        .eigenvalues
        .map(|e| C64::from_polar(1.0, -2.0 * PI * e * t));
    let v = &eig.eigenvectors;
    Ok(v * Mat4::from_diagonal(&phases) * v.adjoint())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct State4(Vector4<C64>);

impl State4 {
    /// Normalizes the given amplitudes.
    pub fn new(amplitudes: [C64; 4]) -> Result<Self> {
        let v = Vector4::from(amplitudes);
        let n = v.norm();
        if !n.is_finite() || n == 0.0 {
            return Err(invalid("amplitudes", "state must have finite non-zero norm"));
        }
        Ok(Self(v / C64::new(n, 0.0)))
    }

    /// Basis state by index in the |SS⟩, |ST⟩, |TS⟩, |TT⟩ order.
    pub fn basis(index: usize) -> Self {
        assert!(index < 4, "basis index out of range");
        let mut v = Vector4::zeros();
        v[index] = ONE;
        Self(v)
    }

    pub fn product(left: [C64; 2], right: [C64; 2]) -> Result<Self> {
        Self::new([
            left[0] * right[0],
            left[0] * right[1],
            left[1] * right[0],
            left[1] * right[1],
        ])
    }

    pub fn amplitudes(&self) -> [C64; 4] {
        [self.0[0], self.0[1], self.0[2], self.0[3]]
    }

    pub fn vector(&self) -> &Vector4<C64> {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    /// Apply a unitary. The result is not renormalized.
    pub fn apply(&self, u: &Mat4) -> Self {
        Self(u * self.0)
    }

    pub fn inner(&self, other: &Self) -> C64 {
        self.0.dotc(&other.0)
    }

    pub fn fidelity(&self, other: &Self) -> f64 {
        self.inner(other).norm_sqr()
    }

    /// Pure-state concurrence `2|ad − bc|`.
    pub fn concurrence(&self) -> f64 {
        let [a, b, c, d] = self.amplitudes();
        2.0 * (a * d - b * c).norm()
    }
}

pub fn evolve(state: &State4, h: &Mat4, t: f64) -> Result<State4> {
    if t < 0.0 {
        return Err(invalid("t", format!("must be non-negative, got {t}")));
    }
    Ok(state.apply(&propagator(h, t)?))
}

#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix4(Mat4);

impl DensityMatrix4 {
    pub fn from_pure(state: &State4) -> Self {
        Self(state.0 * state.0.adjoint())
    }

    pub fn maximally_mixed() -> Self {
        Self(Mat4::identity() * C64::new(0.25, 0.0))
    }

    /// Wraps a matrix after checking Hermiticity, unit trace and positivity.
    pub fn from_matrix(m: Mat4) -> Result<Self> {
        let rho = Self(m);
        rho.validate()?;
        Ok(rho)
    }

    pub(crate) fn from_matrix_unchecked(m: Mat4) -> Self {
        Self(m)
    }

    pub fn matrix(&self) -> &Mat4 {
        &self.0
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn purity(&self) -> f64 {
        (self.0 * self.0).trace().re
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.0.symmetric_eigen().eigenvalues.min()
    }

    pub fn validate(&self) -> Result<()> {
        let dev = hermitian_deviation(&self.0);
        if dev > 1e-12 {
            return Err(Error::NotHermitian(dev));
        }
        let tr = self.trace();
        if (tr - ONE).norm() > 1e-12 {
            return Err(invalid("rho", format!("trace {tr} differs from 1")));
        }
        let min = self.min_eigenvalue();
        if min < -1e-10 {
            return Err(invalid("rho", format!("negative eigenvalue {min:.3e}")));
        }
        Ok(())
    }

    pub fn conjugate(&self, u: &Mat4) -> Self {
        Self(u * self.0 * u.adjoint())
    }

    /// `⟨ψ|ρ|ψ⟩`.
    pub fn expectation_pure(&self, psi: &State4) -> f64 {
        psi.0.dotc(&(self.0 * psi.0)).re
    }
}

/// Marginal singlet probabilities `(p_S,left, p_S,right)`.
pub trait SingletProbabilities {
    fn populations(&self) -> [f64; 4];

    fn singlet_probabilities(&self) -> (f64, f64) {
        let p = self.populations();
        let clamp = |x: f64| x.clamp(0.0, 1.0);
        (clamp(p[0] + p[1]), clamp(p[0] + p[2]))
    }
}

impl SingletProbabilities for State4 {
    fn populations(&self) -> [f64; 4] {
        let n = self.0.norm_squared();
        self.amplitudes().map(|a| a.norm_sqr() / n)
    }
}

impl SingletProbabilities for DensityMatrix4 {
    fn populations(&self) -> [f64; 4] {
        let tr = self.trace().re;
        [0, 1, 2, 3].map(|i| self.0[(i, i)].re / tr)
    }
}

pub fn measure_probabilities<S: SingletProbabilities>(state: &S) -> (f64, f64) {
    state.singlet_probabilities()
}

/// `exp(−i·angle/2·σ_axis)` on one qubit, identity on the other.
pub fn single_qubit_gate(which: Qubit, axis: Axis, angle: f64) -> Mat4 {
    embed(&rotation(axis, angle), which)
}

pub fn rotation(axis: Axis, angle: f64) -> Mat2 {
    let c = C64::new((angle / 2.0).cos(), 0.0);
    let s = C64::new(0.0, -(angle / 2.0).sin());
    Mat2::identity() * c + pauli(axis) * s
}

pub fn zz_prime(j_left: f64, j_right: f64, j_coupling: f64, t: f64) -> Mat4 {
    let ph = |phi: f64| C64::from_polar(1.0, phi);
    let sum = PI * (j_left + j_right) * t;
    let diff = PI * (j_left - j_right) * t;
    Mat4::from_diagonal(&Vector4::new(
        ph(-sum),
        ph(-diff),
        ph(diff),
        ph(sum - 2.0 * PI * j_coupling * t),
    ))
}

/// `√((J − J_RL·r_C)² + ΔB_z²)`.
pub fn conditional_frequency(j_target: f64, dbz_target: f64, j_coupling: f64, control: ControlState) -> f64 {
    (j_target - j_coupling * control.r()).hypot(dbz_target)
}

/// Largest entry of `|U†U − I|`.
pub fn unitarity_error(u: &Mat4) -> f64 {
    (u.adjoint() * u - Mat4::identity())
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn max_abs(m: &Mat4) -> f64 {
        m.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn zero_params_give_zero_hamiltonian() {
        let h = build_hamiltonian(&TwoQubitParams::new(0.0, 0.0, 0.0, 0.0, 0.0));
        assert_eq!(max_abs(&h), 0.0);
    }

    #[test]
    fn left_exchange_is_diagonal() {
        let h = build_hamiltonian(&TwoQubitParams::new(100.0, 0.0, 0.0, 0.0, 0.0));
        let expect = Mat4::from_diagonal(&Vector4::new(c(50.0, 0.0), c(50.0, 0.0), c(-50.0, 0.0), c(-50.0, 0.0)));
        assert_eq!(h, expect);
    }

    #[test]
    fn literal_convention_doubles_the_shift() {
        let p = TwoQubitParams::new(0.0, 500.0, 0.0, 0.0, 40.0);
        let gap = |conv| {
            let h = build_hamiltonian_with(&p, conv);
            // control T₀ sector: indices 2, 3 (diagonal since dbz = 0)
            (h[(2, 2)].re - h[(3, 3)].re).abs()
        };
        assert_abs_diff_eq!(gap(CouplingConvention::ConditionalShift), 460.0, epsilon = 1e-12);
        assert_abs_diff_eq!(gap(CouplingConvention::Literal), 420.0, epsilon = 1e-12);
    }

    #[test]
    fn left_gradient_half_period_flips_left_qubit() {
        let h = build_hamiltonian(&TwoQubitParams::new(0.0, 0.0, 130.0, 0.0, 0.0));
        let out = evolve(&State4::basis(0), &h, 1.0 / (2.0 * 130.0)).unwrap();
        let (pl, pr) = measure_probabilities(&out);
        assert!(1.0 - pl > 0.999, "left triplet population {}", 1.0 - pl);
        assert_abs_diff_eq!(pr, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn evolve_zero_time_is_identity() {
        let h = build_hamiltonian(&TwoQubitParams::new(10.0, 20.0, 30.0, 40.0, 5.0));
        let s = State4::new([c(0.1, 0.2), c(0.3, -0.1), c(0.5, 0.0), c(0.0, 0.7)]).unwrap();
        let out = evolve(&s, &h, 0.0).unwrap();
        for (a, b) in out.amplitudes().iter().zip(s.amplitudes()) {
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn diagonal_hamiltonian_preserves_populations() {
        let h = build_hamiltonian(&TwoQubitParams::new(100.0, 0.0, 0.0, 0.0, 0.0));
        let s = State4::new([c(0.5, 0.0), c(0.5, 0.0), c(0.5, 0.0), c(0.5, 0.0)]).unwrap();
        let out = evolve(&s, &h, 0.010).unwrap();
        for p in out.populations() {
            assert_abs_diff_eq!(p, 0.25, epsilon = 1e-12);
        }
        // relative phase between |S·⟩ and |T·⟩ is 2π·100 MHz·10 ns
        let rel = (out.amplitudes()[2] / out.amplitudes()[0]).arg();
        let expect = (2.0 * PI * 100.0 * 0.010 + PI).rem_euclid(2.0 * PI) - PI;
        assert_abs_diff_eq!(rel, expect, epsilon = 1e-12);
    }

    #[test]
    fn non_hermitian_is_rejected() {
        let mut h = Mat4::zeros();
        h[(0, 1)] = c(1.0, 0.0);
        assert!(matches!(propagator(&h, 1.0), Err(Error::NotHermitian(_))));
        assert!(evolve(&State4::basis(0), &Mat4::zeros(), -1.0).is_err());
    }

    #[test]
    fn single_qubit_gates() {
        assert!(max_abs(&(single_qubit_gate(Qubit::Left, Axis::X, 0.0) - Mat4::identity())) < 1e-15);

        let x_pi = single_qubit_gate(Qubit::Left, Axis::X, PI);
        let psi = State4::product([ONE, ZERO], [c(0.6, 0.0), c(0.0, 0.8)]).unwrap();
        let out = psi.apply(&x_pi);
        let expect = State4::product([ZERO, ONE], [c(0.6, 0.0), c(0.0, 0.8)]).unwrap();
        for (a, b) in out.amplitudes().iter().zip(expect.amplitudes()) {
            assert!((a - b * c(0.0, -1.0)).norm() < 1e-15);
        }

        let both = single_qubit_gate(Qubit::Left, Axis::X, PI / 2.0)
            * single_qubit_gate(Qubit::Right, Axis::X, PI / 2.0);
        for a in State4::basis(0).apply(&both).amplitudes() {
            assert_abs_diff_eq!(a.norm(), 0.5, epsilon = 1e-15);
        }
    }

    #[test]
    fn zz_prime_examples() {
        assert!(max_abs(&(zz_prime(3.0, 7.0, 2.0, 0.0) - Mat4::identity())) < 1e-15);
        let z = zz_prime(0.0, 0.0, 1.0, 0.5);
        let expect = Mat4::from_diagonal(&Vector4::new(ONE, ONE, ONE, -ONE));
        assert!(max_abs(&(z - expect)) < 1e-15);

        // Without coupling it is a product of z rotations.
        let (jl, jr, t) = (37.0, 11.0, 0.013);
        let product = single_qubit_gate(Qubit::Left, Axis::Z, 2.0 * PI * jl * t)
            * single_qubit_gate(Qubit::Right, Axis::Z, 2.0 * PI * jr * t);
        assert!(max_abs(&(zz_prime(jl, jr, 0.0, t) - product)) < 1e-13);
    }

    #[test]
    fn zz_prime_matches_hamiltonian_without_gradients() {
        // With ΔB = 0, exp(−i2πHt) and ZZ′ differ only by a global phase.
        let (jl, jr, jc, t) = (120.0, 80.0, 40.0, 0.0071);
        let h = build_hamiltonian(&TwoQubitParams::new(jl, jr, 0.0, 0.0, jc));
        let u = propagator(&h, t).unwrap();
        let z = zz_prime(jl, jr, jc, t);
        let g = u[(0, 0)] / z[(0, 0)];
        assert!(max_abs(&(u - z * g)) < 1e-12);
    }

    #[test]
    fn conditional_frequency_examples() {
        assert_eq!(
            conditional_frequency(300.0, 40.0, 0.0, ControlState::Triplet),
            conditional_frequency(300.0, 40.0, 25.0, ControlState::Singlet)
        );
        assert_abs_diff_eq!(conditional_frequency(300.0, 40.0, 0.0, ControlState::Triplet), 302.655, epsilon = 1e-3);
        assert_abs_diff_eq!(conditional_frequency(0.0, 130.0, 25.0, ControlState::Singlet), 130.0, epsilon = 1e-12);
        let drop = conditional_frequency(4000.0, 130.0, 40.6, ControlState::Singlet)
            - conditional_frequency(4000.0, 130.0, 40.6, ControlState::Triplet);
        assert_abs_diff_eq!(drop, 40.57, epsilon = 0.01);
    }

    #[test]
    fn probabilities() {
        assert_eq!(measure_probabilities(&State4::basis(0)), (1.0, 1.0));
        let bell = State4::new([ONE, ZERO, ZERO, ONE]).unwrap();
        let (a, b) = measure_probabilities(&bell);
        assert_abs_diff_eq!(a, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(b, 0.5, epsilon = 1e-15);
        let half = State4::basis(0).apply(&single_qubit_gate(Qubit::Left, Axis::X, PI / 2.0));
        let (a, b) = measure_probabilities(&half);
        assert_abs_diff_eq!(a, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(b, 1.0, epsilon = 1e-15);
        let rho = DensityMatrix4::from_pure(&half);
        assert_eq!(measure_probabilities(&rho), measure_probabilities(&half));
    }

    #[test]
    fn density_matrix_checks() {
        assert!(DensityMatrix4::maximally_mixed().validate().is_ok());
        assert_abs_diff_eq!(DensityMatrix4::maximally_mixed().purity(), 0.25, epsilon = 1e-15);
        let bad = Mat4::from_diagonal(&Vector4::new(c(1.5, 0.0), c(-0.5, 0.0), ZERO, ZERO));
        assert!(DensityMatrix4::from_matrix(bad).is_err());
    }

    fn arb_params() -> impl Strategy<Value = TwoQubitParams> {
        (0.0..500.0, 0.0..500.0, -200.0..200.0, -200.0..200.0, 0.0..100.0)
            .prop_map(|(a, b, c, d, e)| TwoQubitParams::new(a, b, c, d, e))
    }

    fn arb_state() -> impl Strategy<Value = State4> {
        proptest::array::uniform8(-1.0..1.0f64)
            .prop_filter("non-zero", |v| v.iter().any(|x| x.abs() > 1e-3))
            .prop_map(|v| {
                State4::new([c(v[0], v[1]), c(v[2], v[3]), c(v[4], v[5]), c(v[6], v[7])]).unwrap()
            })
    }

    proptest! {
        #[test]
        fn propagators_are_unitary(p in arb_params(), t in 0.0..0.5f64) {
            let u = propagator(&build_hamiltonian(&p), t).unwrap();
            prop_assert!(unitarity_error(&u) < 1e-12);
        }

        #[test]
        fn gates_are_unitary(angle in -10.0..10.0f64, jl in 0.0..500.0f64, jr in 0.0..500.0f64, jc in 0.0..100.0f64, t in 0.0..1.0f64) {
            for axis in [Axis::X, Axis::Y, Axis::Z] {
                for q in [Qubit::Left, Qubit::Right] {
                    prop_assert!(unitarity_error(&single_qubit_gate(q, axis, angle)) < 1e-12);
                }
            }
            prop_assert!(unitarity_error(&zz_prime(jl, jr, jc, t)) < 1e-12);
        }

        #[test]
        fn evolution_preserves_norm(p in arb_params(), s in arb_state(), t in 0.0..0.5f64) {
            let out = evolve(&s, &build_hamiltonian(&p), t).unwrap();
            prop_assert!((out.norm() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn target_gap_matches_conditional_frequency(
            j_target in 0.0..5000.0f64, dbz in 0.0..300.0f64, jc in 0.0..200.0f64,
            j_control in 0.0..500.0f64, target_right in any::<bool>(),
        ) {
            // Control gradient off so the control stays in its σ_z eigenstate.
            let (p, blocks) = if target_right {
                (TwoQubitParams::new(j_control, j_target, 0.0, dbz, jc), [[0, 1], [2, 3]])
            } else {
                (TwoQubitParams::new(j_target, j_control, dbz, 0.0, jc), [[0, 2], [1, 3]])
            };
            let h = build_hamiltonian(&p);
            for (block, control) in blocks.iter().zip([ControlState::Singlet, ControlState::Triplet]) {
                let sub = Matrix2::from_fn(|r, c| h[(block[r], block[c])]);
                let ev = sub.symmetric_eigen().eigenvalues;
                let gap = (ev[0] - ev[1]).abs();
                let f = conditional_frequency(j_target, dbz, jc, control);
                prop_assert!((gap - f).abs() <= 1e-9 * f.max(1.0));
            }
        }

        #[test]
        fn uncoupled_zz_prime_has_no_entangling_power(
            jl in 0.0..500.0f64, jr in 0.0..500.0f64, t in 0.0..1.0f64,
            l in proptest::array::uniform4(-1.0..1.0f64), r in proptest::array::uniform4(-1.0..1.0f64),
        ) {
            prop_assume!(l.iter().any(|x| x.abs() > 1e-3) && r.iter().any(|x| x.abs() > 1e-3));
            let s = State4::product([c(l[0], l[1]), c(l[2], l[3])], [c(r[0], r[1]), c(r[2], r[3])]).unwrap();
            let out = s.apply(&zz_prime(jl, jr, 0.0, t));
            prop_assert!(out.concurrence() < 1e-10);
        }

        #[test]
        fn probabilities_ignore_global_phase(p in arb_params(), s in arb_state(), t in 0.0..0.2f64, phi in -PI..PI) {
            let h = build_hamiltonian(&p);
            let a = evolve(&s, &h, t).unwrap();
            let rotated = State4::new(s.amplitudes().map(|z| z * C64::from_polar(1.0, phi))).unwrap();
            let b = evolve(&rotated, &h, t).unwrap();
            let (al, ar) = measure_probabilities(&a);
            let (bl, br) = measure_probabilities(&b);
            prop_assert!((al - bl).abs() < 1e-12 && (ar - br).abs() < 1e-12);
        }
    }
}
