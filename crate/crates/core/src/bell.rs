//! Echo-like entangling sequence under single-qubit dephasing.
//!
//! Starting from |S⟩⊗|S⟩, both qubits are tipped onto the equator, evolve
//! under `ZZ′(t)`, are flipped by `X_π ⊗ X_π`, evolve again and are rotated
//! back by `X_{π/2} ⊗ X_{π/2}`. Each window lasts `t = 1/(4·J_RL)` and picks
//! up a conditional phase of π/2. The flip refocuses the single-qubit
//! precession, so the result does not depend on `J_L` or `J_R` and, after a
//! fixed `z` frame change on each qubit, equals `(|SS⟩ − |T₀T₀⟩)/√2`.
//!
//! Dephasing acts only during the two windows; pulses are instantaneous.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::coupling::{j_rl_asymptotic, j_rl_exact, HundMullikenParams};
use crate::error::{invalid, Error, Result};
use crate::model::{embed, rotation, single_qubit_gate, zz_prime, Axis, DensityMatrix4, Mat4, Qubit, State4, C64};
use crate::noise::{default_qubit_noise, QubitNoise};
use crate::rng::{stream, Purpose};

/// `(|SS⟩ − |T₀T₀⟩)/√2`. The local prefactor `e^{iπ(σ_y⊗I + I⊗σ_y)}` of the
/// generalized Bell state is `(−I)⊗(−I)`, the identity.
pub fn ideal_bell_state() -> State4 {
    let k = C64::new(FRAC_1_SQRT_2, 0.0);
    State4::new([k, C64::new(0.0, 0.0), C64::new(0.0, 0.0), -k]).expect("normalized")
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum DephasingModel {
    /// Markovian phase damping at rate `1/T_echo` on each qubit.
    PhaseDamping,
    /// Gaussian frequency noise drawn once per window, with correlation
    /// `correlation` between the two windows, calibrated so that the
    /// single-qubit echo over the gate decays as `exp(−2t/T_echo)`.
    QuasiStatic { correlation: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DephasingSpec {
    /// µs; infinite for none.
    pub t_echo_left: f64,
    pub t_echo_right: f64,
    pub model: DephasingModel,
    pub mc_trials: usize,
}

impl Default for DephasingSpec {
    fn default() -> Self {
        Self { t_echo_left: f64::INFINITY, t_echo_right: f64::INFINITY, model: DephasingModel::PhaseDamping, mc_trials: 4000 }
    }
}

impl DephasingSpec {
    pub fn phase_damping(t_echo_left: f64, t_echo_right: f64) -> Self {
        Self { t_echo_left, t_echo_right, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_echo_left > 0.0 && self.t_echo_right > 0.0) {
            return Err(invalid("t_echo", "must be positive"));
        }
        if let DephasingModel::QuasiStatic { correlation } = self.model {
            if !(-1.0..=1.0).contains(&correlation) {
                return Err(invalid("correlation", "must lie in [-1, 1]"));
            }
            if self.mc_trials == 0 {
                return Err(invalid("mc_trials", "must be at least 1"));
            }
        }
        Ok(())
    }

    fn t_echo(&self, q: Qubit) -> f64 {
        match q {
            Qubit::Left => self.t_echo_left,
            Qubit::Right => self.t_echo_right,
        }
    }
}

fn x_both(angle: f64) -> Mat4 {
    single_qubit_gate(Qubit::Left, Axis::X, angle) * single_qubit_gate(Qubit::Right, Axis::X, angle)
}

/// The `z` frame change that maps the sequence output onto
/// [`ideal_bell_state`].
fn frame_correction() -> Mat4 {
    embed(&rotation(Axis::Z, PI / 4.0), Qubit::Left) * embed(&rotation(Axis::Z, PI / 4.0), Qubit::Right)
}

/// Multiplies the coherences of `rho` between states that differ on qubit
/// `q` by `lambda`.
fn dephase(rho: &mut Mat4, q: Qubit, lambda: f64) {
    let bit = |i: usize| match q {
        Qubit::Left => i >> 1,
        Qubit::Right => i & 1,
    };
    for r in 0..4 {
        for c in 0..4 {
            if bit(r) != bit(c) {
                rho[(r, c)] *= lambda;
            }
        }
    }
}

fn z_phase(phi_left: f64, phi_right: f64) -> Mat4 {
    embed(&rotation(Axis::Z, phi_left), Qubit::Left) * embed(&rotation(Axis::Z, phi_right), Qubit::Right)
}

fn window_time(j_coupling: f64) -> Result<f64> {
    if j_coupling == 0.0 {
        return Err(Error::ZeroCoupling);
    }
    if !j_coupling.is_finite() || j_coupling < 0.0 {
        return Err(invalid("j_coupling", "must be positive and finite"));
    }
    Ok(1.0 / (4.0 * j_coupling))
}

/// Runs the sequence with `J`s in MHz.
pub fn run_sequence<R: Rng + ?Sized>(j_left: f64, j_right: f64, j_coupling: f64, dephasing: &DephasingSpec, rng: &mut R) -> Result<DensityMatrix4> {
    dephasing.validate()?;
    let t = window_time(j_coupling)?;
    let zz = zz_prime(j_left, j_right, j_coupling, t);
    let half = x_both(PI / 2.0);
    let flip = x_both(PI);
    let frame = frame_correction();
    let psi0 = State4::basis(0).apply(&half);

    match dephasing.model {
        DephasingModel::PhaseDamping => {
            let mut rho = DensityMatrix4::from_pure(&psi0).matrix().clone_owned();
            let lambda = |q| (-t / dephasing.t_echo(q)).exp();
            for (k, u) in [zz, zz * flip].into_iter().enumerate() {
                rho = u * rho * u.adjoint();
                // the channel is diagonal and commutes with ZZ′
                dephase(&mut rho, Qubit::Left, lambda(Qubit::Left));
                dephase(&mut rho, Qubit::Right, lambda(Qubit::Right));
                if k == 1 {
                    rho = frame * half * rho * (frame * half).adjoint();
                }
            }
            Ok(DensityMatrix4::from_matrix_unchecked(rho))
        }
        DephasingModel::QuasiStatic { correlation } => {
            // Per-window phase variance v with echo amplitude
            // exp(−v(1 − ρ)) = exp(−2t/T_echo).
            let var = |q| {
                let te = dephasing.t_echo(q);
                if te.is_infinite() {
                    0.0
                } else if correlation >= 1.0 {
                    f64::INFINITY
                } else {
                    2.0 * t / te / (1.0 - correlation)
                }
            };
            let (vl, vr) = (var(Qubit::Left), var(Qubit::Right));
            if vl.is_infinite() || vr.is_infinite() {
                return Err(invalid("correlation", "perfectly correlated noise cannot produce a finite echo time"));
            }
            let fresh = (1.0 - correlation * correlation).sqrt();
            let mut acc = Mat4::zeros();
            for _ in 0..dephasing.mc_trials {
                let mut draw = |v: f64, prev: Option<f64>| {
                    let z: f64 = rng.sample(StandardNormal);
                    match prev {
                        None => v.sqrt() * z,
                        Some(p) => correlation * p + fresh * v.sqrt() * z,
                    }
                };
                let (l1, r1) = (draw(vl, None), draw(vr, None));
                let (l2, r2) = (draw(vl, Some(l1)), draw(vr, Some(r1)));
                let u = frame * half * z_phase(l2, r2) * zz * flip * z_phase(l1, r1) * zz;
                let psi = psi0.apply(&u);
                let v = psi.vector();
                acc += v * v.adjoint();
            }
            Ok(DensityMatrix4::from_matrix_unchecked(acc / C64::new(dephasing.mc_trials as f64, 0.0)))
        }
    }
}

/// `⟨ψ_Bell|ρ|ψ_Bell⟩`.
pub fn bell_fidelity(rho: &DensityMatrix4) -> f64 {
    rho.expectation_pure(&ideal_bell_state()).clamp(0.0, 1.0)
}

/// Closed form of the phase-damping fidelity: `(1 + λ_L)(1 + λ_R)/4` with
/// `λ = exp(−1/Q_echo)` and `Q_echo = 2·J_RL·T_echo`.
pub fn phase_damping_fidelity(j_coupling: f64, t_echo_left: f64, t_echo_right: f64) -> f64 {
    let lam = |te: f64| (-1.0 / (2.0 * j_coupling * te)).exp();
    (1.0 + lam(t_echo_left)) * (1.0 + lam(t_echo_right)) / 4.0
}

/// How `J_RL` (MHz) depends on `J_L`, `J_R` (MHz) in a sweep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "law")]
pub enum CouplingLaw {
    /// `J_RL = k·J_L·J_R`, `k` in 1/MHz.
    Bilinear { coefficient: f64 },
    /// Exact Hund–Mulliken eigenvalue.
    SuperlinearExact { model: HundMullikenParams },
    /// `D(J_L J_R)²/(t_L t_R)²`.
    SuperlinearAsymptotic { model: HundMullikenParams },
    /// `J_RL = a·(J_L J_R)^p`, everything in MHz.
    PowerLaw { prefactor: f64, exponent: f64 },
    Constant { j_coupling: f64 },
}

impl CouplingLaw {
    /// A bilinear law through the exact model's value at (`j_left`, `j_right`).
    pub fn bilinear_matched(model: &HundMullikenParams, j_left: f64, j_right: f64) -> Result<Self> {
        let j = j_rl_exact(&model.with_exchange(j_left * 1e-3, j_right * 1e-3))? * 1e3;
        Ok(Self::Bilinear { coefficient: j / (j_left * j_right) })
    }

    pub fn coupling(&self, j_left: f64, j_right: f64) -> Result<f64> {
        match self {
            Self::Bilinear { coefficient } => Ok(coefficient * j_left * j_right),
            Self::SuperlinearExact { model } => Ok(j_rl_exact(&model.with_exchange(j_left * 1e-3, j_right * 1e-3))? * 1e3),
            Self::SuperlinearAsymptotic { model } => Ok(j_rl_asymptotic(&model.with_exchange(j_left * 1e-3, j_right * 1e-3)) * 1e3),
            Self::PowerLaw { prefactor, exponent } => Ok(prefactor * (j_left * j_right).powf(*exponent)),
            Self::Constant { j_coupling } => Ok(*j_coupling),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BellPoint {
    /// MHz.
    pub j_left: f64,
    pub j_right: f64,
    pub j_coupling: f64,
    /// µs.
    pub t_echo_left: f64,
    pub t_echo_right: f64,
    pub fidelity: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BellSweepConfig {
    pub j_right: f64,
    pub law: CouplingLaw,
    pub noise_left: QubitNoise,
    pub noise_right: QubitNoise,
    pub model: DephasingModel,
    pub mc_trials: usize,
}

impl Default for BellSweepConfig {
    fn default() -> Self {
        Self {
            j_right: 500.0,
            law: CouplingLaw::SuperlinearExact { model: HundMullikenParams::default() },
            noise_left: default_qubit_noise(Qubit::Left),
            noise_right: default_qubit_noise(Qubit::Right),
            model: DephasingModel::PhaseDamping,
            mc_trials: 4000,
        }
    }
}

impl BellSweepConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.j_right > 0.0 && self.j_right.is_finite()) {
            return Err(invalid("j_right", "must be positive"));
        }
        if self.mc_trials == 0 {
            return Err(invalid("mc_trials", "must be at least 1"));
        }
        match self.law {
            CouplingLaw::SuperlinearExact { model } | CouplingLaw::SuperlinearAsymptotic { model } => model.validate(),
            CouplingLaw::Bilinear { coefficient: k } if !(k > 0.0) => Err(invalid("coefficient", "must be positive")),
            CouplingLaw::PowerLaw { prefactor: a, .. } if !(a > 0.0) => Err(invalid("prefactor", "must be positive")),
            CouplingLaw::Constant { j_coupling } if !(j_coupling > 0.0) => Err(invalid("j_coupling", "must be positive")),
            _ => Ok(()),
        }
    }
}

/// Bell fidelity along a `J_L` grid at fixed `J_R`, with echo times from the
/// charge-noise laws of each qubit.
pub fn fbell_sweep(j_left_grid: &[f64], cfg: &BellSweepConfig, seed: u64) -> Result<Vec<BellPoint>> {
    if j_left_grid.is_empty() {
        return Err(invalid("j_left_grid", "must not be empty"));
    }
    j_left_grid
        .par_iter()
        .enumerate()
        .map(|(i, &jl)| {
            let jc = cfg.law.coupling(jl, cfg.j_right)?;
            let (_, tl) = cfg.noise_left.coherence_at_exchange(jl)?;
            let (_, tr) = cfg.noise_right.coherence_at_exchange(cfg.j_right)?;
            let spec = DephasingSpec { t_echo_left: tl, t_echo_right: tr, model: cfg.model, mc_trials: cfg.mc_trials };
            let mut rng = stream(seed, Purpose::Bell, i as u64);
            let rho = run_sequence(jl, cfg.j_right, jc, &spec, &mut rng)?;
            Ok(BellPoint { j_left: jl, j_right: cfg.j_right, j_coupling: jc, t_echo_left: tl, t_echo_right: tr, fidelity: bell_fidelity(&rho) })
        })
        .collect()
}
