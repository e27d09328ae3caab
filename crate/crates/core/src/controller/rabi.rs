//! Rabi driving by resonant exchange modulation.
//!
//! The qubit is initialized along the field-gradient axis and driven with
//! `J(t) = (A/2)·cos(2π f_d t)` about z, with `f_d = ΔB_z + δf`. Under the
//! rotating-wave approximation the Rabi frequency is `A/4`.

use rand::Rng;
use std::f64::consts::PI;

use super::{observe, ExperimentTrace};
use crate::model::Qubit;
use crate::readout::ReadoutConfig;

/// Chevron parameters for [`rabi_probability_rwa`]. Times in µs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RabiParams {
    pub f_rabi: f64,
    /// Gaussian envelope time; infinite for no decay.
    pub t_decay: f64,
    pub visibility: f64,
    pub offset: f64,
}

/// Triplet probability under the rotating-wave approximation.
pub fn rabi_probability_rwa(t_rf_ns: f64, delta_f: f64, f_rabi: f64, t_decay: f64, visibility: f64, offset: f64) -> f64 {
    let t = t_rf_ns * 1e-3;
    let omega2 = f_rabi * f_rabi + delta_f * delta_f;
    if omega2 == 0.0 {
        return offset;
    }
    let envelope = if t_decay.is_finite() { (-(t / t_decay).powi(2)).exp() } else { 1.0 };
    offset + visibility * f_rabi * f_rabi / omega2 * (PI * omega2.sqrt() * t).sin().powi(2) * envelope
}

pub fn rabi_quality_factor(f_rabi: f64, t_rabi: f64) -> f64 {
    f_rabi * t_rabi
}

/// Lab-frame integration of the driven qubit, sampled at each of the
/// ascending times `t_rf_ns`. Each step of at most `1/(steps_per_period·ΔB_z)`
/// applies the exact propagator of the Hamiltonian frozen at the step
/// midpoint. Returns the probability of ending in the excited gradient
/// eigenstate, which the adiabatic return maps to |T₀⟩.
pub fn rabi_integrate_trace(t_rf_ns: &[f64], delta_f: f64, amplitude: f64, dbz: f64, steps_per_period: usize) -> Vec<f64> {
    assert!(dbz > 0.0, "field gradient must be positive");
    assert!(amplitude >= 0.0, "drive amplitude must be non-negative");
    assert!(steps_per_period >= 50, "step size coarser than 1/(50·ΔB_z)");
    assert!(t_rf_ns.windows(2).all(|w| w[0] <= w[1]), "times must be ascending");

    let f_d = dbz + delta_f;
    let max_dt = 1.0 / (steps_per_period as f64 * dbz);
    // Spinor in the (S, T₀) basis, starting in the ground state of (ΔB/2)σ_x.
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut psi = [num_complex::Complex64::new(s, 0.0), num_complex::Complex64::new(-s, 0.0)];
    let mut now = 0.0;
    let mut out = Vec::with_capacity(t_rf_ns.len());
    for &t_ns in t_rf_ns {
        let target = t_ns * 1e-3;
        let span = target - now;
        if span > 0.0 {
            let n = (span / max_dt).ceil() as usize;
            let dt = span / n as f64;
            for i in 0..n {
                let tm = now + (i as f64 + 0.5) * dt;
                let hz = 0.25 * amplitude * (2.0 * PI * f_d * tm).cos();
                let hx = 0.5 * dbz;
                step(&mut psi, hx, hz, dt);
            }
            now = target;
        }
        // excited x eigenstate (|S⟩ + |T₀⟩)/√2
        out.push(((psi[0] + psi[1]) * s).norm_sqr());
    }
    out
}

/// Single-point form of [`rabi_integrate_trace`] with 400 steps per period.
pub fn rabi_integrate(t_rf_ns: f64, delta_f: f64, amplitude: f64, dbz: f64) -> f64 {
    rabi_integrate_trace(&[t_rf_ns], delta_f, amplitude, dbz, 400)[0]
}

/// `ψ ← exp(−i 2π (hx σ_x + hz σ_z) dt) ψ`.
fn step(psi: &mut [num_complex::Complex64; 2], hx: f64, hz: f64, dt: f64) {
    use num_complex::Complex64 as C;
    let h = hx.hypot(hz);
    if h == 0.0 {
        return;
    }
    let theta = 2.0 * PI * h * dt;
    let (sn, c) = theta.sin_cos();
    let (nx, nz) = (hx / h, hz / h);
    let mi = C::new(0.0, -sn);
    let a = psi[0];
    let b = psi[1];
    psi[0] = a * c + mi * (nz * a + nx * b);
    psi[1] = b * c + mi * (nx * a - nz * b);
}

/// Simulated Rabi trace with binomial shot noise. `params.visibility` and
/// `params.offset` are ignored in favour of the readout model.
pub fn rabi_trace<R: Rng + ?Sized>(
    t_rf_ns: &[f64],
    delta_f: f64,
    params: &RabiParams,
    readout: &ReadoutConfig,
    qubit: Qubit,
    simultaneous: bool,
    shots: usize,
    rng: &mut R,
) -> ExperimentTrace {
    let p = t_rf_ns
        .iter()
        .map(|&t| {
            let ideal = rabi_probability_rwa(t, delta_f, params.f_rabi, params.t_decay, 1.0, 0.0);
            // decayed population relaxes toward the mixed value ½
            let env = if params.t_decay.is_finite() { (-(t * 1e-3 / params.t_decay).powi(2)).exp() } else { 1.0 };
            let mixed = 0.5 * params.f_rabi.powi(2) / (params.f_rabi.powi(2) + delta_f.powi(2)) * (1.0 - env);
            observe(ideal + mixed, readout, simultaneous, qubit, shots, rng)
        })
        .collect();
    ExperimentTrace { x_label: "t_rf_ns".into(), x: t_rf_ns.to_vec(), p_triplet: p, shots_per_point: shots }
}
