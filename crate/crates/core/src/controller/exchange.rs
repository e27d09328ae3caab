//! Control-state-conditional exchange oscillations.
//!
//! The control qubit is prepared in |S⟩, |T₀⟩ or an equal superposition and
//! the coupling is ramped on adiabatically, so the control stays in its σ_z
//! eigenstate. The target starts on the gradient axis and a diabatic exchange
//! pulse rotates it about the tilted axis `(ΔB_z, 0, J − J_RL·r_C)` at the
//! conditional frequency. After the adiabatic return, the triplet return
//! probability of one control branch is
//!
//! ```text
//! P_T = ½ · (J_eff/f)² · (1 − D(t)·cos 2πft),   D(t) = exp(−(t/T₂*)^a)
//! ```

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::{observe, ExperimentTrace};
use crate::model::{conditional_frequency, ControlState, Qubit, TwoQubitParams};
use crate::readout::ReadoutConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlPrep {
    Singlet,
    Triplet,
    /// π/2 pulse on the control: both branches with equal weight.
    Superposition,
}

/// Stretched-exponential dephasing of the target during the exchange pulse.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExchangeDephasing {
    /// µs; infinite for none.
    pub t2_star: f64,
    pub exponent: f64,
}

impl Default for ExchangeDephasing {
    fn default() -> Self {
        Self { t2_star: f64::INFINITY, exponent: 2.0 }
    }
}

impl ExchangeDephasing {
    pub fn decay(&self, t_us: f64) -> f64 {
        if self.t2_star.is_infinite() {
            1.0
        } else {
            (-(t_us / self.t2_star).powf(self.exponent)).exp()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExchangeSetup {
    pub params: TwoQubitParams,
    pub target: Qubit,
    pub dephasing: ExchangeDephasing,
    /// Probability that the control ends the ramp in the other branch.
    #[serde(default)]
    pub control_ramp_error: f64,
}

impl ExchangeSetup {
    fn target_values(&self) -> (f64, f64) {
        match self.target {
            Qubit::Left => (self.params.j_left, self.params.dbz_left),
            Qubit::Right => (self.params.j_right, self.params.dbz_right),
        }
    }

    pub fn target_dbz(&self) -> f64 {
        self.target_values().1
    }

    /// Weight of the T₀ branch after preparation and ramp.
    fn triplet_weight(&self, prep: ControlPrep) -> f64 {
        let w = match prep {
            ControlPrep::Singlet => 0.0,
            ControlPrep::Triplet => 1.0,
            ControlPrep::Superposition => 0.5,
        };
        w + self.control_ramp_error * (1.0 - 2.0 * w)
    }
}

fn branch(setup: &ExchangeSetup, control: ControlState, t_us: f64) -> f64 {
    let (j, dbz) = setup.target_values();
    let f = conditional_frequency(j, dbz, setup.params.j_coupling, control);
    if f == 0.0 {
        return 0.0;
    }
    let j_eff = j - setup.params.j_coupling * control.r();
    0.5 * (j_eff / f).powi(2) * (1.0 - setup.dephasing.decay(t_us) * (2.0 * PI * f * t_us).cos())
}

/// Ideal triplet return probability of the target after `t_exch_ns`.
pub fn conditional_exchange_probability(t_exch_ns: f64, prep: ControlPrep, setup: &ExchangeSetup) -> f64 {
    let t = t_exch_ns * 1e-3;
    let w = setup.triplet_weight(prep);
    (1.0 - w) * branch(setup, ControlState::Singlet, t) + w * branch(setup, ControlState::Triplet, t)
}

/// Observed trace with readout mapping and `shots` per point.
pub fn conditional_exchange_trace<R: Rng + ?Sized>(
    t_exch_ns: &[f64],
    prep: ControlPrep,
    setup: &ExchangeSetup,
    readout: &ReadoutConfig,
    shots: usize,
    rng: &mut R,
) -> ExperimentTrace {
    let p = t_exch_ns
        .iter()
        .map(|&t| observe(conditional_exchange_probability(t, prep, setup), readout, true, setup.target, shots, rng))
        .collect();
    ExperimentTrace { x_label: "t_exch_ns".into(), x: t_exch_ns.to_vec(), p_triplet: p, shots_per_point: shots }
}
