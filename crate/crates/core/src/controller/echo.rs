//! Hahn echo `π/2 – τ – π – τ – π/2` on the equator of one qubit.
//!
//! Each trial draws a quasi-static detuning, constant over the sequence and
//! cancelled by the π pulse, plus an independent Gaussian random phase per
//! free-evolution window. A variance of `t/T_echo` per window, for total
//! evolution `t`, reproduces exponential phase damping `exp(−t/T_echo)` on
//! average.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EchoNoise {
    /// Standard deviation of the static detuning, MHz.
    pub static_sigma: f64,
    /// Phase damping time, µs; infinite for none.
    pub t_echo: f64,
}

impl Default for EchoNoise {
    fn default() -> Self {
        Self { static_sigma: 0.0, t_echo: f64::INFINITY }
    }
}

/// Echo amplitude after total free evolution `t_total_ns`, averaged over
/// `trials` noise realizations.
pub fn echo_amplitude<R: Rng + ?Sized>(t_total_ns: f64, noise: &EchoNoise, trials: usize, rng: &mut R) -> f64 {
    assert!(t_total_ns >= 0.0 && trials > 0);
    let tau = 0.5 * t_total_ns * 1e-3;
    let window_var = if noise.t_echo.is_finite() { 2.0 * tau / noise.t_echo } else { 0.0 };
    let mut sum = 0.0;
    for _ in 0..trials {
        let delta = noise.static_sigma * rng.sample::<f64, _>(StandardNormal);
        let mut phase = 0.0;
        for _ in 0..2 {
            // the π pulse between the windows reverses the accumulated phase
            let white = window_var.sqrt() * rng.sample::<f64, _>(StandardNormal);
            phase = -phase + 2.0 * PI * delta * tau + white;
        }
        sum += phase.cos();
    }
    sum / trials as f64
}

/// Echo amplitudes over a list of total evolution times.
pub fn echo_trace<R: Rng + ?Sized>(t_total_ns: &[f64], noise: &EchoNoise, trials: usize, rng: &mut R) -> Vec<f64> {
    t_total_ns.iter().map(|&t| echo_amplitude(t, noise, trials, rng)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn noiseless_echo_is_perfect() {
        let mut rng = seeded(1);
        for t in [0.0, 10.0, 500.0] {
            assert_eq!(echo_amplitude(t, &EchoNoise::default(), 10, &mut rng), 1.0);
        }
    }

    #[test]
    fn static_noise_is_refocused() {
        let noise = EchoNoise { static_sigma: 11.25, t_echo: f64::INFINITY };
        let mut rng = seeded(2);
        for t in [5.0, 50.0, 400.0] {
            assert!((echo_amplitude(t, &noise, 1000, &mut rng) - 1.0).abs() < 1e-9);
        }
    }
}
