//! The hidden environment: drifting nuclear field gradients and the
//! charge-noise coherence laws of the exchange interaction.
//!
//! Field gradients follow independent Ornstein–Uhlenbeck processes, one per
//! qubit, sampled with the exact transition density so arbitrarily long steps
//! are allowed. Charge noise on `J` only enters through the empirical
//! power laws `T ∝ |dJ/dε|^{-b}`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{ensure_finite, invalid, Error, Result};
use crate::model::Qubit;

/// Stationary statistics of the two field gradients.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NuclearBathConfig {
    /// MHz
    pub mean_left: f64,
    /// MHz
    pub mean_right: f64,
    /// Stationary standard deviation of each gradient, MHz.
    pub sigma: f64,
    /// Correlation time in seconds. `f64::INFINITY` freezes the world.
    pub tau_corr: f64,
}

impl Default for NuclearBathConfig {
    fn default() -> Self {
        Self {
            mean_left: 37.5,
            mean_right: 130.0,
            sigma: 11.25,
            tau_corr: 2.0,
        }
    }
}

impl NuclearBathConfig {
    pub fn frozen(mean_left: f64, mean_right: f64) -> Self {
        Self {
            mean_left,
            mean_right,
            sigma: 0.0,
            tau_corr: f64::INFINITY,
        }
    }

    pub fn mean(&self, qubit: Qubit) -> f64 {
        match qubit {
            Qubit::Left => self.mean_left,
            Qubit::Right => self.mean_right,
        }
    }

    /// Checks finiteness and positivity. A zero `sigma` is accepted as the
    /// noiseless limit.
    pub fn validate(&self) -> Result<()> {
        ensure_finite("mean_left", self.mean_left)?;
        ensure_finite("mean_right", self.mean_right)?;
        ensure_finite("sigma", self.sigma)?;
        if self.sigma < 0.0 {
            return Err(invalid("sigma", "must be non-negative"));
        }
        if self.tau_corr.is_nan() || self.tau_corr <= 0.0 {
            return Err(invalid("tau_corr", "must be positive"));
        }
        Ok(())
    }

    /// Whether the two means are at least two standard deviations apart, so
    /// that the two qubits stay spectrally distinguishable.
    pub fn well_separated(&self) -> bool {
        (self.mean_left - self.mean_right).abs() >= 2.0 * self.sigma
    }

    pub fn sample_stationary<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        let l: f64 = rng.sample(StandardNormal);
        let r: f64 = rng.sample(StandardNormal);
        (self.mean_left + self.sigma * l, self.mean_right + self.sigma * r)
    }

    pub fn ou_step<R: Rng + ?Sized>(&self, qubit: Qubit, current: f64, dt: f64, rng: &mut R) -> f64 {
        ou_step(self.mean(qubit), self.sigma, self.tau_corr, current, dt, rng)
    }
}

/// Exact Ornstein–Uhlenbeck transition over `dt` seconds.
pub fn ou_step<R: Rng + ?Sized>(mean: f64, sigma: f64, tau: f64, current: f64, dt: f64, rng: &mut R) -> f64 {
    debug_assert!(dt >= 0.0);
    if dt <= 0.0 || sigma == 0.0 && tau.is_infinite() {
        return current;
    }
    let decay = (-dt / tau).exp();
    // 1 − e^{−2x} without cancellation for small dt/tau
    let var_frac = -(-2.0 * dt / tau).exp_m1();
    let xi: f64 = rng.sample(StandardNormal);
    mean + (current - mean) * decay + sigma * var_frac.sqrt() * xi
}

/// `T₂* = 1/(√2·π·σ)` for a Gaussian quasi-static frequency spread `σ`.
pub fn nuclear_limited_t2(sigma: f64) -> f64 {
    1.0 / (std::f64::consts::SQRT_2 * PI * sigma)
}

/// Inverse of [`nuclear_limited_t2`].
pub fn sigma_for_t2(t2: f64) -> f64 {
    1.0 / (std::f64::consts::SQRT_2 * PI * t2)
}

/// `J(ε) = J₀ + J₁·exp((ε₀ − ε)/λ)`, MHz against mV.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExchangeProfile {
    pub j0: f64,
    pub j1: f64,
    pub eps0: f64,
    pub lambda_eps: f64,
}

impl Default for ExchangeProfile {
    fn default() -> Self {
        Self {
            j0: 5.0,
            j1: 100.0,
            eps0: 0.0,
            lambda_eps: 2.0,
        }
    }
}

impl ExchangeProfile {
    pub fn validate(&self) -> Result<()> {
        for (n, v) in [("j0", self.j0), ("j1", self.j1), ("eps0", self.eps0), ("lambda_eps", self.lambda_eps)] {
            ensure_finite(n, v)?;
        }
        if self.j1 <= 0.0 {
            return Err(invalid("j1", "must be positive"));
        }
        if self.lambda_eps <= 0.0 {
            return Err(invalid("lambda_eps", "must be positive"));
        }
        Ok(())
    }

    pub fn exchange_at(&self, eps: f64) -> f64 {
        self.j0 + self.j1 * ((self.eps0 - eps) / self.lambda_eps).exp()
    }

    /// `dJ/dε` in MHz/mV.
    pub fn slope(&self, eps: f64) -> f64 {
        -self.j1 / self.lambda_eps * ((self.eps0 - eps) / self.lambda_eps).exp()
    }

    /// Detuning at which the profile reaches `j`.
    pub fn detuning_for(&self, j: f64) -> Result<f64> {
        if j <= self.j0 {
            return Err(invalid("j", format!("{j} MHz is not above the residual exchange {} MHz", self.j0)));
        }
        Ok(self.eps0 - self.lambda_eps * ((j - self.j0) / self.j1).ln())
    }
}

/// Empirical charge-noise law `T = scale·|dJ/dε|^{−b}` for both coherence
/// times of one qubit. Scales carry units of µs·(MHz/mV)^b.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoherenceLaw {
    pub b: f64,
    pub scale_t2_star: f64,
    pub scale_echo: f64,
}

impl CoherenceLaw {
    /// Chooses the scales so that the law passes through `(t2_star, t_echo)`
    /// (µs) at exchange `j` (MHz).
    pub fn calibrated(profile: &ExchangeProfile, b: f64, j: f64, t2_star: f64, t_echo: f64) -> Result<Self> {
        let eps = profile.detuning_for(j)?;
        let s = profile.slope(eps).abs().powf(b);
        Ok(Self {
            b,
            scale_t2_star: t2_star * s,
            scale_echo: t_echo * s,
        })
    }
}

/// `(T₂*, T_echo)` in µs at detuning `eps`.
pub fn coherence_from_slope(profile: &ExchangeProfile, eps: f64, law: &CoherenceLaw) -> Result<(f64, f64)> {
    let slope = profile.slope(eps).abs();
    if slope == 0.0 || !slope.is_finite() {
        return Err(Error::ZeroSlope { eps });
    }
    let f = slope.powf(-law.b);
    Ok((law.scale_t2_star * f, law.scale_echo * f))
}

/// Charge-noise parameters of one qubit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QubitNoise {
    pub exchange: ExchangeProfile,
    pub coherence: CoherenceLaw,
}

impl QubitNoise {
    /// Coherence times at exchange `j` (MHz).
    pub fn coherence_at_exchange(&self, j: f64) -> Result<(f64, f64)> {
        let eps = self.exchange.detuning_for(j)?;
        coherence_from_slope(&self.exchange, eps, &self.coherence)
    }
}

/// Exchange at which the default coherence laws are pinned, MHz.
pub const CALIBRATION_EXCHANGE: f64 = 900.0;

/// Default per-qubit charge noise. At 900 MHz the echo times are 42.1 ns and
/// 18.4 ns, i.e. conditional phase-flip quality factors of 16 and 7 at a
/// 190 MHz coupling; the T₂* values sit a factor of three below.
pub fn default_qubit_noise(qubit: Qubit) -> QubitNoise {
    let exchange = ExchangeProfile::default();
    let (t2, techo) = match qubit {
        Qubit::Left => (0.0421 / 3.0, 0.0421),
        Qubit::Right => (0.0184 / 3.0, 0.0184),
    };
    let coherence = CoherenceLaw::calibrated(&exchange, 1.0, CALIBRATION_EXCHANGE, t2, techo)
        .expect("default calibration point lies on the default profile");
    QubitNoise { exchange, coherence }
}

/// The true world the estimator chases.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseWorld {
    pub dbz: [f64; 2],
    pub bath: NuclearBathConfig,
    pub charge: [QubitNoise; 2],
}

impl NoiseWorld {
    pub fn new(bath: NuclearBathConfig, dbz: [f64; 2]) -> Self {
        Self {
            dbz,
            bath,
            charge: [default_qubit_noise(Qubit::Left), default_qubit_noise(Qubit::Right)],
        }
    }

    /// A world at the bath means.
    pub fn at_mean(bath: NuclearBathConfig) -> Self {
        Self::new(bath, [bath.mean_left, bath.mean_right])
    }

    pub fn stationary<R: Rng + ?Sized>(bath: NuclearBathConfig, rng: &mut R) -> Self {
        let (l, r) = bath.sample_stationary(rng);
        Self::new(bath, [l, r])
    }

    pub fn dbz(&self, qubit: Qubit) -> f64 {
        self.dbz[index(qubit)]
    }

    /// Advance both gradients by `dt_us` microseconds of wall clock.
    pub fn advance<R: Rng + ?Sized>(&mut self, dt_us: f64, rng: &mut R) {
        let dt = dt_us * 1e-6;
        for q in [Qubit::Left, Qubit::Right] {
            let i = index(q);
            self.dbz[i] = self.bath.ou_step(q, self.dbz[i], dt, rng);
        }
    }
}

pub(crate) fn index(q: Qubit) -> usize {
    match q {
        Qubit::Left => 0,
        Qubit::Right => 1,
    }
}
