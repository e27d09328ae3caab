//! How the waveform generator's sampling rate limits the fitted frequency
//! of a fast exchange oscillation.
//!
//! Each trial samples one stretched-cosine trace at every rate, fits it and
//! compares the fitted frequency with the one from the finest rate. Two
//! noise sources act on every point: additive readout noise, and a timing
//! error of the generated pulse with a standard deviation proportional to the
//! sample period (edge placement and rise time both scale with it). The
//! first alone would make `σ_f` grow as `√(rate ratio)`; the second makes it
//! grow faster.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{fft_spectrum_padded, fit, fit_weighted, initial_guess, FitModel, FitResult};
use crate::error::{invalid, Error, Result};
use crate::rng::{stream, Purpose};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingNoise {
    /// Standard deviation of the additive noise on P_T.
    pub additive: f64,
    /// Timing error standard deviation in units of the sample period.
    pub jitter: f64,
}

impl Default for SamplingNoise {
    fn default() -> Self {
        Self { additive: 0.06, jitter: 0.1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingStudyConfig {
    /// StretchedCosine parameters `[A, f, φ, T, a, B]`, f in MHz, T in µs.
    pub truth: [f64; 6],
    /// Length of the sampled window, ns.
    pub duration_ns: f64,
    pub rates_gsps: Vec<f64>,
    pub noise: SamplingNoise,
    pub trials: usize,
}

impl Default for SamplingStudyConfig {
    fn default() -> Self {
        Self {
            truth: [0.4, 1116.15, 0.0, 0.012, 1.5, 0.5],
            duration_ns: 20.0,
            rates_gsps: vec![12.5, 2.5],
            noise: SamplingNoise::default(),
            trials: 1000,
        }
    }
}

impl SamplingStudyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.truth.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("truth"));
        }
        if !(self.truth[3] > 0.0 && self.truth[4] > 0.0) {
            return Err(invalid("truth", "decay time and exponent must be positive"));
        }
        if !(self.duration_ns > 0.0) {
            return Err(invalid("duration_ns", "must be positive"));
        }
        if self.rates_gsps.is_empty() {
            return Err(invalid("rates_gsps", "need at least one rate"));
        }
        if self.trials == 0 {
            return Err(invalid("trials", "must be at least 1"));
        }
        if !(self.noise.additive >= 0.0 && self.noise.jitter >= 0.0) {
            return Err(invalid("noise", "levels must be non-negative"));
        }
        let f = self.truth[1].abs();
        for &r in &self.rates_gsps {
            if !(r * 1e3 > 2.0 * f) {
                return Err(Error::SubNyquist { rate_gsps: r, freq_mhz: f });
            }
        }
        Ok(())
    }

    pub fn finest_rate(&self) -> f64 {
        self.rates_gsps.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// One noisy trace at `rate` GSa/s, abscissa in µs.
    pub fn sample<R: Rng + ?Sized>(&self, rate: f64, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
        let period_us = 1e-3 / rate;
        let n = (self.duration_ns * 1e-3 / period_us).floor() as usize + 1;
        let x: Vec<f64> = (0..n).map(|i| i as f64 * period_us).collect();
        let y = x
            .iter()
            .map(|&t| {
                let dt = self.noise.jitter * period_us * rng.sample::<f64, _>(StandardNormal);
                let eps = self.noise.additive * rng.sample::<f64, _>(StandardNormal);
                FitModel::StretchedCosine.eval((t + dt).max(0.0), &self.truth) + eps
            })
            .collect();
        (x, y)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateSummary {
    pub rate_gsps: f64,
    pub mean_f: f64,
    /// Mean reported one-sigma frequency uncertainty.
    pub mean_sigma_f: f64,
    /// Spread of the fitted frequency over trials.
    pub std_f: f64,
    /// Mean `|f − f_finest|` over trials.
    pub mean_abs_diff: f64,
    /// Fraction of trials with `|f − f_finest| ≤ 2σ_f` at this rate.
    pub within_two_sigma: f64,
    pub failed_fits: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplingStudy {
    pub rates: Vec<RateSummary>,
    /// Per trial and rate `(f, σ_f)`; NaN when the fit failed.
    pub fits: Vec<Vec<(f64, f64)>>,
}

impl SamplingStudy {
    pub fn rate(&self, gsps: f64) -> Option<&RateSummary> {
        self.rates.iter().find(|r| r.rate_gsps == gsps)
    }
}

/// Best of several starts: the three strongest spectral peaks, each with a
/// Gaussian and a simple exponential envelope. Near Nyquist a single seed
/// too often lands on a noise peak. Fits outside the first Nyquist zone are
/// aliases and are discarded. The winner is refined with weights from the
/// noise model evaluated on the fitted curve, since timing noise makes the
/// variance largest where the trace is steepest.
fn fit_frequency(x: &[f64], y: &[f64], noise: &SamplingNoise) -> (f64, f64) {
    let period = x[1] - x[0];
    let nyquist = 0.5 / period;
    let model = FitModel::StretchedCosine;
    let Ok(base) = initial_guess(model, x, y) else {
        return (f64::NAN, f64::NAN);
    };
    let accept = |r: &FitResult| r.converged && r.params[4] > 0.0 && r.params[1] > 0.0 && r.params[1] < nyquist;
    let peaks = fft_spectrum_padded(x, y, 16).map(|s| s.peaks(3)).unwrap_or_default();
    let mut best: Option<FitResult> = None;
    for f in peaks.into_iter().chain([base[1]]) {
        for a in [1.0, 2.0] {
            let mut init = base.clone();
            init[1] = f;
            init[4] = a;
            if let Ok(r) = fit(model, x, y, &init) {
                if accept(&r) && best.as_ref().is_none_or(|b| r.rss < b.rss) {
                    best = Some(r);
                }
            }
        }
    }
    let Some(best) = best else {
        return (f64::NAN, f64::NAN);
    };
    let h = 1e-3 * period;
    let w: Vec<f64> = x
        .iter()
        .map(|&t| {
            let slope = (model.eval(t + h, &best.params) - model.eval((t - h).max(0.0), &best.params)) / (t + h - (t - h).max(0.0));
            1.0 / (noise.additive.powi(2) + (slope * noise.jitter * period).powi(2))
        })
        .collect();
    match fit_weighted(model, x, y, &w, &best.params) {
        Ok(r) if w.iter().all(|v| v.is_finite()) && accept(&r) => (r.params[1], r.sigmas[1]),
        _ => (best.params[1], best.sigmas[1]),
    }
}

pub fn sampling_rate_study(cfg: &SamplingStudyConfig, seed: u64) -> Result<SamplingStudy> {
    cfg.validate()?;
    let fits: Vec<Vec<(f64, f64)>> = (0..cfg.trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, Purpose::SamplingStudy, i as u64);
            cfg.rates_gsps
                .iter()
                .map(|&r| {
                    let (x, y) = cfg.sample(r, &mut rng);
                    fit_frequency(&x, &y, &cfg.noise)
                })
                .collect()
        })
        .collect();

    let finest = cfg.rates_gsps.iter().position(|&r| r == cfg.finest_rate()).unwrap();
    let rates = cfg
        .rates_gsps
        .iter()
        .enumerate()
        .map(|(k, &rate)| {
            let ok: Vec<(f64, f64, f64)> = fits
                .iter()
                .filter(|t| t[k].0.is_finite() && t[finest].0.is_finite())
                .map(|t| (t[k].0, t[k].1, (t[k].0 - t[finest].0).abs()))
                .collect();
            let m = ok.len().max(1) as f64;
            let mean_f = ok.iter().map(|v| v.0).sum::<f64>() / m;
            let var = ok.iter().map(|v| (v.0 - mean_f).powi(2)).sum::<f64>() / (m - 1.0).max(1.0);
            RateSummary {
                rate_gsps: rate,
                mean_f,
                mean_sigma_f: ok.iter().map(|v| v.1).sum::<f64>() / m,
                std_f: var.sqrt(),
                mean_abs_diff: ok.iter().map(|v| v.2).sum::<f64>() / m,
                within_two_sigma: ok.iter().filter(|v| v.2 <= 2.0 * v.1).count() as f64 / m,
                failed_fits: cfg.trials - ok.len(),
            }
        })
        .collect();
    Ok(SamplingStudy { rates, fits })
}
