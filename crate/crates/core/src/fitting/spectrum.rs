//! Magnitude spectra and analytic-signal envelopes.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Single-sided magnitude spectrum. A cosine of amplitude `A` on a bin shows
/// a peak of height `A`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    /// MHz when the abscissa is in µs.
    pub frequency: Vec<f64>,
    pub magnitude: Vec<f64>,
}

impl Spectrum {
    pub fn peak_index(&self) -> Option<usize> {
        self.magnitude
            .iter()
            .enumerate()
            .skip(1)
            .max_by(|a, b| a.1.total_cmp(b.1))
            .filter(|(_, m)| **m > 0.0)
            .map(|(i, _)| i)
    }

    /// Peak frequency refined by a parabola through the three highest bins.
    pub fn peak_frequency(&self) -> Option<f64> {
        self.peak_index().map(|k| self.refine(k))
    }

    /// Up to `n` strongest local maxima, refined, strongest first.
    pub fn peaks(&self, n: usize) -> Vec<f64> {
        let m = &self.magnitude;
        let mut idx: Vec<usize> = (1..m.len())
            .filter(|&k| m[k] > 0.0 && m[k] >= m[k - 1] && (k + 1 == m.len() || m[k] > m[k + 1]))
            .collect();
        idx.sort_by(|&a, &b| m[b].total_cmp(&m[a]));
        idx.into_iter().take(n).map(|k| self.refine(k)).collect()
    }

    fn refine(&self, k: usize) -> f64 {
        let m = &self.magnitude;
        if k == 0 || k + 1 >= m.len() {
            return self.frequency[k];
        }
        let (a, b, c) = (m[k - 1], m[k], m[k + 1]);
        let denom = a - 2.0 * b + c;
        let shift = if denom != 0.0 { 0.5 * (a - c) / denom } else { 0.0 };
        let df = self.frequency[1] - self.frequency[0];
        self.frequency[k] + shift.clamp(-0.5, 0.5) * df
    }
}

fn spacing(x: &[f64]) -> Result<f64> {
    if x.len() < 2 {
        return Err(Error::InsufficientData { points: x.len(), params: 2 });
    }
    let dt = (x[x.len() - 1] - x[0]) / (x.len() - 1) as f64;
    if !(dt > 0.0) {
        return Err(Error::DegenerateAbscissae);
    }
    let worst = x.windows(2).map(|w| ((w[1] - w[0]) - dt).abs()).fold(0.0, f64::max) / dt;
    if worst > 1e-6 {
        return Err(Error::NonUniformSpacing(worst));
    }
    Ok(dt)
}

/// Spectrum of a uniformly sampled trace with the mean removed.
pub fn fft_spectrum(x: &[f64], y: &[f64]) -> Result<Spectrum> {
    fft_spectrum_padded(x, y, 1)
}

/// As [`fft_spectrum`], zero-padding the trace to `factor` times its length
/// for a finer (interpolated, not better resolved) frequency axis.
pub fn fft_spectrum_padded(x: &[f64], y: &[f64], factor: usize) -> Result<Spectrum> {
    if x.len() != y.len() {
        return Err(crate::error::invalid("y", "length does not match x"));
    }
    let dt = spacing(x)?;
    let n = y.len();
    let len = n * factor.max(1);
    let mean = y.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<Complex64> = y.iter().map(|v| Complex64::new(v - mean, 0.0)).collect();
    buf.resize(len, Complex64::new(0.0, 0.0));
    FftPlanner::new().plan_fft_forward(len).process(&mut buf);
    let half = len / 2 + 1;
    let frequency = (0..half).map(|k| k as f64 / (len as f64 * dt)).collect();
    let mut magnitude: Vec<f64> = buf[..half].iter().map(|c| 2.0 * c.norm() / n as f64).collect();
    magnitude[0] = 0.0;
    if len % 2 == 0 {
        magnitude[half - 1] *= 0.5;
    }
    Ok(Spectrum { frequency, magnitude })
}

/// `|y + i·H[y]|`, the instantaneous amplitude of a zero-mean trace.
pub fn analytic_envelope(y: &[f64]) -> Vec<f64> {
    let n = y.len();
    if n == 0 {
        return Vec::new();
    }
    let mut planner = FftPlanner::new();
    let mut buf: Vec<Complex64> = y.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    planner.plan_fft_forward(n).process(&mut buf);
    for (k, c) in buf.iter_mut().enumerate() {
        let w = if k == 0 || (n % 2 == 0 && k == n / 2) {
            1.0
        } else if k < n.div_ceil(2) {
            2.0
        } else {
            0.0
        };
        *c *= w;
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    buf.iter().map(|c| c.norm() / n as f64).collect()
}
