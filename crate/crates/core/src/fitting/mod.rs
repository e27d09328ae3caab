//! Nonlinear least-squares fitting of the experiment model families.
//!
//! [`fit`] runs Levenberg–Marquardt from a caller-supplied starting point;
//! [`initial_guess`] derives one from the data (spectral peak, analytic
//! signal envelope, log-log regression) when the caller has none.

mod lm;
mod models;
mod sampling;
mod spectrum;

pub use lm::{levenberg_marquardt, LeastSquaresProblem, LmOptions, LmReport};
pub use models::FitModel;
pub use sampling::{sampling_rate_study, RateSummary, SamplingNoise, SamplingStudy, SamplingStudyConfig};
pub use spectrum::{analytic_envelope, fft_spectrum, fft_spectrum_padded, Spectrum};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::controller::ExperimentTrace;
use crate::error::{invalid, Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: FitModel,
    pub params: Vec<f64>,
    /// `s²·(JᵀJ)⁻¹` with `s² = RSS/(n − p)`. NaN when the normal matrix is
    /// singular.
    pub covariance: DMatrix<f64>,
    pub sigmas: Vec<f64>,
    pub rss: f64,
    pub converged: bool,
    pub iterations: usize,
    pub message: String,
    /// RSS after each accepted step.
    pub history: Vec<f64>,
}

impl FitResult {
    pub fn param(&self, name: &str) -> Option<f64> {
        self.model.index_of(name).map(|i| self.params[i])
    }

    pub fn sigma(&self, name: &str) -> Option<f64> {
        self.model.index_of(name).map(|i| self.sigmas[i])
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.model.eval(x, &self.params)
    }
}

struct Problem<'a> {
    model: FitModel,
    x: &'a [f64],
    y: &'a [f64],
    /// Square roots of the point weights.
    root_w: Option<Vec<f64>>,
}

impl Problem<'_> {
    fn scale(&self, i: usize) -> f64 {
        self.root_w.as_ref().map_or(1.0, |w| w[i])
    }
}

impl LeastSquaresProblem for Problem<'_> {
    fn residuals(&self, p: &DVector<f64>) -> DVector<f64> {
        let p = p.as_slice();
        DVector::from_iterator(
            self.x.len(),
            self.x.iter().zip(self.y).enumerate().map(|(i, (&x, &y))| (self.model.eval(x, p) - y) * self.scale(i)),
        )
    }

    fn jacobian(&self, p: &DVector<f64>) -> DMatrix<f64> {
        let n = self.model.n_params();
        let mut jac = DMatrix::zeros(self.x.len(), n);
        let mut g = vec![0.0; n];
        for (i, &x) in self.x.iter().enumerate() {
            self.model.gradient(x, p.as_slice(), &mut g);
            let w = self.scale(i);
            for j in 0..n {
                jac[(i, j)] = g[j] * w;
            }
        }
        jac
    }
}

fn check_data(model: &FitModel, x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(invalid("y", format!("length {} does not match x length {}", y.len(), x.len())));
    }
    if x.len() < model.n_params() {
        return Err(Error::InsufficientData { points: x.len(), params: model.n_params() });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("x"));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("y"));
    }
    Ok(())
}

pub fn fit(model: FitModel, x: &[f64], y: &[f64], init: &[f64]) -> Result<FitResult> {
    fit_with(model, x, y, init, &LmOptions::default())
}

pub fn fit_with(model: FitModel, x: &[f64], y: &[f64], init: &[f64], opts: &LmOptions) -> Result<FitResult> {
    fit_impl(model, x, y, None, init, opts)
}

/// Weighted least squares, minimizing `Σ wᵢ·rᵢ²`. Only relative weights
/// matter: the covariance is still scaled by the weighted residual variance.
pub fn fit_weighted(model: FitModel, x: &[f64], y: &[f64], weights: &[f64], init: &[f64]) -> Result<FitResult> {
    if weights.len() != x.len() {
        return Err(invalid("weights", format!("length {} does not match x length {}", weights.len(), x.len())));
    }
    if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
        return Err(invalid("weights", "must be finite and positive"));
    }
    fit_impl(model, x, y, Some(weights.iter().map(|w| w.sqrt()).collect()), init, &LmOptions::default())
}

fn fit_impl(model: FitModel, x: &[f64], y: &[f64], root_w: Option<Vec<f64>>, init: &[f64], opts: &LmOptions) -> Result<FitResult> {
    check_data(&model, x, y)?;
    if init.len() != model.n_params() {
        return Err(invalid("init", format!("{} needs {} parameters, got {}", model.name(), model.n_params(), init.len())));
    }
    if init.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("init"));
    }
    let problem = Problem { model, x, y, root_w };
    let rep = levenberg_marquardt(&problem, DVector::from_column_slice(init), opts);

    let mut params = rep.params.as_slice().to_vec();
    let n = model.n_params();
    let dof = x.len().saturating_sub(n).max(1) as f64;
    let s2 = rep.rss / dof;
    let (covariance, singular) = match rep.normal_matrix.clone().try_inverse() {
        Some(inv) if inv.iter().all(|v| v.is_finite()) && (0..n).all(|i| inv[(i, i)] >= 0.0) => (inv * s2, false),
        _ => (DMatrix::from_element(n, n, f64::NAN), true),
    };
    // Symmetrize and move to the canonical gauge. Reflections only flip the
    // sign of the affected rows and columns, which leaves the diagonal alone.
    let covariance = (&covariance + covariance.transpose()) * 0.5;
    let before = params.clone();
    model.canonicalize(&mut params);
    let covariance = regauge_covariance(&model, &before, &params, covariance);
    let sigmas = (0..n).map(|i| covariance[(i, i)].sqrt()).collect();
    let (converged, message) = if singular {
        (false, format!("singular normal matrix ({})", rep.message))
    } else {
        (rep.converged, rep.message)
    };
    Ok(FitResult {
        model,
        params,
        covariance,
        sigmas,
        rss: rep.rss,
        converged,
        iterations: rep.iterations,
        message,
        history: rep.history,
    })
}

/// Applies the parameter permutation and sign flips of the canonical gauge to
/// the covariance.
fn regauge_covariance(model: &FitModel, before: &[f64], after: &[f64], mut cov: DMatrix<f64>) -> DMatrix<f64> {
    if let FitModel::TwoToneCosine = model {
        if before[1] > before[2] {
            cov.swap_rows(1, 2);
            cov.swap_columns(1, 2);
        }
    }
    let n = before.len();
    let mut sign = vec![1.0; n];
    for (i, s) in sign.iter_mut().enumerate() {
        let name = model.param_names()[i];
        if matches!(name, "A" | "T") && before[i] != 0.0 && after[i].signum() != before[i].signum() {
            *s = -1.0;
        }
    }
    DMatrix::from_fn(n, n, |i, j| cov[(i, j)] * sign[i] * sign[j])
}

/// Starting parameters for `model` derived from the data alone.
///
/// Oscillating models take their frequency from the zero-padded spectrum
/// peak, amplitude and offset from the data range and mean, the decay time
/// from the analytic-signal envelope and the phase from a projection onto the
/// seeded tone. Power laws and the exponential use straight-line fits in log
/// space.
pub fn initial_guess(model: FitModel, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    check_data(&model, x, y)?;
    let n = x.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let (lo, hi) = y.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let span = x[x.len() - 1] - x[0];
    match model {
        FitModel::GaussianCosine | FitModel::StretchedCosine => {
            let spec = fft_spectrum_padded(x, y, 16)?;
            let f = spec.peak_frequency().ok_or(Error::InsufficientData { points: x.len(), params: model.n_params() })?;
            let (a, t) = envelope_seed(x, y, mean, span)?;
            let a = a.max(0.5 * (hi - lo));
            let phi = projected_phase(x, y, mean, &[f]);
            Ok(match model {
                FitModel::GaussianCosine => vec![a, f, phi, t, mean],
                _ => vec![a, f, phi, t, 2.0, mean],
            })
        }
        FitModel::TwoToneCosine => {
            let spec = fft_spectrum_padded(x, y, 16)?;
            let peaks = spec.peaks(2);
            let (f1, f2) = match peaks.as_slice() {
                [a, b, ..] => (a.min(*b), a.max(*b)),
                [a] => (0.95 * a, 1.05 * a),
                [] => return Err(Error::InsufficientData { points: x.len(), params: model.n_params() }),
            };
            let (a, t) = envelope_seed(x, y, mean, span)?;
            let phi = projected_phase(x, y, mean, &[f1, f2]);
            Ok(vec![0.5 * a.max(0.5 * (hi - lo)), f1, f2, phi, t, 2.0, mean])
        }
        FitModel::GaussianDecay => {
            let tail = (y.len() / 10).max(1);
            let b = y[y.len() - tail..].iter().sum::<f64>() / tail as f64;
            let a = y[0] - b;
            let target = a / std::f64::consts::E;
            let t = x
                .iter()
                .zip(y)
                .find(|(_, &v)| (v - b).abs() <= target.abs())
                .map(|(&t, _)| t - x[0])
                .filter(|t| *t > 0.0)
                .unwrap_or(span.max(f64::MIN_POSITIVE));
            Ok(vec![a, t, b])
        }
        FitModel::ExpDetuning { eps0 } => {
            if y.iter().any(|v| *v <= 0.0) {
                return Err(invalid("y", "exponential seeding needs positive values"));
            }
            let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
            let (c0, slope) = line_fit(x, &ly)?;
            if slope >= 0.0 {
                return Err(invalid("y", "data do not decrease with detuning"));
            }
            let lambda = -1.0 / slope;
            Ok(vec![0.0, (c0 - eps0 / lambda).exp(), lambda])
        }
        FitModel::PowerLaw => {
            if x.iter().chain(y).any(|v| *v <= 0.0) {
                return Err(invalid("x", "power-law seeding needs positive data"));
            }
            let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
            let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
            let (c0, p) = line_fit(&lx, &ly)?;
            Ok(vec![c0.exp(), p])
        }
        FitModel::InverseSlopePower => {
            if x.iter().any(|v| *v == 0.0) || y.iter().any(|v| *v <= 0.0) {
                return Err(invalid("x", "inverse-power seeding needs nonzero slopes and positive times"));
            }
            let lx: Vec<f64> = x.iter().map(|v| v.abs().ln()).collect();
            let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
            let (c0, m) = line_fit(&lx, &ly)?;
            Ok(vec![c0.exp(), -m])
        }
    }
}

/// Seeds then fits.
pub fn fit_auto(model: FitModel, x: &[f64], y: &[f64]) -> Result<FitResult> {
    let init = initial_guess(model, x, y)?;
    fit(model, x, y, &init)
}

/// Fit of a measured trace against its time axis in µs (other abscissae
/// unchanged).
///
/// With shot noise the point variance `p(1 − p)/N` changes along the trace,
/// and an unweighted fit misjudges the parameter uncertainties. When the
/// trace records its shot count, the unweighted fit seeds a second one
/// weighted by the inverse binomial variance of the fitted curve.
pub fn fit_trace(model: FitModel, trace: &ExperimentTrace) -> Result<FitResult> {
    let x = trace.x_us();
    let first = fit_auto(model, &x, &trace.p_triplet)?;
    if trace.shots_per_point == 0 || !first.converged {
        return Ok(first);
    }
    let floor = 0.5 / trace.shots_per_point as f64;
    let w: Vec<f64> = x
        .iter()
        .map(|&t| {
            let m = first.eval(t).clamp(floor, 1.0 - floor);
            1.0 / (m * (1.0 - m))
        })
        .collect();
    fit_weighted(model, &x, &trace.p_triplet, &w, &first.params)
}

/// `σ_RL = √(σ_S² + σ_T₀²)` for a difference of two independently fitted
/// frequencies.
pub fn propagate_coupling_sigma(sigma_s: f64, sigma_t0: f64) -> Result<f64> {
    if !(sigma_s >= 0.0) || !(sigma_t0 >= 0.0) {
        return Err(invalid("sigma", "uncertainties must be non-negative"));
    }
    Ok(sigma_s.hypot(sigma_t0))
}

/// Ordinary least-squares line `y = c₀ + c₁x`.
pub fn line_fit(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    let n = x.len() as f64;
    if x.len() < 2 {
        return Err(Error::InsufficientData { points: x.len(), params: 2 });
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateAbscissae);
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    Ok((my - slope * mx, slope))
}

fn envelope_seed(x: &[f64], y: &[f64], mean: f64, span: f64) -> Result<(f64, f64)> {
    let centred: Vec<f64> = y.iter().map(|v| v - mean).collect();
    let env = analytic_envelope(&centred);
    // skip the edges, where the transform rings
    let edge = (env.len() / 20).max(1).min(env.len() - 1);
    let a = env[..=edge].iter().sum::<f64>() / (edge + 1) as f64;
    let target = a / std::f64::consts::E;
    let t = env
        .iter()
        .zip(x)
        .skip(edge)
        .find(|(e, _)| **e < target)
        .map(|(_, &t)| t - x[0])
        .unwrap_or(2.0 * span);
    Ok((a, t.max(span * 1e-3)))
}

fn projected_phase(x: &[f64], y: &[f64], mean: f64, freqs: &[f64]) -> f64 {
    let (mut c, mut s) = (0.0, 0.0);
    for (&t, &v) in x.iter().zip(y) {
        for f in freqs {
            let (sn, cs) = (std::f64::consts::TAU * f * t).sin_cos();
            c += (v - mean) * cs;
            s += (v - mean) * sn;
        }
    }
    (-s).atan2(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand_distr::{Distribution, Normal};

    fn grid(n: usize, dt: f64) -> Vec<f64> {
        (0..n).map(|i| i as f64 * dt).collect()
    }

    #[test]
    fn recovers_gaussian_cosine_from_nearby_start() {
        let truth = [0.4, 40.0, 0.3, 0.25, 0.5];
        let x = grid(200, 0.002);
        let y: Vec<f64> = x.iter().map(|&t| FitModel::GaussianCosine.eval(t, &truth)).collect();
        let init: Vec<f64> = truth.iter().enumerate().map(|(i, v)| v * if i % 2 == 0 { 1.08 } else { 0.93 }).collect();
        let r = fit(FitModel::GaussianCosine, &x, &y, &init).unwrap();
        assert!(r.converged, "{}", r.message);
        for (a, b) in r.params.iter().zip(&truth) {
            assert_relative_eq!(*a, *b, max_relative = 1e-6);
        }
        assert!(r.history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn sign_flipped_start_lands_in_canonical_gauge() {
        let truth = [0.3, 25.0, -1.0, 0.4, 0.1];
        let x = grid(150, 0.003);
        let y: Vec<f64> = x.iter().map(|&t| FitModel::GaussianCosine.eval(t, &truth)).collect();
        let init = [-0.3 * 1.05, 25.3, -1.0 + std::f64::consts::PI, -0.38, 0.1];
        let r = fit(FitModel::GaussianCosine, &x, &y, &init).unwrap();
        for (a, b) in r.params.iter().zip(&truth) {
            assert_relative_eq!(*a, *b, max_relative = 1e-6);
        }
    }

    #[test]
    fn automatic_seeding_finds_stretched_cosine() {
        let truth = [0.35, 160.0, 1.2, 0.08, 1.6, 0.45];
        let x = grid(300, 0.0005);
        let y: Vec<f64> = x.iter().map(|&t| FitModel::StretchedCosine.eval(t, &truth)).collect();
        let r = fit_auto(FitModel::StretchedCosine, &x, &y).unwrap();
        for (a, b) in r.params.iter().zip(&truth) {
            assert_relative_eq!(*a, *b, max_relative = 1e-6);
        }
    }

    #[test]
    fn automatic_seeding_resolves_two_tones() {
        let truth = [0.2, 137.0, 158.0, 0.4, 0.3, 2.0, 0.5];
        let x = grid(400, 0.001);
        let y: Vec<f64> = x.iter().map(|&t| FitModel::TwoToneCosine.eval(t, &truth)).collect();
        let r = fit_auto(FitModel::TwoToneCosine, &x, &y).unwrap();
        for (a, b) in r.params.iter().zip(&truth) {
            assert_relative_eq!(*a, *b, max_relative = 1e-6);
        }
    }

    #[test]
    fn seeded_decay_and_power_laws() {
        let x = grid(60, 0.01);
        let y: Vec<f64> = x.iter().map(|&t| FitModel::GaussianDecay.eval(t, &[0.4, 0.2, 0.5])).collect();
        let r = fit_auto(FitModel::GaussianDecay, &x, &y).unwrap();
        assert_relative_eq!(r.params[1], 0.2, max_relative = 1e-6);

        let xs: Vec<f64> = (1..12).map(|i| 0.1 * i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|&v| 3.0 * v.powf(2.14)).collect();
        let r = fit_auto(FitModel::PowerLaw, &xs, &ys).unwrap();
        assert_relative_eq!(r.params[1], 2.14, max_relative = 1e-9);

        let ys: Vec<f64> = xs.iter().map(|&v| 0.8 * v.powf(-1.0)).collect();
        let r = fit_auto(FitModel::InverseSlopePower, &xs, &ys).unwrap();
        assert_relative_eq!(r.params[1], 1.0, max_relative = 1e-9);

        let m = FitModel::ExpDetuning { eps0: 0.0 };
        let eps: Vec<f64> = (0..15).map(|i| -3.0 + 0.5 * i as f64).collect();
        let j: Vec<f64> = eps.iter().map(|&e| m.eval(e, &[5.0, 100.0, 2.0])).collect();
        let r = fit_auto(m, &eps, &j).unwrap();
        for (a, b) in r.params.iter().zip(&[5.0, 100.0, 2.0]) {
            assert_relative_eq!(*a, *b, max_relative = 1e-6);
        }
    }

    #[test]
    fn insufficient_and_non_finite_data_are_rejected() {
        let x = [0.0, 1.0, 2.0];
        assert!(matches!(fit(FitModel::GaussianCosine, &x, &x, &[1.0; 5]), Err(Error::InsufficientData { .. })));
        assert!(matches!(fit(FitModel::PowerLaw, &x, &[1.0, f64::NAN, 2.0], &[1.0, 1.0]), Err(Error::NonFinite(_))));
    }

    #[test]
    fn degenerate_model_reports_singular_normal_matrix() {
        // amplitude zero leaves f, φ and T unconstrained
        let x = grid(30, 0.01);
        let y = vec![0.5; 30];
        let r = fit(FitModel::GaussianCosine, &x, &y, &[0.0, 10.0, 0.0, 0.1, 0.5]).unwrap();
        assert!(!r.converged);
        assert!(r.message.contains("singular"));
    }

    #[test]
    fn frequency_uncertainty_shrinks_as_inverse_root_of_points() {
        let truth = [0.4, 60.0, 0.0, 0.2, 0.5];
        let noise = Normal::new(0.0, 0.02).unwrap();
        let mean_sigma = |n: usize| {
            let mut rng = seeded(11 + n as u64);
            let x = grid(n, 0.3 / n as f64);
            let mut acc = 0.0;
            for _ in 0..40 {
                let y: Vec<f64> = x.iter().map(|&t| FitModel::GaussianCosine.eval(t, &truth) + noise.sample(&mut rng)).collect();
                acc += fit(FitModel::GaussianCosine, &x, &y, &truth).unwrap().sigma("f").unwrap();
            }
            acc / 40.0
        };
        let ratio = mean_sigma(200) / mean_sigma(400);
        assert!((1.3..=1.6).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn covariance_is_symmetric_psd() {
        let truth = [0.4, 60.0, 0.0, 0.2, 0.5];
        let noise = Normal::new(0.0, 0.02).unwrap();
        let mut rng = seeded(5);
        let x = grid(200, 0.0015);
        let y: Vec<f64> = x.iter().map(|&t| FitModel::GaussianCosine.eval(t, &truth) + noise.sample(&mut rng)).collect();
        let r = fit(FitModel::GaussianCosine, &x, &y, &truth).unwrap();
        assert!(r.converged);
        let c = &r.covariance;
        assert!((c - c.transpose()).amax() < 1e-15);
        let eig = c.clone().symmetric_eigen();
        assert!(eig.eigenvalues.iter().all(|&l| l >= -1e-12 * c.amax()));
    }

    #[test]
    fn coupling_sigma_root_sum_square() {
        assert_eq!(propagate_coupling_sigma(0.0, 1.7).unwrap(), 1.7);
        assert_eq!(propagate_coupling_sigma(3.0, 4.0).unwrap(), 5.0);
        assert_relative_eq!(propagate_coupling_sigma(2.7, 2.7).unwrap(), 3.818, max_relative = 1e-4);
        assert!(propagate_coupling_sigma(-1.0, 0.0).is_err());
    }

    #[test]
    fn uniform_weights_reproduce_the_plain_fit() {
        let x: Vec<f64> = (0..40).map(|i| i as f64 * 0.1).collect();
        let y: Vec<f64> = x.iter().map(|t| 2.0 * t.powf(1.3) * (1.0 + 0.01 * (7.0 * t).sin())).collect();
        let init = [1.5, 1.0];
        let a = fit(FitModel::PowerLaw, &x[1..], &y[1..], &init).unwrap();
        let b = fit_weighted(FitModel::PowerLaw, &x[1..], &y[1..], &[3.0; 39], &init).unwrap();
        for i in 0..2 {
            assert_relative_eq!(a.params[i], b.params[i], max_relative = 1e-10);
            assert_relative_eq!(a.sigmas[i], b.sigmas[i], max_relative = 1e-8);
        }
        assert!(fit_weighted(FitModel::PowerLaw, &x, &y, &[1.0; 3], &init).is_err());
        assert!(fit_weighted(FitModel::PowerLaw, &x[1..], &y[1..], &[0.0; 39], &init).is_err());
    }

    #[test]
    fn weights_pull_the_fit_toward_trusted_points() {
        // a line through two clusters; the heavy cluster wins
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 1.0, 3.0, 3.0];
        let r = fit_weighted(FitModel::PowerLaw, &x[1..], &y[1..], &[1e6, 1.0, 1.0], &[1.0, 1.0]).unwrap();
        assert_abs_diff_eq!(r.eval(1.0), 1.0, epsilon = 1e-4);
    }
}
