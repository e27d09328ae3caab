//! Capacitive coupling: extraction from conditional oscillations, the
//! Hund–Mulliken model of its magnitude, and derived figures of merit.
//!
//! Hund–Mulliken quantities are in GHz; measured couplings in MHz.

use nalgebra::{DMatrix, DVector, Matrix3, Matrix4};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::controller::{conditional_exchange_trace, ControlPrep, ExchangeSetup, ExperimentTrace};
use crate::readout::ReadoutConfig;

use crate::error::{invalid, Error, Result};
use crate::fitting::{fit, fit_trace, fit_weighted, initial_guess, levenberg_marquardt, FitModel, FitResult, LeastSquaresProblem, LmOptions};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HundMullikenParams {
    /// Intra-qubit tunnel couplings, GHz.
    pub t_left: f64,
    pub t_right: f64,
    /// Dipolar energy between the qubits, GHz.
    pub dipolar_d: f64,
    /// Intra-qubit exchange, GHz.
    pub j_left: f64,
    pub j_right: f64,
}

impl Default for HundMullikenParams {
    fn default() -> Self {
        Self { t_left: 11.9, t_right: 3.2, dipolar_d: 46.0, j_left: 0.9, j_right: 0.9 }
    }
}

impl HundMullikenParams {
    pub fn with_exchange(self, j_left: f64, j_right: f64) -> Self {
        Self { j_left, j_right, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("t_left", self.t_left), ("t_right", self.t_right), ("dipolar_d", self.dipolar_d), ("j_left", self.j_left), ("j_right", self.j_right)] {
            if !v.is_finite() {
                return Err(Error::NonFinite(name));
            }
        }
        if self.t_left <= 0.0 || self.t_right <= 0.0 {
            return Err(invalid("t", "tunnel couplings must be positive"));
        }
        if self.j_left < 0.0 || self.j_right < 0.0 {
            return Err(invalid("j", "exchange must be non-negative"));
        }
        if self.j_left == 0.0 || self.j_right == 0.0 {
            return Err(Error::SingularParameters("the t²/J diagonal terms diverge at J = 0"));
        }
        Ok(())
    }

    /// Largest `J/t`; the expansion needs this small.
    pub fn smallness(&self) -> f64 {
        (self.j_left / self.t_left).max(self.j_right / self.t_right)
    }
}

/// The two-qubit singlet-sector Hamiltonian in the basis of one (0, 1) or
/// doubly occupied configuration per qubit.
pub fn h_ss_matrix(p: &HundMullikenParams) -> Result<Matrix4<f64>> {
    p.validate()?;
    let (tl, tr, jl, jr) = (p.t_left, p.t_right, p.j_left, p.j_right);
    let ar = tr * tr / jr;
    let al = tl * tl / jl;
    #[rustfmt::skip]
    let m = Matrix4::new(
        0.0, tr, tl, 0.0,
        tr, -jr + ar, 0.0, tl,
        tl, 0.0, -jl + al, tr,
        0.0, tl, tr, -jl - jr + ar + al + p.dipolar_d,
    );
    Ok(m)
}

/// Lowest eigenvalue of [`h_ss_matrix`], GHz.
pub fn e_ss_exact(p: &HundMullikenParams) -> Result<f64> {
    let m = h_ss_matrix(p)?;
    Ok(m.symmetric_eigenvalues().min())
}

/// Coefficients `c₀..c₄` of `J_L·J_R·det(H_SS − E)` as a polynomial in
/// `x = E + J_L + J_R`. Every coefficient is a sum of like-signed terms, so
/// the small root is free of the cancellation that limits `E_SS + J_L + J_R`
/// when `t²/J` is large.
fn shifted_characteristic(p: &HundMullikenParams) -> [f64; 5] {
    let (jl, jr, tl, tr, d) = (p.j_left, p.j_right, p.t_left, p.t_right, p.dipolar_d);
    let (tl2, tr2) = (tl * tl, tr * tr);
    let (jl2, jr2) = (jl * jl, jr * jr);
    let (jl3, jr3) = (jl2 * jl, jr2 * jr);
    let (jl4, jr4) = (jl2 * jl2, jr2 * jr2);
    let c0 = d * jl * jr * (jl2 * jr + jl * jr2 + jl * tr2 + jr * tl2);
    let c1 = -(d * jl4 * jr2
        + 3.0 * d * jl3 * jr3
        + d * jl3 * jr * tr2
        + d * jl2 * jr4
        + d * jl2 * jr2 * tl2
        + d * jl2 * jr2 * tr2
        + d * jl * jr3 * tl2
        + d * jl * jr * tl2 * tr2
        + jl4 * jr3
        + jl4 * jr * tr2
        + jl3 * jr4
        + 2.0 * jl3 * jr2 * tr2
        + jl3 * tr2 * tr2
        + 2.0 * jl2 * jr3 * tl2
        + 2.0 * jl2 * jr * tl2 * tr2
        + jl * jr4 * tl2
        + 2.0 * jl * jr2 * tl2 * tr2
        + jl * tl2 * tr2 * tr2
        + jr3 * tl2 * tl2
        + jr * tl2 * tl2 * tr2)
        / (jl * jr);
    let c2 = (2.0 * d * jl3 * jr2
        + 2.0 * d * jl2 * jr3
        + d * jl2 * jr * tr2
        + d * jl * jr2 * tl2
        + jl4 * jr2
        + 3.0 * jl3 * jr3
        + 3.0 * jl3 * jr * tr2
        + jl2 * jr4
        + 2.0 * jl2 * jr2 * tl2
        + 2.0 * jl2 * jr2 * tr2
        + jl2 * tr2 * tr2
        + 3.0 * jl * jr3 * tl2
        + 3.0 * jl * jr * tl2 * tr2
        + jr2 * tl2 * tl2)
        / (jl * jr);
    let c3 = -d * jl * jr - 2.0 * jl2 * jr - 2.0 * jl * jr2 - 2.0 * jl * tr2 - 2.0 * jr * tl2;
    let c4 = jl * jr;
    [c0, c1, c2, c3, c4]
}

fn poly(c: &[f64; 5], x: f64) -> (f64, f64) {
    let v = (((c[4] * x + c[3]) * x + c[2]) * x + c[1]) * x + c[0];
    let dv = ((4.0 * c[4] * x + 3.0 * c[3]) * x + 2.0 * c[2]) * x + c[1];
    (v, dv)
}

/// `J_RL = E_SS + J_L + J_R`, GHz.
///
/// The eigensolver value is polished by Newton iteration on the shifted
/// characteristic polynomial, started just below the smallest root where the
/// iteration converges monotonically.
pub fn j_rl_exact(p: &HundMullikenParams) -> Result<f64> {
    let m = h_ss_matrix(p)?;
    let scale = m.amax();
    let rough = m.symmetric_eigenvalues().min() + p.j_left + p.j_right;
    let c = shifted_characteristic(p);
    let mut margin = 1e-12 * scale;
    let mut x = rough - margin;
    // Below the smallest root the quartic is positive.
    while poly(&c, x).0 <= 0.0 {
        margin *= 4.0;
        x = rough - margin;
        if margin > scale {
            return Ok(rough);
        }
    }
    for _ in 0..100 {
        let (v, dv) = poly(&c, x);
        if dv >= 0.0 {
            return Ok(rough);
        }
        let step = v / dv;
        x -= step;
        if step.abs() <= 1e-15 * x.abs().max(f64::MIN_POSITIVE) {
            break;
        }
    }
    Ok(x)
}

/// `J_RL` in the limit `D → ∞`, where the doubly occupied configuration
/// decouples. The exact model cannot exceed this at any dipolar energy.
pub fn j_rl_saturation(p: &HundMullikenParams) -> Result<f64> {
    let m = h_ss_matrix(p)?;
    let block: Matrix3<f64> = m.fixed_view::<3, 3>(0, 0).into();
    Ok(block.symmetric_eigenvalues().min() + p.j_left + p.j_right)
}

/// `∂J_RL/∂D`: the ground-state weight on the doubly occupied
/// configuration (Hellmann–Feynman).
pub fn dj_rl_dd(p: &HundMullikenParams) -> Result<f64> {
    let eig = h_ss_matrix(p)?.symmetric_eigen();
    let k = eig.eigenvalues.imin();
    Ok(eig.eigenvectors[(3, k)].powi(2))
}

/// How the standalone `D` of the printed expansion is read.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbativeReading {
    /// Every term as printed, including a bare `+D`. Does not vanish at
    /// `J = 0` and does not reduce to the quartic law.
    #[default]
    AsTranscribed,
    /// `D` multiplying the second fraction. This vanishes at `J = 0` and
    /// reduces to `D(J_L J_R)²/(t_L t_R)²` for symmetric parameters.
    DipolarProduct,
}

/// The perturbative expansion of `E_SS`, GHz.
pub fn e_ss_perturbative(p: &HundMullikenParams, reading: PerturbativeReading) -> f64 {
    j_rl_perturbative(p, reading) - p.j_left - p.j_right
}

/// The expansion with `J_L + J_R` added back analytically, which avoids
/// subtracting two nearly equal numbers at small exchange.
pub fn j_rl_perturbative(p: &HundMullikenParams, reading: PerturbativeReading) -> f64 {
    let (jl, jr, tl, tr, d) = (p.j_left, p.j_right, p.t_left, p.t_right, p.dipolar_d);
    let (tl2, tr2) = (tl * tl, tr * tr);
    let den = tl2 * jr + tr2 * jl;
    let bare = match reading {
        PerturbativeReading::AsTranscribed => d,
        PerturbativeReading::DipolarProduct => 0.0,
    };
    if den == 0.0 {
        return bare;
    }
    let first = -(2.0 * jl * jl * jr * jr + jl.powi(3) * jr * (tr2 / tl2) + jr.powi(3) * jl * (tl2 / tr2)) / den;
    let second = (2.0 * jl.powi(3) * jr.powi(3) + jl.powi(4) * jr * jr * (tr2 / tl2) + jr.powi(4) * jl * jl * (tl2 / tr2)) / (den * den);
    let rest = jr * jr * jl / tr2 + jl * jl * jr / tl2;
    match reading {
        PerturbativeReading::AsTranscribed => first + bare - second + rest,
        PerturbativeReading::DipolarProduct => first + d * second + rest,
    }
}

/// `D(J_L J_R)²/(t_L t_R)²`, GHz.
pub fn j_rl_asymptotic(p: &HundMullikenParams) -> f64 {
    p.dipolar_d * (p.j_left * p.j_right).powi(2) / (p.t_left * p.t_right).powi(2)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbativeCheck {
    /// `J_RL` from the eigensolver and from the expansion, GHz.
    pub exact: f64,
    pub perturbative: f64,
    /// `|perturbative − exact| / exact`.
    pub relative_error: f64,
    /// Error ratio between `J` and `J/2`; about 32 for a fifth-order remainder.
    pub halving_ratio: f64,
}

/// Compares the expansion of `J_RL` with the exact value at `p` and at half
/// the exchange.
pub fn perturbative_check(p: &HundMullikenParams, reading: PerturbativeReading) -> Result<PerturbativeCheck> {
    let err = |q: &HundMullikenParams| -> Result<(f64, f64, f64)> {
        let exact = j_rl_exact(q)?;
        let pert = j_rl_perturbative(q, reading);
        Ok((exact, pert, (pert - exact).abs()))
    };
    let (exact, perturbative, e1) = err(p)?;
    let (_, _, e2) = err(&p.with_exchange(0.5 * p.j_left, 0.5 * p.j_right))?;
    Ok(PerturbativeCheck { exact, perturbative, relative_error: e1 / exact.abs(), halving_ratio: e1 / e2 })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingPoint {
    /// MHz.
    pub j_left: f64,
    pub j_right: f64,
    pub j_coupling: f64,
    pub sigma_coupling: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingEstimate {
    /// MHz.
    pub j_coupling: f64,
    pub sigma: f64,
    pub j_eff_singlet: f64,
    pub j_eff_triplet: f64,
}

/// `J_eff = √(f² − ΔB_z²)` and its propagated uncertainty.
fn invert(f: f64, sigma_f: f64, dbz: f64) -> Result<(f64, f64)> {
    let f = f.abs();
    if f < dbz.abs() {
        return Err(Error::NonInvertible { f, dbz });
    }
    let j = (f * f - dbz * dbz).sqrt();
    let sigma = if j > 0.0 { f / j * sigma_f } else { f64::INFINITY };
    Ok((j, sigma))
}

/// Coupling from the oscillation frequencies fitted with the control in
/// |S⟩ and in |T₀⟩: `J_RL = J_eff(S) − J_eff(T₀)`.
pub fn extract_j_coupling(fit_s: &FitResult, fit_t0: &FitResult, dbz: f64) -> Result<CouplingEstimate> {
    let get = |r: &FitResult| -> Result<(f64, f64)> {
        if !r.converged {
            return Err(Error::NotConverged(r.message.clone()));
        }
        let f = r.param("f").ok_or_else(|| invalid("fit", format!("{} has no single frequency", r.model.name())))?;
        Ok((f, r.sigma("f").unwrap_or(0.0)))
    };
    let (fs, ss) = get(fit_s)?;
    let (ft, st) = get(fit_t0)?;
    extract_from_frequencies(fs, ss, ft, st, dbz)
}

pub fn extract_from_frequencies(f_s: f64, sigma_s: f64, f_t0: f64, sigma_t0: f64, dbz: f64) -> Result<CouplingEstimate> {
    let (js, ss) = invert(f_s, sigma_s, dbz)?;
    let (jt, st) = invert(f_t0, sigma_t0, dbz)?;
    Ok(CouplingEstimate { j_coupling: js - jt, sigma: crate::fitting::propagate_coupling_sigma(ss, st)?, j_eff_singlet: js, j_eff_triplet: jt })
}

/// Conditional traces of one target qubit and the coupling extracted from them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShiftMeasurement {
    pub singlet: ExperimentTrace,
    pub triplet: ExperimentTrace,
    pub fit_singlet: FitResult,
    pub fit_triplet: FitResult,
    pub estimate: CouplingEstimate,
}

/// Stretched-cosine fit of a trace against its time axis in µs, the fit
/// used for every conditional trace.
pub fn fit_exchange_trace(trace: &ExperimentTrace) -> Result<FitResult> {
    fit_trace(FitModel::StretchedCosine, trace)
}

/// Simulates the target with the control in |S⟩ and in |T₀⟩, fits both
/// traces and extracts `J_RL`.
pub fn measure_conditional_shift<R: Rng + ?Sized>(
    setup: &ExchangeSetup,
    t_exch_ns: &[f64],
    readout: &ReadoutConfig,
    shots: usize,
    rng: &mut R,
) -> Result<ShiftMeasurement> {
    setup.params.validate()?;
    let singlet = conditional_exchange_trace(t_exch_ns, ControlPrep::Singlet, setup, readout, shots, rng);
    let triplet = conditional_exchange_trace(t_exch_ns, ControlPrep::Triplet, setup, readout, shots, rng);
    let fit_singlet = fit_exchange_trace(&singlet)?;
    let fit_triplet = fit_exchange_trace(&triplet)?;
    let estimate = extract_j_coupling(&fit_singlet, &fit_triplet, setup.target_dbz())?;
    Ok(ShiftMeasurement { singlet, triplet, fit_singlet, fit_triplet, estimate })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    /// `J_RL = a·(J_L J_R)^p` with everything in MHz.
    pub prefactor: f64,
    pub exponent: f64,
    pub sigma_exponent: f64,
    pub fit: FitResult,
}

/// Least-squares fit of `J_RL` against `J_L·J_R`, weighted by `1/σ²` when
/// every point carries an uncertainty.
pub fn fit_power_law(points: &[CouplingPoint]) -> Result<PowerLawFit> {
    if points.len() < 3 {
        return Err(Error::InsufficientData { points: points.len(), params: 3 });
    }
    let x: Vec<f64> = points.iter().map(|p| p.j_left * p.j_right).collect();
    let y: Vec<f64> = points.iter().map(|p| p.j_coupling).collect();
    if x.iter().chain(&y).any(|v| !(*v > 0.0)) {
        return Err(invalid("points", "exchange and coupling values must be positive"));
    }
    if x.iter().all(|v| *v == x[0]) {
        return Err(Error::DegenerateAbscissae);
    }
    // Fit in units of the mean abscissa so that the prefactor stays O(1).
    let scale = x.iter().sum::<f64>() / x.len() as f64;
    let xs: Vec<f64> = x.iter().map(|v| v / scale).collect();
    let init = initial_guess(FitModel::PowerLaw, &xs, &y)?;
    let mut r = if points.iter().all(|p| p.sigma_coupling > 0.0) {
        let w: Vec<f64> = points.iter().map(|p| p.sigma_coupling.powi(-2)).collect();
        fit_weighted(FitModel::PowerLaw, &xs, &y, &w, &init)?
    } else {
        fit(FitModel::PowerLaw, &xs, &y, &init)?
    };
    let p = r.params[1];
    let jac = scale.powf(-p);
    r.params[0] *= jac;
    // d a / d a' = s^{-p}, d a / d p = −a ln s
    let a = r.params[0];
    let g = [jac, -a * scale.ln()];
    let c = r.covariance.clone();
    let var_a = g[0] * g[0] * c[(0, 0)] + 2.0 * g[0] * g[1] * c[(0, 1)] + g[1] * g[1] * c[(1, 1)];
    let cov_ap = g[0] * c[(0, 1)] + g[1] * c[(1, 1)];
    r.covariance = DMatrix::from_row_slice(2, 2, &[var_a, cov_ap, cov_ap, c[(1, 1)]]);
    r.sigmas = vec![var_a.sqrt(), c[(1, 1)].sqrt()];
    Ok(PowerLawFit { prefactor: a, exponent: p, sigma_exponent: r.sigmas[1], fit: r })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DipolarFit {
    /// GHz.
    pub dipolar_d: f64,
    pub sigma_d: f64,
    pub rss: f64,
    pub converged: bool,
    pub message: String,
}

struct DipolarProblem<'a> {
    base: HundMullikenParams,
    points: &'a [CouplingPoint],
}

impl DipolarProblem<'_> {
    fn at(&self, d: f64, pt: &CouplingPoint) -> HundMullikenParams {
        HundMullikenParams { dipolar_d: d, j_left: pt.j_left * 1e-3, j_right: pt.j_right * 1e-3, ..self.base }
    }
}

impl LeastSquaresProblem for DipolarProblem<'_> {
    fn residuals(&self, p: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.points.len(),
            self.points.iter().map(|pt| j_rl_exact(&self.at(p[0], pt)).map_or(f64::NAN, |j| j * 1e3 - pt.j_coupling)),
        )
    }

    fn jacobian(&self, p: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_iterator(
            self.points.len(),
            1,
            self.points.iter().map(|pt| dj_rl_dd(&self.at(p[0], pt)).map_or(f64::NAN, |g| g * 1e3)),
        )
    }
}

/// One-parameter least-squares fit of the dipolar energy with the exact
/// model, tunnel couplings held at `base`.
///
/// Fails when the data lie above what the exact model can reach at any `D`;
/// the fit would then run off to infinity.
pub fn fit_dipolar_d(points: &[CouplingPoint], base: &HundMullikenParams, init_d: f64) -> Result<DipolarFit> {
    if points.is_empty() {
        return Err(Error::InsufficientData { points: 0, params: 1 });
    }
    for pt in points {
        let sat = j_rl_saturation(&HundMullikenParams { j_left: pt.j_left * 1e-3, j_right: pt.j_right * 1e-3, ..*base })? * 1e3;
        if pt.j_coupling >= sat {
            return Err(Error::NotConverged(format!(
                "J_RL = {} MHz at J_L = {} MHz, J_R = {} MHz exceeds the D → ∞ limit of the exact model ({sat:.2} MHz)",
                pt.j_coupling, pt.j_left, pt.j_right
            )));
        }
    }
    let problem = DipolarProblem { base: *base, points };
    let rep = levenberg_marquardt(&problem, DVector::from_element(1, init_d), &LmOptions::default());
    let dof = points.len().saturating_sub(1).max(1) as f64;
    let n = rep.normal_matrix[(0, 0)];
    let sigma_d = if n > 0.0 { (rep.rss / dof / n).sqrt() } else { f64::INFINITY };
    Ok(DipolarFit { dipolar_d: rep.params[0], sigma_d, rss: rep.rss, converged: rep.converged, message: rep.message })
}

/// `Q = 2·J_RL·T` for dephasing time `T₂*` and echo time `T_echo` (µs, with
/// `J_RL` in MHz).
pub fn quality_factors(j_coupling: f64, t2_star: f64, t_echo: f64) -> Result<(f64, f64)> {
    if !(j_coupling > 0.0 && t2_star > 0.0 && t_echo > 0.0) {
        return Err(invalid("quality_factors", "coupling and times must be positive"));
    }
    Ok((2.0 * j_coupling * t2_star, 2.0 * j_coupling * t_echo))
}

/// Conditional-phase fidelity bound `exp(−1/Q_echo)`.
pub fn cphase_fidelity(q_echo: f64) -> Result<f64> {
    if !(q_echo > 0.0) {
        return Err(invalid("q_echo", "must be positive"));
    }
    Ok((-1.0 / q_echo).exp())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HundMullikenRow {
    /// GHz.
    pub j_left: f64,
    pub j_right: f64,
    pub j_rl_exact: f64,
    pub j_rl_perturbative: f64,
    pub j_rl_asymptotic: f64,
}

/// Exact, expanded and asymptotic `J_RL` along a symmetric exchange sweep.
pub fn hund_mulliken_sweep(base: &HundMullikenParams, j_values: &[f64], reading: PerturbativeReading) -> Result<Vec<HundMullikenRow>> {
    j_values
        .iter()
        .map(|&j| {
            let p = base.with_exchange(j, j);
            Ok(HundMullikenRow {
                j_left: j,
                j_right: j,
                j_rl_exact: j_rl_exact(&p)?,
                j_rl_perturbative: j_rl_perturbative(&p, reading),
                j_rl_asymptotic: j_rl_asymptotic(&p),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    fn hm(jl: f64, jr: f64) -> HundMullikenParams {
        HundMullikenParams::default().with_exchange(jl, jr)
    }

    #[test]
    fn matrix_entries() {
        let m = h_ss_matrix(&hm(0.9, 0.9)).unwrap();
        assert_eq!(m, m.transpose());
        assert_abs_diff_eq!(m[(1, 1)], -0.9 + 3.2 * 3.2 / 0.9, epsilon = 1e-12);
        assert_abs_diff_eq!(m[(1, 1)], 10.478, epsilon = 1e-3);
        assert_eq!(m[(0, 1)], 3.2);
        assert_eq!(m[(0, 2)], 11.9);
        assert_eq!(m[(0, 3)], 0.0);
        assert_eq!(m[(1, 2)], 0.0);
    }

    #[test]
    fn symmetric_parameters_swap_symmetry() {
        let p = HundMullikenParams { t_left: 5.0, t_right: 5.0, dipolar_d: 30.0, j_left: 0.4, j_right: 0.4 };
        let m = h_ss_matrix(&p).unwrap();
        let perm = [0, 2, 1, 3];
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(m[(i, j)], m[(perm[i], perm[j])]);
            }
        }
    }

    #[test]
    fn zero_exchange_is_singular() {
        assert!(matches!(h_ss_matrix(&hm(0.0, 0.5)), Err(Error::SingularParameters(_))));
    }

    #[test]
    fn eigenvalue_is_within_gershgorin_bounds() {
        let m = h_ss_matrix(&hm(0.7, 0.4)).unwrap();
        let lo = (0..4).map(|i| m[(i, i)] - (0..4).filter(|&j| j != i).map(|j| m[(i, j)].abs()).sum::<f64>()).fold(f64::INFINITY, f64::min);
        let e = e_ss_exact(&hm(0.7, 0.4)).unwrap();
        assert!(e >= lo && e <= m.diagonal().min());
    }

    #[test]
    fn polished_root_agrees_with_eigensolver_where_both_are_accurate() {
        for (jl, jr) in [(0.9, 0.9), (0.5, 0.3), (1.0, 0.2)] {
            let p = hm(jl, jr);
            let direct = e_ss_exact(&p).unwrap() + jl + jr;
            assert_abs_diff_eq!(j_rl_exact(&p).unwrap(), direct, epsilon = 1e-11);
        }
    }

    #[test]
    fn coupling_vanishes_with_exchange() {
        let mut prev = f64::INFINITY;
        for k in 3..=5 {
            let j = 10f64.powi(-k);
            let v = j_rl_exact(&hm(j, j)).unwrap();
            assert!(v >= 0.0 && v < prev * 1e-3);
            prev = v;
        }
        assert!(prev < 1e-15);
    }

    #[test]
    fn coupling_is_monotone_and_nonnegative_over_the_measured_range() {
        let mut prev = 0.0;
        for k in 1..=100 {
            let j = 0.01 * k as f64;
            let v = j_rl_exact(&hm(j, j)).unwrap();
            assert!(v >= prev, "J = {j}");
            prev = v;
        }
    }

    #[test]
    fn small_exchange_slope_is_two() {
        for k in [100.0, 300.0, 1000.0] {
            let j = 3.2 / k;
            let a = j_rl_exact(&hm(j, j)).unwrap();
            let b = j_rl_exact(&hm(j * 1.01, j * 1.01)).unwrap();
            let slope = (b / a).ln() / (1.01f64 * 1.01).ln();
            assert_abs_diff_eq!(slope, 2.0, epsilon = 0.02);
        }
    }

    #[test]
    fn asymptotic_form() {
        assert_eq!(j_rl_asymptotic(&HundMullikenParams { j_left: 0.0, ..Default::default() }), 0.0);
        assert_relative_eq!(j_rl_asymptotic(&hm(0.9, 0.9)) * 1e3, 20.8, max_relative = 2e-3);
        assert_relative_eq!(j_rl_asymptotic(&hm(0.6, 0.4)) * 16.0, j_rl_asymptotic(&hm(1.2, 0.8)), max_relative = 1e-12);
    }

    #[test]
    fn asymptotic_ratio_tends_to_one_for_symmetric_tunnelling() {
        // With equal tunnel couplings the quartic law is the leading term.
        let base = HundMullikenParams { t_left: 5.0, t_right: 5.0, dipolar_d: 40.0, j_left: 0.0, j_right: 0.0 };
        let r = |j: f64| j_rl_exact(&base.with_exchange(j, j)).unwrap() / j_rl_asymptotic(&base.with_exchange(j, j));
        assert!((r(0.005) - 1.0).abs() < 0.01);
        assert!((r(0.005) - 1.0).abs() < (r(0.05) - 1.0).abs());
    }

    #[test]
    fn exact_model_saturates_below_measured_coupling() {
        let p = hm(0.9, 0.9);
        let sat = j_rl_saturation(&p).unwrap();
        assert!(j_rl_exact(&p).unwrap() < sat);
        let big = HundMullikenParams { dipolar_d: 1e7, ..p };
        assert_relative_eq!(j_rl_exact(&big).unwrap(), sat, max_relative = 1e-3);
        assert!(sat * 1e3 < 190.0);
    }

    #[test]
    fn hellmann_feynman_matches_finite_difference() {
        let p = hm(0.6, 0.8);
        let h = 1e-3;
        let fd = (j_rl_exact(&HundMullikenParams { dipolar_d: p.dipolar_d + h, ..p }).unwrap()
            - j_rl_exact(&HundMullikenParams { dipolar_d: p.dipolar_d - h, ..p }).unwrap())
            / (2.0 * h);
        assert_relative_eq!(dj_rl_dd(&p).unwrap(), fd, max_relative = 1e-6);
    }

    #[test]
    fn perturbative_readings() {
        // printed form keeps a bare D at zero exchange
        let zero = HundMullikenParams { j_left: 0.0, j_right: 0.0, ..Default::default() };
        assert_eq!(e_ss_perturbative(&zero, PerturbativeReading::AsTranscribed), zero.dipolar_d);
        assert_eq!(e_ss_perturbative(&zero, PerturbativeReading::DipolarProduct), 0.0);

        let sym = HundMullikenParams { t_left: 4.0, t_right: 4.0, dipolar_d: 30.0, j_left: 0.04, j_right: 0.04 };
        let check = perturbative_check(&sym, PerturbativeReading::DipolarProduct).unwrap();
        assert!(check.relative_error < 0.05);
        assert!((16.0..=64.0).contains(&check.halving_ratio), "{}", check.halving_ratio);
        let printed = perturbative_check(&sym, PerturbativeReading::AsTranscribed).unwrap();
        assert!(printed.relative_error > 100.0);
        // the remainder is fifth order at the measured tunnel couplings too
        let measured = perturbative_check(&hm(0.09, 0.09), PerturbativeReading::DipolarProduct).unwrap();
        assert!((16.0..=64.0).contains(&measured.halving_ratio), "{}", measured.halving_ratio);
    }

    #[test]
    fn extraction_examples() {
        let e = extract_from_frequencies(4002.1, 2.0, 3961.5, 2.0, 130.0).unwrap();
        assert_abs_diff_eq!(e.j_coupling, 40.6, epsilon = 0.05);
        assert_abs_diff_eq!(e.sigma, 8f64.sqrt(), epsilon = 0.01);
        let e = extract_from_frequencies(150.0, 0.1, 120.0, 0.1, 0.0).unwrap();
        assert_eq!(e.j_coupling, 30.0);
        assert!(matches!(extract_from_frequencies(100.0, 1.0, 90.0, 1.0, 95.0), Err(Error::NonInvertible { .. })));
    }

    #[test]
    fn power_law_recovers_exponent() {
        let pts: Vec<CouplingPoint> = (0..8)
            .map(|k| {
                let j = 300.0 + 80.0 * k as f64;
                CouplingPoint { j_left: j, j_right: j, j_coupling: 2e-9 * (j * j).powf(2.14), sigma_coupling: 0.0 }
            })
            .collect();
        let f = fit_power_law(&pts).unwrap();
        assert_relative_eq!(f.exponent, 2.14, max_relative = 1e-6);
        assert_relative_eq!(f.prefactor, 2e-9, max_relative = 1e-5);
    }

    #[test]
    fn power_law_needs_distinct_abscissae() {
        let p = CouplingPoint { j_left: 1.0, j_right: 2.0, j_coupling: 3.0, sigma_coupling: 0.0 };
        assert!(matches!(fit_power_law(&[p, p, p]), Err(Error::DegenerateAbscissae)));
    }

    #[test]
    fn dipolar_fit_recovers_generating_value() {
        let base = HundMullikenParams::default();
        let pts: Vec<CouplingPoint> = [0.3, 0.5, 0.7, 0.9]
            .iter()
            .map(|&j| CouplingPoint { j_left: j * 1e3, j_right: j * 1e3, j_coupling: j_rl_exact(&base.with_exchange(j, j)).unwrap() * 1e3, sigma_coupling: 0.0 })
            .collect();
        let f = fit_dipolar_d(&pts, &base, 20.0).unwrap();
        assert_relative_eq!(f.dipolar_d, 46.0, max_relative = 1e-6);
    }

    #[test]
    fn dipolar_fit_refuses_unreachable_data() {
        let pts = [CouplingPoint { j_left: 900.0, j_right: 900.0, j_coupling: 190.0, sigma_coupling: 5.0 }];
        assert!(matches!(fit_dipolar_d(&pts, &HundMullikenParams::default(), 46.0), Err(Error::NotConverged(_))));
    }

    #[test]
    fn figures_of_merit() {
        let (_, q_l) = quality_factors(190.0, 0.1, 0.0421).unwrap();
        let (_, q_r) = quality_factors(190.0, 0.1, 0.0184).unwrap();
        assert_abs_diff_eq!(q_l, 16.0, epsilon = 0.05);
        assert_abs_diff_eq!(q_r, 7.0, epsilon = 0.05);
        assert_abs_diff_eq!(cphase_fidelity(16.0).unwrap(), 0.9394, epsilon = 1e-4);
        assert_abs_diff_eq!(cphase_fidelity(7.0).unwrap(), 0.8669, epsilon = 1e-4);
        assert_abs_diff_eq!(cphase_fidelity(1e12).unwrap(), 1.0, epsilon = 1e-11);
    }

    proptest! {
        #[test]
        fn ground_energy_is_a_lower_bound_on_rayleigh_quotients(
            jl in 0.01..1.0f64, jr in 0.01..1.0f64, tl in 1.0..15.0f64, tr in 1.0..15.0f64, d in 1.0..100.0f64,
            v in proptest::array::uniform4(-1.0..1.0f64),
        ) {
            let p = HundMullikenParams { t_left: tl, t_right: tr, dipolar_d: d, j_left: jl, j_right: jr };
            let m = h_ss_matrix(&p).unwrap();
            let v = nalgebra::Vector4::from(v);
            prop_assume!(v.norm() > 1e-3);
            let q = (v.transpose() * m * v)[0] / v.norm_squared();
            prop_assert!(q >= e_ss_exact(&p).unwrap() - 1e-10 * m.amax());
        }

        #[test]
        fn coupling_nonnegative_in_the_operating_regime(jl in 0.001..1.0f64, jr in 0.001..1.0f64) {
            prop_assert!(j_rl_exact(&hm(jl, jr)).unwrap() >= 0.0);
        }

        #[test]
        fn power_law_fit_is_scale_equivariant(s in 0.1..10.0f64) {
            let pts: Vec<CouplingPoint> = (0..6)
                .map(|k| {
                    let j = 200.0 + 100.0 * k as f64;
                    let noise = if k % 2 == 0 { 1.03 } else { 0.98 };
                    CouplingPoint { j_left: j, j_right: j, j_coupling: 1e-8 * (j * j).powf(2.0) * noise, sigma_coupling: 0.0 }
                })
                .collect();
            let scaled: Vec<CouplingPoint> = pts.iter().map(|p| CouplingPoint { j_left: p.j_left * s, ..*p }).collect();
            let a = fit_power_law(&pts).unwrap();
            let b = fit_power_law(&scaled).unwrap();
            prop_assert!((a.exponent - b.exponent).abs() < 1e-7);
            prop_assert!((b.prefactor / (a.prefactor * s.powf(-a.exponent)) - 1.0).abs() < 1e-6);
        }
    }
}
