//! Model families with analytic parameter gradients.
//!
//! Time-like abscissae are in µs and frequencies in MHz, so `f·t` is in
//! cycles.

use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "model")]
pub enum FitModel {
    /// `A·cos(2πft+φ)·exp(−(t/T)²) + B`; params `[A, f, φ, T, B]`.
    GaussianCosine,
    /// `A·exp(−(t/T)²) + B`; params `[A, T, B]`.
    GaussianDecay,
    /// `A·cos(2πft+φ)·exp(−(t/T)^a) + B`; params `[A, f, φ, T, a, B]`.
    StretchedCosine,
    /// `A·(cos(2πf₁t+φ) + cos(2πf₂t+φ))·exp(−(t/T)^a) + B`;
    /// params `[A, f₁, f₂, φ, T, a, B]`.
    TwoToneCosine,
    /// `J₀ + J₁·exp((ε₀ − ε)/λ)` with `ε₀` held fixed, since it only
    /// rescales `J₁`; params `[J₀, J₁, λ]`.
    ExpDetuning { eps0: f64 },
    /// `a·x^p`; params `[a, p]`.
    PowerLaw,
    /// `c·|x|^(−b)`; params `[c, b]`.
    InverseSlopePower,
}

impl FitModel {
    pub fn name(&self) -> &'static str {
        match self {
            Self::GaussianCosine => "gaussian_cosine",
            Self::GaussianDecay => "gaussian_decay",
            Self::StretchedCosine => "stretched_cosine",
            Self::TwoToneCosine => "two_tone_cosine",
            Self::ExpDetuning { .. } => "exp_detuning",
            Self::PowerLaw => "power_law",
            Self::InverseSlopePower => "inverse_slope_power",
        }
    }

    /// Model with the given [`name`](Self::name); `exp_detuning` comes with
    /// `eps0 = 0`.
    pub fn from_name(name: &str) -> Option<Self> {
        [
            Self::GaussianCosine,
            Self::GaussianDecay,
            Self::StretchedCosine,
            Self::TwoToneCosine,
            Self::ExpDetuning { eps0: 0.0 },
            Self::PowerLaw,
            Self::InverseSlopePower,
        ]
        .into_iter()
        .find(|m| m.name() == name)
    }

    pub fn param_names(&self) -> &'static [&'static str] {
        match self {
            Self::GaussianCosine => &["A", "f", "phi", "T", "B"],
            Self::GaussianDecay => &["A", "T", "B"],
            Self::StretchedCosine => &["A", "f", "phi", "T", "a", "B"],
            Self::TwoToneCosine => &["A", "f1", "f2", "phi", "T", "a", "B"],
            Self::ExpDetuning { .. } => &["J0", "J1", "lambda"],
            Self::PowerLaw => &["a", "p"],
            Self::InverseSlopePower => &["c", "b"],
        }
    }

    pub fn n_params(&self) -> usize {
        self.param_names().len()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.param_names().iter().position(|n| *n == name)
    }

    pub fn eval(&self, x: f64, p: &[f64]) -> f64 {
        match *self {
            Self::GaussianCosine => p[0] * (TAU * p[1] * x + p[2]).cos() * (-(x / p[3]).powi(2)).exp() + p[4],
            Self::GaussianDecay => p[0] * (-(x / p[1]).powi(2)).exp() + p[2],
            Self::StretchedCosine => p[0] * (TAU * p[1] * x + p[2]).cos() * stretched(x, p[3], p[4]) + p[5],
            Self::TwoToneCosine => {
                p[0] * ((TAU * p[1] * x + p[3]).cos() + (TAU * p[2] * x + p[3]).cos()) * stretched(x, p[4], p[5]) + p[6]
            }
            Self::ExpDetuning { eps0 } => p[0] + p[1] * ((eps0 - x) / p[2]).exp(),
            Self::PowerLaw => p[0] * x.powf(p[1]),
            Self::InverseSlopePower => p[0] * x.abs().powf(-p[1]),
        }
    }

    /// `∂model/∂p` at `x`.
    pub fn gradient(&self, x: f64, p: &[f64], out: &mut [f64]) {
        match *self {
            Self::GaussianCosine => {
                let (a, f, phi, t) = (p[0], p[1], p[2], p[3]);
                let arg = TAU * f * x + phi;
                let (s, c) = arg.sin_cos();
                let e = (-(x / t).powi(2)).exp();
                out[0] = c * e;
                out[1] = -a * s * e * TAU * x;
                out[2] = -a * s * e;
                out[3] = a * c * e * 2.0 * x * x / (t * t * t);
                out[4] = 1.0;
            }
            Self::GaussianDecay => {
                let (a, t) = (p[0], p[1]);
                let e = (-(x / t).powi(2)).exp();
                out[0] = e;
                out[1] = a * e * 2.0 * x * x / (t * t * t);
                out[2] = 1.0;
            }
            Self::StretchedCosine => {
                let (a, f, phi, t, k) = (p[0], p[1], p[2], p[3], p[4]);
                let arg = TAU * f * x + phi;
                let (s, c) = arg.sin_cos();
                let (e, de_dt, de_dk) = stretched_grad(x, t, k);
                out[0] = c * e;
                out[1] = -a * s * e * TAU * x;
                out[2] = -a * s * e;
                out[3] = a * c * de_dt;
                out[4] = a * c * de_dk;
                out[5] = 1.0;
            }
            Self::TwoToneCosine => {
                let (a, f1, f2, phi, t, k) = (p[0], p[1], p[2], p[3], p[4], p[5]);
                let (s1, c1) = (TAU * f1 * x + phi).sin_cos();
                let (s2, c2) = (TAU * f2 * x + phi).sin_cos();
                let (e, de_dt, de_dk) = stretched_grad(x, t, k);
                out[0] = (c1 + c2) * e;
                out[1] = -a * s1 * e * TAU * x;
                out[2] = -a * s2 * e * TAU * x;
                out[3] = -a * (s1 + s2) * e;
                out[4] = a * (c1 + c2) * de_dt;
                out[5] = a * (c1 + c2) * de_dk;
                out[6] = 1.0;
            }
            Self::ExpDetuning { eps0 } => {
                let (j1, lam) = (p[1], p[2]);
                let e = ((eps0 - x) / lam).exp();
                out[0] = 1.0;
                out[1] = e;
                out[2] = -j1 * e * (eps0 - x) / (lam * lam);
            }
            Self::PowerLaw => {
                let v = x.powf(p[1]);
                out[0] = v;
                out[1] = p[0] * v * x.ln();
            }
            Self::InverseSlopePower => {
                let v = x.abs().powf(-p[1]);
                out[0] = v;
                out[1] = -p[0] * v * x.abs().ln();
            }
        }
    }

    /// Puts equivalent parameter vectors into one canonical form: positive
    /// amplitude, phase in `[−π, π)`, positive decay times and ordered tones.
    pub fn canonicalize(&self, p: &mut [f64]) {
        let fix_phase = |a: &mut f64, phi: &mut f64| {
            if *a < 0.0 {
                *a = -*a;
                *phi += PI;
            }
            *phi = (*phi + PI).rem_euclid(TAU) - PI;
        };
        match self {
            Self::GaussianCosine => {
                let (a, rest) = p.split_at_mut(1);
                fix_phase(&mut a[0], &mut rest[1]);
                p[3] = p[3].abs();
            }
            Self::GaussianDecay => p[1] = p[1].abs(),
            Self::StretchedCosine => {
                let (a, rest) = p.split_at_mut(1);
                fix_phase(&mut a[0], &mut rest[1]);
                p[3] = p[3].abs();
            }
            Self::TwoToneCosine => {
                if p[1] > p[2] {
                    p.swap(1, 2);
                }
                let (a, rest) = p.split_at_mut(1);
                fix_phase(&mut a[0], &mut rest[2]);
                p[4] = p[4].abs();
            }
            Self::ExpDetuning { .. } | Self::PowerLaw | Self::InverseSlopePower => {}
        }
    }
}

fn stretched(x: f64, t: f64, k: f64) -> f64 {
    (-(x.abs() / t.abs()).powf(k)).exp()
}

/// `exp(−(x/T)^k)` and its derivatives in `T` and `k`.
fn stretched_grad(x: f64, t: f64, k: f64) -> (f64, f64, f64) {
    let u = x.abs() / t.abs();
    if u == 0.0 {
        return (1.0, 0.0, 0.0);
    }
    let uk = u.powf(k);
    let e = (-uk).exp();
    let de_dt = e * k * uk / t;
    let de_dk = -e * uk * u.ln();
    (e, de_dt, de_dk)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn names_round_trip() {
        for m in all_models() {
            let back = FitModel::from_name(m.name()).unwrap();
            assert_eq!(back.name(), m.name());
        }
        assert!(FitModel::from_name("lorentzian").is_none());
    }

    fn all_models() -> Vec<FitModel> {
        vec![
            FitModel::GaussianCosine,
            FitModel::GaussianDecay,
            FitModel::StretchedCosine,
            FitModel::TwoToneCosine,
            FitModel::ExpDetuning { eps0: 0.5 },
            FitModel::PowerLaw,
            FitModel::InverseSlopePower,
        ]
    }

    /// A valid parameter point built from unit-interval draws.
    fn params(model: &FitModel, u: &[f64]) -> (f64, Vec<f64>) {
        let x = 0.05 + 0.3 * u[7];
        let p = match model {
            FitModel::GaussianCosine => vec![0.2 + u[0], 1.0 + 20.0 * u[1], -3.0 + 6.0 * u[2], 0.1 + u[3], u[4]],
            FitModel::GaussianDecay => vec![0.2 + u[0], 0.05 + u[1], u[2]],
            FitModel::StretchedCosine => vec![0.2 + u[0], 1.0 + 20.0 * u[1], -3.0 + 6.0 * u[2], 0.1 + u[3], 0.8 + 1.5 * u[4], u[5]],
            FitModel::TwoToneCosine => vec![0.2 + u[0], 1.0 + 10.0 * u[1], 12.0 + 10.0 * u[2], -3.0 + 6.0 * u[3], 0.1 + u[4], 0.8 + 1.5 * u[5], u[6]],
            FitModel::ExpDetuning { .. } => vec![10.0 * u[0], 10.0 + 100.0 * u[1], 0.5 + 3.0 * u[2]],
            FitModel::PowerLaw => vec![0.5 + u[0], 0.5 + 2.0 * u[1]],
            FitModel::InverseSlopePower => vec![0.5 + u[0], 0.2 + 1.5 * u[1]],
        };
        let x = match model {
            FitModel::ExpDetuning { .. } => -4.0 + 8.0 * u[7],
            FitModel::PowerLaw | FitModel::InverseSlopePower => 0.1 + 5.0 * u[7],
            _ => x,
        };
        (x, p)
    }

    proptest! {
        #[test]
        fn gradients_match_central_differences(u in proptest::array::uniform8(0.0..1.0f64)) {
            for model in all_models() {
                let (x, p) = params(&model, &u);
                let mut g = vec![0.0; model.n_params()];
                model.gradient(x, &p, &mut g);
                for j in 0..p.len() {
                    let h = 1e-3 * p[j].abs().max(1e-2);
                    let at = |k: f64| {
                        let mut q = p.clone();
                        q[j] += k * h;
                        model.eval(x, &q)
                    };
                    // fourth-order stencil
                    let fd = (at(-2.0) - 8.0 * at(-1.0) + 8.0 * at(1.0) - at(2.0)) / (12.0 * h);
                    let scale = g[j].abs().max(model.eval(x, &p).abs() * 1e-3).max(1e-8);
                    prop_assert!((fd - g[j]).abs() <= 1e-6 * scale, "{} param {}: fd {} analytic {}", model.name(), j, fd, g[j]);
                }
            }
        }

        #[test]
        fn canonical_form_preserves_the_curve(u in proptest::array::uniform8(0.0..1.0f64), flip in any::<bool>()) {
            for model in all_models() {
                let (x, mut p) = params(&model, &u);
                let before = model.eval(x, &p);
                if flip {
                    match model {
                        FitModel::GaussianCosine | FitModel::StretchedCosine => { p[0] = -p[0]; p[2] += PI + 4.0 * PI; }
                        FitModel::TwoToneCosine => { p[0] = -p[0]; p[3] -= PI; p.swap(1, 2); }
                        _ => {}
                    }
                }
                let flipped = model.eval(x, &p);
                prop_assert!((before - flipped).abs() < 1e-9);
                model.canonicalize(&mut p);
                prop_assert!((before - model.eval(x, &p)).abs() < 1e-9);
                if let Some(i) = model.index_of("phi") {
                    prop_assert!((-PI..PI).contains(&p[i]));
                    prop_assert!(p[0] >= 0.0);
                }
            }
        }
    }
}
