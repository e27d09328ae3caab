//! Aggregate summary of the acceptance metrics. Trial counts follow the run
//! configuration, so a small configuration gives a quick report.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;
use std::path::PathBuf;

use st0sim::bell::{fbell_sweep, phase_damping_fidelity, run_sequence, bell_fidelity, BellSweepConfig, CouplingLaw, DephasingSpec};
use st0sim::config::{linspace, RunConfig};
use st0sim::controller::{rabi_integrate_trace, rabi_probability_rwa, rabi_quality_factor, ramsey_trace, RamseyConfig};
use st0sim::coupling::{cphase_fidelity, fit_power_law, j_rl_exact, measure_conditional_shift, perturbative_check, CouplingPoint, HundMullikenParams, PerturbativeReading};
use st0sim::error::Result;
use st0sim::estimator::{estimation_errors, Estimator, EstimatorMode};
use st0sim::fitting::{fit_trace, sampling_rate_study, FitModel};
use st0sim::model::Qubit;
use st0sim::noise::{nuclear_limited_t2, NuclearBathConfig};
use st0sim::rng::{stream, Purpose};

use crate::output::Output;

#[derive(Serialize)]
struct Metric {
    criterion: u8,
    name: &'static str,
    value: f64,
    target: String,
    pass: bool,
}

fn metric(criterion: u8, name: &'static str, value: f64, target: impl Into<String>, pass: bool) -> Metric {
    Metric { criterion, name, value, target: target.into(), pass }
}

fn within(v: f64, lo: f64, hi: f64) -> bool {
    (lo..=hi).contains(&v)
}

pub fn report(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let mut out = Output::new(cfg, "report")?;
    let mut m = Vec::new();
    let seed = cfg.seed;

    let lat = &cfg.estimator.latency;
    let n = cfg.estimator.schedule.n_shots;
    let single = lat.estimation_time(EstimatorMode::Single, n) * 1e-3;
    let dual = lat.estimation_time(EstimatorMode::DualFeedback, n) * 1e-3;
    m.push(metric(1, "estimation_time_single_ms", single, "1.82", (single - 1.82).abs() < 1e-9));
    m.push(metric(1, "estimation_time_dual_feedback_ms", dual, "4.55", (dual - 4.55).abs() < 1e-9));

    let frozen = NuclearBathConfig::frozen(37.5, 130.0);
    let errs = estimation_errors(Qubit::Right, EstimatorMode::Single, &frozen, &cfg.estimator, &cfg.readout, cfg.estimate.trials, seed)?;
    let bw = cfg.estimator.grid(Qubit::Right).bin_width();
    let frac = errs.iter().filter(|e| e.abs() <= 2.0 * bw).count() as f64 / errs.len() as f64;
    m.push(metric(2, "map_within_two_bins_frozen_130mhz", frac, ">= 0.90", frac >= 0.9));

    let est = Estimator::new(cfg.estimator)?;
    let t2 = |feedback: bool, t_max: f64| -> Result<f64> {
        let rc = RamseyConfig { feedback, delta_f: 0.0, ..cfg.ramsey.sequence };
        let tr = ramsey_trace(&linspace(t_max, 41), &rc, &cfg.world, &est, &cfg.readout, &cfg.feedback, seed);
        Ok(fit_trace(FitModel::GaussianDecay, &tr)?.param("T").unwrap_or(f64::NAN) * 1e3)
    };
    let expected = nuclear_limited_t2(cfg.world.sigma) * 1e3;
    let free = t2(false, 4.0 * expected)?;
    m.push(metric(3, "ramsey_t2_star_free_ns", free, format!("{expected:.1} +/- 20%"), (free - expected).abs() <= 0.2 * expected));
    let locked = t2(true, 600.0)?;
    m.push(metric(3, "ramsey_t2_star_feedback_ns", locked, ">= 100", locked >= 100.0));

    let t_rf = linspace(2000.0, 401);
    let mut worst = 0.0f64;
    for (f_rabi, dbz) in [(3.09, 130.0), (6.0, 100.0)] {
        for df in [0.0, f_rabi] {
            let lab = rabi_integrate_trace(&t_rf, df, 4.0 * f_rabi, dbz, 400);
            for (t, p) in t_rf.iter().zip(lab) {
                worst = worst.max((p - rabi_probability_rwa(*t, df, f_rabi, f64::INFINITY, 1.0, 0.0)).abs());
            }
        }
    }
    m.push(metric(4, "rwa_vs_lab_frame_max_deviation", worst, "< 0.01", worst < 0.01));

    for (name, f, t, target) in [("rabi_q_left", 3.09, 1.75, 5.4), ("rabi_q_right", 5.69, 1.88, 10.7)] {
        let q = rabi_quality_factor(f, t);
        m.push(metric(5, name, q, format!("{target}"), ((q * 10.0).round() / 10.0 - target).abs() < 1e-9));
    }

    let run = &cfg.coupling;
    let setup = run.setup(run.j_target, run.j_coupling);
    let times = run.times();
    let pulls: Vec<f64> = (0..100u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, Purpose::Coupling, 1000 + i);
            measure_conditional_shift(&setup, &times, &cfg.readout, run.shots, &mut rng)
                .map_or(f64::INFINITY, |s| (s.estimate.j_coupling - run.j_coupling) / s.estimate.sigma)
        })
        .collect();
    let cover = pulls.iter().filter(|z| z.abs() <= 2.0).count() as f64 / pulls.len() as f64;
    m.push(metric(6, "coupling_round_trip_within_two_sigma", cover, ">= 0.95", cover >= 0.95));

    let t = cfg.hund_mulliken.model.t_left.min(cfg.hund_mulliken.model.t_right);
    let sym = HundMullikenParams { t_left: t, t_right: t, dipolar_d: cfg.hund_mulliken.model.dipolar_d, j_left: t / 100.0, j_right: t / 100.0 };
    let ratio = perturbative_check(&sym, PerturbativeReading::DipolarProduct)?.halving_ratio;
    m.push(metric(7, "hund_mulliken_halving_ratio", ratio, "[16, 64]", within(ratio, 16.0, 64.0)));

    let base = cfg.hund_mulliken.model;
    let exact: Vec<CouplingPoint> = (1..=8)
        .map(|k| {
            let j = 0.005 * k as f64;
            Ok(CouplingPoint { j_left: j * 1e3, j_right: j * 1e3, j_coupling: j_rl_exact(&base.with_exchange(j, j))? * 1e3, sigma_coupling: 0.0 })
        })
        .collect::<Result<_>>()?;
    let p_exact = fit_power_law(&exact)?.exponent;
    m.push(metric(8, "power_law_exponent_exact_model", p_exact, "2.00 +/- 0.05", (p_exact - 2.0).abs() <= 0.05));
    let mut rng = stream(seed, Purpose::Fitting, 0);
    let noisy: Vec<CouplingPoint> = (0..10)
        .map(|k| {
            let j = 300.0 + 70.0 * k as f64;
            let clean = 1e-9 * (j * j).powf(2.14);
            let jc = clean * (1.0 + 0.05 * rng.sample::<f64, _>(StandardNormal));
            CouplingPoint { j_left: j, j_right: j, j_coupling: jc, sigma_coupling: 0.05 * clean }
        })
        .collect();
    let p_noisy = fit_power_law(&noisy)?.exponent;
    m.push(metric(8, "power_law_exponent_noisy_2_14", p_noisy, "2.14 +/- 0.1", (p_noisy - 2.14).abs() <= 0.1));

    for (name, q, target) in [("cphase_fidelity_q16", 16.0, 0.9394), ("cphase_fidelity_q7", 7.0, 0.8669)] {
        let f = cphase_fidelity(q)?;
        m.push(metric(9, name, f, format!("{target}"), ((f * 1e4).round() / 1e4 - target).abs() < 1e-9));
    }

    let mut rng = stream(seed, Purpose::Bell, 1 << 20);
    let ideal = bell_fidelity(&run_sequence(900.0, 900.0, 190.0, &DephasingSpec::default(), &mut rng)?);
    m.push(metric(10, "bell_fidelity_dephasing_free", ideal, ">= 1 - 1e-9", ideal >= 1.0 - 1e-9));
    let calibrated = phase_damping_fidelity(190.0, 0.0421, 0.0184);
    m.push(metric(10, "bell_fidelity_q16_q7", calibrated, "0.945 +/- 0.03", (calibrated - 0.945).abs() <= 0.03));
    let grid = &cfg.bell.j_left;
    let sup = fbell_sweep(grid, &cfg.bell.sweep, seed)?;
    let (al, ar) = cfg.bell.bilinear_anchor;
    let k = cfg.bell.sweep.law.coupling(al, ar)? / (al * ar);
    let bil = fbell_sweep(grid, &BellSweepConfig { law: CouplingLaw::Bilinear { coefficient: k }, ..cfg.bell.sweep.clone() }, seed)?;
    let monotone = sup.windows(2).all(|w| w[1].fidelity >= w[0].fidelity - 1e-12);
    m.push(metric(10, "bell_superlinear_monotone", monotone as u8 as f64, "1", monotone));
    let half = grid.len() / 2;
    let steeper = (half..grid.len() - 1).all(|i| sup[i + 1].fidelity - sup[i].fidelity > bil[i + 1].fidelity - bil[i].fidelity);
    m.push(metric(10, "bell_superlinear_steeper_than_bilinear", steeper as u8 as f64, "1", steeper));

    let study = sampling_rate_study(&cfg.sampling, seed)?;
    let fine = cfg.sampling.finest_rate();
    let coarse = cfg.sampling.rates_gsps.iter().cloned().fold(f64::INFINITY, f64::min);
    let (sf, sc) = (study.rate(fine).map(|r| r.mean_sigma_f), study.rate(coarse).map(|r| r.mean_sigma_f));
    let ratio = sc.zip(sf).map_or(f64::NAN, |(c, f)| c / f);
    m.push(metric(11, "sampling_sigma_ratio", ratio, "[2.46, 9.82]", within(ratio, 13.26 / 2.7 / 2.0, 13.26 / 2.7 * 2.0)));
    let agree = study.rate(coarse).map_or(f64::NAN, |r| r.within_two_sigma);
    m.push(metric(11, "sampling_within_two_sigma", agree, ">= 0.90", agree >= 0.9));

    let passed = m.iter().filter(|x| x.pass).count();
    let total = m.len();
    out.write_summary("report", json!({ "passed": passed, "total": total, "metrics": m, "j_rl_exact_model_mhz": j_rl_exact(&base.with_exchange(0.9, 0.9))? * 1e3 }))?;
    Ok(out.finish())
}
