use rayon::prelude::*;
use serde_json::json;
use std::path::{Path, PathBuf};

use st0sim::bell::{fbell_sweep, BellSweepConfig, CouplingLaw};
use st0sim::config::{linspace, RunConfig};
use st0sim::controller::{closed_loop_trace, rabi_integrate_trace, rabi_probability_rwa, rabi_quality_factor, rabi_trace, ramsey_trace, RamseyConfig};
use st0sim::coupling::{
    fit_dipolar_d, fit_power_law, hund_mulliken_sweep, j_rl_saturation, measure_conditional_shift, perturbative_check, CouplingPoint,
    HundMullikenParams, PerturbativeReading,
};
use st0sim::error::{invalid, Error, Result};
use st0sim::estimator::{estimation_errors, Estimator};
use st0sim::fitting::{fit_auto, fit_trace, FitModel, FitResult};
use st0sim::io::{write_json, TraceFile};
use st0sim::noise::NoiseWorld;
use st0sim::rng::{stream, Purpose};

use crate::output::Output;

fn fit_json(r: &FitResult) -> serde_json::Value {
    let names = r.model.param_names();
    json!({
        "model": r.model.name(),
        "converged": r.converged,
        "params": names.iter().zip(&r.params).map(|(n, v)| (n.to_string(), json!(v))).collect::<serde_json::Map<_, _>>(),
        "sigmas": names.iter().zip(&r.sigmas).map(|(n, v)| (n.to_string(), json!(v))).collect::<serde_json::Map<_, _>>(),
        "rss": r.rss,
        "iterations": r.iterations,
    })
}

pub fn estimate(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let run = &cfg.estimate;
    let mut out = Output::new(cfg, "estimate")?;
    let errors = estimation_errors(run.qubit, run.mode, &cfg.world, &cfg.estimator, &cfg.readout, run.trials, cfg.seed)?;
    let mut t = out.table(&["trial_index", "error_mhz"])?;
    for (i, e) in errors.iter().enumerate() {
        t.push_row(&[i as f64, *e])?;
    }
    out.write_table("estimate_errors", &t)?;

    // the snapshot trials replay the first streams of the error run
    let mut est_cfg = cfg.estimator;
    est_cfg.single_qubit = run.qubit;
    let est = Estimator::new(est_cfg)?;
    let grid = est_cfg.grid(run.qubit);
    let n_snap = run.snapshots.min(run.trials);
    let names: Vec<String> = (0..n_snap).map(|i| format!("weight_trial_{i}")).collect();
    let mut cols = vec!["f_mhz"];
    cols.extend(names.iter().map(String::as_str));
    let mut snaps = out.table(&cols)?;
    let weights: Vec<Vec<f64>> = (0..n_snap as u64)
        .map(|i| {
            let mut rng = stream(cfg.seed, Purpose::Estimation, i);
            let mut world = NoiseWorld::stationary(cfg.world, &mut rng);
            let r = est.run(&mut world, &cfg.readout, run.mode, &mut rng);
            r.get(run.qubit).expect("qubit was estimated").posterior.weights()
        })
        .collect();
    for (k, f) in grid.centers().enumerate() {
        let mut row = vec![f];
        row.extend(weights.iter().map(|w| w[k]));
        snaps.push_row(&row)?;
    }
    out.write_table("estimate_posteriors", &snaps)?;

    let n = errors.len() as f64;
    let rms = (errors.iter().map(|e| e * e).sum::<f64>() / n).sqrt();
    let bins = errors.iter().filter(|e| e.abs() <= 2.0 * grid.bin_width()).count() as f64 / n;
    let lat = &cfg.estimator.latency;
    out.write_summary(
        "estimate_summary",
        json!({
            "qubit": run.qubit,
            "mode": run.mode,
            "trials": run.trials,
            "rms_error_mhz": rms,
            "mean_error_mhz": errors.iter().sum::<f64>() / n,
            "within_two_bins": bins,
            "bin_width_mhz": grid.bin_width(),
            "estimation_time_ms": lat.estimation_time(run.mode, cfg.estimator.schedule.n_shots) * 1e-3,
        }),
    )?;
    Ok(out.finish())
}

pub fn closed_loop(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let mut out = Output::new(cfg, "closed_loop")?;
    let est = Estimator::new(cfg.estimator)?;
    cfg.feedback.validate(&est)?;
    let mut rng = stream(cfg.seed, Purpose::ClosedLoop, 0);
    let mut world = NoiseWorld::stationary(cfg.world, &mut rng);
    let samples = closed_loop_trace(cfg.closed_loop.duration, &mut world, &est, &cfg.readout, &cfg.feedback, &mut rng);
    let mut t = out.table(&["time_s", "estimate_left_mhz", "estimate_right_mhz", "truth_left_mhz", "truth_right_mhz", "heralded"])?;
    for s in &samples {
        t.push_row(&[s.time, s.estimate_left, s.estimate_right, s.truth_left, s.truth_right, if s.heralded { 1.0 } else { 0.0 }])?;
    }
    out.write_table("closed_loop", &t)?;
    let heralded: Vec<_> = samples.iter().filter(|s| s.heralded).collect();
    let rms = |f: &dyn Fn(&&st0sim::controller::ClosedLoopSample) -> f64| {
        let v: Vec<f64> = heralded.iter().map(f).filter(|x| x.is_finite()).collect();
        if v.is_empty() {
            f64::NAN
        } else {
            (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt()
        }
    };
    out.write_summary(
        "closed_loop_summary",
        json!({
            "probes": samples.len(),
            "heralded_fraction": heralded.len() as f64 / samples.len().max(1) as f64,
            "rms_error_left_mhz": rms(&|s| s.estimate_left - s.truth_left),
            "rms_error_right_mhz": rms(&|s| s.estimate_right - s.truth_right),
        }),
    )?;
    Ok(out.finish())
}

pub fn rabi(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let run = &cfg.rabi;
    let mut out = Output::new(cfg, "rabi")?;
    let params = run.params();
    let t = linspace(run.t_max_ns, run.points);
    let traces: Vec<_> = run
        .delta_f
        .par_iter()
        .enumerate()
        .map(|(k, &df)| {
            let mut rng = stream(cfg.seed, Purpose::Rabi, k as u64);
            rabi_trace(&t, df, &params, &cfg.readout, run.qubit, run.simultaneous, run.shots, &mut rng)
        })
        .collect();
    let mut chevron = out.table(&["t_rf_ns", "delta_f_mhz", "p_triplet"])?;
    for (df, tr) in run.delta_f.iter().zip(&traces) {
        for (x, p) in tr.x.iter().zip(&tr.p_triplet) {
            chevron.push_row(&[*x, *df, *p])?;
        }
    }
    out.write_table("rabi_chevron", &chevron)?;

    let mut rng = stream(cfg.seed, Purpose::Rabi, run.delta_f.len() as u64);
    let resonant = rabi_trace(&t, 0.0, &params, &cfg.readout, run.qubit, run.simultaneous, run.shots, &mut rng);
    out.write_table("rabi_resonant", &out.stamp(TraceFile::from_trace(&resonant)?))?;
    let fit = fit_trace(FitModel::GaussianCosine, &resonant)?;
    let (f, t_rabi) = (fit.param("f").unwrap_or(f64::NAN), fit.param("T").unwrap_or(f64::NAN));

    // lab-frame integration against the rotating-wave formula
    let dbz = cfg.world.mean(run.qubit);
    let mut worst = 0.0f64;
    for df in [0.0, run.f_rabi] {
        let lab = rabi_integrate_trace(&t, df, 4.0 * run.f_rabi, dbz, 400);
        for (x, p) in t.iter().zip(lab) {
            worst = worst.max((p - rabi_probability_rwa(*x, df, run.f_rabi, f64::INFINITY, 1.0, 0.0)).abs());
        }
    }
    out.write_summary(
        "rabi_summary",
        json!({
            "qubit": run.qubit,
            "resonant_fit": fit_json(&fit),
            "f_rabi_mhz": f,
            "t_rabi_us": t_rabi,
            "quality_factor": rabi_quality_factor(f, t_rabi),
            "configured_quality_factor": rabi_quality_factor(run.f_rabi, run.t_decay),
            "rwa_max_deviation": worst,
            "rwa_dbz_mhz": dbz,
        }),
    )?;
    Ok(out.finish())
}

pub fn ramsey(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let run = &cfg.ramsey;
    let mut out = Output::new(cfg, "ramsey")?;
    let est = Estimator::new(cfg.estimator)?;
    cfg.feedback.validate(&est)?;
    let t = linspace(run.t_max_ns, run.points);
    let with = RamseyConfig { feedback: true, ..run.sequence };
    let without = RamseyConfig { feedback: false, ..run.sequence };
    let a = ramsey_trace(&t, &with, &cfg.world, &est, &cfg.readout, &cfg.feedback, cfg.seed);
    let b = ramsey_trace(&t, &without, &cfg.world, &est, &cfg.readout, &cfg.feedback, cfg.seed);
    let mut table = out.table(&["t_w_ns", "p_feedback", "p_free"])?;
    for i in 0..t.len() {
        table.push_row(&[t[i], a.p_triplet[i], b.p_triplet[i]])?;
    }
    table.set_meta("shots_per_point", a.shots_per_point.to_string());
    out.write_table("ramsey", &table)?;
    let model = if run.sequence.delta_f == 0.0 { FitModel::GaussianDecay } else { FitModel::GaussianCosine };
    let fa = fit_trace(model, &a);
    let fb = fit_trace(model, &b);
    let summary = |r: &Result<FitResult>| match r {
        Ok(f) => json!({ "fit": fit_json(f), "t2_star_ns": f.param("T").map(|t| t * 1e3) }),
        Err(e) => json!({ "error": e.to_string() }),
    };
    out.write_summary("ramsey_summary", json!({ "qubit": run.sequence.qubit, "feedback": summary(&fa), "free": summary(&fb) }))?;
    Ok(out.finish())
}

pub fn coupling(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let run = &cfg.coupling;
    let mut out = Output::new(cfg, "coupling")?;
    let times = run.times();
    let setup = run.setup(run.j_target, run.j_coupling);
    let mut rng = stream(cfg.seed, Purpose::Coupling, 0);
    let m = measure_conditional_shift(&setup, &times, &cfg.readout, run.shots, &mut rng)?;
    let mut s = out.stamp(TraceFile::from_trace(&m.singlet)?);
    s.set_meta("control", "singlet");
    out.write_table("coupling_singlet", &s)?;
    let mut tt = out.stamp(TraceFile::from_trace(&m.triplet)?);
    tt.set_meta("control", "triplet");
    out.write_table("coupling_triplet", &tt)?;

    let points: Vec<Result<(f64, CouplingPoint)>> = run
        .sweep
        .par_iter()
        .enumerate()
        .map(|(k, &j)| {
            let injected = run.sweep_law.coupling(j, j)?;
            let mut rng = stream(cfg.seed, Purpose::Coupling, k as u64 + 1);
            let m = measure_conditional_shift(&run.setup(j, injected), &times, &cfg.readout, run.shots, &mut rng)?;
            Ok((injected, CouplingPoint { j_left: j, j_right: j, j_coupling: m.estimate.j_coupling, sigma_coupling: m.estimate.sigma }))
        })
        .collect();
    let points = points.into_iter().collect::<Result<Vec<_>>>()?;
    let mut table = out.table(&["j_left_mhz", "j_right_mhz", "j_coupling_mhz", "sigma_coupling_mhz", "injected_mhz"])?;
    for (inj, p) in &points {
        table.push_row(&[p.j_left, p.j_right, p.j_coupling, p.sigma_coupling, *inj])?;
    }
    out.write_table("coupling_points", &table)?;
    let pts: Vec<CouplingPoint> = points.iter().map(|p| p.1).collect();
    let power = match fit_power_law(&pts) {
        Ok(p) => json!({ "prefactor": p.prefactor, "exponent": p.exponent, "sigma_exponent": p.sigma_exponent }),
        Err(e) => json!({ "error": e.to_string() }),
    };
    out.write_summary(
        "coupling_summary",
        json!({
            "target": run.target,
            "injected_mhz": run.j_coupling,
            "j_coupling_mhz": m.estimate.j_coupling,
            "sigma_mhz": m.estimate.sigma,
            "j_eff_singlet_mhz": m.estimate.j_eff_singlet,
            "j_eff_triplet_mhz": m.estimate.j_eff_triplet,
            "fit_singlet": fit_json(&m.fit_singlet),
            "fit_triplet": fit_json(&m.fit_triplet),
            "power_law": power,
        }),
    )?;
    Ok(out.finish())
}

/// CouplingPoint rows from a CSV with `j_left_mhz`, `j_right_mhz`,
/// `j_coupling_mhz` and optionally `sigma_coupling_mhz` columns.
pub fn read_points(path: &Path) -> Result<Vec<CouplingPoint>> {
    let t = TraceFile::read(path)?;
    t.require_unit("_mhz")?;
    let col = |n: &str| t.column(n).ok_or_else(|| invalid("points", format!("{} has no `{n}` column", path.display())));
    let (jl, jr, jc) = (col("j_left_mhz")?, col("j_right_mhz")?, col("j_coupling_mhz")?);
    let sig = t.column("sigma_coupling_mhz");
    Ok((0..t.rows())
        .map(|i| CouplingPoint { j_left: jl[i], j_right: jr[i], j_coupling: jc[i], sigma_coupling: sig.map_or(0.0, |s| s[i]) })
        .collect())
}

pub fn hund_mulliken(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let run = &cfg.hund_mulliken;
    let mut out = Output::new(cfg, "hund_mulliken")?;
    let rows = hund_mulliken_sweep(&run.model, &run.j_values, run.reading)?;
    let mut t = out.table(&["j_ghz", "j_rl_exact_mhz", "j_rl_perturbative_mhz", "j_rl_asymptotic_mhz", "j_rl_saturation_mhz"])?;
    for r in &rows {
        let sat = j_rl_saturation(&run.model.with_exchange(r.j_left, r.j_right))?;
        t.push_row(&[r.j_left, r.j_rl_exact * 1e3, r.j_rl_perturbative * 1e3, r.j_rl_asymptotic * 1e3, sat * 1e3])?;
    }
    out.write_table("hund_mulliken", &t)?;

    let points = match &run.points {
        Some(p) => read_points(p)?,
        None => cfg
            .coupling
            .sweep
            .iter()
            .map(|&j| {
                let jc = cfg.coupling.sweep_law.coupling(j, j)?;
                Ok(CouplingPoint { j_left: j, j_right: j, j_coupling: jc, sigma_coupling: 0.05 * jc })
            })
            .collect::<Result<_>>()?,
    };
    let d_fit = match fit_dipolar_d(&points, &run.model, run.init_d) {
        Ok(d) => json!({ "dipolar_d_ghz": d.dipolar_d, "sigma_d_ghz": d.sigma_d, "converged": d.converged, "message": d.message }),
        Err(e) => json!({ "error": e.to_string() }),
    };
    let check = |reading| -> Result<serde_json::Value> {
        let t = run.model.t_left.min(run.model.t_right);
        let sym = HundMullikenParams { t_left: t, t_right: t, dipolar_d: run.model.dipolar_d, j_left: t / 100.0, j_right: t / 100.0 };
        let c = perturbative_check(&sym, reading)?;
        Ok(json!({ "reading": reading, "j_ghz": t / 100.0, "relative_error": c.relative_error, "halving_ratio": c.halving_ratio }))
    };
    let at = run.model.with_exchange(0.9, 0.9);
    out.write_summary(
        "hund_mulliken_summary",
        json!({
            "perturbative_check": [check(PerturbativeReading::AsTranscribed)?, check(PerturbativeReading::DipolarProduct)?],
            "j_rl_exact_at_0_9_ghz_mhz": st0sim::coupling::j_rl_exact(&at)? * 1e3,
            "j_rl_asymptotic_at_0_9_ghz_mhz": st0sim::coupling::j_rl_asymptotic(&at) * 1e3,
            "j_rl_saturation_at_0_9_ghz_mhz": j_rl_saturation(&at)? * 1e3,
            "d_fit": d_fit,
        }),
    )?;
    Ok(out.finish())
}

/// Hund-Mulliken parameters behind a coupling law, or the defaults.
fn law_model(law: &CouplingLaw) -> HundMullikenParams {
    match law {
        CouplingLaw::SuperlinearExact { model } | CouplingLaw::SuperlinearAsymptotic { model } => *model,
        _ => HundMullikenParams::default(),
    }
}

pub fn bell(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let run = &cfg.bell;
    let mut out = Output::new(cfg, "bell")?;
    let (al, ar) = run.bilinear_anchor;
    let anchor = run.sweep.law.coupling(al, ar)?;
    let bilinear = BellSweepConfig { law: CouplingLaw::Bilinear { coefficient: anchor / (al * ar) }, ..run.sweep.clone() };
    let sup = fbell_sweep(&run.j_left, &run.sweep, cfg.seed)?;
    let bil = fbell_sweep(&run.j_left, &bilinear, cfg.seed)?;
    let mut t = out.table(&["j_left_mhz", "j_coupling_mhz", "fidelity", "j_coupling_bilinear_mhz", "fidelity_bilinear", "t_echo_left_us"])?;
    for (a, b) in sup.iter().zip(&bil) {
        t.push_row(&[a.j_left, a.j_coupling, a.fidelity, b.j_coupling, b.fidelity, a.t_echo_left])?;
    }
    out.write_table("bell_sweep", &t)?;
    let monotone = sup.windows(2).all(|w| w[1].fidelity >= w[0].fidelity - 1e-12);
    let gain = |v: &[st0sim::bell::BellPoint]| v[v.len() - 1].fidelity - v[v.len() / 2].fidelity;
    out.write_summary(
        "bell_summary",
        json!({
            "law": run.sweep.law,
            "model": law_model(&run.sweep.law),
            "j_right_mhz": run.sweep.j_right,
            "monotone_non_decreasing": monotone,
            "upper_half_gain": gain(&sup),
            "upper_half_gain_bilinear": gain(&bil),
            "max_fidelity": sup.iter().map(|p| p.fidelity).fold(f64::NEG_INFINITY, f64::max),
        }),
    )?;
    Ok(out.finish())
}

pub fn fit(cfg: &RunConfig, input: &Path, model: &str, column: &str, x_unit: Option<&str>, eps0: f64) -> Result<Vec<PathBuf>> {
    let mut model = FitModel::from_name(model).ok_or_else(|| invalid("model", format!("unknown model `{model}`")))?;
    if matches!(model, FitModel::ExpDetuning { .. }) {
        model = FitModel::ExpDetuning { eps0 };
    }
    if !input.exists() {
        return Err(Error::Io(std::io::Error::new(std::io::ErrorKind::NotFound, format!("{} does not exist", input.display()))));
    }
    let file = if input.extension().is_some_and(|e| e == "json") {
        let text = std::fs::read_to_string(input)?;
        serde_json::from_str(&text).map_err(|e| Error::Parse { path: input.display().to_string(), line: e.line(), msg: e.to_string() })?
    } else {
        TraceFile::read(input)?
    };
    if let Some(u) = x_unit {
        file.require_unit(&format!("_{}", u.trim_start_matches('_')))?;
    }
    let trace = file.to_trace(column)?;
    let is_time = ["_ns", "_us", "_s"].iter().any(|u| trace.x_label.ends_with(u));
    let oscillating = !matches!(model, FitModel::PowerLaw | FitModel::InverseSlopePower | FitModel::ExpDetuning { .. });
    if oscillating && !is_time {
        return Err(Error::UnitMismatch { expected: "a time axis (_ns, _us or _s)".into(), found: trace.x_label });
    }
    let result = if oscillating { fit_trace(model, &trace)? } else { fit_auto(model, &trace.x, &trace.p_triplet)? };

    std::fs::create_dir_all(&cfg.out)?;
    let stem = input.file_stem().map_or("trace".into(), |s| s.to_string_lossy().into_owned());
    let path = cfg.out.join(format!("fit_{stem}.json"));
    let doc = json!({
        "input": input.display().to_string(),
        "input_config_hash": file.meta("config_hash"),
        "column": column,
        "x_label": trace.x_label,
        "fit": fit_json(&result),
        "covariance": result.covariance,
    });
    write_json(&path, &doc)?;
    Ok(vec![path])
}
