//! Real-time Bayesian estimation of a field gradient.
//!
//! The posterior lives on a fixed grid of bin centres and is updated shot by
//! shot with the likelihood `½[1 + r(α + β cos 2πf t)]`, accumulated in log
//! space. Likelihood values are tabulated once per schedule, as a hardware
//! implementation would hold them in a look-up table.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{ensure_finite, invalid, Error, Result};
use crate::model::Qubit;
use crate::noise::{index, NoiseWorld, NuclearBathConfig};
use crate::readout::{sample_shot, shot_probability, ReadoutConfig, ShotRecord};
use crate::rng::{stream, Purpose};

/// Frequency grid of `bins` equally spaced centres from `min` to `max`
/// inclusive, MHz.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrequencyGrid {
    pub min: f64,
    pub max: f64,
    pub bins: usize,
}

impl FrequencyGrid {
    pub const DEFAULT_BINS: usize = 512;

    pub fn new(min: f64, max: f64, bins: usize) -> Result<Self> {
        let g = Self { min, max, bins };
        g.validate()?;
        Ok(g)
    }

    pub fn default_for(qubit: Qubit) -> Self {
        match qubit {
            Qubit::Left => Self { min: 0.0, max: 100.0, bins: Self::DEFAULT_BINS },
            Qubit::Right => Self { min: 70.0, max: 170.0, bins: Self::DEFAULT_BINS },
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure_finite("grid_min", self.min)?;
        ensure_finite("grid_max", self.max)?;
        if self.bins < 2 {
            return Err(invalid("bins", "need at least two bins"));
        }
        if self.max <= self.min {
            return Err(invalid("grid_max", "must exceed grid_min"));
        }
        Ok(())
    }

    pub fn bin_width(&self) -> f64 {
        (self.max - self.min) / (self.bins - 1) as f64
    }

    pub fn center(&self, k: usize) -> f64 {
        self.min + k as f64 * self.bin_width()
    }

    pub fn centers(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.bins).map(|k| self.center(k))
    }

    pub fn contains(&self, f: f64) -> bool {
        (self.min..=self.max).contains(&f)
    }

    /// Digital code of the bin nearest to `f`.
    pub fn quantize(&self, f: f64) -> Result<u16> {
        if !self.contains(f) {
            return Err(Error::OutOfGrid { f, min: self.min, max: self.max });
        }
        let code = ((f - self.min) / (self.max - self.min) * (self.bins - 1) as f64).round();
        Ok(code as u16)
    }

    pub fn dequantize(&self, code: u16) -> Result<f64> {
        if code as usize >= self.bins {
            return Err(invalid("code", format!("{code} exceeds {} bins", self.bins)));
        }
        Ok(self.center(code as usize))
    }
}

/// Log-probability of outcome `r` for frequency `f` (MHz) after `t_ns`.
pub fn log_likelihood(r: i8, f: f64, t_ns: f64, alpha: f64, beta: f64) -> f64 {
    let z = (2.0 * PI * f * t_ns * 1e-3).cos();
    (0.5 * (1.0 + r as f64 * (alpha + beta * z))).ln()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Posterior {
    pub grid: FrequencyGrid,
    pub log_weights: Vec<f64>,
}

impl Posterior {
    pub fn uniform(grid: FrequencyGrid) -> Self {
        let w = -(grid.bins as f64).ln();
        Self { grid, log_weights: vec![w; grid.bins] }
    }

    pub fn bins(&self) -> usize {
        self.log_weights.len()
    }

    /// Multiply by the likelihood of one shot and renormalize.
    pub fn bayes_update(&mut self, r: i8, t_ns: f64, alpha: f64, beta: f64) {
        debug_assert!(alpha.abs() + beta < 1.0 || beta == 0.0);
        let grid = self.grid;
        for (k, w) in self.log_weights.iter_mut().enumerate() {
            *w += log_likelihood(r, grid.center(k), t_ns, alpha, beta);
        }
        self.normalize();
    }

    /// Add a precomputed row of log-likelihoods.
    pub fn apply_log_likelihood(&mut self, row: &[f64]) {
        debug_assert_eq!(row.len(), self.log_weights.len());
        for (w, l) in self.log_weights.iter_mut().zip(row) {
            *w += l;
        }
    }

    pub fn normalize(&mut self) {
        let m = self.log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert!(m.is_finite(), "posterior vanished on the whole grid");
        let lse = m + self.log_weights.iter().map(|w| (w - m).exp()).sum::<f64>().ln();
        for w in &mut self.log_weights {
            *w -= lse;
        }
    }

    pub fn weights(&self) -> Vec<f64> {
        self.log_weights.iter().map(|w| w.exp()).collect()
    }

    /// Index of the largest weight; ties go to the lowest index.
    pub fn map_index(&self) -> usize {
        let mut best = 0;
        for (k, &w) in self.log_weights.iter().enumerate() {
            if w > self.log_weights[best] {
                best = k;
            }
        }
        best
    }

    pub fn map_estimate(&self) -> f64 {
        self.grid.center(self.map_index())
    }

    pub fn mean(&self) -> f64 {
        self.weights().iter().enumerate().map(|(k, w)| w * self.grid.center(k)).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimationSchedule {
    pub n_shots: usize,
    /// ns; shot `k` evolves for `k·time_step`.
    pub time_step: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl Default for EstimationSchedule {
    fn default() -> Self {
        Self { n_shots: 70, time_step: 1.67, alpha: 0.1, beta: 0.8 }
    }
}

impl EstimationSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.n_shots == 0 {
            return Err(invalid("n_shots", "must be at least 1"));
        }
        if !(self.time_step > 0.0) || !self.time_step.is_finite() {
            return Err(invalid("time_step", "must be positive"));
        }
        if self.beta < 0.0 || self.alpha.abs() + self.beta >= 1.0 {
            return Err(invalid("beta", "likelihood needs 0 ≤ β and |α| + β < 1"));
        }
        Ok(())
    }

    pub fn evolution_time(&self, k: usize) -> f64 {
        k as f64 * self.time_step
    }
}

/// Per-shot timing, µs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LatencyModel {
    pub shot_time: f64,
    pub calc_time_single: f64,
    pub calc_time_dual_feedback: f64,
}

impl Default for LatencyModel {
    fn default() -> Self {
        Self { shot_time: 16.0, calc_time_single: 10.0, calc_time_dual_feedback: 49.0 }
    }
}

impl LatencyModel {
    pub fn per_shot(&self, mode: EstimatorMode) -> f64 {
        self.shot_time
            + match mode {
                EstimatorMode::Single | EstimatorMode::DualProbeOnly => self.calc_time_single,
                EstimatorMode::DualFeedback => self.calc_time_dual_feedback,
            }
    }

    pub fn estimation_time(&self, mode: EstimatorMode, n_shots: usize) -> f64 {
        n_shots as f64 * self.per_shot(mode)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorMode {
    /// One qubit, full parallelism.
    Single,
    /// Both qubits probed simultaneously, no operation steps.
    DualProbeOnly,
    /// Both qubits probed and fed forward to operation steps.
    DualFeedback,
}

impl EstimatorMode {
    pub fn is_dual(self) -> bool {
        !matches!(self, Self::Single)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorConfig {
    pub schedule: EstimationSchedule,
    pub latency: LatencyModel,
    pub grid_left: FrequencyGrid,
    pub grid_right: FrequencyGrid,
    /// Qubit estimated in single mode.
    pub single_qubit: Qubit,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            schedule: EstimationSchedule::default(),
            latency: LatencyModel::default(),
            grid_left: FrequencyGrid::default_for(Qubit::Left),
            grid_right: FrequencyGrid::default_for(Qubit::Right),
            single_qubit: Qubit::Right,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        self.grid_left.validate()?;
        self.grid_right.validate()?;
        let l = &self.latency;
        for (n, v) in [("shot_time", l.shot_time), ("calc_time_single", l.calc_time_single), ("calc_time_dual_feedback", l.calc_time_dual_feedback)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(invalid(n, "must be a non-negative time"));
            }
        }
        Ok(())
    }

    pub fn grid(&self, qubit: Qubit) -> FrequencyGrid {
        match qubit {
            Qubit::Left => self.grid_left,
            Qubit::Right => self.grid_right,
        }
    }

    pub fn qubits(&self, mode: EstimatorMode) -> Vec<Qubit> {
        if mode.is_dual() {
            vec![Qubit::Left, Qubit::Right]
        } else {
            vec![self.single_qubit]
        }
    }
}

/// Log-likelihood rows for every shot of a schedule on one grid.
#[derive(Clone, Debug)]
pub struct LikelihoodTable {
    /// `rows[k][0]` for `r = +1`, `rows[k][1]` for `r = −1`, shot `k + 1`.
    rows: Vec<[Vec<f64>; 2]>,
}

impl LikelihoodTable {
    pub fn new(grid: &FrequencyGrid, schedule: &EstimationSchedule) -> Self {
        let rows = (1..=schedule.n_shots)
            .map(|k| {
                let t = schedule.evolution_time(k);
                let row = |r: i8| grid.centers().map(|f| log_likelihood(r, f, t, schedule.alpha, schedule.beta)).collect();
                [row(1), row(-1)]
            })
            .collect();
        Self { rows }
    }

    pub fn row(&self, shot: usize, r: i8) -> &[f64] {
        &self.rows[shot - 1][if r > 0 { 0 } else { 1 }]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimationOutcome {
    pub qubit: Qubit,
    pub map_frequency: f64,
    pub quantized_code: u16,
    pub posterior: Posterior,
    /// µs
    pub elapsed: f64,
    pub shots: Vec<ShotRecord>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EstimationRun {
    pub left: Option<EstimationOutcome>,
    pub right: Option<EstimationOutcome>,
    /// µs
    pub elapsed: f64,
}

impl EstimationRun {
    pub fn get(&self, qubit: Qubit) -> Option<&EstimationOutcome> {
        match qubit {
            Qubit::Left => self.left.as_ref(),
            Qubit::Right => self.right.as_ref(),
        }
    }
}

/// Estimator with its likelihood tables built once.
#[derive(Clone, Debug)]
pub struct Estimator {
    pub config: EstimatorConfig,
    tables: [LikelihoodTable; 2],
}

impl Estimator {
    pub fn new(config: EstimatorConfig) -> Result<Self> {
        config.validate()?;
        let tables = [
            LikelihoodTable::new(&config.grid_left, &config.schedule),
            LikelihoodTable::new(&config.grid_right, &config.schedule),
        ];
        Ok(Self { config, tables })
    }

    /// Simulates one estimation round against `world`, which drifts in wall
    /// clock time while the shots are taken.
    pub fn run<R: Rng + ?Sized>(&self, world: &mut NoiseWorld, readout: &ReadoutConfig, mode: EstimatorMode, rng: &mut R) -> EstimationRun {
        let cfg = &self.config;
        let qubits = cfg.qubits(mode);
        let crosstalk = mode.is_dual();
        let per_shot = cfg.latency.per_shot(mode);
        let init = 1.0 - 2.0 * readout.init_error;

        let mut posts: Vec<Posterior> = qubits.iter().map(|&q| Posterior::uniform(cfg.grid(q))).collect();
        let mut shots: Vec<Vec<ShotRecord>> = vec![Vec::with_capacity(cfg.schedule.n_shots); qubits.len()];
        let mut clock = 0.0;
        for k in 1..=cfg.schedule.n_shots {
            let t = cfg.schedule.evolution_time(k);
            for (i, &q) in qubits.iter().enumerate() {
                let z = init * (2.0 * PI * world.dbz(q) * t * 1e-3).cos();
                let r = sample_shot(shot_probability(z, readout, crosstalk, q), rng);
                posts[i].apply_log_likelihood(self.tables[index(q)].row(k, r));
                shots[i].push(ShotRecord { outcome: r, evolution_time: t, wall_clock: clock, qubit: q, crosstalk_active: crosstalk });
            }
            clock += per_shot;
            world.advance(per_shot, rng);
        }

        let mut run = EstimationRun { left: None, right: None, elapsed: clock };
        for ((q, mut post), shots) in qubits.into_iter().zip(posts).zip(shots) {
            post.normalize();
            let map = post.map_estimate();
            let outcome = EstimationOutcome {
                qubit: q,
                map_frequency: map,
                quantized_code: post.grid.quantize(map).expect("bin centre lies on the grid"),
                posterior: post,
                elapsed: clock,
                shots,
            };
            match q {
                Qubit::Left => run.left = Some(outcome),
                Qubit::Right => run.right = Some(outcome),
            }
        }
        run
    }
}

pub fn run_estimation<R: Rng + ?Sized>(
    world: &mut NoiseWorld,
    config: &EstimatorConfig,
    readout: &ReadoutConfig,
    mode: EstimatorMode,
    rng: &mut R,
) -> Result<EstimationRun> {
    Ok(Estimator::new(*config)?.run(world, readout, mode, rng))
}

/// Signed MAP errors against the true gradient at the end of each trial.
/// Trial `i` starts from a stationary draw of `bath` using stream `i`.
pub fn estimation_errors(
    qubit: Qubit,
    mode: EstimatorMode,
    bath: &NuclearBathConfig,
    config: &EstimatorConfig,
    readout: &ReadoutConfig,
    trials: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let mut config = *config;
    config.single_qubit = qubit;
    let est = Estimator::new(config)?;
    Ok((0..trials as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, Purpose::Estimation, i);
            let mut world = NoiseWorld::stationary(*bath, &mut rng);
            let run = est.run(&mut world, readout, mode, &mut rng);
            run.get(qubit).expect("qubit was estimated").map_frequency - world.dbz(qubit)
        })
        .collect())
}

pub fn estimation_rms_error(
    qubit: Qubit,
    mode: EstimatorMode,
    bath: &NuclearBathConfig,
    config: &EstimatorConfig,
    readout: &ReadoutConfig,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    if trials == 0 {
        return Err(invalid("trials", "must be at least 1"));
    }
    let e = estimation_errors(qubit, mode, bath, config, readout, trials, seed)?;
    Ok((e.iter().map(|x| x * x).sum::<f64>() / e.len() as f64).sqrt())
}
