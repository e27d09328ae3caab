//! Run configuration: every module's settings plus the per-experiment
//! sweep parameters, read from TOML. Missing keys take their defaults, so an
//! empty file is a valid configuration.

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use crate::bell::{BellSweepConfig, CouplingLaw};
use crate::controller::{ExchangeDephasing, ExchangeSetup, FeedbackConfig, RamseyConfig, RabiParams};
use crate::coupling::{HundMullikenParams, PerturbativeReading};
use crate::error::{invalid, Error, Result};
use crate::estimator::{Estimator, EstimatorConfig, EstimatorMode};
use crate::fitting::SamplingStudyConfig;
use crate::model::{Qubit, TwoQubitParams};
use crate::noise::NuclearBathConfig;
use crate::readout::ReadoutConfig;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub format: OutputFormat,
    pub world: NuclearBathConfig,
    pub readout: ReadoutConfig,
    pub estimator: EstimatorConfig,
    pub feedback: FeedbackConfig,
    pub estimate: EstimateRun,
    pub closed_loop: ClosedLoopRun,
    pub rabi: RabiRun,
    pub ramsey: RamseyRun,
    pub coupling: CouplingRun,
    pub hund_mulliken: HundMullikenRun,
    pub bell: BellRun,
    pub sampling: SamplingStudyConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            out: PathBuf::from("out"),
            format: OutputFormat::Csv,
            world: NuclearBathConfig::default(),
            readout: ReadoutConfig::default(),
            estimator: EstimatorConfig::default(),
            feedback: FeedbackConfig::default(),
            estimate: EstimateRun::default(),
            closed_loop: ClosedLoopRun::default(),
            rabi: RabiRun::default(),
            ramsey: RamseyRun::default(),
            coupling: CouplingRun::default(),
            hund_mulliken: HundMullikenRun::default(),
            bell: BellRun::default(),
            sampling: SamplingStudyConfig::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimateRun {
    pub mode: EstimatorMode,
    pub qubit: Qubit,
    pub trials: usize,
    /// Trials whose final posterior is written out.
    pub snapshots: usize,
}

impl Default for EstimateRun {
    fn default() -> Self {
        Self { mode: EstimatorMode::Single, qubit: Qubit::Right, trials: 1000, snapshots: 3 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClosedLoopRun {
    /// Seconds.
    pub duration: f64,
}

impl Default for ClosedLoopRun {
    fn default() -> Self {
        Self { duration: 5.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RabiRun {
    pub qubit: Qubit,
    /// MHz
    pub f_rabi: f64,
    /// µs
    pub t_decay: f64,
    /// Drive detunings of the chevron, MHz.
    pub delta_f: Vec<f64>,
    pub t_max_ns: f64,
    pub points: usize,
    pub shots: usize,
    pub simultaneous: bool,
}

impl Default for RabiRun {
    fn default() -> Self {
        Self {
            qubit: Qubit::Left,
            f_rabi: 3.09,
            t_decay: 1.75,
            delta_f: (-10..=10).map(|k| k as f64).collect(),
            t_max_ns: 2000.0,
            points: 201,
            shots: 100,
            simultaneous: true,
        }
    }
}

impl RabiRun {
    pub fn params(&self) -> RabiParams {
        RabiParams { f_rabi: self.f_rabi, t_decay: self.t_decay, visibility: 1.0, offset: 0.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RamseyRun {
    pub sequence: RamseyConfig,
    pub t_max_ns: f64,
    pub points: usize,
}

impl Default for RamseyRun {
    fn default() -> Self {
        Self { sequence: RamseyConfig { delta_f: 20.0, ..RamseyConfig::default() }, t_max_ns: 300.0, points: 61 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CouplingRun {
    pub target: Qubit,
    /// Exchange of the target during the conditional pulse, MHz.
    pub j_target: f64,
    pub dbz_target: f64,
    /// Injected coupling, MHz.
    pub j_coupling: f64,
    pub dephasing: ExchangeDephasing,
    pub t_max_ns: f64,
    pub step_ns: f64,
    pub shots: usize,
    /// Symmetric exchange values `J_L = J_R` of the power-law sweep, MHz.
    pub sweep: Vec<f64>,
    pub sweep_law: CouplingLaw,
}

impl Default for CouplingRun {
    fn default() -> Self {
        Self {
            target: Qubit::Left,
            j_target: 3610.0,
            dbz_target: 130.0,
            j_coupling: 34.9,
            dephasing: ExchangeDephasing { t2_star: 0.025, exponent: 1.5 },
            t_max_ns: 40.0,
            step_ns: 0.05,
            shots: 100,
            sweep: vec![500.0, 600.0, 700.0, 800.0, 900.0],
            // 190 MHz at 900 MHz with the measured exponent
            sweep_law: CouplingLaw::PowerLaw { prefactor: 190.0 / 810_000f64.powf(2.14), exponent: 2.14 },
        }
    }
}

impl CouplingRun {
    pub fn times(&self) -> Vec<f64> {
        let n = (self.t_max_ns / self.step_ns).round() as usize;
        (0..=n).map(|i| i as f64 * self.step_ns).collect()
    }

    /// Setup with the other qubit as control and exchange `j` on the target.
    pub fn setup(&self, j: f64, j_coupling: f64) -> ExchangeSetup {
        let params = match self.target {
            Qubit::Left => TwoQubitParams::new(j, 0.0, self.dbz_target, 0.0, j_coupling),
            Qubit::Right => TwoQubitParams::new(0.0, j, 0.0, self.dbz_target, j_coupling),
        };
        ExchangeSetup { params, target: self.target, dephasing: self.dephasing, control_ramp_error: 0.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HundMullikenRun {
    pub model: HundMullikenParams,
    /// Symmetric exchange values of the comparison table, GHz.
    pub j_values: Vec<f64>,
    pub reading: PerturbativeReading,
    /// CSV of measured couplings for the D fit; the coupling sweep law is
    /// used when absent.
    pub points: Option<PathBuf>,
    /// Start value of the D fit, GHz.
    pub init_d: f64,
}

impl Default for HundMullikenRun {
    fn default() -> Self {
        Self {
            model: HundMullikenParams::default(),
            j_values: (1..=10).map(|k| 0.1 * k as f64).collect(),
            reading: PerturbativeReading::default(),
            points: None,
            init_d: 46.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BellRun {
    pub sweep: BellSweepConfig,
    /// MHz
    pub j_left: Vec<f64>,
    /// Exchange pair `(J_L, J_R)` at which the bilinear comparison law meets
    /// the sweep law, MHz.
    pub bilinear_anchor: (f64, f64),
}

impl Default for BellRun {
    fn default() -> Self {
        Self { sweep: BellSweepConfig::default(), j_left: (6..=20).map(|k| 50.0 * k as f64).collect(), bilinear_anchor: (300.0, 500.0) }
    }
}

impl RunConfig {
    /// Parses TOML text. `origin` names the source in diagnostics.
    pub fn from_toml(text: &str, origin: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| {
            let line = e.span().map_or(0, |s| text[..s.start.min(text.len())].matches('\n').count() + 1);
            Error::Parse { path: origin.to_string(), line, msg: e.message().to_string() }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text, &path.display().to_string())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("every field has a TOML representation")
    }

    pub fn validate(&self) -> Result<()> {
        let ctx = |section: &str, e: Error| Error::Config(format!("[{section}] {e}"));
        self.world.validate().map_err(|e| ctx("world", e))?;
        self.readout.validate().map_err(|e| ctx("readout", e))?;
        let est = Estimator::new(self.estimator).map_err(|e| ctx("estimator", e))?;
        self.feedback.validate(&est).map_err(|e| ctx("feedback", e))?;
        self.sampling.validate().map_err(|e| ctx("sampling", e))?;
        self.bell.sweep.validate().map_err(|e| ctx("bell", e))?;
        self.hund_mulliken.model.validate().map_err(|e| ctx("hund_mulliken", e))?;

        let positive = |section: &str, name: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(ctx(section, invalid(name, "must be positive")))
            }
        };
        positive("closed_loop", "duration", self.closed_loop.duration)?;
        positive("rabi", "t_max_ns", self.rabi.t_max_ns)?;
        positive("rabi", "f_rabi", self.rabi.f_rabi)?;
        positive("ramsey", "t_max_ns", self.ramsey.t_max_ns)?;
        positive("coupling", "t_max_ns", self.coupling.t_max_ns)?;
        positive("coupling", "step_ns", self.coupling.step_ns)?;
        positive("coupling", "j_target", self.coupling.j_target)?;
        for (section, name, n) in [
            ("estimate", "trials", self.estimate.trials),
            ("rabi", "points", self.rabi.points),
            ("ramsey", "points", self.ramsey.points),
            ("ramsey", "cycles_per_point", self.ramsey.sequence.cycles_per_point),
        ] {
            if n == 0 {
                return Err(ctx(section, invalid(name, "must be at least 1")));
            }
        }
        if self.rabi.delta_f.is_empty() {
            return Err(ctx("rabi", invalid("delta_f", "need at least one detuning")));
        }
        if self.bell.j_left.is_empty() {
            return Err(ctx("bell", invalid("j_left", "need at least one exchange value")));
        }
        if self.hund_mulliken.j_values.iter().any(|j| !(*j > 0.0)) {
            return Err(ctx("hund_mulliken", invalid("j_values", "must be positive")));
        }
        Ok(())
    }
}

/// Evenly spaced `points` values from 0 to `max` inclusive.
pub fn linspace(max: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![0.0],
        n => (0..n).map(|i| max * i as f64 / (n - 1) as f64).collect(),
    }
}
