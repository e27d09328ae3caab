//! Experiment orchestration: probe/herald/operate loops and the Rabi,
//! Ramsey, echo and conditional exchange sequences.

mod closed_loop;
mod echo;
mod exchange;
mod rabi;
mod ramsey;

pub use closed_loop::{closed_loop_trace, ClosedLoopSample};
pub use echo::{echo_amplitude, echo_trace, EchoNoise};
pub use exchange::{conditional_exchange_probability, conditional_exchange_trace, ControlPrep, ExchangeDephasing, ExchangeSetup};
pub use rabi::{rabi_integrate, rabi_integrate_trace, rabi_probability_rwa, rabi_quality_factor, rabi_trace, RabiParams};
pub use ramsey::{ramsey_trace, RamseyConfig};

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::estimator::{Estimator, EstimatorMode};
use crate::model::Qubit;
use crate::noise::{index, NoiseWorld};
use crate::readout::ReadoutConfig;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeedbackConfig {
    /// MHz
    pub herald_left: (f64, f64),
    /// MHz
    pub herald_right: (f64, f64),
    pub ops_per_probe: usize,
    pub mode: EstimatorMode,
}

impl Default for FeedbackConfig {
    fn default() -> Self {
        Self {
            herald_left: (25.0, 50.0),
            herald_right: (100.0, 160.0),
            ops_per_probe: 50,
            mode: EstimatorMode::DualFeedback,
        }
    }
}

impl FeedbackConfig {
    pub fn validate(&self, estimator: &Estimator) -> Result<()> {
        if self.ops_per_probe == 0 {
            return Err(invalid("ops_per_probe", "must be at least 1"));
        }
        for (q, (lo, hi)) in [(Qubit::Left, self.herald_left), (Qubit::Right, self.herald_right)] {
            let g = estimator.config.grid(q);
            if !(lo < hi && g.contains(lo) && g.contains(hi)) {
                return Err(invalid("herald range", format!("({lo}, {hi}) MHz must be an interval inside [{}, {}] MHz", g.min, g.max)));
            }
        }
        Ok(())
    }

    pub fn range(&self, qubit: Qubit) -> (f64, f64) {
        match qubit {
            Qubit::Left => self.herald_left,
            Qubit::Right => self.herald_right,
        }
    }

    pub fn admits(&self, qubit: Qubit, f: f64) -> bool {
        let (lo, hi) = self.range(qubit);
        (lo..=hi).contains(&f)
    }
}

/// Result of one probe step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HeraldOutcome {
    /// MAP estimates `[left, right]`, MHz. In single mode the other entry is NaN.
    pub estimates: [f64; 2],
    pub accepted: bool,
    /// µs
    pub elapsed: f64,
}

/// Probe both qubits (or the configured one in single mode) and herald.
/// Wall clock advances whether or not the round is accepted.
pub fn probe_and_herald<R: Rng + ?Sized>(
    world: &mut NoiseWorld,
    estimator: &Estimator,
    readout: &ReadoutConfig,
    feedback: &FeedbackConfig,
    rng: &mut R,
) -> HeraldOutcome {
    let run = estimator.run(world, readout, feedback.mode, rng);
    let mut estimates = [f64::NAN; 2];
    let mut accepted = true;
    for q in [Qubit::Left, Qubit::Right] {
        if let Some(o) = run.get(q) {
            estimates[index(q)] = o.map_frequency;
            accepted &= feedback.admits(q, o.map_frequency);
        }
    }
    HeraldOutcome { estimates, accepted, elapsed: run.elapsed }
}

/// A swept experiment: one independent variable and the triplet return
/// probability at each point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentTrace {
    /// Column name including its unit, e.g. `t_exch_ns`.
    pub x_label: String,
    pub x: Vec<f64>,
    pub p_triplet: Vec<f64>,
    pub shots_per_point: usize,
}

impl ExperimentTrace {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Time axis in µs for `*_ns` labels, unchanged otherwise.
    pub fn x_us(&self) -> Vec<f64> {
        if self.x_label.ends_with("_ns") {
            self.x.iter().map(|t| t * 1e-3).collect()
        } else {
            self.x.clone()
        }
    }
}

/// Observed triplet fraction from an ideal triplet probability after the
/// readout map and `shots` Bernoulli trials. `shots = 0` returns the expected
/// value.
pub(crate) fn observe<R: Rng + ?Sized>(
    p_triplet_ideal: f64,
    readout: &ReadoutConfig,
    crosstalk: bool,
    qubit: Qubit,
    shots: usize,
    rng: &mut R,
) -> f64 {
    let z = (1.0 - 2.0 * readout.init_error) * (1.0 - 2.0 * p_triplet_ideal);
    let p_t = 1.0 - crate::readout::shot_probability(z.clamp(-1.0, 1.0), readout, crosstalk, qubit);
    if shots == 0 {
        return p_t;
    }
    let k = Binomial::new(shots as u64, p_t.clamp(0.0, 1.0))
        .expect("probability lies in [0, 1]")
        .sample(rng);
    k as f64 / shots as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::EstimatorConfig;
    use crate::noise::NuclearBathConfig;
    use crate::rng::{seeded, stream, Purpose};

    #[test]
    fn frozen_worlds_herald_deterministically() {
        let est = Estimator::new(EstimatorConfig::default()).unwrap();
        let fb = FeedbackConfig::default();
        let ro = ReadoutConfig::default();
        for seed in 0..20 {
            let mut w = NoiseWorld::at_mean(NuclearBathConfig::frozen(37.5, 130.0));
            assert!(probe_and_herald(&mut w, &est, &ro, &fb, &mut seeded(seed)).accepted);
            let mut w = NoiseWorld::at_mean(NuclearBathConfig::frozen(60.0, 130.0));
            assert!(!probe_and_herald(&mut w, &est, &ro, &fb, &mut seeded(seed)).accepted);
        }
    }

    #[test]
    fn stochastic_world_is_mostly_heralded() {
        let est = Estimator::new(EstimatorConfig::default()).unwrap();
        let fb = FeedbackConfig::default();
        let ro = ReadoutConfig::default();
        let bath = NuclearBathConfig::default();
        let accepted = (0..1000u64)
            .filter(|&i| {
                let mut rng = stream(3, Purpose::Herald, i);
                let mut w = NoiseWorld::stationary(bath, &mut rng);
                probe_and_herald(&mut w, &est, &ro, &fb, &mut rng).accepted
            })
            .count();
        assert!(accepted >= 700, "accepted {accepted}/1000");
    }

    #[test]
    fn herald_ranges_must_fit_grids() {
        let est = Estimator::new(EstimatorConfig::default()).unwrap();
        assert!(FeedbackConfig::default().validate(&est).is_ok());
        let bad = FeedbackConfig { herald_right: (60.0, 160.0), ..Default::default() };
        assert!(bad.validate(&est).is_err());
    }

    #[test]
    fn observe_maps_through_readout() {
        let ro = ReadoutConfig::default();
        let mut rng = seeded(1);
        // ideal singlet: P_T = 1 − ½(1 + α + β)
        let p = observe(0.0, &ro, false, Qubit::Left, 0, &mut rng);
        assert!((p - 0.05).abs() < 1e-12);
        let p = observe(1.0, &ro, false, Qubit::Left, 0, &mut rng);
        assert!((p - 0.85).abs() < 1e-12);
    }
}
