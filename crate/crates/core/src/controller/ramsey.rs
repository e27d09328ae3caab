//! Feedback-stabilized Ramsey interferometry.
//!
//! Every acquisition cycle starts from a fresh stationary draw of the bath,
//! since a full sweep takes far longer than the bath correlation time. With
//! feedback the cycle probes and heralds, then spends `ops_per_probe` shots
//! on the Ramsey sequence with the drive frame set by the estimate; the bath
//! keeps drifting throughout. Without feedback the frame sits at the bath
//! mean.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::{observe, probe_and_herald, ExperimentTrace, FeedbackConfig};
use crate::estimator::Estimator;
use crate::model::Qubit;
use crate::noise::{NoiseWorld, NuclearBathConfig};
use crate::readout::ReadoutConfig;
use crate::rng::{stream, Purpose};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RamseyConfig {
    pub qubit: Qubit,
    /// Programmed detuning of the drive frame, MHz.
    pub delta_f: f64,
    pub feedback: bool,
    /// Probe cycles averaged per delay point.
    pub cycles_per_point: usize,
    /// Give up on a cycle after this many rejected probes.
    pub max_probe_attempts: usize,
}

impl Default for RamseyConfig {
    fn default() -> Self {
        Self {
            qubit: Qubit::Left,
            delta_f: 0.0,
            feedback: true,
            cycles_per_point: 40,
            max_probe_attempts: 100,
        }
    }
}

/// Ramsey trace over delays `t_w_ns`. Point `i`, cycle `c` uses stream
/// `i·cycles_per_point + c`.
pub fn ramsey_trace(
    t_w_ns: &[f64],
    cfg: &RamseyConfig,
    bath: &NuclearBathConfig,
    estimator: &Estimator,
    readout: &ReadoutConfig,
    feedback: &FeedbackConfig,
    seed: u64,
) -> ExperimentTrace {
    let q = cfg.qubit;
    let simultaneous = feedback.mode.is_dual();
    let ops = feedback.ops_per_probe;
    let p: Vec<f64> = t_w_ns
        .par_iter()
        .enumerate()
        .map(|(i, &t_w)| {
            let mut triplets = 0.0;
            for c in 0..cfg.cycles_per_point {
                let mut rng = stream(seed, Purpose::Ramsey, (i * cfg.cycles_per_point + c) as u64);
                let mut world = NoiseWorld::stationary(*bath, &mut rng);
                let frame = if cfg.feedback {
                    let mut est = None;
                    for _ in 0..cfg.max_probe_attempts {
                        let h = probe_and_herald(&mut world, estimator, readout, feedback, &mut rng);
                        if h.accepted {
                            est = Some(h.estimates[crate::noise::index(q)]);
                            break;
                        }
                    }
                    est.unwrap_or(bath.mean(q))
                } else {
                    bath.mean(q)
                };
                for _ in 0..ops {
                    let detuning = cfg.delta_f + world.dbz(q) - frame;
                    // two π/2 pulses make a π flip on resonance
                    let ideal = 0.5 * (1.0 + (2.0 * PI * detuning * t_w * 1e-3).cos());
                    triplets += observe(ideal, readout, simultaneous, q, 1, &mut rng);
                    world.advance(readout.shot_time, &mut rng);
                }
            }
            triplets / (cfg.cycles_per_point * ops) as f64
        })
        .collect();
    ExperimentTrace {
        x_label: "t_w_ns".into(),
        x: t_w_ns.to_vec(),
        p_triplet: p,
        shots_per_point: cfg.cycles_per_point * ops,
    }
}
