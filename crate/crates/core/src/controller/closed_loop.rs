//! Continuous tracking of both field gradients.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{probe_and_herald, FeedbackConfig};
use crate::estimator::{Estimator, EstimatorMode};
use crate::noise::NoiseWorld;
use crate::readout::ReadoutConfig;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosedLoopSample {
    /// Seconds since the start, taken at the end of the probe.
    pub time: f64,
    pub estimate_left: f64,
    pub estimate_right: f64,
    pub truth_left: f64,
    pub truth_right: f64,
    pub heralded: bool,
}

/// Alternates probe steps with operation windows for `duration` seconds.
/// In probe-only mode estimates follow each other back to back; in feedback
/// mode every accepted probe is followed by `ops_per_probe` shots.
pub fn closed_loop_trace<R: Rng + ?Sized>(
    duration: f64,
    world: &mut NoiseWorld,
    estimator: &Estimator,
    readout: &ReadoutConfig,
    feedback: &FeedbackConfig,
    rng: &mut R,
) -> Vec<ClosedLoopSample> {
    assert!(duration > 0.0, "duration must be positive");
    let mut clock_us = 0.0;
    let mut out = Vec::new();
    while clock_us < duration * 1e6 {
        let h = probe_and_herald(world, estimator, readout, feedback, rng);
        clock_us += h.elapsed;
        out.push(ClosedLoopSample {
            time: clock_us * 1e-6,
            estimate_left: h.estimates[0],
            estimate_right: h.estimates[1],
            truth_left: world.dbz[0],
            truth_right: world.dbz[1],
            heralded: h.accepted,
        });
        if h.accepted && feedback.mode == EstimatorMode::DualFeedback {
            let ops = feedback.ops_per_probe as f64 * readout.shot_time;
            world.advance(ops, rng);
            clock_us += ops;
        }
    }
    out
}
