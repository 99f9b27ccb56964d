//! Closed-loop replay of an end-effector plan with deviation detection and
//! backtracking recovery, driven against an embedded kinematic simulator.
//!
//! The executor walks the plan waypoint by waypoint. Every tick it commands
//! the current waypoint, reads the observed object pose back, and compares
//! it with where the plan says the object should be. A deviation beyond the
//! policy sends execution back to the last waypoint that settled
//! successfully; progress past the final waypoint completes the run.
//!
//! This layer is deliberately concrete (`f64`): it orchestrates rather than
//! computes, and its logs are serialized as plain doubles.

mod log;
mod sim;
mod synth;

pub use log::{
    read_execution_log, validate_log, write_execution_log, ExecSummary, ExecutionLog, LogViolation,
    Outcome, TickEvent, TickRecord,
};
pub use sim::{
    read_perturbation_script, sim_step, write_perturbation_script, Magnitude, Perturbation,
    PerturbationKind, SimState, Trigger,
};
pub use synth::{gen_synthetic_task, gen_synthetic_task_with, SynthConfig, SyntheticTask, TaskKind};

use thiserror::Error;

use crate::geom::rotation_angle_deg;
use crate::retarget::{expected_object_pose, EndEffectorTrajectory, GraspTransform};
use crate::Pose;

#[derive(Debug, Error)]
pub enum ExecError {
    #[error("invalid deviation policy: {reason}")]
    InvalidPolicy { reason: &'static str },
    #[error("invalid simulator state: {reason}")]
    InvalidSim { reason: &'static str },
    #[error("perturbation {index} is invalid: {reason}")]
    InvalidPerturbation { index: usize, reason: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed record on line {line}: {source}")]
    Json {
        line: usize,
        source: serde_json::Error,
    },
    #[error("invalid pose on log line {line}: {reason}")]
    BadLogPose { line: usize, reason: String },
    #[error("log ends without a summary record")]
    MissingSummary,
    #[error("records found after the summary on line {line}")]
    TrailingRecords { line: usize },
}

/// When to give up on the plan and when to call a waypoint done.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviationPolicy {
    /// Object deviation beyond this (meters) triggers a backtrack.
    pub max_translation_m: f64,
    /// Object deviation beyond this (degrees) triggers a backtrack.
    pub max_rotation_deg: f64,
    /// End-effector distance to the commanded pose below both settle
    /// bounds declares the waypoint reached.
    pub settle_translation_m: f64,
    pub settle_rotation_deg: f64,
    /// One more backtrack than this fails the run.
    pub max_backtracks: usize,
    /// Ticks before the run is declared stuck.
    pub tick_budget: usize,
}

impl Default for DeviationPolicy {
    fn default() -> Self {
        Self {
            max_translation_m: 0.03,
            max_rotation_deg: 20.0,
            settle_translation_m: 0.005,
            settle_rotation_deg: 2.0,
            max_backtracks: 10,
            tick_budget: 10_000,
        }
    }
}

impl DeviationPolicy {
    pub fn validate(&self) -> Result<(), ExecError> {
        let all_positive = self.max_translation_m > 0.0
            && self.max_rotation_deg > 0.0
            && self.settle_translation_m > 0.0
            && self.settle_rotation_deg > 0.0
            && self.tick_budget > 0;
        if !all_positive {
            return Err(ExecError::InvalidPolicy {
                reason: "thresholds and budget must be positive",
            });
        }
        if self.settle_translation_m >= self.max_translation_m
            || self.settle_rotation_deg >= self.max_rotation_deg
        {
            return Err(ExecError::InvalidPolicy {
                reason: "settle tolerances must be strictly below deviation thresholds",
            });
        }
        Ok(())
    }
}

/// Translation and rotation gap between an observed and an expected pose:
/// Euclidean meters and geodesic degrees.
pub fn deviation(observed: &Pose, expected: &Pose) -> (f64, f64) {
    let dt = (observed.translation() - expected.translation()).norm();
    let dr = rotation_angle_deg(observed.rotation(), expected.rotation());
    (dt, dr)
}

/// Run a plan to completion, backtracking on deviations.
///
/// Each tick: command the current waypoint (corrected through the current
/// in-hand estimate), step the simulator, and compare the observed object
/// pose with the plan's expectation. A deviation past the policy backtracks
/// to the highest already-settled waypoint, re-estimating the in-hand
/// transform from the end-effector pose and the observation; while the
/// return leg is in flight, deviation checks pause (the object is off
/// course by construction until the target waypoint settles). A waypoint
/// settles when the end-effector is within the settle tolerances of its
/// command; settling the final waypoint completes the run.
///
/// Failure to finish is reported in the summary outcome, never by `Err`:
/// the log of a stuck run is exactly what postmortems need. `Err` is
/// reserved for inputs that make no sense (bad policy, bad script).
pub fn execute(
    plan: &EndEffectorTrajectory<f64>,
    g: &GraspTransform<f64>,
    policy: &DeviationPolicy,
    mut sim: SimState,
    perturbations: &[Perturbation],
) -> Result<ExecutionLog, ExecError> {
    policy.validate()?;
    for (index, p) in perturbations.iter().enumerate() {
        p.validate(index, plan.len())?;
    }
    let waypoints: Vec<Pose> = plan.samples().iter().map(|s| s.pose).collect();
    let last = waypoints.len() - 1;
    let mut fired = vec![false; perturbations.len()];
    let mut settled = vec![false; waypoints.len()];
    let mut attach_est = *g.offset();
    let mut target = 0usize;
    let mut recovering: Option<usize> = None;
    let mut backtracks = 0usize;
    let mut records: Vec<TickRecord> = Vec::new();
    let mut outcome = Outcome::BudgetExhausted;

    for tick in 0..policy.tick_budget {
        let firing: Vec<&Perturbation> = perturbations
            .iter()
            .zip(fired.iter_mut())
            .filter_map(|(p, f)| {
                let hit = !*f
                    && match p.trigger {
                        Trigger::Waypoint(w) => w == target,
                        Trigger::Tick(t) => t == tick,
                    };
                if hit {
                    *f = true;
                    Some(p)
                } else {
                    None
                }
            })
            .collect();
        let expected = expected_object_pose(&waypoints[target], g);
        let cmd = expected.compose(&attach_est.inverse());
        let obs = sim_step(&mut sim, &cmd, &firing);
        let (dev_m, dev_deg) = deviation(&obs, &expected);
        let exceeded = dev_m > policy.max_translation_m || dev_deg > policy.max_rotation_deg;
        let mut event = None;

        if exceeded && recovering.is_none() {
            if let Some(j) = settled[..target].iter().rposition(|s| *s) {
                // The observed pose tells us where the object actually sits
                // in the hand; command through that from here on.
                attach_est = sim.ee_pose().between(&obs);
                recovering = Some(j);
                backtracks += 1;
                event = Some(TickEvent::Backtrack);
            }
            // With nothing settled yet there is nowhere to go back to;
            // keep pushing toward the current waypoint.
        } else {
            let (ee_gap_m, ee_gap_deg) = deviation(&sim.ee_pose(), &cmd);
            if ee_gap_m < policy.settle_translation_m && ee_gap_deg < policy.settle_rotation_deg {
                settled[target] = true;
                if recovering == Some(target) {
                    recovering = None;
                }
                if target == last {
                    event = Some(TickEvent::Settle);
                } else {
                    event = Some(TickEvent::Advance);
                }
            }
        }

        records.push(TickRecord {
            tick,
            // Pre-transition index: transitions apply after the record.
            waypoint: target,
            cmd,
            obs,
            expected,
            dev_m,
            dev_deg,
            event,
        });

        match event {
            Some(TickEvent::Settle) => {
                outcome = Outcome::Completed;
                break;
            }
            Some(TickEvent::Advance) => target += 1,
            Some(TickEvent::Backtrack) => {
                if backtracks > policy.max_backtracks {
                    outcome = Outcome::BacktrackLimit;
                    break;
                }
                target = recovering.expect("a backtrack always picks a recovery waypoint");
            }
            None => {}
        }
    }

    let (final_dev_m, final_dev_deg) = records
        .last()
        .map(|r| (r.dev_m, r.dev_deg))
        .unwrap_or((0.0, 0.0));
    let summary = ExecSummary {
        outcome,
        backtracks,
        ticks: records.len(),
        final_dev_m,
        final_dev_deg,
    };
    Ok(ExecutionLog {
        records,
        summary,
    })
}
