//! Execution logs: one record per control tick plus one summary record,
//! serialized as JSON lines, with machine-checkable self-consistency.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::GeomError;
use crate::{Pose, Quat, Vec3};

use super::{DeviationPolicy, ExecError};

/// What happened on a tick, beyond plain progress toward the waypoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TickEvent {
    /// The current waypoint settled; the next tick targets the following
    /// one.
    Advance,
    /// Deviation exceeded policy; the next tick targets an earlier,
    /// already-settled waypoint.
    Backtrack,
    /// The final waypoint settled; the run is complete.
    Settle,
}

/// How a run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Completed,
    BudgetExhausted,
    BacktrackLimit,
}

/// One control tick. `waypoint` is the index targeted during this tick,
/// before any transition its event causes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TickRecord {
    pub tick: usize,
    pub waypoint: usize,
    /// Commanded end-effector pose.
    pub cmd: Pose,
    /// Observed object pose after the step.
    pub obs: Pose,
    /// Where the plan expects the object at this waypoint.
    pub expected: Pose,
    pub dev_m: f64,
    pub dev_deg: f64,
    pub event: Option<TickEvent>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExecSummary {
    pub outcome: Outcome,
    pub backtracks: usize,
    pub ticks: usize,
    pub final_dev_m: f64,
    pub final_dev_deg: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExecutionLog {
    pub records: Vec<TickRecord>,
    pub summary: ExecSummary,
}

/// Ways a log can contradict itself. Produced by [`validate_log`].
#[derive(Debug, Error, PartialEq, Eq)]
pub enum LogViolation {
    #[error("tick numbers are not strictly increasing at record {record}")]
    TickOrder { record: usize },
    #[error("waypoint index skips forward by more than 1 at record {record}")]
    IndexSkip { record: usize },
    #[error("backtrack at record {record} without a policy-exceeding deviation")]
    BacktrackWithoutDeviation { record: usize },
    #[error("backtrack at record {record} did not decrease the waypoint index")]
    BacktrackNotDecreasing { record: usize },
    #[error("summary reports {reported} backtracks, records contain {counted}")]
    BacktrackCountMismatch { counted: usize, reported: usize },
    #[error("summary reports {reported} ticks, log contains {counted}")]
    TickCountMismatch { counted: usize, reported: usize },
    #[error("completed outcome without a final settle event")]
    CompletedWithoutSettle,
}

/// Check the self-consistency invariants every well-formed log satisfies:
/// ticks strictly increase, the waypoint index never jumps forward past
/// one per record, every backtrack is justified by a deviation beyond the
/// policy on its own tick and strictly decreases the index, and the
/// summary agrees with the records.
pub fn validate_log(log: &ExecutionLog, policy: &DeviationPolicy) -> Result<(), LogViolation> {
    let records = &log.records;
    for i in 1..records.len() {
        if records[i].tick <= records[i - 1].tick {
            return Err(LogViolation::TickOrder { record: i });
        }
        if records[i].waypoint > records[i - 1].waypoint + 1 {
            return Err(LogViolation::IndexSkip { record: i });
        }
    }
    let mut backtracks = 0;
    for (i, r) in records.iter().enumerate() {
        if r.event == Some(TickEvent::Backtrack) {
            backtracks += 1;
            let justified =
                r.dev_m > policy.max_translation_m || r.dev_deg > policy.max_rotation_deg;
            if !justified {
                return Err(LogViolation::BacktrackWithoutDeviation { record: i });
            }
            if let Some(next) = records.get(i + 1) {
                if next.waypoint >= r.waypoint {
                    return Err(LogViolation::BacktrackNotDecreasing { record: i });
                }
            }
        }
    }
    if backtracks != log.summary.backtracks {
        return Err(LogViolation::BacktrackCountMismatch {
            counted: backtracks,
            reported: log.summary.backtracks,
        });
    }
    if records.len() != log.summary.ticks {
        return Err(LogViolation::TickCountMismatch {
            counted: records.len(),
            reported: log.summary.ticks,
        });
    }
    if log.summary.outcome == Outcome::Completed
        && records.last().map(|r| r.event) != Some(Some(TickEvent::Settle))
    {
        return Err(LogViolation::CompletedWithoutSettle);
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct PoseRec {
    p: [f64; 3],
    q: [f64; 4],
}

impl PoseRec {
    fn of(pose: &Pose) -> Self {
        let t = pose.translation();
        let q = pose.rotation();
        Self {
            p: [t.x, t.y, t.z],
            q: [q.w, q.x, q.y, q.z],
        }
    }

    fn pose(&self) -> Result<Pose, GeomError> {
        Ok(Pose::new(
            Vec3::new(self.p[0], self.p[1], self.p[2]),
            Quat::try_new(self.q[0], self.q[1], self.q[2], self.q[3])?,
        ))
    }
}

#[derive(Serialize, Deserialize)]
struct TickLine {
    tick: usize,
    waypoint: usize,
    cmd: PoseRec,
    obs: PoseRec,
    exp: PoseRec,
    dev_m: f64,
    dev_deg: f64,
    event: Option<TickEvent>,
}

#[derive(Serialize, Deserialize)]
struct SummaryLine {
    summary: ExecSummary,
}

/// Write the log as JSON lines: every tick record, then the summary
/// record `{"summary": ...}`.
pub fn write_execution_log<W: Write>(out: &mut W, log: &ExecutionLog) -> Result<(), ExecError> {
    for r in &log.records {
        let line = TickLine {
            tick: r.tick,
            waypoint: r.waypoint,
            cmd: PoseRec::of(&r.cmd),
            obs: PoseRec::of(&r.obs),
            exp: PoseRec::of(&r.expected),
            dev_m: r.dev_m,
            dev_deg: r.dev_deg,
            event: r.event,
        };
        let text = serde_json::to_string(&line).map_err(|source| ExecError::Json { line: 0, source })?;
        out.write_all(text.as_bytes())?;
        out.write_all(b"\n")?;
    }
    let text = serde_json::to_string(&SummaryLine {
        summary: log.summary,
    })
    .map_err(|source| ExecError::Json { line: 0, source })?;
    out.write_all(text.as_bytes())?;
    out.write_all(b"\n")?;
    Ok(())
}

/// Read a log written by [`write_execution_log`]. The summary record must
/// be present; records after it are rejected.
pub fn read_execution_log<R: BufRead>(input: R) -> Result<ExecutionLog, ExecError> {
    let mut records = Vec::new();
    let mut summary: Option<ExecSummary> = None;
    for (i, line) in input.lines().enumerate() {
        let n = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if summary.is_some() {
            return Err(ExecError::TrailingRecords { line: n });
        }
        if let Ok(s) = serde_json::from_str::<SummaryLine>(&line) {
            summary = Some(s.summary);
            continue;
        }
        let t: TickLine =
            serde_json::from_str(&line).map_err(|source| ExecError::Json { line: n, source })?;
        let rec = TickRecord {
            tick: t.tick,
            waypoint: t.waypoint,
            cmd: t.cmd.pose().map_err(|e| ExecError::BadLogPose {
                line: n,
                reason: e.to_string(),
            })?,
            obs: t.obs.pose().map_err(|e| ExecError::BadLogPose {
                line: n,
                reason: e.to_string(),
            })?,
            expected: t.exp.pose().map_err(|e| ExecError::BadLogPose {
                line: n,
                reason: e.to_string(),
            })?,
            dev_m: t.dev_m,
            dev_deg: t.dev_deg,
            event: t.event,
        };
        records.push(rec);
    }
    let summary = summary.ok_or(ExecError::MissingSummary)?;
    Ok(ExecutionLog { records, summary })
}
