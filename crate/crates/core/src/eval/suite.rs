//! Batch evaluation over the synthetic tasks: a config names tasks,
//! seeds, and a pipeline variant; the runner replays every cell and
//! emits a deterministic report plus flat plot-data rows.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{judge_success, rms_jitter, EvalError, SuccessCriterion, DEFAULT_JITTER_SIGMA};
use crate::exec::{
    deviation, execute, gen_synthetic_task, DeviationPolicy, SimState, TaskKind,
};
use crate::retarget::retarget_trajectory;
use crate::track::{smooth_trajectory, track_trajectory, Track, TrackPnPConfig};
use crate::{GraspTransform, Pose, Quat, TrackSet, Vec2, Vec3};

/// Which pose source feeds the executor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// Generator ground-truth object poses (upper bound).
    OraclePose,
    /// Full estimation: lift tracks, solve pose per frame, smooth.
    PnpTrack,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::OraclePose => "oracle-pose",
            Variant::PnpTrack => "pnp-track",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "oracle-pose" => Ok(Variant::OraclePose),
            "pnp-track" => Ok(Variant::PnpTrack),
            other => Err(format!(
                "unknown variant {other:?}; expected oracle-pose or pnp-track"
            )),
        }
    }
}

fn default_smooth_window() -> usize {
    crate::track::DEFAULT_SMOOTH_WINDOW
}

fn default_success_tol_m() -> f64 {
    0.03
}

fn default_success_tol_deg() -> f64 {
    15.0
}

/// Suite configuration, read from JSON. `version` pins the schema;
/// unknown fields are rejected so typos fail loudly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    /// Schema version; this crate writes and accepts 1.
    pub version: u32,
    pub seeds: Vec<u64>,
    /// Task kind names, e.g. `["pour", "lift"]`.
    pub tasks: Vec<String>,
    /// Pipeline variant names, e.g. `["oracle-pose", "pnp-track"]`.
    pub variants: Vec<String>,
    /// Fraction of tracks per frame displaced into gross outliers
    /// (frame 0 is never corrupted; it anchors the model).
    #[serde(default)]
    pub track_outlier_frac: f64,
    #[serde(default = "default_smooth_window")]
    pub smooth_window: usize,
    #[serde(default = "default_success_tol_m")]
    pub success_tol_m: f64,
    #[serde(default = "default_success_tol_deg")]
    pub success_tol_deg: f64,
}

impl SuiteConfig {
    /// Field-by-field validation; returns the parsed task kinds and
    /// variants in config order.
    pub fn validate(&self) -> Result<(Vec<TaskKind>, Vec<Variant>), EvalError> {
        let bad = |path: &str, reason: String| EvalError::InvalidConfig {
            path: path.to_string(),
            reason,
        };
        if self.version != 1 {
            return Err(bad(
                "version",
                format!("unsupported schema version {}, expected 1", self.version),
            ));
        }
        if self.seeds.is_empty() {
            return Err(bad("seeds", "at least one seed".into()));
        }
        if self.tasks.is_empty() {
            return Err(bad("tasks", "at least one task kind".into()));
        }
        if self.variants.is_empty() {
            return Err(bad("variants", "at least one variant".into()));
        }
        let tasks = self
            .tasks
            .iter()
            .enumerate()
            .map(|(i, name)| {
                name.parse::<TaskKind>()
                    .map_err(|e| bad(&format!("tasks[{i}]"), e))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let variants = self
            .variants
            .iter()
            .enumerate()
            .map(|(i, name)| {
                name.parse::<Variant>()
                    .map_err(|e| bad(&format!("variants[{i}]"), e))
            })
            .collect::<Result<Vec<_>, _>>()?;
        if !(0.0..1.0).contains(&self.track_outlier_frac) {
            return Err(bad(
                "track_outlier_frac",
                format!("{} is outside [0, 1)", self.track_outlier_frac),
            ));
        }
        if self.smooth_window % 2 == 0 {
            return Err(bad(
                "smooth_window",
                format!("{} is even; smoothing windows are odd", self.smooth_window),
            ));
        }
        if !(self.success_tol_m > 0.0) || !(self.success_tol_deg > 0.0) {
            return Err(bad("success_tol_m", "tolerances must be positive".into()));
        }
        Ok((tasks, variants))
    }
}

/// Aggregates over one (task, variant) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub task: String,
    pub variant: String,
    pub episodes: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub mean_backtracks: f64,
    /// Frames whose pose carried forward across all episodes of the cell.
    pub carried_forward_frames: usize,
    pub mean_jitter_translational_m: f64,
    pub mean_jitter_rotational_deg: f64,
    /// Mean distance between the final observed object pose and the
    /// ground-truth final pose, meters.
    pub mean_final_error_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub config: SuiteConfig,
    pub cells: Vec<CellReport>,
}

/// Grasp constant for suite episodes: a thumb's length of offset plus a
/// small twist, so retargeting is never trivially the identity.
fn suite_grasp() -> GraspTransform {
    GraspTransform::new(Pose::new(
        Vec3::new(0.0, 0.0, 0.02),
        Quat::from_axis_angle(Vec3::new(0.0, 0.0, 1.0), 0.1),
    ))
}

/// Displace `frac` of the tracks on every frame after the first into
/// gross outliers (40..120 px, seeded), leaving visibility flags alone.
fn corrupt_tracks(tracks: &TrackSet, frac: f64, seed: u64) -> Result<TrackSet, EvalError> {
    if frac == 0.0 {
        return Ok(tracks.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6f75_746c_6965_7273);
    let mut list: Vec<Track<f64>> = tracks.tracks().to_vec();
    let n = list.len();
    let per_frame = (frac * n as f64).floor() as usize;
    for frame in 1..tracks.frame_count() {
        for t in rand::seq::index::sample(&mut rng, n, per_frame).iter() {
            let dx = rng.gen_range(40.0..120.0) * if rng.gen::<bool>() { 1.0 } else { -1.0 };
            let dy = rng.gen_range(40.0..120.0) * if rng.gen::<bool>() { 1.0 } else { -1.0 };
            let p = list[t].xy[frame];
            list[t].xy[frame] = Vec2::new(p.x + dx, p.y + dy);
        }
    }
    Ok(TrackSet::new(tracks.frame_count(), list)?)
}

struct Episode {
    success: bool,
    backtracks: usize,
    carried: usize,
    jitter_t: f64,
    jitter_r: f64,
    final_error_m: f64,
}

fn run_episode(
    kind: TaskKind,
    variant: Variant,
    seed: u64,
    cfg: &SuiteConfig,
) -> Result<Episode, EvalError> {
    let task = gen_synthetic_task(kind, seed);
    let (estimate, carried) = match variant {
        Variant::OraclePose => (task.object_traj.clone(), 0),
        Variant::PnpTrack => {
            let tracks = corrupt_tracks(&task.tracks, cfg.track_outlier_frac, seed)?;
            let tracked = track_trajectory(
                &tracks,
                &task.depth0,
                &task.camera,
                &TrackPnPConfig::default(),
            )?;
            let carried = tracked.carried_forward_count();
            (tracked.trajectory, carried)
        }
    };
    let jitter = rms_jitter(&estimate, DEFAULT_JITTER_SIGMA)?;
    let smoothed = smooth_trajectory(&estimate, cfg.smooth_window)?;
    let grasp = suite_grasp();
    let plan = retarget_trajectory(&smoothed, &grasp);
    let sim = SimState::new(plan.samples()[0].pose, *grasp.offset(), 0.02, 10.0, seed)?;
    let log = execute(&plan, &grasp, &DeviationPolicy::default(), sim, &[])?;

    let target = task
        .object_traj
        .samples()
        .last()
        .expect("synthetic tasks are never empty")
        .pose;
    let crit = SuccessCriterion::new(target, cfg.success_tol_m, cfg.success_tol_deg)?;
    let final_error_m = log
        .records
        .last()
        .map(|r| deviation(&r.obs, &target).0)
        .unwrap_or(f64::INFINITY);
    Ok(Episode {
        success: judge_success(&log, &crit),
        backtracks: log.summary.backtracks,
        carried,
        jitter_t: jitter.translational_m,
        jitter_r: jitter.rotational_deg,
        final_error_m,
    })
}

/// Run every (task, variant) cell over every seed. Cells appear in
/// config order (tasks outer, variants inner); the report is a pure
/// function of the config.
pub fn run_suite(cfg: &SuiteConfig) -> Result<SuiteReport, EvalError> {
    let (tasks, variants) = cfg.validate()?;
    let mut cells = Vec::with_capacity(tasks.len() * variants.len());
    for &kind in &tasks {
        for &variant in &variants {
            let mut successes = 0usize;
            let mut backtracks = 0usize;
            let mut carried = 0usize;
            let mut jitter_t = 0.0;
            let mut jitter_r = 0.0;
            let mut final_err = 0.0;
            for &seed in &cfg.seeds {
                let ep = run_episode(kind, variant, seed, cfg)?;
                successes += ep.success as usize;
                backtracks += ep.backtracks;
                carried += ep.carried;
                jitter_t += ep.jitter_t;
                jitter_r += ep.jitter_r;
                final_err += ep.final_error_m;
            }
            let n = cfg.seeds.len();
            cells.push(CellReport {
                task: kind.name().to_string(),
                variant: variant.name().to_string(),
                episodes: n,
                successes,
                success_rate: successes as f64 / n as f64,
                mean_backtracks: backtracks as f64 / n as f64,
                carried_forward_frames: carried,
                mean_jitter_translational_m: jitter_t / n as f64,
                mean_jitter_rotational_deg: jitter_r / n as f64,
                mean_final_error_m: final_err / n as f64,
            });
        }
    }
    Ok(SuiteReport {
        config: cfg.clone(),
        cells,
    })
}

/// Parse and validate a JSON config.
pub fn read_suite_config<R: Read>(mut input: R) -> Result<SuiteConfig, EvalError> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    let cfg: SuiteConfig = serde_json::from_str(&text)?;
    cfg.validate()?;
    Ok(cfg)
}

/// One-line JSON report.
pub fn write_report_json<W: Write>(out: &mut W, report: &SuiteReport) -> Result<(), EvalError> {
    let text = serde_json::to_string(report)?;
    out.write_all(text.as_bytes())?;
    out.write_all(b"\n")?;
    Ok(())
}

const CSV_METRICS: [&str; 8] = [
    "episodes",
    "successes",
    "success_rate",
    "mean_backtracks",
    "carried_forward_frames",
    "mean_jitter_translational_m",
    "mean_jitter_rotational_deg",
    "mean_final_error_m",
];

/// Plot-data table: a header row, then one `task,variant,metric,value`
/// row per cell metric, in report order.
pub fn write_report_csv<W: Write>(out: &mut W, report: &SuiteReport) -> Result<(), EvalError> {
    writeln!(out, "task,variant,metric,value")?;
    for cell in &report.cells {
        let values: [String; 8] = [
            cell.episodes.to_string(),
            cell.successes.to_string(),
            cell.success_rate.to_string(),
            cell.mean_backtracks.to_string(),
            cell.carried_forward_frames.to_string(),
            cell.mean_jitter_translational_m.to_string(),
            cell.mean_jitter_rotational_deg.to_string(),
            cell.mean_final_error_m.to_string(),
        ];
        for (metric, value) in CSV_METRICS.iter().zip(values) {
            writeln!(out, "{},{},{},{}", cell.task, cell.variant, metric, value)?;
        }
    }
    Ok(())
}
