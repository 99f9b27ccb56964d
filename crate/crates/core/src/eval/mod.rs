//! Trajectory quality metrics and success judging: Gaussian-residual RMS
//! jitter, pose-region success tests over execution logs, and the batch
//! suite runner.

mod suite;

pub use suite::{
    read_suite_config, run_suite, write_report_csv, write_report_json, CellReport, SuiteConfig,
    SuiteReport, Variant,
};

use thiserror::Error;

use crate::exec::{deviation, ExecError, ExecutionLog};
use crate::geom::{Pose, Quat, RotVec, Vec3};
use crate::scalar::Real;
use crate::track::TrackError;
use crate::traj::{hemisphere_aligned, PoseSample, PoseTrajectory};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("trajectory has {samples} samples, the metric needs {need}")]
    TooShort { samples: usize, need: usize },
    #[error("sigma must be positive and finite")]
    BadSigma,
    #[error("success tolerances must be positive")]
    BadCriterion,
    #[error("config {path}: {reason}")]
    InvalidConfig { path: String, reason: String },
    #[error("config is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Track(#[from] TrackError),
    #[error(transparent)]
    Exec(#[from] ExecError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Smoothing scale the jitter metric uses when none is given, frames.
pub const DEFAULT_JITTER_SIGMA: f64 = 2.0;

/// Gaussian weights for integer offsets `0..=ceil(3 sigma)`; the negative
/// side mirrors.
fn half_kernel<T: Real>(sigma: T) -> Vec<T> {
    let radius = (T::of(3.0) * sigma).ceil().as_f64() as usize;
    let two_sigma_sq = T::of(2.0) * sigma * sigma;
    (0..=radius)
        .map(|j| {
            let d = T::of(j as f64);
            (-(d * d) / two_sigma_sq).exp()
        })
        .collect()
}

/// Smooth a trajectory with a discrete Gaussian truncated at 3 sigma
/// (in frames) and renormalized where the window is clamped by the ends.
///
/// Translations are convolved per axis. Rotations are hemisphere aligned
/// and averaged with the same weights in the tangent space anchored at
/// each sample's own rotation, the same construction the moving-average
/// smoother uses. Timestamps pass through.
pub fn gaussian_smooth_traj<T: Real>(
    traj: &PoseTrajectory<T>,
    sigma: T,
) -> Result<PoseTrajectory<T>, EvalError> {
    if !(sigma > T::zero()) || !sigma.is_finite() {
        return Err(EvalError::BadSigma);
    }
    let samples = traj.samples();
    let n = samples.len();
    if n < 3 {
        return Err(EvalError::TooShort { samples: n, need: 3 });
    }
    let kernel = half_kernel(sigma);
    let radius = kernel.len() - 1;
    let quats: Vec<_> = samples.iter().map(|s| s.pose.rotation()).collect();
    let aligned = hemisphere_aligned(&quats);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let lo = i.saturating_sub(radius);
        let hi = (i + radius).min(n - 1);
        let mut total = T::zero();
        // Convolve offsets from the current sample, not raw coordinates:
        // a constant trajectory then stays bit-identical.
        let center = samples[i].pose.translation();
        let mut t_acc = Vec3::zero();
        let base = aligned[i];
        let base_inv = base.conjugate();
        let mut rv_mean = Vec3::zero();
        for s in lo..=hi {
            let w = kernel[i.abs_diff(s)];
            total += w;
            t_acc += (samples[s].pose.translation() - center) * w;
            rv_mean += (base_inv * aligned[s]).to_rotvec().0 * w;
        }
        let t_mean = center + t_acc / total;
        rv_mean = rv_mean / total;
        let q = base * Quat::from_rotvec(RotVec::new(rv_mean.x, rv_mean.y, rv_mean.z));
        out.push(PoseSample {
            t: samples[i].t,
            pose: Pose::new(t_mean, q),
        });
    }
    Ok(PoseTrajectory::new(out).expect("timestamps unchanged"))
}

/// RMS residual between a trajectory and its Gaussian-smoothed version.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JitterReport<T> {
    /// `sqrt(mean ||t_raw - t_smooth||^2)`, meters.
    pub translational_m: T,
    /// RMS geodesic angle between raw and smoothed rotations, degrees.
    pub rotational_deg: T,
    /// Smoothing scale the residual was taken against, frames.
    pub sigma: T,
    pub samples: usize,
}

/// Jitter of a trajectory: smooth it with [`gaussian_smooth_traj`], then
/// take the RMS of the per-sample translation distances and geodesic
/// rotation angles between raw and smoothed.
pub fn rms_jitter<T: Real>(traj: &PoseTrajectory<T>, sigma: T) -> Result<JitterReport<T>, EvalError> {
    let smooth = gaussian_smooth_traj(traj, sigma)?;
    let n = traj.len();
    let count = T::of(n as f64);
    let mut sum_t = T::zero();
    let mut sum_r = T::zero();
    for (raw, ref_s) in traj.samples().iter().zip(smooth.samples()) {
        let dt = (raw.pose.translation() - ref_s.pose.translation()).norm();
        sum_t += dt * dt;
        let theta = ref_s.pose.rotation().angle_to_deg(raw.pose.rotation());
        sum_r += theta * theta;
    }
    Ok(JitterReport {
        translational_m: (sum_t / count).sqrt(),
        rotational_deg: (sum_r / count).sqrt(),
        sigma,
        samples: n,
    })
}

/// Pose region the final object pose must land in for a trial to count
/// as a success.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuccessCriterion {
    pub target: Pose<f64>,
    pub tol_m: f64,
    pub tol_deg: f64,
}

impl SuccessCriterion {
    pub fn new(target: Pose<f64>, tol_m: f64, tol_deg: f64) -> Result<Self, EvalError> {
        if !(tol_m > 0.0) || !(tol_deg > 0.0) {
            return Err(EvalError::BadCriterion);
        }
        Ok(Self {
            target,
            tol_m,
            tol_deg,
        })
    }
}

/// True when the log's final observed object pose lies inside the
/// criterion region. A log with no records never succeeds.
pub fn judge_success(log: &ExecutionLog, crit: &SuccessCriterion) -> bool {
    log.records
        .last()
        .map(|r| {
            let (dm, dd) = deviation(&r.obs, &crit.target);
            dm <= crit.tol_m && dd <= crit.tol_deg
        })
        .unwrap_or(false)
}
