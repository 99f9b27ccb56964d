//! Moving-average trajectory smoothing.

use crate::geom::{Pose, Quat, RotVec};
use crate::scalar::Real;
use crate::traj::{hemisphere_aligned, PoseSample, PoseTrajectory};

use super::TrackError;

/// Default smoothing window, frames.
pub const DEFAULT_SMOOTH_WINDOW: usize = 5;

/// Smooth a trajectory with a centered moving average of odd width
/// `window`.
///
/// Near the ends the window is clamped to the valid index range, so the
/// first and last samples average over `(window + 1) / 2` poses; on a
/// linear ramp that pulls the endpoints inward while interior samples are
/// unchanged. Translations average per axis. Rotations are hemisphere
/// aligned, then averaged in the tangent space anchored at the current
/// sample's rotation. Timestamps are untouched. `window == 1` returns a
/// copy.
pub fn smooth_trajectory<T: Real>(
    traj: &PoseTrajectory<T>,
    window: usize,
) -> Result<PoseTrajectory<T>, TrackError> {
    if window % 2 == 0 {
        return Err(TrackError::EvenWindow { window });
    }
    let samples = traj.samples();
    let n = samples.len();
    if window == 1 || n == 1 {
        return Ok(traj.clone());
    }
    let quats: Vec<_> = samples.iter().map(|s| s.pose.rotation()).collect();
    let aligned = hemisphere_aligned(&quats);
    let half = window / 2;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let lo = i.saturating_sub(half);
        let hi = (i + half).min(n - 1);
        let count = T::of((hi - lo + 1) as f64);
        let mut t_mean = crate::geom::Vec3::zero();
        for s in &samples[lo..=hi] {
            t_mean += s.pose.translation();
        }
        t_mean = t_mean / count;
        // Tangent-space mean anchored at this sample's own rotation; for
        // the small in-window rotations this is built for, the anchor is
        // well inside the injectivity radius of every neighbor.
        let base = aligned[i];
        let base_inv = base.conjugate();
        let mut rv_mean = crate::geom::Vec3::zero();
        for q in &aligned[lo..=hi] {
            rv_mean += (base_inv * *q).to_rotvec().0;
        }
        rv_mean = rv_mean / count;
        let q = base * Quat::from_rotvec(RotVec::new(rv_mean.x, rv_mean.y, rv_mean.z));
        out.push(PoseSample {
            t: samples[i].t,
            pose: Pose::new(t_mean, q),
        });
    }
    Ok(PoseTrajectory::new(out).expect("timestamps unchanged"))
}
