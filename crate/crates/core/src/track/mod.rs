//! Per-frame 6DoF object poses from 2D point tracks.
//!
//! The first frame's tracks are lifted to a 3D point model through the
//! aligned depth raster; each later frame solves a damped Gauss-Newton PnP
//! (optionally inside RANSAC) against the tracks visible there. Frames with
//! too few correspondences carry the last good pose forward and are flagged.

mod io;
mod pnp;
mod smooth;

pub use io::{read_tracks_json, write_tracks_json};
pub use pnp::{centroid_init, pnp_ransac, pnp_refine, PnPConfig, MAX_REFINE_ITERATIONS, STEP_TOLERANCE};
pub use smooth::{smooth_trajectory, DEFAULT_SMOOTH_WINDOW};

use thiserror::Error;

use crate::depth::DepthMap;
use crate::geom::{CameraIntrinsics, Pose, Vec2, Vec3};
use crate::scalar::Real;
use crate::traj::{PoseSample, PoseTrajectory, TrajError};

#[derive(Debug, Error)]
pub enum TrackError {
    #[error("track {track} has {xy} positions and {vis} visibility flags; expected {expected}")]
    BadShape {
        track: usize,
        xy: usize,
        vis: usize,
        expected: usize,
    },
    #[error("{found} tracks lift to valid 3d points; need at least 4")]
    NoValidPoints { found: usize },
    #[error("{found} usable correspondences; need at least {need}")]
    TooFewPoints { found: usize, need: usize },
    #[error("reprojection error became non-finite after {iterations} iterations")]
    Diverged { iterations: usize },
    #[error("best consensus has {best} inliers; need at least {need}")]
    NoConsensus { best: usize, need: usize },
    #[error("smoothing window must be odd, got {window}")]
    EvenWindow { window: usize },
    #[error("{observations} observations for {points} model points")]
    ObsLengthMismatch {
        observations: usize,
        points: usize,
    },
    #[error("invalid tracking config: {reason}")]
    InvalidConfig { reason: &'static str },
    #[error(transparent)]
    Traj(#[from] TrajError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed tracks json: {0}")]
    Json(#[from] serde_json::Error),
}

/// One point tracked through the clip: a position and a visibility flag per
/// frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Track<T> {
    pub xy: Vec<Vec2<T>>,
    pub vis: Vec<bool>,
}

/// All tracks of a clip. Every track has exactly `frame_count` entries;
/// visible positions are expected to lie inside the image the tracks came
/// from (checked against the raster wherever one is supplied).
#[derive(Debug, Clone, PartialEq)]
pub struct TrackSet<T> {
    frame_count: usize,
    tracks: Vec<Track<T>>,
}

impl<T: Real> TrackSet<T> {
    pub fn new(frame_count: usize, tracks: Vec<Track<T>>) -> Result<Self, TrackError> {
        if frame_count == 0 {
            return Err(TrackError::InvalidConfig {
                reason: "frame_count must be at least 1",
            });
        }
        for (i, track) in tracks.iter().enumerate() {
            if track.xy.len() != frame_count || track.vis.len() != frame_count {
                return Err(TrackError::BadShape {
                    track: i,
                    xy: track.xy.len(),
                    vis: track.vis.len(),
                    expected: frame_count,
                });
            }
        }
        Ok(Self {
            frame_count,
            tracks,
        })
    }

    #[inline]
    pub fn frame_count(&self) -> usize {
        self.frame_count
    }

    #[inline]
    pub fn tracks(&self) -> &[Track<T>] {
        &self.tracks
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.tracks.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.tracks.is_empty()
    }

    /// Per-track observation at `frame`: `Some(position)` when visible.
    pub fn observations_at(&self, frame: usize) -> Vec<Option<Vec2<T>>> {
        self.tracks
            .iter()
            .map(|t| if t.vis[frame] { Some(t.xy[frame]) } else { None })
            .collect()
    }
}

/// 3D model points in the first frame's camera coordinates, one per track.
/// `valid[i]` is false for tracks that could not be lifted.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelPoints<T> {
    pub points: Vec<Vec3<T>>,
    pub valid: Vec<bool>,
}

impl<T: Real> ModelPoints<T> {
    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.points.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Solution of one PnP solve.
#[derive(Debug, Clone, PartialEq)]
pub struct PnPResult<T> {
    /// Model-to-camera pose of this frame.
    pub pose: Pose<T>,
    /// Per-track flags; true marks correspondences backing the pose.
    pub inlier_flags: Vec<bool>,
    /// Mean reprojection error over the backing correspondences, pixels.
    pub mean_reproj_px: T,
    /// Gauss-Newton iterations spent (final refine, for RANSAC).
    pub iterations: usize,
    /// Cost after the initial pose and after each accepted step; solver
    /// diagnostics, non-increasing after the first entry.
    pub accepted_costs: Vec<T>,
}

/// Lift frame-0 track positions to 3D through the depth raster.
///
/// A track yields a model point when it is visible at frame 0 and the
/// bilinear depth sample under it is valid (see
/// [`DepthMap::sample_bilinear`] for the poisoning rules). Fails with
/// `NoValidPoints` when fewer than 4 tracks survive.
pub fn lift_tracks<T: Real>(
    tracks: &TrackSet<T>,
    depth0: &DepthMap<T>,
    k: &CameraIntrinsics<T>,
) -> Result<ModelPoints<T>, TrackError> {
    let mut points = Vec::with_capacity(tracks.len());
    let mut valid = Vec::with_capacity(tracks.len());
    for track in tracks.tracks() {
        let lifted = if track.vis[0] {
            depth0
                .sample_bilinear(track.xy[0].x, track.xy[0].y)
                .and_then(|d| k.backproject(track.xy[0], d).ok())
        } else {
            None
        };
        match lifted {
            Some(p) => {
                points.push(p);
                valid.push(true);
            }
            None => {
                points.push(Vec3::zero());
                valid.push(false);
            }
        }
    }
    let model = ModelPoints { points, valid };
    let found = model.valid_count();
    if found < 4 {
        return Err(TrackError::NoValidPoints { found });
    }
    Ok(model)
}

/// Configuration for [`track_trajectory`].
#[derive(Debug, Clone)]
pub struct TrackPnPConfig<T> {
    /// RANSAC and refinement parameters (including the seed).
    pub pnp: PnPConfig<T>,
    /// Seconds between consecutive frames.
    pub frame_dt: T,
    /// Robust RANSAC per frame (true) or plain refinement of all visible
    /// correspondences (false).
    pub use_ransac: bool,
}

impl<T: Real> Default for TrackPnPConfig<T> {
    fn default() -> Self {
        Self {
            pnp: PnPConfig::default(),
            frame_dt: T::of(1.0 / 15.0),
            use_ransac: true,
        }
    }
}

/// Why a frame has the pose it has.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FrameStatus<T> {
    /// Pose estimated from this frame's correspondences.
    Tracked { inliers: usize, mean_reproj_px: T },
    /// Too few usable correspondences (or the solve failed); the previous
    /// pose was carried forward.
    CarriedForward { visible: usize },
}

impl<T> FrameStatus<T> {
    pub fn is_carried_forward(&self) -> bool {
        matches!(self, FrameStatus::CarriedForward { .. })
    }
}

/// Per-frame poses plus how each one was obtained.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackedTrajectory<T> {
    pub trajectory: PoseTrajectory<T>,
    pub frames: Vec<FrameStatus<T>>,
}

impl<T> TrackedTrajectory<T> {
    pub fn carried_forward_count(&self) -> usize {
        self.frames.iter().filter(|f| f.is_carried_forward()).count()
    }
}

/// Track the object pose through every frame of a clip.
///
/// Frame 0 is the identity by construction (the model lives in frame-0
/// camera coordinates). Each later frame solves PnP over the tracks visible
/// there, warm-started from the previous frame's pose; frames with fewer
/// than 4 usable correspondences, or whose solve fails, carry the previous
/// pose forward and are flagged. Deterministic for a fixed config.
pub fn track_trajectory<T: Real>(
    tracks: &TrackSet<T>,
    depth0: &DepthMap<T>,
    k: &CameraIntrinsics<T>,
    cfg: &TrackPnPConfig<T>,
) -> Result<TrackedTrajectory<T>, TrackError> {
    if !(cfg.frame_dt > T::zero()) {
        return Err(TrackError::InvalidConfig {
            reason: "frame_dt must be positive",
        });
    }
    let model = lift_tracks(tracks, depth0, k)?;
    let mut samples = Vec::with_capacity(tracks.frame_count());
    let mut frames = Vec::with_capacity(tracks.frame_count());
    samples.push(PoseSample {
        t: T::zero(),
        pose: Pose::identity(),
    });
    frames.push(FrameStatus::Tracked {
        inliers: model.valid_count(),
        mean_reproj_px: T::zero(),
    });
    let mut prev = Pose::identity();
    for frame in 1..tracks.frame_count() {
        let obs = tracks.observations_at(frame);
        let usable = model
            .valid
            .iter()
            .zip(&obs)
            .filter(|(v, o)| **v && o.is_some())
            .count();
        let solved = if usable < 4 {
            None
        } else {
            let mut pnp_cfg = cfg.pnp.clone();
            // Independent, reproducible draws per frame.
            pnp_cfg.seed = cfg
                .pnp
                .seed
                .wrapping_add((frame as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            pnp_cfg.init = Some(prev);
            if cfg.use_ransac {
                pnp_ransac(&model, &obs, k, &pnp_cfg).ok()
            } else {
                pnp_refine(&model, &obs, k, &prev).ok()
            }
        };
        match solved {
            Some(result) => {
                prev = result.pose;
                frames.push(FrameStatus::Tracked {
                    inliers: result.inlier_flags.iter().filter(|f| **f).count(),
                    mean_reproj_px: result.mean_reproj_px,
                });
            }
            None => {
                frames.push(FrameStatus::CarriedForward { visible: usable });
            }
        }
        samples.push(PoseSample {
            t: T::of(frame as f64) * cfg.frame_dt,
            pose: prev,
        });
    }
    Ok(TrackedTrajectory {
        trajectory: PoseTrajectory::new(samples)?,
        frames,
    })
}
