//! Rigid-body geometry: vectors, unit quaternions, poses, and a pinhole camera.
//!
//! Conventions, fixed across the whole crate and every file format:
//! quaternions are ordered `(w, x, y, z)` and stored canonically (`w >= 0`,
//! ties broken by the first nonzero component); poses map points as
//! `x -> R x + t`; `a.compose(&b)` applies `b` first.

mod camera;
mod pose;
mod quat;
mod vec;

pub use camera::CameraIntrinsics;
pub use pose::Pose;
pub use quat::{rotation_angle_deg, Quat, RotVec};
pub use vec::{Vec2, Vec3};

use thiserror::Error;

/// Failure modes of the geometric primitives.
#[derive(Debug, Error)]
pub enum GeomError {
    /// Quaternion norm too far from 1 to be salvaged by renormalization.
    #[error("quaternion norm {norm} differs from 1 beyond tolerance")]
    NonUnitQuaternion { norm: f64 },
    /// Projection of a point at or behind the camera plane.
    #[error("cannot project point with non-positive depth z = {z}")]
    NonPositiveDepth { z: f64 },
    /// Backprojection with a depth that is not a positive finite number.
    #[error("invalid depth {depth}; expected a positive finite value")]
    InvalidDepth { depth: f64 },
    /// Intrinsics that cannot describe a real camera.
    #[error("invalid camera intrinsics: {reason}")]
    InvalidIntrinsics { reason: &'static str },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed intrinsics json: {0}")]
    Json(#[from] serde_json::Error),
}
