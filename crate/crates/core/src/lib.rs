//! Recover rigid object motion from tracked video and replay it on a robot.

pub mod depth;
pub mod eval;
pub mod exec;
pub mod filter;
pub mod geom;
pub mod retarget;
pub mod scalar;
pub mod track;
pub mod traj;

pub use scalar::Real;

/// f64 pixel coordinate.
pub type Vec2 = geom::Vec2<f64>;
/// f64 3-vector.
pub type Vec3 = geom::Vec3<f64>;
/// f64 unit quaternion, `(w, x, y, z)`.
pub type Quat = geom::Quat<f64>;
/// f64 axis-angle rotation vector.
pub type RotVec = geom::RotVec<f64>;
/// f64 rigid transform.
pub type Pose = geom::Pose<f64>;
/// f64 pinhole intrinsics.
pub type CameraIntrinsics = geom::CameraIntrinsics<f64>;
/// f64 depth raster.
pub type DepthMap = depth::DepthMap<f64>;
/// f64 affine depth fit.
pub type AffineDepthFit = depth::AffineDepthFit<f64>;
/// f64 timestamped pose sample.
pub type PoseSample = traj::PoseSample<f64>;
/// f64 pose trajectory.
pub type PoseTrajectory = traj::PoseTrajectory<f64>;
/// f64 pixel track.
pub type Track = track::Track<f64>;
/// f64 track set.
pub type TrackSet = track::TrackSet<f64>;
/// f64 lifted model points.
pub type ModelPoints = track::ModelPoints<f64>;
/// f64 PnP solution.
pub type PnPResult = track::PnPResult<f64>;
/// f64 grasp constant.
pub type GraspTransform = retarget::GraspTransform<f64>;
