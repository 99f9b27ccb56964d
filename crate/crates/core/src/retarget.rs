//! Map an object trajectory onto an end-effector trajectory through the
//! grasp.
//!
//! Once the gripper holds the object rigidly, the object pose in the
//! end-effector frame is a constant. Capturing that constant at grasp time
//! turns any object trajectory into end-effector commands, independent of
//! where either frame happens to sit in the world.

use crate::geom::Pose;
use crate::scalar::Real;
use crate::traj::PoseTrajectory;

/// Object pose expressed in the end-effector frame, fixed for the whole
/// grasp.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraspTransform<T> {
    offset: Pose<T>,
}

impl<T: Real> GraspTransform<T> {
    pub fn new(offset: Pose<T>) -> Self {
        Self { offset }
    }

    #[inline]
    pub fn offset(&self) -> &Pose<T> {
        &self.offset
    }

    /// From simultaneous world-frame observations at grasp time:
    /// `offset = ee^-1 . object`.
    pub fn from_grasp(object_at_grasp: &Pose<T>, ee_at_grasp: &Pose<T>) -> Self {
        Self::new(ee_at_grasp.between(object_at_grasp))
    }

    /// From separately calibrated stages: the object pose in the gripper
    /// frame and the gripper pose in the end-effector frame.
    pub fn from_parts(object_in_gripper: &Pose<T>, gripper_in_ee: &Pose<T>) -> Self {
        Self::new(gripper_in_ee.compose(object_in_gripper))
    }
}

/// Commands for the arm; same representation as any pose trajectory.
pub type EndEffectorTrajectory<T> = PoseTrajectory<T>;

/// The grasp constant from world-frame poses observed at grasp time.
pub fn grasp_offset<T: Real>(object_at_grasp: &Pose<T>, ee_at_grasp: &Pose<T>) -> GraspTransform<T> {
    GraspTransform::from_grasp(object_at_grasp, ee_at_grasp)
}

/// End-effector pose whose grasped object sits at `object`:
/// `E = O . offset^-1`.
pub fn retarget_pose<T: Real>(object: &Pose<T>, grasp: &GraspTransform<T>) -> Pose<T> {
    object.compose(&grasp.offset.inverse())
}

/// Retarget every sample of an object trajectory; timestamps are kept.
pub fn retarget_trajectory<T: Real>(
    object: &PoseTrajectory<T>,
    grasp: &GraspTransform<T>,
) -> EndEffectorTrajectory<T> {
    let inv = grasp.offset.inverse();
    object.map_poses(|_, p| p.compose(&inv))
}

/// Where the grasped object is when the end-effector is at `ee`:
/// `O = E . offset`. Exact inverse of [`retarget_pose`].
pub fn expected_object_pose<T: Real>(ee: &Pose<T>, grasp: &GraspTransform<T>) -> Pose<T> {
    ee.compose(&grasp.offset)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{Quat, Vec3};
    use crate::traj::PoseSample;

    fn pose(t: [f64; 3], axis: [f64; 3], angle: f64) -> Pose<f64> {
        Pose::new(
            Vec3::new(t[0], t[1], t[2]),
            Quat::from_axis_angle(Vec3::new(axis[0], axis[1], axis[2]), angle),
        )
    }

    #[test]
    fn grasp_offset_reproduces_the_grasp_scene() {
        let object = pose([0.4, 0.1, 0.3], [0.0, 0.0, 1.0], 1.0);
        let ee = pose([0.35, 0.1, 0.45], [1.0, 0.0, 0.0], -0.5);
        let g = grasp_offset(&object, &ee);
        // Composing the ee pose with the offset lands on the object.
        let back = expected_object_pose(&ee, &g);
        assert!((back.translation() - object.translation()).norm() < 1e-12);
        assert!(back.rotation_angle_to_deg(&object) < 1e-10);
    }

    #[test]
    fn retarget_then_expect_is_identity() {
        let g = GraspTransform::new(pose([0.0, 0.0, 0.12], [0.3, 0.2, 1.0], 0.7));
        let object = pose([0.5, -0.2, 0.4], [1.0, 1.0, 0.0], 2.1);
        let ee = retarget_pose(&object, &g);
        let round = expected_object_pose(&ee, &g);
        assert!((round.translation() - object.translation()).norm() < 1e-12);
        assert!(round.rotation_angle_to_deg(&object) < 1e-10);
    }

    #[test]
    fn retargeted_trajectory_moves_rigidly_with_the_object() {
        let g = GraspTransform::new(pose([0.02, -0.01, 0.1], [0.0, 1.0, 0.0], 0.4));
        let object = PoseTrajectory::new(
            (0..5)
                .map(|i| PoseSample {
                    t: i as f64 * 0.1,
                    pose: pose(
                        [0.3 + 0.05 * i as f64, 0.0, 0.4],
                        [0.0, 0.0, 1.0],
                        0.2 * i as f64,
                    ),
                })
                .collect(),
        )
        .unwrap();
        let ee = retarget_trajectory(&object, &g);
        assert_eq!(ee.len(), object.len());
        for (o, e) in object.samples().iter().zip(ee.samples()) {
            assert_eq!(o.t, e.t);
            let implied = expected_object_pose(&e.pose, &g);
            assert!((implied.translation() - o.pose.translation()).norm() < 1e-12);
            assert!(implied.rotation_angle_to_deg(&o.pose) < 1e-10);
        }
    }

    #[test]
    fn changing_the_grasp_ee_rebases_output_rigidly() {
        // Same object motion grasped by a differently posed gripper: the
        // two command streams differ by one constant right factor.
        let object_at_grasp = pose([0.4, 0.0, 0.3], [0.0, 0.0, 1.0], 0.3);
        let ee_a = pose([0.38, 0.02, 0.42], [1.0, 0.0, 0.0], -0.4);
        let d = pose([0.01, -0.03, 0.02], [0.5, 0.5, 0.0], 0.25);
        let ee_b = ee_a.compose(&d);
        let ga = grasp_offset(&object_at_grasp, &ee_a);
        let gb = grasp_offset(&object_at_grasp, &ee_b);
        for i in 0..4 {
            let object = pose([0.4, 0.05 * i as f64, 0.3], [0.2, 1.0, 0.0], 0.3 * i as f64);
            let ea = retarget_pose(&object, &ga);
            let eb = retarget_pose(&object, &gb);
            let rebased = ea.compose(&d);
            assert!((rebased.translation() - eb.translation()).norm() < 1e-12);
            assert!(rebased.rotation_angle_to_deg(&eb) < 1e-10);
        }
    }

    #[test]
    fn from_parts_composes_the_two_stages() {
        let gripper_in_ee = pose([0.0, 0.0, 0.08], [0.0, 0.0, 1.0], 0.1);
        let object_in_gripper = pose([0.01, 0.0, 0.03], [1.0, 0.0, 0.0], 0.2);
        let g = GraspTransform::from_parts(&object_in_gripper, &gripper_in_ee);
        // Equivalent single-stage capture: put the ee at some world pose,
        // derive where the object must be, and recover the same offset.
        let ee = pose([0.5, 0.1, 0.4], [0.3, 0.0, 1.0], 0.9);
        let object = ee
            .compose(&gripper_in_ee)
            .compose(&object_in_gripper);
        let direct = grasp_offset(&object, &ee);
        assert!((g.offset().translation() - direct.offset().translation()).norm() < 1e-12);
        assert!(g.offset().rotation_angle_to_deg(direct.offset()) < 1e-10);
    }

    #[test]
    fn identity_grasp_makes_commands_equal_object_poses() {
        let g = GraspTransform::new(Pose::identity());
        let object = pose([0.1, 0.2, 0.3], [0.0, 1.0, 0.0], 1.2);
        let ee = retarget_pose(&object, &g);
        assert_eq!(ee, object);
    }
}
