use super::quat::{Quat, RotVec};
use super::vec::Vec3;
use super::GeomError;
use crate::scalar::Real;

/// Rigid transform mapping points as `x -> R x + t`.
///
/// The rotation is kept unit-norm and canonical by every constructor and by
/// [`Pose::compose`]; it is only reachable through [`Pose::rotation`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose<T> {
    t: Vec3<T>,
    q: Quat<T>,
}

impl<T: Real> Pose<T> {
    #[inline]
    pub fn identity() -> Self {
        Self {
            t: Vec3::zero(),
            q: Quat::identity(),
        }
    }

    /// Pose from a translation and a rotation already known to be unit
    /// (output of the `Quat` constructors); canonical form is enforced here.
    #[inline]
    pub fn new(translation: Vec3<T>, rotation: Quat<T>) -> Self {
        Self {
            t: translation,
            q: rotation.canonicalized(),
        }
    }

    /// Pose from raw quaternion components, e.g. file input. Fails with
    /// `NonUnitQuaternion` when the norm is off by more than the constructor
    /// tolerance; otherwise renormalizes.
    pub fn try_new(translation: Vec3<T>, w: T, x: T, y: T, z: T) -> Result<Self, GeomError> {
        Ok(Self {
            t: translation,
            q: Quat::try_new(w, x, y, z)?,
        })
    }

    #[inline]
    pub fn from_translation(t: Vec3<T>) -> Self {
        Self::new(t, Quat::identity())
    }

    #[inline]
    pub fn from_rotation(q: Quat<T>) -> Self {
        Self::new(Vec3::zero(), q)
    }

    #[inline]
    pub fn translation(&self) -> Vec3<T> {
        self.t
    }

    #[inline]
    pub fn rotation(&self) -> Quat<T> {
        self.q
    }

    /// Transform a point.
    #[inline]
    pub fn apply(&self, p: Vec3<T>) -> Vec3<T> {
        self.q.rotate(p) + self.t
    }

    /// `self . other`: the result applies `other` first, then `self`.
    pub fn compose(&self, other: &Self) -> Self {
        Self {
            t: self.q.rotate(other.t) + self.t,
            q: (self.q * other.q).renormalized().canonicalized(),
        }
    }

    /// Transform with `inverse().compose(self) == identity`.
    pub fn inverse(&self) -> Self {
        let qi = self.q.conjugate();
        Self {
            t: -qi.rotate(self.t),
            q: qi.canonicalized(),
        }
    }

    /// Geodesic rotation distance to another pose, degrees.
    #[inline]
    pub fn rotation_angle_to_deg(&self, other: &Self) -> T {
        self.q.angle_to_deg(other.q)
    }

    /// Relative transform `self^-1 . other`.
    #[inline]
    pub fn between(&self, other: &Self) -> Self {
        self.inverse().compose(other)
    }

    /// Rotation vector of the rotation part, magnitude in `[0, pi]`.
    #[inline]
    pub fn rotvec(&self) -> RotVec<T> {
        self.q.to_rotvec()
    }
}
