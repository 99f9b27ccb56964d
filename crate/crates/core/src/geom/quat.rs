use std::ops::Mul;

use super::vec::Vec3;
use super::GeomError;
use crate::scalar::Real;

/// Relative norm error accepted (and repaired) by the fallible constructors.
const UNIT_TOLERANCE: f64 = 1e-3;

/// Unit quaternion in `(w, x, y, z)` order.
///
/// Constructors and products renormalize, so the norm stays within 1e-9 of 1.
/// `q` and `-q` encode the same rotation; [`Quat::canonicalized`] fixes the
/// representative with `w >= 0` (ties: first nonzero component positive), and
/// everything built through the public constructors is already canonical.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quat<T> {
    pub w: T,
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Real> Quat<T> {
    #[inline]
    pub fn identity() -> Self {
        Self {
            w: T::one(),
            x: T::zero(),
            y: T::zero(),
            z: T::zero(),
        }
    }

    /// Unit quaternion from raw components; renormalizes, and rejects inputs
    /// whose norm is off by more than 1e-3.
    ///
    /// Components already unit within 1e-9 are kept bit-identical, so values
    /// written by this crate survive a file round trip exactly.
    pub fn try_new(w: T, x: T, y: T, z: T) -> Result<Self, GeomError> {
        let norm = (w * w + x * x + y * y + z * z).sqrt();
        let norm_f64 = norm.as_f64();
        if !norm_f64.is_finite() || (norm_f64 - 1.0).abs() > UNIT_TOLERANCE {
            return Err(GeomError::NonUnitQuaternion { norm: norm_f64 });
        }
        let q = if (norm_f64 - 1.0).abs() <= 1e-9 {
            Self { w, x, y, z }
        } else {
            Self {
                w: w / norm,
                x: x / norm,
                y: y / norm,
                z: z / norm,
            }
        };
        Ok(q.canonicalized())
    }

    /// Rotation about `axis` (normalized internally) by `angle` radians.
    /// A zero axis yields the identity.
    pub fn from_axis_angle(axis: Vec3<T>, angle: T) -> Self {
        match axis.normalized() {
            Some(u) => {
                let half = angle * T::of(0.5);
                let s = half.sin();
                Self {
                    w: half.cos(),
                    x: u.x * s,
                    y: u.y * s,
                    z: u.z * s,
                }
                .canonicalized()
            }
            None => Self::identity(),
        }
    }

    /// Exponential map: rotation vector (axis * angle, radians) to quaternion.
    pub fn from_rotvec(rv: RotVec<T>) -> Self {
        let v = rv.0;
        let theta = v.norm();
        let half = theta * T::of(0.5);
        // sin(theta/2)/theta, with a series once the quotient loses accuracy.
        let k = if theta > T::of(1e-4) {
            half.sin() / theta
        } else {
            let t2 = theta * theta;
            T::of(0.5) - t2 * T::of(1.0 / 48.0)
        };
        Self {
            w: half.cos(),
            x: v.x * k,
            y: v.y * k,
            z: v.z * k,
        }
        .renormalized()
        .canonicalized()
    }

    /// Logarithm map: rotation vector with magnitude in `[0, pi]`.
    ///
    /// The identity maps to the zero vector. Round-trips with
    /// [`Quat::from_rotvec`] to 1e-9 for angles inside `(0, pi)`.
    pub fn to_rotvec(self) -> RotVec<T> {
        let q = self.canonicalized();
        let s = (q.x * q.x + q.y * q.y + q.z * q.z).sqrt();
        if s < T::of(1e-9) {
            // Near identity: theta/s -> 2/w.
            let k = T::of(2.0) / q.w;
            return RotVec(Vec3::new(q.x * k, q.y * k, q.z * k));
        }
        let theta = T::of(2.0) * s.atan2(q.w);
        RotVec(Vec3::new(q.x, q.y, q.z) * (theta / s))
    }

    #[inline]
    pub fn conjugate(self) -> Self {
        Self {
            w: self.w,
            x: -self.x,
            y: -self.y,
            z: -self.z,
        }
    }

    #[inline]
    pub fn dot(self, o: Self) -> T {
        self.w * o.w + self.x * o.x + self.y * o.y + self.z * o.z
    }

    /// Geodesic angle to another unit quaternion, degrees. Same quantity
    /// as [`rotation_angle_deg`] but split through the relative rotation's
    /// atan2, which keeps full resolution near zero where the acos form
    /// bottoms out around 1e-6 degrees.
    pub fn angle_to_deg(self, other: Self) -> T {
        let rel = self.conjugate() * other;
        let v = (rel.x * rel.x + rel.y * rel.y + rel.z * rel.z).sqrt();
        ((T::one() + T::one()) * v.atan2(rel.w.abs())).to_degrees()
    }

    #[inline]
    pub fn norm(self) -> T {
        self.dot(self).sqrt()
    }

    /// Representative with `w >= 0`; a tie at `w == 0` makes the first
    /// nonzero of `(x, y, z)` positive.
    pub fn canonicalized(self) -> Self {
        let flip = if self.w != T::zero() {
            self.w < T::zero()
        } else if self.x != T::zero() {
            self.x < T::zero()
        } else if self.y != T::zero() {
            self.y < T::zero()
        } else {
            self.z < T::zero()
        };
        if flip {
            Self {
                w: -self.w,
                x: -self.x,
                y: -self.y,
                z: -self.z,
            }
        } else {
            self
        }
    }

    /// Rescale to unit norm; keeps products from drifting.
    #[inline]
    pub(crate) fn renormalized(self) -> Self {
        let n = self.norm();
        // Already unit to 1e-9: keep the bits. Composition chains stay
        // reproducible and composing with the identity is exact.
        if (n - T::one()).abs() <= T::of(1e-9) {
            return self;
        }
        Self {
            w: self.w / n,
            x: self.x / n,
            y: self.y / n,
            z: self.z / n,
        }
    }

    /// Rotate a vector: `q v q*`.
    pub fn rotate(self, v: Vec3<T>) -> Vec3<T> {
        let u = Vec3::new(self.x, self.y, self.z);
        let t = u.cross(v) * T::of(2.0);
        v + t * self.w + u.cross(t)
    }
}

impl<T: Real> Mul for Quat<T> {
    type Output = Self;

    /// Hamilton product; `(a * b).rotate(v) == a.rotate(b.rotate(v))`.
    fn mul(self, o: Self) -> Self {
        Self {
            w: self.w * o.w - self.x * o.x - self.y * o.y - self.z * o.z,
            x: self.w * o.x + self.x * o.w + self.y * o.z - self.z * o.y,
            y: self.w * o.y - self.x * o.z + self.y * o.w + self.z * o.x,
            z: self.w * o.z + self.x * o.y - self.y * o.x + self.z * o.w,
        }
    }
}

/// Axis-angle rotation vector: direction is the axis, magnitude the angle in
/// radians. Values produced by [`Quat::to_rotvec`] have magnitude in `[0, pi]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RotVec<T>(pub Vec3<T>);

impl<T: Real> RotVec<T> {
    #[inline]
    pub fn new(x: T, y: T, z: T) -> Self {
        Self(Vec3::new(x, y, z))
    }

    #[inline]
    pub fn zero() -> Self {
        Self(Vec3::zero())
    }

    /// Rotation angle in radians.
    #[inline]
    pub fn angle(self) -> T {
        self.0.norm()
    }
}

/// Geodesic angle between two rotations in degrees:
/// `2 * acos(min(1, |<q1, q2>|))`, in `[0, 180]`.
pub fn rotation_angle_deg<T: Real>(a: Quat<T>, b: Quat<T>) -> T {
    let d = a.dot(b).abs().min(T::one());
    (T::of(2.0) * d.acos()).to_degrees()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quat_close(a: Quat<f64>, b: Quat<f64>, tol: f64) -> bool {
        // Equality up to the double cover.
        let d = a.dot(b).abs();
        (d - 1.0).abs() < tol
    }

    #[test]
    fn rotate_90_about_z_sends_x_to_y() {
        let q = Quat::from_axis_angle(Vec3::new(0.0, 0.0, 1.0), std::f64::consts::FRAC_PI_2);
        let v = q.rotate(Vec3::new(1.0, 0.0, 0.0));
        assert!((v.x - 0.0).abs() < 1e-15);
        assert!((v.y - 1.0).abs() < 1e-15);
        assert!((v.z - 0.0).abs() < 1e-15);
    }

    #[test]
    fn product_matches_composed_rotation() {
        let a = Quat::from_axis_angle(Vec3::new(1.0, 2.0, -0.5), 0.7);
        let b = Quat::from_axis_angle(Vec3::new(-0.3, 1.0, 2.0), -1.2);
        let v = Vec3::new(0.4, -1.1, 2.2);
        let lhs = (a * b).rotate(v);
        let rhs = a.rotate(b.rotate(v));
        assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn try_new_rejects_far_from_unit_and_repairs_near_unit() {
        assert!(matches!(
            Quat::<f64>::try_new(0.5, 0.5, 0.0, 0.0),
            Err(GeomError::NonUnitQuaternion { .. })
        ));
        // Hand-written norm 6e-5 off unit: accepted and renormalized.
        let q = Quat::<f64>::try_new(0.6001, 0.8, 0.0, 0.0).unwrap();
        assert!((q.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn canonicalization_flips_negative_w_and_breaks_ties() {
        let q = Quat::<f64>::try_new(-0.5, 0.5, 0.5, 0.5).unwrap();
        assert!(q.w > 0.0);
        // w == 0: the first nonzero component decides the sign.
        let half = std::f64::consts::FRAC_1_SQRT_2;
        let q = Quat::try_new(0.0, -half, half, 0.0).unwrap();
        assert!(q.x > 0.0 && q.y < 0.0);
        let q = Quat::<f64>::try_new(0.0, 0.0, 0.0, -1.0).unwrap();
        assert_eq!(q.z, 1.0);
    }

    #[test]
    fn rotvec_of_identity_is_zero() {
        let rv = Quat::<f64>::identity().to_rotvec();
        assert_eq!(rv.0, Vec3::zero());
    }

    #[test]
    fn rotvec_round_trip_handles_near_pi_and_near_zero() {
        for &angle in &[1e-7, 1e-3, 0.5, 2.0, std::f64::consts::PI - 1e-6] {
            let axis = Vec3::new(0.3, -0.9, 0.4);
            let q = Quat::from_axis_angle(axis, angle);
            let rv = q.to_rotvec();
            assert!(rv.angle() <= std::f64::consts::PI);
            let back = Quat::from_rotvec(rv);
            assert!(quat_close(q, back, 1e-12), "angle {angle}");
        }
    }

    #[test]
    fn rotation_angle_matches_hand_values() {
        let i = Quat::<f64>::identity();
        let q90 = Quat::from_axis_angle(Vec3::new(0.0, 0.0, 1.0), std::f64::consts::FRAC_PI_2);
        assert!((rotation_angle_deg(i, q90) - 90.0).abs() < 1e-9);
        let q180 = Quat::from_axis_angle(Vec3::new(1.0, 0.0, 0.0), std::f64::consts::PI);
        assert!((rotation_angle_deg(i, q180) - 180.0).abs() < 1e-9);
        // Insensitive to the sign of either operand.
        let neg = Quat { w: -q90.w, x: -q90.x, y: -q90.y, z: -q90.z };
        assert!((rotation_angle_deg(i, neg) - 90.0).abs() < 1e-9);
    }

    #[test]
    fn angle_to_deg_agrees_at_moderate_angles_and_resolves_tiny_ones() {
        let i = Quat::<f64>::identity();
        for deg in [0.5, 10.0, 90.0, 179.0] {
            let q = Quat::from_axis_angle(Vec3::new(1.0, -0.4, 0.2), (deg as f64).to_radians());
            assert!((q.angle_to_deg(i) - rotation_angle_deg(q, i)).abs() < 1e-9);
        }
        // Sub-microdegree rotations sit below the acos form's resolution
        // but must still read back exactly here.
        let tiny_rad = 1e-10f64;
        let q = Quat::from_axis_angle(Vec3::new(0.0, 0.0, 1.0), tiny_rad);
        let want_deg = tiny_rad.to_degrees();
        assert!((q.angle_to_deg(i) - want_deg).abs() < 1e-15);
        assert!((i.angle_to_deg(q) - want_deg).abs() < 1e-15);
    }
}
