use std::path::Path;

use serde::{Deserialize, Serialize};

use super::vec::{Vec2, Vec3};
use super::GeomError;
use crate::scalar::Real;

/// Pinhole camera intrinsics. Pixel coordinates are continuous, with integer
/// positions at sample centers; no distortion model.
///
/// Serialized as a flat JSON object `{fx, fy, cx, cy, width, height}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics<T> {
    pub fx: T,
    pub fy: T,
    pub cx: T,
    pub cy: T,
    pub width: u32,
    pub height: u32,
}

impl<T: Real> CameraIntrinsics<T> {
    /// Validated constructor: focal lengths positive, principal point inside
    /// the image, nonzero size.
    pub fn new(fx: T, fy: T, cx: T, cy: T, width: u32, height: u32) -> Result<Self, GeomError> {
        let k = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<(), GeomError> {
        let bad = |reason| Err(GeomError::InvalidIntrinsics { reason });
        if self.width == 0 || self.height == 0 {
            return bad("zero image dimension");
        }
        if !(self.fx > T::zero() && self.fy > T::zero())
            || !self.fx.is_finite()
            || !self.fy.is_finite()
        {
            return bad("focal lengths must be positive and finite");
        }
        let (w, h) = (T::of(self.width as f64), T::of(self.height as f64));
        if !(self.cx >= T::zero() && self.cx < w && self.cy >= T::zero() && self.cy < h) {
            return bad("principal point outside the image");
        }
        Ok(())
    }

    /// Camera-frame point to pixel coordinates.
    ///
    /// Errors with `NonPositiveDepth` when `p.z <= 0` (or is not finite).
    pub fn project(&self, p: Vec3<T>) -> Result<Vec2<T>, GeomError> {
        if !(p.z > T::zero()) || !p.z.is_finite() {
            return Err(GeomError::NonPositiveDepth { z: p.z.as_f64() });
        }
        Ok(Vec2::new(
            self.fx * p.x / p.z + self.cx,
            self.fy * p.y / p.z + self.cy,
        ))
    }

    /// Pixel plus metric depth to a camera-frame point.
    ///
    /// Errors with `InvalidDepth` unless `depth` is positive and finite.
    /// Inverse of [`CameraIntrinsics::project`] to 1e-9 for valid depths.
    pub fn backproject(&self, px: Vec2<T>, depth: T) -> Result<Vec3<T>, GeomError> {
        if !(depth > T::zero()) || !depth.is_finite() {
            return Err(GeomError::InvalidDepth {
                depth: depth.as_f64(),
            });
        }
        Ok(Vec3::new(
            (px.x - self.cx) * depth / self.fx,
            (px.y - self.cy) * depth / self.fy,
            depth,
        ))
    }

    /// True when a pixel lies inside `[0, width) x [0, height)`.
    pub fn contains(&self, px: Vec2<T>) -> bool {
        px.x >= T::zero()
            && px.y >= T::zero()
            && px.x < T::of(self.width as f64)
            && px.y < T::of(self.height as f64)
    }
}

impl<T: Real + Serialize + for<'de> Deserialize<'de>> CameraIntrinsics<T> {
    pub fn read_json(path: &Path) -> Result<Self, GeomError> {
        let text = std::fs::read_to_string(path)?;
        let k: Self = serde_json::from_str(&text)?;
        k.validate()?;
        Ok(k)
    }

    pub fn write_json(&self, path: &Path) -> Result<(), GeomError> {
        let mut text = serde_json::to_string_pretty(self).map_err(GeomError::Json)?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k() -> CameraIntrinsics<f64> {
        CameraIntrinsics::new(500.0, 500.0, 320.0, 240.0, 640, 480).unwrap()
    }

    #[test]
    fn project_hand_value() {
        let px = k().project(Vec3::new(0.1, 0.0, 1.0)).unwrap();
        assert!((px.x - 370.0).abs() < 1e-12);
        assert!((px.y - 240.0).abs() < 1e-12);
    }

    #[test]
    fn backproject_principal_point_lands_on_axis() {
        let p = k().backproject(Vec2::new(320.0, 240.0), 2.0).unwrap();
        assert!((p - Vec3::new(0.0, 0.0, 2.0)).norm() < 1e-15);
    }

    #[test]
    fn project_rejects_zero_negative_and_nan_depth() {
        for z in [0.0, -0.5, f64::NAN] {
            assert!(matches!(
                k().project(Vec3::new(0.0, 0.0, z)),
                Err(GeomError::NonPositiveDepth { .. })
            ));
        }
    }

    #[test]
    fn backproject_rejects_invalid_depth() {
        for d in [0.0, -1.0, f64::NAN, f64::INFINITY] {
            assert!(matches!(
                k().backproject(Vec2::new(10.0, 10.0), d),
                Err(GeomError::InvalidDepth { .. })
            ));
        }
    }

    #[test]
    fn constructor_rejects_bad_intrinsics() {
        assert!(CameraIntrinsics::new(0.0, 500.0, 320.0, 240.0, 640, 480).is_err());
        assert!(CameraIntrinsics::new(500.0, 500.0, 700.0, 240.0, 640, 480).is_err());
        assert!(CameraIntrinsics::new(500.0, 500.0, 320.0, 240.0, 0, 480).is_err());
    }

    #[test]
    fn json_round_trip_preserves_fields() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("k.json");
        let cam = k();
        cam.write_json(&path).unwrap();
        let back = CameraIntrinsics::<f64>::read_json(&path).unwrap();
        assert_eq!(cam, back);
    }
}
