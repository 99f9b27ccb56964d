use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

use crate::scalar::Real;

/// Column 2-vector, used for pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec2<T> {
    pub x: T,
    pub y: T,
}

impl<T: Real> Vec2<T> {
    #[inline]
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    #[inline]
    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero())
    }

    #[inline]
    pub fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y
    }

    #[inline]
    pub fn norm_squared(self) -> T {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> T {
        self.norm_squared().sqrt()
    }

    #[inline]
    pub fn to_array(self) -> [T; 2] {
        [self.x, self.y]
    }

    #[inline]
    pub fn from_array(a: [T; 2]) -> Self {
        Self::new(a[0], a[1])
    }
}

/// Column 3-vector.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec3<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Real> Vec3<T> {
    #[inline]
    pub fn new(x: T, y: T, z: T) -> Self {
        Self { x, y, z }
    }

    #[inline]
    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    #[inline]
    pub fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    #[inline]
    pub fn cross(self, o: Self) -> Self {
        Self::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    #[inline]
    pub fn norm_squared(self) -> T {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> T {
        self.norm_squared().sqrt()
    }

    /// Unit vector, or `None` when the norm underflows to zero.
    #[inline]
    pub fn normalized(self) -> Option<Self> {
        let n = self.norm();
        if n.is_normal() {
            Some(self / n)
        } else {
            None
        }
    }

    #[inline]
    pub fn to_array(self) -> [T; 3] {
        [self.x, self.y, self.z]
    }

    #[inline]
    pub fn from_array(a: [T; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }
}

macro_rules! elementwise {
    ($V:ident, $($c:ident),+) => {
        impl<T: Real> Add for $V<T> {
            type Output = Self;
            #[inline]
            fn add(self, o: Self) -> Self {
                $V { $($c: self.$c + o.$c),+ }
            }
        }
        impl<T: Real> Sub for $V<T> {
            type Output = Self;
            #[inline]
            fn sub(self, o: Self) -> Self {
                $V { $($c: self.$c - o.$c),+ }
            }
        }
        impl<T: Real> Neg for $V<T> {
            type Output = Self;
            #[inline]
            fn neg(self) -> Self {
                $V { $($c: -self.$c),+ }
            }
        }
        impl<T: Real> Mul<T> for $V<T> {
            type Output = Self;
            #[inline]
            fn mul(self, s: T) -> Self {
                $V { $($c: self.$c * s),+ }
            }
        }
        impl<T: Real> Div<T> for $V<T> {
            type Output = Self;
            #[inline]
            fn div(self, s: T) -> Self {
                $V { $($c: self.$c / s),+ }
            }
        }
        impl<T: Real> AddAssign for $V<T> {
            #[inline]
            fn add_assign(&mut self, o: Self) {
                $(self.$c += o.$c;)+
            }
        }
        impl<T: Real> SubAssign for $V<T> {
            #[inline]
            fn sub_assign(&mut self, o: Self) {
                $(self.$c -= o.$c;)+
            }
        }
    };
}

elementwise!(Vec2, x, y);
elementwise!(Vec3, x, y, z);
