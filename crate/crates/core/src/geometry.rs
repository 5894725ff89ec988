//! Spatial primitives shared by every subsystem: positions in meters and
//! yaw-only head poses.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

/// A point or extent in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 {
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn sub(&self, other: &Vec3) -> Vec3 {
        Vec3::new(self.x - other.x, self.y - other.y, self.z - other.z)
    }

    pub fn add(&self, other: &Vec3) -> Vec3 {
        Vec3::new(self.x + other.x, self.y + other.y, self.z + other.z)
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn distance(&self, other: &Vec3) -> f64 {
        self.sub(other).norm()
    }

    /// Horizontal (x/y plane) distance.
    pub fn planar_distance(&self, other: &Vec3) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Wraps an angle into `[-π, π)`.
pub fn wrap_angle(angle: f64) -> f64 {
    let wrapped = (angle + PI).rem_euclid(TAU) - PI;
    // rem_euclid can return TAU itself for inputs a hair below a multiple of TAU.
    if wrapped >= PI {
        wrapped - TAU
    } else {
        wrapped
    }
}

/// Head pose: position plus heading about the vertical axis.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pose {
    pub position: Vec3,
    pub yaw: f64,
}

impl Pose {
    /// Builds a pose with its yaw normalized into `[-π, π)`.
    pub fn new(position: Vec3, yaw: f64) -> Self {
        Self {
            position,
            yaw: wrap_angle(yaw),
        }
    }

    pub fn planar(x: f64, y: f64, yaw: f64) -> Self {
        Self::new(Vec3::new(x, y, 0.0), yaw)
    }

    pub fn is_valid(&self) -> bool {
        self.position.is_finite() && self.yaw.is_finite() && (-PI..PI).contains(&self.yaw)
    }

    pub fn heading(&self) -> (f64, f64) {
        (self.yaw.cos(), self.yaw.sin())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_angle_range() {
        assert_eq!(wrap_angle(PI), -PI);
        assert_eq!(wrap_angle(-PI), -PI);
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
        assert!((wrap_angle(-3.0 * PI / 2.0) - PI / 2.0).abs() < 1e-12);
        assert_eq!(wrap_angle(0.0), 0.0);
        for k in -50..50 {
            let a = wrap_angle(k as f64 * 0.377 + 1e-17);
            assert!((-PI..PI).contains(&a), "{a}");
        }
    }

    #[test]
    fn pose_normalizes_yaw() {
        let p = Pose::planar(1.0, 2.0, TAU + 0.25);
        assert!((p.yaw - 0.25).abs() < 1e-12);
        assert!(p.is_valid());
    }
}
