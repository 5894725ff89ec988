//! Simulated multi-sensor head tracking.
//!
//! Sensors see the head when it lies inside their range and horizontal
//! field of view. Visible readings get independent Gaussian noise and are
//! fused by inverse-variance weighting; the yaw uses a weighted circular
//! mean. The estimator is static: every step is fused on its own.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{wrap_angle, Pose, Vec3};
use crate::rng::SplitMix64;

/// Noise floor applied before weighting so a noiseless sensor still yields
/// a finite weight and a strictly positive variance.
pub const MIN_NOISE_STD: f64 = 1e-9;

/// Slack on the field-of-view test so poses constructed exactly on the edge
/// stay visible despite `atan2` rounding.
const FOV_EDGE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorConfig {
    pub sensor_id: String,
    pub position: Vec3,
    pub facing_yaw: f64,
    /// Full horizontal field of view, radians in (0, π].
    pub fov: f64,
    pub max_range: f64,
    pub noise_std_pos: f64,
    pub noise_std_yaw: f64,
}

impl SensorConfig {
    pub fn sees(&self, pose: &Pose) -> bool {
        if self.position.distance(&pose.position) > self.max_range {
            return false;
        }
        let dx = pose.position.x - self.position.x;
        let dy = pose.position.y - self.position.y;
        if dx == 0.0 && dy == 0.0 {
            return true;
        }
        let off_axis = wrap_angle(dy.atan2(dx) - self.facing_yaw).abs();
        off_axis <= self.fov / 2.0 + FOV_EDGE_TOLERANCE
    }

    fn weight_pos(&self) -> f64 {
        inverse_variance(self.noise_std_pos)
    }
}

fn inverse_variance(std: f64) -> f64 {
    let s = std.max(MIN_NOISE_STD);
    1.0 / (s * s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorReading {
    pub sensor_id: String,
    pub t: f64,
    /// `None` when the sensor could not see the head.
    pub measured: Option<Pose>,
    pub noise_std_pos: f64,
    pub noise_std_yaw: f64,
}

impl SensorReading {
    pub fn visible(&self) -> bool {
        self.measured.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FusedEstimate {
    pub pose: Pose,
    /// m², per axis
    pub var_pos: f64,
    /// rad²
    pub var_yaw: f64,
    pub used_sensors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TrackingError {
    #[error("tracking lost")]
    TrackingLost,
}

/// One reading per sensor, in sensor order.
///
/// Each visible sensor draws four Gaussians from `rng` in the order
/// x, y, z, yaw; hidden sensors draw nothing.
pub fn simulate_readings(
    true_pose: &Pose,
    sensors: &[SensorConfig],
    rng: &mut SplitMix64,
    t: f64,
) -> Vec<SensorReading> {
    sensors
        .iter()
        .map(|sensor| {
            let measured = sensor.sees(true_pose).then(|| {
                let nx = rng.next_gaussian() * sensor.noise_std_pos;
                let ny = rng.next_gaussian() * sensor.noise_std_pos;
                let nz = rng.next_gaussian() * sensor.noise_std_pos;
                let nyaw = rng.next_gaussian() * sensor.noise_std_yaw;
                let p = true_pose.position;
                Pose::new(
                    Vec3::new(p.x + nx, p.y + ny, p.z + nz),
                    true_pose.yaw + nyaw,
                )
            });
            SensorReading {
                sensor_id: sensor.sensor_id.clone(),
                t,
                measured,
                noise_std_pos: sensor.noise_std_pos,
                noise_std_yaw: sensor.noise_std_yaw,
            }
        })
        .collect()
}

/// Inverse-variance fusion of the visible readings.
pub fn fuse(readings: &[SensorReading]) -> Result<FusedEstimate, TrackingError> {
    let visible: Vec<(&SensorReading, Pose)> = readings
        .iter()
        .filter_map(|r| r.measured.map(|m| (r, m)))
        .collect();
    let (_, reference) = *visible.first().ok_or(TrackingError::TrackingLost)?;

    // Accumulate deviations from the first reading: identical readings then
    // fuse to exactly that reading.
    let (mut wsum, mut dx, mut dy, mut dz) = (0.0, 0.0, 0.0, 0.0);
    let (mut wsum_yaw, mut sin_sum, mut cos_sum) = (0.0, 0.0, 0.0);
    for (reading, pose) in &visible {
        let w = inverse_variance(reading.noise_std_pos);
        wsum += w;
        dx += w * (pose.position.x - reference.position.x);
        dy += w * (pose.position.y - reference.position.y);
        dz += w * (pose.position.z - reference.position.z);
        let wy = inverse_variance(reading.noise_std_yaw);
        let rel = pose.yaw - reference.yaw;
        wsum_yaw += wy;
        sin_sum += wy * rel.sin();
        cos_sum += wy * rel.cos();
    }
    let p = reference.position;
    let position = Vec3::new(p.x + dx / wsum, p.y + dy / wsum, p.z + dz / wsum);
    let yaw = reference.yaw + sin_sum.atan2(cos_sum);

    let mut used_sensors: Vec<String> = visible.iter().map(|(r, _)| r.sensor_id.clone()).collect();
    used_sensors.sort();

    Ok(FusedEstimate {
        pose: Pose::new(position, yaw),
        var_pos: 1.0 / wsum,
        var_yaw: 1.0 / wsum_yaw,
        used_sensors,
    })
}

/// The `k` predicted-visible sensors whose fused position variance is
/// smallest, as sorted ids.
///
/// Fused variance is `1 / Σ 1/σ²`, so the optimum is the `k` smallest
/// position noises. Taking them in (σ, id) order also makes the result the
/// lexicographically smallest id list among all optimal subsets.
pub fn schedule_sensors(sensors: &[SensorConfig], predicted_pose: &Pose, k: usize) -> Vec<String> {
    let mut visible: Vec<&SensorConfig> =
        sensors.iter().filter(|s| s.sees(predicted_pose)).collect();
    visible.sort_by(|a, b| {
        a.weight_pos()
            .total_cmp(&b.weight_pos())
            .reverse()
            .then_with(|| a.sensor_id.cmp(&b.sensor_id))
    });
    let mut chosen: Vec<String> = visible
        .into_iter()
        .take(k)
        .map(|s| s.sensor_id.clone())
        .collect();
    chosen.sort();
    chosen
}

/// Fused position variance of a sensor subset under noise-free geometry.
pub fn subset_variance(sensors: &[&SensorConfig]) -> f64 {
    1.0 / sensors.iter().map(|s| s.weight_pos()).sum::<f64>()
}

/// `count` sensors spaced evenly by arc length along the boundary of a
/// `width` × `depth` rectangle centered on the origin, starting at the
/// middle of the +x edge and running counter-clockwise, each facing the
/// center.
pub fn perimeter_ring(
    count: usize,
    width: f64,
    depth: f64,
    fov: f64,
    max_range: f64,
    noise_std_pos: f64,
    noise_std_yaw: f64,
) -> Vec<SensorConfig> {
    let (hw, hd) = (width / 2.0, depth / 2.0);
    let perimeter = 2.0 * (width + depth);
    // Boundary polyline from the +x edge midpoint, counter-clockwise.
    let corners = [
        (hw, 0.0),
        (hw, hd),
        (-hw, hd),
        (-hw, -hd),
        (hw, -hd),
        (hw, 0.0),
    ];
    (0..count)
        .map(|i| {
            let mut s = perimeter * i as f64 / count as f64;
            let mut point = corners[0];
            for pair in corners.windows(2) {
                let (a, b) = (pair[0], pair[1]);
                let len = (b.0 - a.0).hypot(b.1 - a.1);
                if s <= len {
                    let f = s / len;
                    point = (a.0 + f * (b.0 - a.0), a.1 + f * (b.1 - a.1));
                    break;
                }
                s -= len;
            }
            SensorConfig {
                sensor_id: format!("kinect_{}", i + 1),
                position: Vec3::new(point.0, point.1, 0.0),
                facing_yaw: wrap_angle((-point.1).atan2(-point.0)),
                fov,
                max_range,
                noise_std_pos,
                noise_std_yaw,
            }
        })
        .collect()
}

/// Eight sensors around the default 2.5 m × 2.0 m workspace: 70° field of
/// view, 4 m range, 2 cm position noise, 0.03 rad yaw noise.
pub fn default_ring() -> Vec<SensorConfig> {
    perimeter_ring(8, 2.5, 2.0, 70.0 * PI / 180.0, 4.0, 0.02, 0.03)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sensor(id: &str, x: f64, y: f64, facing: f64, std: f64) -> SensorConfig {
        SensorConfig {
            sensor_id: id.into(),
            position: Vec3::new(x, y, 0.0),
            facing_yaw: facing,
            fov: PI / 2.0,
            max_range: 5.0,
            noise_std_pos: std,
            noise_std_yaw: std,
        }
    }

    fn reading(id: &str, x: f64, yaw: f64, std: f64) -> SensorReading {
        SensorReading {
            sensor_id: id.into(),
            t: 0.0,
            measured: Some(Pose::planar(x, 0.0, yaw)),
            noise_std_pos: std,
            noise_std_yaw: std,
        }
    }

    #[test]
    fn hidden_behind_sensors() {
        let sensors = vec![
            sensor("a", 0.0, 0.0, 0.0, 0.1),
            sensor("b", 0.0, 1.0, 0.0, 0.1),
        ];
        let mut rng = SplitMix64::new(1);
        let r = simulate_readings(&Pose::planar(-2.0, 0.5, 0.0), &sensors, &mut rng, 0.0);
        assert!(r.iter().all(|r| !r.visible()));
        assert_eq!(fuse(&r), Err(TrackingError::TrackingLost));
        assert_eq!(fuse(&r).unwrap_err().to_string(), "tracking lost");
    }

    #[test]
    fn zero_noise_is_exact() {
        let sensors = vec![
            sensor("a", 0.0, 0.0, 0.0, 0.0),
            sensor("b", 0.0, 0.5, 0.0, 0.0),
        ];
        let truth = Pose::new(Vec3::new(1.3, 0.2, 0.7), 0.4);
        let mut rng = SplitMix64::new(3);
        let r = simulate_readings(&truth, &sensors, &mut rng, 0.0);
        assert!(r.iter().all(|r| r.measured == Some(truth)));
        let f = fuse(&r).unwrap();
        assert_eq!(f.pose, truth);
        assert!(f.var_pos > 0.0 && f.var_yaw > 0.0);
    }

    #[test]
    fn fov_boundary_inclusive() {
        let s = sensor("a", 0.0, 0.0, 0.3, 0.1);
        let edge = 0.3 + s.fov / 2.0;
        let p = Pose::planar(2.0 * edge.cos(), 2.0 * edge.sin(), 0.0);
        assert!(s.sees(&p));
        let beyond = edge + 1e-6;
        assert!(!s.sees(&Pose::planar(2.0 * beyond.cos(), 2.0 * beyond.sin(), 0.0)));
        assert!(!s.sees(&Pose::planar(5.1, 0.0, 0.0)));
    }

    #[test]
    fn single_reading_passthrough() {
        let r = vec![reading("a", 1.5, 0.2, 0.1)];
        let f = fuse(&r).unwrap();
        assert_eq!(f.pose, Pose::planar(1.5, 0.0, 0.2));
        assert!((f.var_pos - 0.01).abs() < 1e-15);
        assert_eq!(f.used_sensors, vec!["a"]);
    }

    #[test]
    fn symmetric_average_halves_variance() {
        let r = vec![reading("b", 1.0, 0.0, 0.1), reading("a", 3.0, 0.0, 0.1)];
        let f = fuse(&r).unwrap();
        assert!((f.pose.position.x - 2.0).abs() < 1e-12);
        assert!((f.var_pos - 0.005).abs() < 1e-15);
        assert_eq!(f.used_sensors, vec!["a", "b"]);
    }

    #[test]
    fn circular_mean_wraps() {
        let deg = PI / 180.0;
        let r = vec![
            reading("a", 0.0, 170.0 * deg, 0.1),
            reading("b", 0.0, -170.0 * deg, 0.1),
        ];
        let f = fuse(&r).unwrap();
        assert!(wrap_angle(f.pose.yaw - PI).abs() < 1e-12, "{}", f.pose.yaw);
    }

    #[test]
    fn schedule_prefers_low_noise() {
        let sensors = vec![
            sensor("c", 0.0, 0.0, 0.0, 0.01),
            sensor("a", 0.0, 0.1, 0.0, 0.05),
            sensor("b", 0.0, -0.1, 0.0, 0.01),
            sensor("d", 0.0, 0.0, PI, 0.001),
        ];
        let pose = Pose::planar(2.0, 0.0, 0.0);
        assert_eq!(schedule_sensors(&sensors, &pose, 1), vec!["b"]);
        assert_eq!(schedule_sensors(&sensors, &pose, 2), vec!["b", "c"]);
        assert_eq!(schedule_sensors(&sensors, &pose, 4), vec!["a", "b", "c"]);
        assert!(schedule_sensors(&sensors, &Pose::planar(-3.0, 0.0, 0.0), 2)
            .iter()
            .all(|id| id == "d"));
    }

    #[test]
    fn ring_geometry() {
        let ring = default_ring();
        assert_eq!(ring.len(), 8);
        let expected = [
            (1.25, 0.0),
            (1.125, 1.0),
            (0.0, 1.0),
            (-1.125, 1.0),
            (-1.25, 0.0),
            (-1.125, -1.0),
            (0.0, -1.0),
            (1.125, -1.0),
        ];
        for (s, (x, y)) in ring.iter().zip(expected) {
            assert!((s.position.x - x).abs() < 1e-12 && (s.position.y - y).abs() < 1e-12);
            let facing = (s.facing_yaw.cos(), s.facing_yaw.sin());
            let to_center = (-x / x.hypot(y), -y / x.hypot(y));
            assert!((facing.0 - to_center.0).abs() < 1e-12);
            assert!((facing.1 - to_center.1).abs() < 1e-12);
        }
    }

    #[test]
    fn ring_covers_workspace() {
        let ring = default_ring();
        let n = 40;
        for i in 0..=n {
            for j in 0..=n {
                let x = -1.2 + 2.4 * i as f64 / n as f64;
                let y = -0.95 + 1.9 * j as f64 / n as f64;
                let seen = ring
                    .iter()
                    .filter(|s| s.sees(&Pose::planar(x, y, 0.0)))
                    .count();
                assert!(seen >= 1, "({x}, {y}) unseen");
            }
        }
    }
}
