//! Motion compression: folding an unbounded virtual walk into the bounded
//! physical workspace.
//!
//! Each step the visitor covers the same arc length physically and
//! virtually, but the physical heading receives extra curvature
//! `kappa_injected` (bounded by `kappa_max`) that steers them back toward the
//! workspace center. A straight virtual line therefore becomes a curve, and
//! under constant maximal injection a circle of radius `1 / kappa_max`.
//!
//! Steering law: `kappa = clamp(steer_gain * bearing_error, ±kappa_max)`,
//! where `bearing_error ∈ [-π, π)` is the signed angle from the physical
//! heading to the direction of the workspace center (zero at the center).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{wrap_angle, Pose, Vec3};

/// Below this heading change a step is integrated as a straight segment.
pub const STRAIGHT_EPSILON: f64 = 1e-12;

/// Largest arc length accepted in one tick.
pub const MAX_STEP_LENGTH: f64 = 0.2;

/// Spacing of predicted path samples, meters.
pub const PREDICTION_SPACING: f64 = 0.25;

/// Total history displacement below which the walker counts as stationary.
pub const STATIONARY_THRESHOLD: f64 = 1e-3;

/// Rectangular tracked area centered on the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Workspace {
    pub width: f64,
    pub depth: f64,
}

impl Default for Workspace {
    fn default() -> Self {
        Self {
            width: 2.5,
            depth: 2.0,
        }
    }
}

impl Workspace {
    pub fn area(&self) -> f64 {
        self.width * self.depth
    }

    pub fn is_valid(&self) -> bool {
        self.width.is_finite() && self.depth.is_finite() && self.width > 0.0 && self.depth > 0.0
    }

    /// Boundary inclusive.
    pub fn contains(&self, p: &Vec3) -> bool {
        p.x.abs() <= self.width / 2.0 && p.y.abs() <= self.depth / 2.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompressionConfig {
    /// 1/m
    pub kappa_max: f64,
    /// 1/m per radian of bearing error
    pub steer_gain: f64,
    /// meters
    pub predictor_horizon: f64,
    /// Test hook: inject this curvature (clamped to ±kappa_max) on every
    /// step instead of steering.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forced_injection: Option<f64>,
}

impl Default for CompressionConfig {
    fn default() -> Self {
        Self {
            kappa_max: 2.5,
            steer_gain: 1.0,
            predictor_horizon: 2.0,
            forced_injection: None,
        }
    }
}

impl CompressionConfig {
    pub fn is_valid(&self) -> bool {
        self.kappa_max.is_finite()
            && self.kappa_max > 0.0
            && self.steer_gain.is_finite()
            && self.steer_gain >= 0.0
            && self.predictor_horizon.is_finite()
            && self.predictor_horizon >= 0.0
            && self.forced_injection.is_none_or(f64::is_finite)
    }
}

/// Virtual motion of one step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VirtDelta {
    /// Arc length walked, meters.
    pub ds: f64,
    /// Virtual heading change, radians.
    pub dtheta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum DeltaError {
    #[error("ds must be finite and within [0, {MAX_STEP_LENGTH}] m, got {0}")]
    BadLength(f64),
    #[error("dtheta must be finite, got {0}")]
    BadTurn(f64),
}

impl VirtDelta {
    pub const IDLE: VirtDelta = VirtDelta {
        ds: 0.0,
        dtheta: 0.0,
    };

    pub fn new(ds: f64, dtheta: f64) -> Result<Self, DeltaError> {
        let delta = Self { ds, dtheta };
        delta.check()?;
        Ok(delta)
    }

    pub fn check(&self) -> Result<(), DeltaError> {
        if !(self.ds.is_finite() && (0.0..=MAX_STEP_LENGTH).contains(&self.ds)) {
            return Err(DeltaError::BadLength(self.ds));
        }
        if !self.dtheta.is_finite() {
            return Err(DeltaError::BadTurn(self.dtheta));
        }
        Ok(())
    }
}

/// Virtual/physical correspondence of one visitor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MappingState {
    pub phys_pose: Pose,
    pub virt_pose: Pose,
    /// `phys_pose.yaw - virt_pose.yaw`, wrapped.
    pub heading_offset: f64,
}

pub type MappingSnapshot = MappingState;

impl MappingState {
    pub fn new(phys_pose: Pose, virt_pose: Pose) -> Self {
        Self {
            phys_pose,
            virt_pose,
            heading_offset: wrap_angle(phys_pose.yaw - virt_pose.yaw),
        }
    }

    pub fn snapshot(&self) -> MappingSnapshot {
        *self
    }
}

/// Places the visitor at the workspace center facing +x.
pub fn reset_mapping(_workspace: &Workspace, virt_start: Pose) -> MappingState {
    MappingState::new(
        Pose::default(),
        Pose::new(virt_start.position, virt_start.yaw),
    )
}

/// Exact unicycle integration of an arc of length `ds` turning by `dtheta`.
pub fn advance(pose: &Pose, ds: f64, dtheta: f64) -> Pose {
    let p = pose.position;
    let th = pose.yaw;
    let (dx, dy) = if dtheta.abs() < STRAIGHT_EPSILON {
        (ds * th.cos(), ds * th.sin())
    } else {
        let radius = ds / dtheta;
        (
            radius * ((th + dtheta).sin() - th.sin()),
            radius * (th.cos() - (th + dtheta).cos()),
        )
    };
    Pose::new(Vec3::new(p.x + dx, p.y + dy, p.z), th + dtheta)
}

/// Signed angle from the heading to the workspace center; zero at the center.
pub fn bearing_error(phys_pose: &Pose) -> f64 {
    let p = phys_pose.position;
    if p.x.hypot(p.y) < STRAIGHT_EPSILON {
        return 0.0;
    }
    wrap_angle((-p.y).atan2(-p.x) - phys_pose.yaw)
}

/// Curvature the controller injects at `phys_pose`.
pub fn injected_curvature(phys_pose: &Pose, config: &CompressionConfig) -> f64 {
    let raw = match config.forced_injection {
        Some(kappa) => kappa,
        None => config.steer_gain * bearing_error(phys_pose),
    };
    raw.clamp(-config.kappa_max, config.kappa_max)
}

/// Advances both poses by one step; returns the new mapping and the
/// curvature injected into the physical path.
pub fn compress_step(
    mapping: &MappingState,
    delta: VirtDelta,
    config: &CompressionConfig,
    _workspace: &Workspace,
) -> (MappingState, f64) {
    debug_assert!(delta.check().is_ok(), "invalid delta {delta:?}");
    let kappa = injected_curvature(&mapping.phys_pose, config);
    let virt = advance(&mapping.virt_pose, delta.ds, delta.dtheta);
    let phys = advance(
        &mapping.phys_pose,
        delta.ds,
        delta.dtheta + kappa * delta.ds,
    );
    (MappingState::new(phys, virt), kappa)
}

/// Straight-line extrapolation of the recent virtual walk.
///
/// Samples every [`PREDICTION_SPACING`] along the latest heading up to
/// `horizon`, excluding the current position. A history whose total
/// displacement is below [`STATIONARY_THRESHOLD`] predicts only the current
/// position.
pub fn predict_path(history: &[Pose], horizon: f64) -> Vec<Vec3> {
    let Some(latest) = history.last() else {
        return Vec::new();
    };
    let travelled: f64 = history
        .windows(2)
        .map(|w| w[0].position.planar_distance(&w[1].position))
        .sum();
    if history.len() < 2 || travelled < STATIONARY_THRESHOLD {
        return vec![latest.position];
    }
    let samples = (horizon / PREDICTION_SPACING + 1e-9).floor().max(0.0) as usize;
    let (cx, cy) = latest.heading();
    let p = latest.position;
    (1..=samples)
        .map(|k| {
            let d = k as f64 * PREDICTION_SPACING;
            Vec3::new(p.x + d * cx, p.y + d * cy, p.z)
        })
        .collect()
}
