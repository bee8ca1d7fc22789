//! Drop-point computation over a segmented receptacle cloud.
//!
//! The cloud is first expressed in the robot-aligned frame (x forward,
//! y left, z up, robot at the origin). The drop point sits over the
//! per-axis medians, and the release height clears the tallest point in the
//! slab between the robot and that median, which handles bins and sinks
//! whose rims are higher than their interiors.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{PointCloud, Vec2, Vec3};

#[derive(Debug, Error, PartialEq)]
pub enum DropError {
    #[error("receptacle cloud is empty")]
    NoReceptacle,
    #[error("no receptacle point lies between the robot and the drop point")]
    DegenerateReceptacle,
    #[error("robot heading is not a unit vector (norm {0})")]
    NonUnitHeading(f64),
    #[error("release height {height:.3} m exceeds the reach limit {limit:.3} m")]
    BeyondReach { height: f64, limit: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DropConfig {
    /// Clearance added above the tallest eligible point (m).
    pub buffer: f64,
    /// Half-width of the eligibility slab around the median y (m).
    pub half_width: f64,
    /// Optional maximum release height (m). Disabled by default.
    pub max_height: Option<f64>,
}

impl Default for DropConfig {
    fn default() -> Self {
        Self { buffer: 0.2, half_width: 0.1, max_height: None }
    }
}

/// Cloud in the robot-aligned frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignedCloud {
    pub points: Vec<Vec3>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DropPoint {
    pub x_m: f64,
    pub y_m: f64,
    /// Release height.
    pub z_max: f64,
}

impl DropPoint {
    pub fn as_array(&self) -> [f64; 3] {
        [self.x_m, self.y_m, self.z_max]
    }
}

/// Rotates about z so `heading` becomes +x and moves the robot to the
/// origin. Heights are kept as they are.
pub fn align_cloud(cloud: &PointCloud, robot_position: Vec2, heading: Vec2) -> Result<AlignedCloud, DropError> {
    let norm = heading.norm();
    if !((norm - 1.0).abs() <= 1e-6) {
        return Err(DropError::NonUnitHeading(norm));
    }
    let left = Vec2::new(-heading.y, heading.x);
    let points = cloud
        .points
        .iter()
        .map(|p| {
            let rel = p.xy() - robot_position;
            Vec3::new(rel.dot(&heading), rel.dot(&left), p.z)
        })
        .collect();
    Ok(AlignedCloud { points })
}

/// Lower median: the element at 1-based rank `ceil(n / 2)`.
fn lower_median(mut values: Vec<f64>) -> f64 {
    let k = (values.len() - 1) / 2;
    let (_, m, _) = values.select_nth_unstable_by(k, f64::total_cmp);
    *m
}

pub fn compute_drop(cloud: &AlignedCloud) -> Result<DropPoint, DropError> {
    compute_drop_with(cloud, &DropConfig::default())
}

pub fn compute_drop_with(cloud: &AlignedCloud, config: &DropConfig) -> Result<DropPoint, DropError> {
    if cloud.points.is_empty() {
        return Err(DropError::NoReceptacle);
    }
    let x_m = lower_median(cloud.points.iter().map(|p| p.x).collect());
    let y_m = lower_median(cloud.points.iter().map(|p| p.y).collect());
    let top = cloud
        .points
        .iter()
        .filter(|p| 0.0 <= p.x && p.x <= x_m && (p.y - y_m).abs() < config.half_width)
        .map(|p| p.z)
        .reduce(f64::max)
        .ok_or(DropError::DegenerateReceptacle)?;
    let z_max = config.buffer + top;
    if let Some(limit) = config.max_height {
        if z_max > limit {
            return Err(DropError::BeyondReach { height: z_max, limit });
        }
    }
    Ok(DropPoint { x_m, y_m, z_max })
}
