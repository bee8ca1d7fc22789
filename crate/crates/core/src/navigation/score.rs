use serde::{Deserialize, Serialize};

use super::{NavError, ObstacleGrid};
use crate::geom::Vec2;

/// Distance (cm) inside which the closeness penalty applies.
pub const CLOSE_RANGE_CM: f64 = 40.0;
/// Distance (cm) inside which nearby obstacles are penalized.
pub const OBSTACLE_RANGE_CM: f64 = 30.0;
pub const PROXIMITY_WEIGHT: f64 = 8.0;
pub const CLEARANCE_WEIGHT: f64 = 8.0;

/// Slack on the obstacle cutoff so that distances like `3 * 0.1 m` count as
/// exactly 30 cm.
const CUTOFF_SLACK_CM: f64 = 1e-9;

/// Standing-point score terms, all in centimeter units. Lower is better.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NavScore {
    /// Distance to the object.
    pub s1: f64,
    /// Penalty for standing closer than arm's reach.
    pub s2: f64,
    /// Inverse distance to the nearest obstacle, zero beyond range.
    pub s3: f64,
    pub total: f64,
}

impl NavScore {
    pub fn from_distances(object_cm: f64, obstacle_cm: f64) -> Self {
        let s1 = object_cm;
        let s2 = CLOSE_RANGE_CM - object_cm.min(CLOSE_RANGE_CM);
        let s3 = Self::obstacle_term(obstacle_cm);
        Self { s1, s2, s3, total: s1 + PROXIMITY_WEIGHT * s2 + CLEARANCE_WEIGHT * s3 }
    }

    /// `1 / d` within range, `0` beyond it, `+inf` on an obstacle.
    #[inline]
    pub fn obstacle_term(obstacle_cm: f64) -> f64 {
        if obstacle_cm <= OBSTACLE_RANGE_CM + CUTOFF_SLACK_CM {
            1.0 / obstacle_cm
        } else {
            0.0
        }
    }
}

/// Scores standing at world point `x` for an object at `object`, both in
/// meters. The nearest obstacle is the closest Occupied/Unexplored cell
/// center.
pub fn score(x: Vec2, object: Vec2, grid: &ObstacleGrid) -> Result<NavScore, NavError> {
    grid.require_inflated()?;
    let obstacle_cm = grid.nearest_obstacle_distance(x).map_or(f64::INFINITY, |d| d * 100.0);
    Ok(NavScore::from_distances((x - object).norm() * 100.0, obstacle_cm))
}
