use serde::{Deserialize, Serialize};

use super::{Cell, CellState, NavError, NavScore, ObstacleGrid};
use crate::geom::Vec2;

/// Where the robot should stand, and which way it should face.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NavTarget {
    pub cell: Cell,
    /// Cell center in world meters.
    pub position: Vec2,
    /// Unit vector from the standing point toward the object. Defaults to +x
    /// when the two coincide.
    pub heading: Vec2,
    pub score: NavScore,
}

/// Standing point minimizing the navigation score over every free Navigable
/// cell center. Ties resolve to the lexicographically smallest cell.
pub fn select_nav_target(grid: &ObstacleGrid, object: Vec2) -> Result<NavTarget, NavError> {
    select_nav_target_among(grid, object, |_| true)
}

/// As [`select_nav_target`], restricted to cells accepted by `allow`.
pub fn select_nav_target_among(
    grid: &ObstacleGrid,
    object: Vec2,
    allow: impl Fn(Cell) -> bool,
) -> Result<NavTarget, NavError> {
    grid.require_inflated()?;
    let mut best: Option<(NavScore, Cell)> = None;
    for cell in grid.cells() {
        if grid.state(cell) != CellState::Navigable || grid.is_blocked(cell) || !allow(cell) {
            continue;
        }
        let object_cm = (grid.center(cell) - object).norm() * 100.0;
        let s = NavScore::from_distances(object_cm, grid.obstacle_distance_cm(cell));
        if best.as_ref().is_none_or(|(b, _)| s.total < b.total) {
            best = Some((s, cell));
        }
    }
    let (score, cell) = best.ok_or(NavError::UnreachableTarget)?;
    let position = grid.center(cell);
    let heading = (object - position).try_normalize(0.0).unwrap_or_else(|| Vec2::new(1.0, 0.0));
    Ok(NavTarget { cell, position, heading, score })
}
