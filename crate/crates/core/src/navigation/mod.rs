//! Obstacle grid, standing-point selection and path planning.
//!
//! All navigation scores are expressed in centimeters; grid geometry is in
//! meters.

mod astar;
mod edt;
mod grid;
mod score;
mod target;
mod text;

pub use astar::{flood_fill, path_cost, plan_path, plan_path_with, Path, PlannerConfig};
pub use edt::squared_distance_field;
pub use grid::{build_grid, inflate, Cell, CellState, ObstacleGrid, DEFAULT_CELL_SIZE, DEFAULT_INFLATION_RADIUS};
pub use score::{score, NavScore, CLEARANCE_WEIGHT, CLOSE_RANGE_CM, OBSTACLE_RANGE_CM, PROXIMITY_WEIGHT};
pub use target::{select_nav_target, select_nav_target_among, NavTarget};
pub use text::{path_from_text, path_to_text};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum NavError {
    #[error("map has no voxels")]
    EmptyMap,
    #[error("floor height {floor} must be below ceiling height {ceiling}")]
    InvalidHeights { floor: f64, ceiling: f64 },
    #[error("cell size must be positive, got {0}")]
    InvalidCellSize(f64),
    #[error("inflation radius must be non-negative, got {0}")]
    InvalidRadius(f64),
    #[error("grid has not been inflated")]
    NotInflated,
    #[error("no navigable cell available as a standing point")]
    UnreachableTarget,
    #[error("cell ({}, {}) is outside the grid", .0.row, .0.col)]
    OutOfBounds(Cell),
    #[error("cell ({}, {}) is not traversable", .0.row, .0.col)]
    Blocked(Cell),
    #[error("no path from ({}, {}) to ({}, {})", .start.row, .start.col, .goal.row, .goal.col)]
    NoPath { start: Cell, goal: Cell },
    #[error("malformed grid/path text: {0}")]
    Parse(String),
}
