use serde::{Deserialize, Serialize};

use super::edt::squared_distance_field;
use super::NavError;
use crate::geom::Vec2;
use crate::memory::VoxelMap;

pub const DEFAULT_CELL_SIZE: f64 = 0.10;
pub const DEFAULT_INFLATION_RADIUS: f64 = 0.20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub row: usize,
    pub col: usize,
}

impl Cell {
    pub const fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }

    pub fn chebyshev(&self, other: &Cell) -> usize {
        self.row.abs_diff(other.row).max(self.col.abs_diff(other.col))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CellState {
    Navigable,
    Occupied,
    Unexplored,
}

impl CellState {
    pub fn is_obstacle(self) -> bool {
        !matches!(self, CellState::Navigable)
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Inflation {
    radius: f64,
    blocked: Vec<bool>,
    /// Squared distance in cells to the nearest obstacle; `None` if the
    /// grid has no obstacles at all.
    obstacle_d2: Option<Vec<u64>>,
}

/// 2D navigability grid. Row index grows along world +y, column index along
/// world +x; `origin` is the world (x, y) of the lower corner of cell (0, 0).
#[derive(Debug, Clone, PartialEq)]
pub struct ObstacleGrid {
    cell_size: f64,
    origin: Vec2,
    rows: usize,
    cols: usize,
    cells: Vec<CellState>,
    inflation: Option<Inflation>,
}

impl ObstacleGrid {
    pub fn new(
        rows: usize,
        cols: usize,
        cell_size: f64,
        origin: Vec2,
        cells: Vec<CellState>,
    ) -> Result<Self, NavError> {
        if !(cell_size > 0.0 && cell_size.is_finite()) {
            return Err(NavError::InvalidCellSize(cell_size));
        }
        if cells.len() != rows * cols {
            return Err(NavError::Parse(format!("{} cells for a {rows}x{cols} grid", cells.len())));
        }
        Ok(Self { cell_size, origin, rows, cols, cells, inflation: None })
    }

    pub fn filled(rows: usize, cols: usize, cell_size: f64, state: CellState) -> Self {
        Self::new(rows, cols, cell_size, Vec2::zeros(), vec![state; rows * cols]).expect("valid grid")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn origin(&self) -> Vec2 {
        self.origin
    }

    pub fn contains(&self, cell: Cell) -> bool {
        cell.row < self.rows && cell.col < self.cols
    }

    #[inline]
    pub(crate) fn linear(&self, cell: Cell) -> usize {
        cell.row * self.cols + cell.col
    }

    #[inline]
    pub(crate) fn cell_of_linear(&self, i: usize) -> Cell {
        Cell::new(i / self.cols, i % self.cols)
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.rows * self.cols).map(|i| self.cell_of_linear(i))
    }

    pub fn state(&self, cell: Cell) -> CellState {
        self.cells[self.linear(cell)]
    }

    /// Sets a cell and drops any inflation, which must be recomputed.
    pub fn set_state(&mut self, cell: Cell, state: CellState) {
        let i = self.linear(cell);
        self.cells[i] = state;
        self.inflation = None;
    }

    pub fn center(&self, cell: Cell) -> Vec2 {
        Vec2::new(
            self.origin.x + (cell.col as f64 + 0.5) * self.cell_size,
            self.origin.y + (cell.row as f64 + 0.5) * self.cell_size,
        )
    }

    /// Cell containing a world point, if inside the grid.
    pub fn cell_at(&self, p: Vec2) -> Option<Cell> {
        let col = ((p.x - self.origin.x) / self.cell_size).floor();
        let row = ((p.y - self.origin.y) / self.cell_size).floor();
        if col < 0.0 || row < 0.0 || col >= self.cols as f64 || row >= self.rows as f64 {
            return None;
        }
        Some(Cell::new(row as usize, col as usize))
    }

    /// Nearest grid cell to a world point, clamping points outside the grid.
    pub fn clamp_cell(&self, p: Vec2) -> Cell {
        let col = ((p.x - self.origin.x) / self.cell_size).floor().clamp(0.0, (self.cols - 1) as f64);
        let row = ((p.y - self.origin.y) / self.cell_size).floor().clamp(0.0, (self.rows - 1) as f64);
        Cell::new(row as usize, col as usize)
    }

    pub fn is_inflated(&self) -> bool {
        self.inflation.is_some()
    }

    pub fn inflation_radius(&self) -> Option<f64> {
        self.inflation.as_ref().map(|i| i.radius)
    }

    /// Whether the cell is non-navigable after inflation (obstacles count as
    /// blocked even on a grid that has not been inflated).
    pub fn is_blocked(&self, cell: Cell) -> bool {
        match &self.inflation {
            Some(inf) => inf.blocked[self.linear(cell)],
            None => self.state(cell).is_obstacle(),
        }
    }

    pub fn is_free(&self, cell: Cell) -> bool {
        self.contains(cell) && !self.is_blocked(cell)
    }

    pub(crate) fn require_inflated(&self) -> Result<(), NavError> {
        self.inflation.as_ref().map(|_| ()).ok_or(NavError::NotInflated)
    }

    /// Squared distance in cell units from the cell to the nearest
    /// Occupied/Unexplored cell.
    pub fn obstacle_distance_sq(&self, cell: Cell) -> Option<u64> {
        let inf = self.inflation.as_ref()?;
        inf.obstacle_d2.as_ref().map(|d| d[self.linear(cell)])
    }

    /// Center-to-center distance in centimeters to the nearest obstacle
    /// cell; infinite when the grid has none.
    pub fn obstacle_distance_cm(&self, cell: Cell) -> f64 {
        match self.obstacle_distance_sq(cell) {
            Some(d2) => (d2 as f64).sqrt() * self.cell_size * 100.0,
            None => f64::INFINITY,
        }
    }

    pub fn has_obstacles(&self) -> bool {
        self.cells.iter().any(|c| c.is_obstacle())
    }

    /// Exact distance in meters from an arbitrary world point to the nearest
    /// obstacle cell center.
    pub fn nearest_obstacle_distance(&self, p: Vec2) -> Option<f64> {
        if !self.has_obstacles() {
            return None;
        }
        let start = self.clamp_cell(p);
        let bound = match self.obstacle_distance_sq(start) {
            Some(d2) => (d2 as f64).sqrt() * self.cell_size + (p - self.center(start)).norm(),
            None => f64::INFINITY,
        };
        let window = |lo: f64, hi: f64, origin: f64, n: usize| {
            let a = ((lo - origin) / self.cell_size).floor().max(0.0);
            let b = ((hi - origin) / self.cell_size).ceil().min(n as f64);
            (a as usize, (b as usize).max(a as usize))
        };
        let (r0, r1) =
            if bound.is_finite() { window(p.y - bound, p.y + bound, self.origin.y, self.rows) } else { (0, self.rows) };
        let (c0, c1) =
            if bound.is_finite() { window(p.x - bound, p.x + bound, self.origin.x, self.cols) } else { (0, self.cols) };
        let mut best = f64::INFINITY;
        for row in r0..r1 {
            for col in c0..c1 {
                let cell = Cell::new(row, col);
                if self.state(cell).is_obstacle() {
                    best = best.min((p - self.center(cell)).norm());
                }
            }
        }
        best.is_finite().then_some(best)
    }
}

/// Rasterizes the map's voxels into a 2D grid.
///
/// A cell is Occupied if any voxel center strictly between the floor and
/// ceiling heights falls into it; otherwise Unexplored if it holds neither a
/// floor voxel (`z <= floor`) nor a ceiling voxel (`z >= ceiling`);
/// otherwise Navigable. The grid spans the xy extent of all voxel centers.
pub fn build_grid(
    map: &VoxelMap,
    floor_height: f64,
    ceiling_height: f64,
    cell_size: f64,
) -> Result<ObstacleGrid, NavError> {
    if !(floor_height < ceiling_height) {
        return Err(NavError::InvalidHeights { floor: floor_height, ceiling: ceiling_height });
    }
    if !(cell_size > 0.0 && cell_size.is_finite()) {
        return Err(NavError::InvalidCellSize(cell_size));
    }
    let voxels = map.occupied_voxels();
    if voxels.is_empty() {
        return Err(NavError::EmptyMap);
    }
    let vs = map.voxel_size();
    let centers: Vec<_> = voxels.iter().map(|v| v.center(vs)).collect();
    let global = |c: f64| (c / cell_size).floor() as i64;
    let (mut gx0, mut gy0, mut gx1, mut gy1) = (i64::MAX, i64::MAX, i64::MIN, i64::MIN);
    for c in &centers {
        let (gx, gy) = (global(c.x), global(c.y));
        gx0 = gx0.min(gx);
        gy0 = gy0.min(gy);
        gx1 = gx1.max(gx);
        gy1 = gy1.max(gy);
    }
    let cols = (gx1 - gx0 + 1) as usize;
    let rows = (gy1 - gy0 + 1) as usize;

    #[derive(Clone, Copy, Default)]
    struct Seen {
        mid: bool,
        floor: bool,
        ceiling: bool,
    }
    let mut seen = vec![Seen::default(); rows * cols];
    for c in &centers {
        let i = (global(c.y) - gy0) as usize * cols + (global(c.x) - gx0) as usize;
        if c.z <= floor_height {
            seen[i].floor = true;
        } else if c.z >= ceiling_height {
            seen[i].ceiling = true;
        } else {
            seen[i].mid = true;
        }
    }
    let cells = seen
        .into_iter()
        .map(|s| match s {
            Seen { mid: true, .. } => CellState::Occupied,
            Seen { floor: false, ceiling: false, .. } => CellState::Unexplored,
            _ => CellState::Navigable,
        })
        .collect();
    let origin = Vec2::new(gx0 as f64 * cell_size, gy0 as f64 * cell_size);
    ObstacleGrid::new(rows, cols, cell_size, origin, cells)
}

/// Marks every cell whose center lies within `radius` of an Occupied or
/// Unexplored cell center as blocked, and records the obstacle distance
/// field used by scoring and planning.
pub fn inflate(grid: &ObstacleGrid, radius: f64) -> Result<ObstacleGrid, NavError> {
    if !(radius >= 0.0 && radius.is_finite()) {
        return Err(NavError::InvalidRadius(radius));
    }
    let seeds: Vec<bool> = grid.cells.iter().map(|c| c.is_obstacle()).collect();
    let obstacle_d2 = squared_distance_field(grid.rows, grid.cols, &seeds);
    let r = radius / grid.cell_size;
    let limit = (r * r + 1e-9).floor() as u64;
    let blocked = match &obstacle_d2 {
        Some(d2) => d2.iter().map(|&d| d <= limit).collect(),
        None => vec![false; grid.cells.len()],
    };
    let mut out = grid.clone();
    out.inflation = Some(Inflation { radius, blocked, obstacle_d2 });
    Ok(out)
}
