use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use serde::{Deserialize, Serialize};

use super::{Cell, NavError, NavScore, ObstacleGrid};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlannerConfig {
    /// Weight of the obstacle-proximity term added when entering a cell.
    pub obstacle_weight: f64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self { obstacle_weight: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub cells: Vec<Cell>,
    pub cost: f64,
}

const NEIGHBORS: [(isize, isize); 8] = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)];

fn neighbors(grid: &ObstacleGrid, cell: Cell) -> impl Iterator<Item = (Cell, bool)> + '_ {
    NEIGHBORS.iter().filter_map(move |&(dr, dc)| {
        let row = cell.row.checked_add_signed(dr)?;
        let col = cell.col.checked_add_signed(dc)?;
        let next = Cell::new(row, col);
        grid.is_free(next).then_some((next, dr != 0 && dc != 0))
    })
}

#[inline]
fn step_cost(grid: &ObstacleGrid, entered: Cell, diagonal: bool, weight: f64) -> f64 {
    let base = if diagonal { std::f64::consts::SQRT_2 } else { 1.0 };
    if weight == 0.0 {
        return base;
    }
    base + weight * NavScore::obstacle_term(grid.obstacle_distance_cm(entered))
}

fn octile(a: Cell, b: Cell) -> f64 {
    let dr = a.row.abs_diff(b.row) as f64;
    let dc = a.col.abs_diff(b.col) as f64;
    let (lo, hi) = if dr < dc { (dr, dc) } else { (dc, dr) };
    hi - lo + std::f64::consts::SQRT_2 * lo
}

/// Cost of a path under the planner's step model.
pub fn path_cost(grid: &ObstacleGrid, cells: &[Cell], config: PlannerConfig) -> f64 {
    cells
        .windows(2)
        .map(|w| {
            let diagonal = w[0].row != w[1].row && w[0].col != w[1].col;
            step_cost(grid, w[1], diagonal, config.obstacle_weight)
        })
        .sum()
}

#[derive(PartialEq)]
struct Open {
    f: f64,
    g: f64,
    index: usize,
}

impl Eq for Open {}

impl Ord for Open {
    fn cmp(&self, other: &Self) -> Ordering {
        other.f.total_cmp(&self.f).then_with(|| other.index.cmp(&self.index))
    }
}

impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

pub fn plan_path(grid: &ObstacleGrid, start: Cell, goal: Cell) -> Result<Path, NavError> {
    plan_path_with(grid, start, goal, PlannerConfig::default())
}

/// A* over free 8-connected cells. Axis steps cost 1 and diagonal steps
/// `sqrt(2)` (cell units), plus `obstacle_weight * s3` of the entered cell;
/// the octile distance guides the search.
pub fn plan_path_with(grid: &ObstacleGrid, start: Cell, goal: Cell, config: PlannerConfig) -> Result<Path, NavError> {
    grid.require_inflated()?;
    for c in [start, goal] {
        if !grid.contains(c) {
            return Err(NavError::OutOfBounds(c));
        }
        if grid.is_blocked(c) {
            return Err(NavError::Blocked(c));
        }
    }
    let n = grid.rows() * grid.cols();
    let mut best_g = vec![f64::INFINITY; n];
    let mut parent = vec![usize::MAX; n];
    let mut open = BinaryHeap::new();
    let (s, t) = (grid.linear(start), grid.linear(goal));
    best_g[s] = 0.0;
    open.push(Open { f: octile(start, goal), g: 0.0, index: s });

    while let Some(Open { g, index, .. }) = open.pop() {
        if g > best_g[index] {
            continue;
        }
        if index == t {
            let mut cells = vec![goal];
            let mut i = t;
            while i != s {
                i = parent[i];
                cells.push(grid.cell_of_linear(i));
            }
            cells.reverse();
            return Ok(Path { cells, cost: g });
        }
        let cell = grid.cell_of_linear(index);
        for (next, diagonal) in neighbors(grid, cell) {
            let j = grid.linear(next);
            let ng = g + step_cost(grid, next, diagonal, config.obstacle_weight);
            if ng < best_g[j] {
                best_g[j] = ng;
                parent[j] = index;
                open.push(Open { f: ng + octile(next, goal), g: ng, index: j });
            }
        }
    }
    Err(NavError::NoPath { start, goal })
}

/// Free cells 8-connected to `start` (including it), as a mask over the grid.
pub fn flood_fill(grid: &ObstacleGrid, start: Cell) -> Vec<bool> {
    let mut seen = vec![false; grid.rows() * grid.cols()];
    if !grid.is_free(start) {
        return seen;
    }
    let mut queue = VecDeque::from([start]);
    seen[grid.linear(start)] = true;
    while let Some(cell) = queue.pop_front() {
        for (next, _) in neighbors(grid, cell) {
            let j = grid.linear(next);
            if !seen[j] {
                seen[j] = true;
                queue.push_back(next);
            }
        }
    }
    seen
}
