//! Text dumps for grids and paths.
//!
//! Grid: a header line `grid <rows> <cols> <cell_size> <origin_x> <origin_y> <radius|none>`
//! followed by one line per row (row 0 first), one character per cell:
//! `.` navigable, `#` occupied, `?` unexplored, `+` navigable but inside the
//! inflation radius.
//!
//! Path: one `row col` pair per line, start first.

use super::{inflate, Cell, CellState, NavError, ObstacleGrid};
use crate::geom::Vec2;

impl ObstacleGrid {
    pub fn to_text(&self) -> String {
        let radius = self.inflation_radius().map_or_else(|| "none".to_string(), |r| r.to_string());
        let mut out = format!(
            "grid {} {} {} {} {} {}\n",
            self.rows(),
            self.cols(),
            self.cell_size(),
            self.origin().x,
            self.origin().y,
            radius
        );
        out.reserve(self.rows() * (self.cols() + 1));
        for row in 0..self.rows() {
            for col in 0..self.cols() {
                let cell = Cell::new(row, col);
                out.push(match self.state(cell) {
                    CellState::Occupied => '#',
                    CellState::Unexplored => '?',
                    CellState::Navigable if self.is_blocked(cell) => '+',
                    CellState::Navigable => '.',
                });
            }
            out.push('\n');
        }
        out
    }

    /// Parses a dump written by [`ObstacleGrid::to_text`]. Inflation is
    /// recomputed from the recorded radius and must agree with the `+` cells.
    pub fn from_text(text: &str) -> Result<Self, NavError> {
        let bad = |m: &str| NavError::Parse(m.to_string());
        let mut lines = text.lines();
        let header: Vec<&str> = lines.next().ok_or_else(|| bad("empty input"))?.split_whitespace().collect();
        if header.len() != 7 || header[0] != "grid" {
            return Err(bad("expected `grid <rows> <cols> <cell> <ox> <oy> <radius>` header"));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| NavError::Parse(format!("bad number `{s}`")));
        let int = |s: &str| s.parse::<usize>().map_err(|_| NavError::Parse(format!("bad count `{s}`")));
        let (rows, cols) = (int(header[1])?, int(header[2])?);
        let cell_size = num(header[3])?;
        let origin = Vec2::new(num(header[4])?, num(header[5])?);
        let radius = match header[6] {
            "none" => None,
            r => Some(num(r)?),
        };

        let mut cells = Vec::with_capacity(rows * cols);
        let mut inflated_marks = Vec::with_capacity(rows * cols);
        for row in 0..rows {
            let line = lines.next().ok_or_else(|| NavError::Parse(format!("missing row {row}")))?;
            if line.chars().count() != cols {
                return Err(NavError::Parse(format!("row {row} has {} cells, expected {cols}", line.chars().count())));
            }
            for ch in line.chars() {
                let (state, marked) = match ch {
                    '.' => (CellState::Navigable, false),
                    '+' => (CellState::Navigable, true),
                    '#' => (CellState::Occupied, true),
                    '?' => (CellState::Unexplored, true),
                    other => return Err(NavError::Parse(format!("unknown cell character `{other}`"))),
                };
                cells.push(state);
                inflated_marks.push(marked);
            }
        }
        let grid = ObstacleGrid::new(rows, cols, cell_size, origin, cells)?;
        let Some(radius) = radius else {
            if inflated_marks
                .iter()
                .zip(&grid.cells().collect::<Vec<_>>())
                .any(|(&m, &c)| m && !grid.state(c).is_obstacle())
            {
                return Err(bad("`+` cells in a grid without an inflation radius"));
            }
            return Ok(grid);
        };
        let grid = inflate(&grid, radius)?;
        for (i, cell) in grid.cells().enumerate() {
            if grid.is_blocked(cell) != inflated_marks[i] {
                return Err(NavError::Parse(format!(
                    "cell ({}, {}) disagrees with inflation radius {radius}",
                    cell.row, cell.col
                )));
            }
        }
        Ok(grid)
    }
}

pub fn path_to_text(cells: &[Cell]) -> String {
    cells.iter().map(|c| format!("{} {}\n", c.row, c.col)).collect()
}

pub fn path_from_text(text: &str) -> Result<Vec<Cell>, NavError> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let mut it = l.split_whitespace().map(str::parse::<usize>);
            match (it.next(), it.next(), it.next()) {
                (Some(Ok(row)), Some(Ok(col)), None) => Ok(Cell::new(row, col)),
                _ => Err(NavError::Parse(format!("bad path line `{l}`"))),
            }
        })
        .collect()
}
