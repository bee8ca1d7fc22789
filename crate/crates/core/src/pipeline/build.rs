use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::scan::ScanArchive;
use crate::memory::{FrameContribution, MemoryError, VoxelMap, DEFAULT_VOXEL_SIZE};
use crate::navigation::{build_grid, inflate, NavError, ObstacleGrid, DEFAULT_CELL_SIZE, DEFAULT_INFLATION_RADIUS};

#[derive(Debug, Error)]
pub enum BuildError {
    #[error("voxel map: {0}")]
    Memory(#[from] MemoryError),
    #[error("obstacle grid: {0}")]
    Nav(#[from] NavError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MapConfig {
    pub voxel_size: f64,
    pub cell_size: f64,
    /// Voxels at or below this height count as floor (m).
    pub floor_height: f64,
    /// Voxels at or above this height count as ceiling (m).
    pub ceiling_height: f64,
    pub inflation_radius: f64,
}

impl Default for MapConfig {
    fn default() -> Self {
        Self {
            voxel_size: DEFAULT_VOXEL_SIZE,
            cell_size: DEFAULT_CELL_SIZE,
            floor_height: 0.1,
            ceiling_height: 2.0,
            inflation_radius: DEFAULT_INFLATION_RADIUS,
        }
    }
}

/// Ingests every frame and finalizes. Frames are processed in parallel and
/// merged in scan order, so the result does not depend on thread count.
pub fn build_memory(scan: &ScanArchive, config: &MapConfig) -> Result<VoxelMap, MemoryError> {
    let mut map = VoxelMap::new(config.voxel_size, scan.embedding_dim())?;
    let contributions: Vec<FrameContribution> = scan
        .frames()
        .par_iter()
        .map(|f| FrameContribution::compute(f, config.voxel_size, scan.embedding_dim()))
        .collect::<Result<_, _>>()?;
    for c in contributions {
        map.merge(c)?;
    }
    map.finalize()?;
    Ok(map)
}

/// Obstacle grid for a finalized map, inflated by the configured radius.
pub fn grid_from_map(map: &VoxelMap, config: &MapConfig) -> Result<ObstacleGrid, NavError> {
    let grid = build_grid(map, config.floor_height, config.ceiling_height, config.cell_size)?;
    inflate(&grid, config.inflation_radius)
}

pub fn build_map(scan: &ScanArchive) -> Result<(VoxelMap, ObstacleGrid), BuildError> {
    build_map_with(scan, &MapConfig::default())
}

pub fn build_map_with(scan: &ScanArchive, config: &MapConfig) -> Result<(VoxelMap, ObstacleGrid), BuildError> {
    let map = build_memory(scan, config)?;
    let grid = grid_from_map(&map, config)?;
    Ok((map, grid))
}
