//! Deterministic inputs for the benchmarks.

use pickdrop_core::memory::{VoxelIndex, VoxelMap};
use pickdrop_core::navigation::{inflate, Cell, CellState, ObstacleGrid};
use pickdrop_core::pipeline::{random_apartment, ScanArchive, SyntheticWorld};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn unit_vector(rng: &mut impl Rng, dim: usize) -> Vec<f32> {
    let v: Vec<f32> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    let n = v.iter().map(|x| x * x).sum::<f32>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

/// Finalized map with `n` distinct voxels holding random unit vectors.
pub fn random_map(n: usize, dim: usize, seed: u64) -> VoxelMap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let side = ((n as f64).cbrt().ceil() as i64).max(1) * 2;
    let mut seen = std::collections::HashSet::new();
    let mut entries = Vec::with_capacity(n);
    while entries.len() < n {
        let idx = [rng.random_range(0..side), rng.random_range(0..side), rng.random_range(0..side)];
        if seen.insert(idx) {
            entries.push((VoxelIndex(idx), unit_vector(&mut rng, dim), 1.0));
        }
    }
    VoxelMap::from_entries(0.05, dim, entries, vec![]).expect("valid entries")
}

/// Square navigable grid with scattered rectangular obstacles, not inflated.
pub fn cluttered_grid(side: usize, obstacles: usize, seed: u64) -> ObstacleGrid {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = ObstacleGrid::filled(side, side, 0.1, CellState::Navigable);
    for _ in 0..obstacles {
        let (r0, c0) = (rng.random_range(0..side), rng.random_range(0..side));
        let (h, w) = (rng.random_range(1..8), rng.random_range(1..8));
        for r in r0..(r0 + h).min(side) {
            for c in c0..(c0 + w).min(side) {
                g.set_state(Cell::new(r, c), CellState::Occupied);
            }
        }
    }
    g
}

/// Inflated grid plus two far-apart free cells.
pub fn planning_problem(side: usize, seed: u64) -> (ObstacleGrid, Cell, Cell) {
    let mut g = cluttered_grid(side, side / 2, seed);
    let (start, goal) = (Cell::new(1, 1), Cell::new(side - 2, side - 2));
    for c in [start, goal] {
        for r in c.row - 1..=c.row + 1 {
            for col in c.col - 1..=c.col + 1 {
                g.set_state(Cell::new(r, col), CellState::Navigable);
            }
        }
    }
    (inflate(&g, 0.1).expect("valid radius"), start, goal)
}

/// Synthetic apartment scan with the given number of frames.
pub fn apartment_scan(frames: usize, seed: u64) -> ScanArchive {
    let mut spec = random_apartment(seed).spec;
    spec.camera.frames = frames;
    SyntheticWorld::new(spec, seed).and_then(|w| w.generate_scan()).expect("valid apartment")
}
