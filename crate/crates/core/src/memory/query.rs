use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::{check_unit, MemoryError, VoxelIndex, VoxelMap};
use crate::geom::Vec3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryResult {
    pub index: VoxelIndex,
    /// Voxel center in world coordinates.
    pub position: Vec3,
    /// Dot product of the query with the voxel's averaged embedding.
    pub score: f64,
}

/// Candidate counts for the "A near B" query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NearQueryConfig {
    pub target_candidates: usize,
    pub anchor_candidates: usize,
}

impl Default for NearQueryConfig {
    fn default() -> Self {
        Self { target_candidates: 10, anchor_candidates: 50 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NearMatch {
    pub target: QueryResult,
    pub anchor: QueryResult,
    pub target_rank: usize,
    pub anchor_rank: usize,
    pub distance: f64,
}

/// Higher score first, then smaller voxel index.
fn rank_order(a: &(f64, VoxelIndex), b: &(f64, VoxelIndex)) -> Ordering {
    b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1))
}

fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum()
}

impl VoxelMap {
    /// Top-`k` voxels by dot product with `embedding`, best first.
    pub fn query(&self, embedding: &[f32], k: usize) -> Result<Vec<QueryResult>, MemoryError> {
        let f = self.finalized()?;
        if f.indices.is_empty() {
            return Err(MemoryError::EmptyMap);
        }
        if k == 0 {
            return Err(MemoryError::ZeroK);
        }
        check_unit(embedding, self.dim)?;

        let mut scored: Vec<(f64, VoxelIndex)> = self.entries().map(|(idx, v, _)| (dot(embedding, v), idx)).collect();
        if k < scored.len() {
            scored.select_nth_unstable_by(k - 1, rank_order);
            scored.truncate(k);
        }
        scored.sort_unstable_by(rank_order);
        Ok(scored
            .into_iter()
            .map(|(score, index)| QueryResult { index, position: index.center(self.voxel_size), score })
            .collect())
    }

    /// "A near B" with the default 10 x 50 candidate table.
    pub fn query_near(&self, target: &[f32], anchor: &[f32]) -> Result<NearMatch, MemoryError> {
        self.query_near_with(target, anchor, NearQueryConfig::default())
    }

    /// Takes the top target and anchor candidates, and returns the target
    /// candidate in the closest (target, anchor) pair of voxel centers.
    /// Equal distances resolve to the lower target rank, then anchor rank.
    pub fn query_near_with(
        &self,
        target: &[f32],
        anchor: &[f32],
        config: NearQueryConfig,
    ) -> Result<NearMatch, MemoryError> {
        let targets = self.query(target, config.target_candidates)?;
        let anchors = self.query(anchor, config.anchor_candidates)?;
        let mut best: Option<(f64, usize, usize)> = None;
        for (i, t) in targets.iter().enumerate() {
            for (j, a) in anchors.iter().enumerate() {
                let d = (t.position - a.position).norm();
                if best.is_none_or(|(bd, _, _)| d < bd) {
                    best = Some((d, i, j));
                }
            }
        }
        let (distance, i, j) = best.expect("both candidate lists are non-empty");
        Ok(NearMatch {
            target: targets[i].clone(),
            anchor: anchors[j].clone(),
            target_rank: i,
            anchor_rank: j,
            distance,
        })
    }
}
