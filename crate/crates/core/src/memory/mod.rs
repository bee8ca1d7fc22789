//! Voxelized semantic memory.
//!
//! Detections are back-projected through their masks and accumulated into
//! sparse voxels, each holding a confidence-weighted sum of the detection
//! embeddings. After [`VoxelMap::finalize`] every voxel stores the weighted
//! average (not renormalized) and the map becomes read-only and queryable.
//!
//! Alongside the semantic entries the map keeps a geometry layer: the set of
//! voxels touched by any valid depth pixel. Obstacle grids are derived from
//! both layers, so floors and walls count even when no detector fires on
//! them.

mod labels;
mod persist;
mod query;

pub use labels::{class_queries, CLASS_QUERIES};
pub use persist::MAP_FORMAT_VERSION;
pub use query::{NearMatch, NearQueryConfig, QueryResult};

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{backproject_pixel, CameraIntrinsics, DepthImage, GeomError, Pose, Vec3};
use crate::mask::{PixelRect, RleMask};

pub const DEFAULT_VOXEL_SIZE: f64 = 0.05;

const UNIT_NORM_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum MemoryError {
    #[error("point has a non-finite coordinate")]
    NonFinitePoint,
    #[error("voxel size must be positive and finite, got {0}")]
    InvalidVoxelSize(f64),
    #[error("map is finalized and can no longer be modified")]
    Finalized,
    #[error("map must be finalized before querying")]
    NotFinalized,
    #[error("map has no entries")]
    EmptyMap,
    #[error("embedding has dimension {got}, map expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("detection {index}: {reason}")]
    BadDetection { index: usize, reason: String },
    #[error("query embedding is not unit norm (norm {0})")]
    NotUnitNorm(f64),
    #[error("k must be at least 1")]
    ZeroK,
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed map file: {0}")]
    Format(String),
}

/// Integer voxel coordinates; ordering is lexicographic (x, then y, then z).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VoxelIndex(pub [i64; 3]);

impl VoxelIndex {
    pub fn center(&self, voxel_size: f64) -> Vec3 {
        let [x, y, z] = self.0;
        Vec3::new((x as f64 + 0.5) * voxel_size, (y as f64 + 0.5) * voxel_size, (z as f64 + 0.5) * voxel_size)
    }
}

/// Voxel containing `point`: `floor(p / size)` per axis, adjusted so the
/// point always lies in the half-open cube `[idx * size, (idx + 1) * size)`
/// as evaluated in floating point.
pub fn voxel_of(point: &Vec3, voxel_size: f64) -> Result<VoxelIndex, MemoryError> {
    if !(voxel_size > 0.0 && voxel_size.is_finite()) {
        return Err(MemoryError::InvalidVoxelSize(voxel_size));
    }
    if !point.iter().all(|c| c.is_finite()) {
        return Err(MemoryError::NonFinitePoint);
    }
    Ok(VoxelIndex([axis_index(point.x, voxel_size), axis_index(point.y, voxel_size), axis_index(point.z, voxel_size)]))
}

#[inline]
fn axis_index(c: f64, size: f64) -> i64 {
    let mut i = (c / size).floor() as i64;
    if i as f64 * size > c {
        i -= 1;
    } else if (i + 1) as f64 * size <= c {
        i += 1;
    }
    i
}

/// One open-vocabulary detection on a frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub label: String,
    pub bbox: PixelRect,
    /// Segmentation mask; when absent every bbox pixel counts.
    pub mask: Option<RleMask>,
    pub embedding: Vec<f32>,
    pub confidence: f32,
}

impl Detection {
    pub(crate) fn check(&self, index: usize, intr: &CameraIntrinsics, dim: usize) -> Result<(), MemoryError> {
        let bad = |reason: String| MemoryError::BadDetection { index, reason };
        if self.embedding.len() != dim {
            return Err(MemoryError::DimensionMismatch { expected: dim, got: self.embedding.len() });
        }
        if !(self.confidence > 0.0 && self.confidence <= 1.0) {
            return Err(bad(format!("confidence {} outside (0, 1]", self.confidence)));
        }
        if let Some(mask) = &self.mask {
            if mask.width() != intr.width || mask.height() != intr.height {
                return Err(bad("mask size differs from the image".into()));
            }
            if let Some((u, v)) = mask.set_pixels().find(|&(u, v)| !self.bbox.contains(u, v)) {
                return Err(bad(format!("mask pixel ({u}, {v}) outside bbox")));
            }
        }
        Ok(())
    }

    fn pixels(&self, intr: &CameraIntrinsics) -> Vec<(u32, u32)> {
        match &self.mask {
            Some(mask) => mask.set_pixels().collect(),
            None => self.bbox.clipped(intr.width, intr.height).pixels().collect(),
        }
    }
}

/// One posed RGB-D frame with its detections.
#[derive(Debug, Clone, PartialEq)]
pub struct PosedFrame {
    pub intrinsics: CameraIntrinsics,
    pub pose: Pose,
    pub depth: DepthImage,
    /// Opaque reference to the color image; nothing here reads it.
    pub color_ref: Option<String>,
    pub detections: Vec<Detection>,
}

/// Per-frame voxel contributions, computed independently of any map so
/// frames can be processed in parallel and merged in order.
#[derive(Debug, Clone, Default)]
pub struct FrameContribution {
    /// (voxel, detection slot, pixel count)
    semantic: Vec<(VoxelIndex, usize, u32)>,
    /// Unit embedding (f64) and confidence per detection slot.
    detections: Vec<(Vec<f64>, f64)>,
    geometry: Vec<VoxelIndex>,
}

impl FrameContribution {
    pub fn compute(frame: &PosedFrame, voxel_size: f64, dim: usize) -> Result<Self, MemoryError> {
        let intr = &frame.intrinsics;
        intr.validate()?;
        frame.depth.check_matches(intr)?;
        let w = intr.width as usize;
        let depth = frame.depth.values();

        let mut voxel_at = vec![None; depth.len()];
        let mut geometry = HashSet::new();
        for (i, &d) in depth.iter().enumerate() {
            if d > 0.0 {
                let p = backproject_pixel((i % w) as u32, (i / w) as u32, d as f64, intr, &frame.pose);
                let idx = voxel_of(&p, voxel_size)?;
                voxel_at[i] = Some(idx);
                geometry.insert(idx);
            }
        }
        let mut geometry: Vec<_> = geometry.into_iter().collect();
        geometry.sort_unstable();

        let mut semantic = Vec::new();
        let mut detections = Vec::new();
        for (index, det) in frame.detections.iter().enumerate() {
            det.check(index, intr, dim)?;
            let embedding = unit_f64(&det.embedding)
                .ok_or_else(|| MemoryError::BadDetection { index, reason: "embedding is zero or non-finite".into() })?;
            let slot = detections.len();
            detections.push((embedding, det.confidence as f64));

            let mut counts: HashMap<VoxelIndex, u32> = HashMap::new();
            for (u, v) in det.pixels(intr) {
                if let Some(idx) = voxel_at[v as usize * w + u as usize] {
                    *counts.entry(idx).or_default() += 1;
                }
            }
            let mut counts: Vec<_> = counts.into_iter().collect();
            counts.sort_unstable();
            semantic.extend(counts.into_iter().map(|(idx, n)| (idx, slot, n)));
        }
        Ok(Self { semantic, detections, geometry })
    }
}

fn unit_f64(v: &[f32]) -> Option<Vec<f64>> {
    let norm = v.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt();
    (norm > 0.0 && norm.is_finite()).then(|| v.iter().map(|&x| x as f64 / norm).collect())
}

#[derive(Debug, Clone)]
struct Accumulator {
    sum: Vec<f64>,
    mass: f64,
}

#[derive(Debug, Clone)]
enum MapState {
    Building { entries: HashMap<VoxelIndex, Accumulator>, geometry: HashSet<VoxelIndex> },
    Finalized(Finalized),
}

/// Finalized storage: entries sorted by voxel index, vectors packed row-wise.
#[derive(Debug, Clone, PartialEq)]
struct Finalized {
    indices: Vec<VoxelIndex>,
    vectors: Vec<f32>,
    masses: Vec<f32>,
    geometry: Vec<VoxelIndex>,
}

#[derive(Debug, Clone)]
pub struct VoxelMap {
    voxel_size: f64,
    dim: usize,
    state: MapState,
}

impl VoxelMap {
    pub fn new(voxel_size: f64, dim: usize) -> Result<Self, MemoryError> {
        if !(voxel_size > 0.0 && voxel_size.is_finite()) {
            return Err(MemoryError::InvalidVoxelSize(voxel_size));
        }
        Ok(Self { voxel_size, dim, state: MapState::Building { entries: HashMap::new(), geometry: HashSet::new() } })
    }

    pub fn voxel_size(&self) -> f64 {
        self.voxel_size
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_finalized(&self) -> bool {
        matches!(self.state, MapState::Finalized(_))
    }

    /// Number of semantic entries.
    pub fn len(&self) -> usize {
        match &self.state {
            MapState::Building { entries, .. } => entries.len(),
            MapState::Finalized(f) => f.indices.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn ingest_frame(&mut self, frame: &PosedFrame) -> Result<(), MemoryError> {
        if self.is_finalized() {
            return Err(MemoryError::Finalized);
        }
        let contribution = FrameContribution::compute(frame, self.voxel_size, self.dim)?;
        self.merge(contribution)
    }

    pub fn merge(&mut self, contribution: FrameContribution) -> Result<(), MemoryError> {
        let dim = self.dim;
        let MapState::Building { entries, geometry } = &mut self.state else {
            return Err(MemoryError::Finalized);
        };
        for (idx, slot, count) in contribution.semantic {
            let (embedding, confidence) = &contribution.detections[slot];
            let weight = count as f64 * confidence;
            let acc = entries.entry(idx).or_insert_with(|| Accumulator { sum: vec![0.0; dim], mass: 0.0 });
            for (s, e) in acc.sum.iter_mut().zip(embedding) {
                *s += weight * e;
            }
            acc.mass += weight;
        }
        geometry.extend(contribution.geometry);
        Ok(())
    }

    /// Weighted embedding sum and confidence mass of a voxel, before
    /// finalization.
    pub fn accumulator(&self, idx: &VoxelIndex) -> Option<(&[f64], f64)> {
        match &self.state {
            MapState::Building { entries, .. } => entries.get(idx).map(|a| (a.sum.as_slice(), a.mass)),
            MapState::Finalized(_) => None,
        }
    }

    /// Divides every weighted sum by its mass and freezes the map.
    pub fn finalize(&mut self) -> Result<(), MemoryError> {
        let MapState::Building { entries, geometry } = &mut self.state else {
            return Err(MemoryError::Finalized);
        };
        if entries.is_empty() {
            return Err(MemoryError::EmptyMap);
        }
        let mut sorted: Vec<_> = entries.drain().collect();
        sorted.sort_unstable_by_key(|(idx, _)| *idx);
        let mut geometry: Vec<_> = geometry.drain().collect();
        geometry.sort_unstable();

        let mut indices = Vec::with_capacity(sorted.len());
        let mut vectors = Vec::with_capacity(sorted.len() * self.dim);
        let mut masses = Vec::with_capacity(sorted.len());
        for (idx, acc) in sorted {
            indices.push(idx);
            vectors.extend(acc.sum.iter().map(|s| (s / acc.mass) as f32));
            masses.push(acc.mass as f32);
        }
        self.state = MapState::Finalized(Finalized { indices, vectors, masses, geometry });
        Ok(())
    }

    /// Builds a finalized map directly from averaged vectors; used when
    /// embeddings were aggregated elsewhere.
    pub fn from_entries(
        voxel_size: f64,
        dim: usize,
        mut entries: Vec<(VoxelIndex, Vec<f32>, f32)>,
        mut geometry: Vec<VoxelIndex>,
    ) -> Result<Self, MemoryError> {
        let mut map = Self::new(voxel_size, dim)?;
        entries.sort_by_key(|(idx, _, _)| *idx);
        if entries.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(MemoryError::Format("duplicate voxel index".into()));
        }
        let mut f = Finalized {
            indices: Vec::with_capacity(entries.len()),
            vectors: Vec::with_capacity(entries.len() * dim),
            masses: Vec::with_capacity(entries.len()),
            geometry: Vec::new(),
        };
        for (idx, v, mass) in entries {
            if v.len() != dim {
                return Err(MemoryError::DimensionMismatch { expected: dim, got: v.len() });
            }
            if !(mass > 0.0) || !v.iter().all(|x| x.is_finite()) {
                return Err(MemoryError::Format(format!("invalid entry at {:?}", idx.0)));
            }
            f.indices.push(idx);
            f.vectors.extend(v);
            f.masses.push(mass);
        }
        geometry.sort_unstable();
        geometry.dedup();
        f.geometry = geometry;
        map.state = MapState::Finalized(f);
        Ok(map)
    }

    fn finalized(&self) -> Result<&Finalized, MemoryError> {
        match &self.state {
            MapState::Finalized(f) => Ok(f),
            MapState::Building { .. } => Err(MemoryError::NotFinalized),
        }
    }

    /// Finalized entries in voxel-index order: (index, averaged vector, mass).
    pub fn entries(&self) -> impl Iterator<Item = (VoxelIndex, &[f32], f32)> + '_ {
        let (indices, vectors, masses): (&[VoxelIndex], &[f32], &[f32]) = match &self.state {
            MapState::Finalized(f) => (&f.indices, &f.vectors, &f.masses),
            MapState::Building { .. } => (&[], &[], &[]),
        };
        let dim = self.dim.max(1);
        indices.iter().zip(vectors.chunks(dim)).zip(masses).map(|((i, v), m)| (*i, v, *m))
    }

    pub fn vector(&self, idx: &VoxelIndex) -> Option<&[f32]> {
        let f = self.finalized().ok()?;
        let pos = f.indices.binary_search(idx).ok()?;
        Some(&f.vectors[pos * self.dim..(pos + 1) * self.dim])
    }

    /// Every voxel index the map knows about: semantic entries plus the
    /// geometry layer, sorted and deduplicated.
    pub fn occupied_voxels(&self) -> Vec<VoxelIndex> {
        let mut all: Vec<VoxelIndex> = match &self.state {
            MapState::Finalized(f) => f.indices.iter().chain(&f.geometry).copied().collect(),
            MapState::Building { entries, geometry } => entries.keys().chain(geometry.iter()).copied().collect(),
        };
        all.sort_unstable();
        all.dedup();
        all
    }

    pub fn geometry_voxels(&self) -> &[VoxelIndex] {
        match &self.state {
            MapState::Finalized(f) => &f.geometry,
            MapState::Building { .. } => &[],
        }
    }
}

impl PartialEq for VoxelMap {
    fn eq(&self, other: &Self) -> bool {
        if self.voxel_size.to_bits() != other.voxel_size.to_bits() || self.dim != other.dim {
            return false;
        }
        match (&self.state, &other.state) {
            (MapState::Finalized(a), MapState::Finalized(b)) => {
                a.indices == b.indices
                    && a.geometry == b.geometry
                    && bits_eq(&a.vectors, &b.vectors)
                    && bits_eq(&a.masses, &b.masses)
            }
            _ => false,
        }
    }
}

fn bits_eq(a: &[f32], b: &[f32]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
}

pub(crate) fn check_unit(v: &[f32], dim: usize) -> Result<(), MemoryError> {
    if v.len() != dim {
        return Err(MemoryError::DimensionMismatch { expected: dim, got: v.len() });
    }
    let norm = v.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt();
    if !((norm - 1.0).abs() <= UNIT_NORM_TOL) {
        return Err(MemoryError::NotUnitNorm(norm));
    }
    Ok(())
}
