//! Synthetic scenes: axis-aligned boxes and open basins in a walled room,
//! ray-cast into depth images with exact per-pixel entity ids.
//!
//! A [`SyntheticWorld`] produces scan archives with detections carrying
//! vocabulary embeddings, a ground-truth record for oracles, and ideal
//! camera, segmentation, detection and grasp providers for task runs.

use std::f64::consts::TAU;
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::providers::{
    CameraProvider, Capture, DetectionProvider, GraspProvider, ProviderError, SegmentationProvider,
};
use super::scan::{save_scan, ScanArchive, ScanError};
use super::task::TaskSpec;
use super::vocab::{fnv1a, SyntheticVocabulary, DEFAULT_VOCAB_DIM, DEFAULT_VOCAB_SEED};
use crate::geom::{backproject_pixel, CameraIntrinsics, DepthImage, Pose, Vec2, Vec3};
use crate::grasping::GraspProposal;
use crate::mask::RleMask;
use crate::memory::{voxel_of, Detection, PosedFrame, VoxelIndex, CLASS_QUERIES, DEFAULT_VOXEL_SIZE};

pub const SCENE_FILE: &str = "scene.json";
pub const TRUTH_FILE: &str = "truth.json";

/// Pixel ids in a [`Rendering`].
pub const NO_HIT: u32 = 0;
pub const FLOOR_ID: u32 = 1;
pub const WALL_ID: u32 = 2;
const FIRST_ENTITY_ID: u32 = 3;

const WALL_THICKNESS: f64 = 0.1;
const MAX_RANGE: f64 = 12.0;
/// Minimum query/label similarity for the synthetic segmenter.
const SEGMENT_MATCH: f64 = 0.5;
const GRASPS_PER_ENTITY: usize = 9;
const POSE_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("invalid scene: {0}")]
    Spec(String),
    #[error(transparent)]
    Scan(#[from] ScanError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed scene file: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityKind {
    /// Solid box.
    #[default]
    Block,
    /// Open-topped container: a bottom slab and four thin walls.
    Basin,
}

fn default_shell() -> f64 {
    0.03
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntitySpec {
    pub label: String,
    #[serde(default)]
    pub kind: EntityKind,
    /// Lower corner (m).
    pub min: [f64; 3],
    pub size: [f64; 3],
    /// Basin side-wall thickness (m).
    #[serde(default = "default_shell")]
    pub wall: f64,
    /// Basin bottom thickness (m).
    #[serde(default = "default_shell")]
    pub base: f64,
}

impl EntitySpec {
    pub fn block(label: &str, min: [f64; 3], size: [f64; 3]) -> Self {
        Self { label: label.into(), kind: EntityKind::Block, min, size, wall: default_shell(), base: default_shell() }
    }

    pub fn basin(label: &str, min: [f64; 3], size: [f64; 3], base: f64) -> Self {
        Self { label: label.into(), kind: EntityKind::Basin, min, size, wall: default_shell(), base }
    }

    pub fn max(&self) -> [f64; 3] {
        [0, 1, 2].map(|a| self.min[a] + self.size[a])
    }

    pub fn center(&self) -> Vec3 {
        Vec3::from([0, 1, 2].map(|a| self.min[a] + self.size[a] / 2.0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanCamera {
    pub width: u32,
    pub height: u32,
    pub focal: f64,
    pub frames: usize,
    pub eye_height: f64,
}

impl Default for ScanCamera {
    fn default() -> Self {
        Self { width: 256, height: 192, focal: 200.0, frames: 24, eye_height: 1.4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VocabSpec {
    pub dim: usize,
    pub seed: u64,
}

impl Default for VocabSpec {
    fn default() -> Self {
        Self { dim: DEFAULT_VOCAB_DIM, seed: DEFAULT_VOCAB_SEED }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorSpec {
    /// Per-component Gaussian noise added to label embeddings before
    /// renormalizing.
    pub embedding_noise: f64,
    /// Entities covering fewer pixels are not reported.
    pub min_pixels: usize,
    /// Confidences are drawn uniformly from this closed range.
    pub confidence: [f32; 2],
}

impl Default for DetectorSpec {
    fn default() -> Self {
        Self { embedding_noise: 0.05, min_pixels: 12, confidence: [0.6, 1.0] }
    }
}

fn default_wall_height() -> f64 {
    2.4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    /// Room extent (m); the floor spans `[0, room[0]] x [0, room[1]]`.
    pub room: [f64; 2],
    #[serde(default = "default_wall_height")]
    pub wall_height: f64,
    pub entities: Vec<EntitySpec>,
    #[serde(default)]
    pub camera: ScanCamera,
    #[serde(default)]
    pub vocabulary: VocabSpec,
    #[serde(default)]
    pub detector: DetectorSpec,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<(), SceneError> {
        let bad = |m: String| Err(SceneError::Spec(m));
        let [rx, ry] = self.room;
        if !(rx > 0.0 && ry > 0.0 && rx.is_finite() && ry.is_finite()) {
            return bad(format!("room extent {rx} x {ry} must be positive"));
        }
        if !(self.wall_height > 0.0 && self.wall_height.is_finite()) {
            return bad("wall height must be positive".into());
        }
        for e in &self.entities {
            if e.label.trim().is_empty() {
                return bad("entity with an empty label".into());
            }
            if !e.min.iter().chain(&e.size).all(|v| v.is_finite()) || e.size.iter().any(|&s| s <= 0.0) {
                return bad(format!("`{}` needs a finite corner and positive size", e.label));
            }
            let max = e.max();
            if e.min[0] < 0.0
                || e.min[1] < 0.0
                || e.min[2] < 0.0
                || max[0] > rx
                || max[1] > ry
                || max[2] > self.wall_height
            {
                return bad(format!("`{}` extends outside the room", e.label));
            }
            if e.kind == EntityKind::Basin
                && !(e.wall > 0.0 && 2.0 * e.wall < e.size[0].min(e.size[1]) && e.base > 0.0 && e.base < e.size[2])
            {
                return bad(format!("basin `{}` has inconsistent wall or base thickness", e.label));
            }
        }
        let c = &self.camera;
        if c.width == 0 || c.height == 0 || !(c.focal > 0.0) || !(c.eye_height > 0.0 && c.eye_height < self.wall_height)
        {
            return bad("camera needs a positive image size and focal length, and an eye height below the walls".into());
        }
        if self.vocabulary.dim == 0 {
            return bad("vocabulary dimension must be positive".into());
        }
        let d = &self.detector;
        let [lo, hi] = d.confidence;
        if !(d.embedding_noise >= 0.0 && lo > 0.0 && lo <= hi && hi <= 1.0) {
            return bad("detector noise must be non-negative and confidences within (0, 1]".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityTruth {
    pub label: String,
    pub kind: EntityKind,
    pub min: [f64; 3],
    pub max: [f64; 3],
    pub center: [f64; 3],
    /// Voxel containing the center.
    pub voxel: VoxelIndex,
}

impl EntityTruth {
    /// Whether `p` lies within `margin` of the entity's box.
    pub fn near(&self, p: &Vec3, margin: f64) -> bool {
        (0..3).all(|a| p[a] >= self.min[a] - margin && p[a] <= self.max[a] + margin)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub room: [f64; 2],
    pub voxel_size: f64,
    pub entities: Vec<EntityTruth>,
}

impl GroundTruth {
    pub fn entity(&self, label: &str) -> Option<&EntityTruth> {
        self.entities.iter().find(|e| e.label == label)
    }

    /// Floor point inside the room and outside every entity footprint.
    pub fn is_free_floor(&self, p: Vec2) -> bool {
        let inside = p.x >= 0.0 && p.y >= 0.0 && p.x <= self.room[0] && p.y <= self.room[1];
        inside
            && !self.entities.iter().any(|e| p.x >= e.min[0] && p.x <= e.max[0] && p.y >= e.min[1] && p.y <= e.max[1])
    }
}

#[derive(Debug, Clone, Copy)]
struct Prim {
    lo: Vec3,
    hi: Vec3,
    id: u32,
}

/// Ray/box entry distance, if the ray starts outside and hits the box.
fn ray_box(o: &Vec3, d: &Vec3, lo: &Vec3, hi: &Vec3) -> Option<f64> {
    let (mut t0, mut t1) = (f64::NEG_INFINITY, f64::INFINITY);
    for a in 0..3 {
        if d[a].abs() < 1e-15 {
            if o[a] < lo[a] || o[a] > hi[a] {
                return None;
            }
            continue;
        }
        let inv = 1.0 / d[a];
        let (mut ta, mut tb) = ((lo[a] - o[a]) * inv, (hi[a] - o[a]) * inv);
        if ta > tb {
            std::mem::swap(&mut ta, &mut tb);
        }
        t0 = t0.max(ta);
        t1 = t1.min(tb);
        if t0 > t1 {
            return None;
        }
    }
    (t0 > 1e-9).then_some(t0)
}

/// Rendered depth plus the id of the surface seen at each pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct Rendering {
    pub depth: DepthImage,
    pub ids: Vec<u32>,
}

impl Rendering {
    /// Pixel counts per entity slot (index = entity position in the scene).
    fn entity_masks(&self, entities: usize) -> Vec<Vec<bool>> {
        let mut masks = vec![Vec::new(); entities];
        for (i, &id) in self.ids.iter().enumerate() {
            if id >= FIRST_ENTITY_ID {
                let m = &mut masks[(id - FIRST_ENTITY_ID) as usize];
                if m.is_empty() {
                    m.resize(self.ids.len(), false);
                }
                m[i] = true;
            }
        }
        masks
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticWorld {
    spec: SceneSpec,
    seed: u64,
    intrinsics: CameraIntrinsics,
    vocab: SyntheticVocabulary,
    label_embeddings: Vec<Vec<f32>>,
    prims: Vec<Prim>,
}

impl SyntheticWorld {
    pub fn new(spec: SceneSpec, seed: u64) -> Result<Self, SceneError> {
        spec.validate()?;
        let c = &spec.camera;
        let intrinsics =
            CameraIntrinsics::centered(c.focal, c.width, c.height).map_err(|e| SceneError::Spec(e.to_string()))?;
        let labels = CLASS_QUERIES.iter().copied().chain(spec.entities.iter().map(|e| e.label.as_str()));
        let vocab = SyntheticVocabulary::new(spec.vocabulary.dim, spec.vocabulary.seed, labels);
        let label_embeddings = spec
            .entities
            .iter()
            .map(|e| vocab.embed(&e.label).map_err(|e| SceneError::Spec(e.to_string())))
            .collect::<Result<_, _>>()?;
        let prims = build_prims(&spec);
        Ok(Self { spec, seed, intrinsics, vocab, label_embeddings, prims })
    }

    pub fn spec(&self) -> &SceneSpec {
        &self.spec
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn intrinsics(&self) -> &CameraIntrinsics {
        &self.intrinsics
    }

    pub fn vocabulary(&self) -> &SyntheticVocabulary {
        &self.vocab
    }

    /// Entity slot for a pixel id, if the id is an entity.
    pub fn entity_of_id(&self, id: u32) -> Option<usize> {
        id.checked_sub(FIRST_ENTITY_ID).map(|k| k as usize).filter(|&k| k < self.spec.entities.len())
    }

    pub fn render(&self, pose: &Pose) -> Rendering {
        let intr = &self.intrinsics;
        let (w, h) = (intr.width, intr.height);
        let [rx, ry] = self.spec.room;
        let o = *pose.translation();
        let r = pose.rotation();
        let mut values = vec![0.0f32; intr.pixel_count()];
        let mut ids = vec![NO_HIT; intr.pixel_count()];
        for v in 0..h {
            for u in 0..w {
                let dc = Vec3::new((u as f64 - intr.cx) / intr.fx, (v as f64 - intr.cy) / intr.fy, 1.0);
                let d = r * dc;
                let mut best = (MAX_RANGE, NO_HIT);
                if d.z < 0.0 {
                    let t = -o.z / d.z;
                    let p = o + d * t;
                    if t > 0.0 && t < best.0 && (0.0..=rx).contains(&p.x) && (0.0..=ry).contains(&p.y) {
                        best = (t, FLOOR_ID);
                    }
                }
                for prim in &self.prims {
                    if let Some(t) = ray_box(&o, &d, &prim.lo, &prim.hi) {
                        if t < best.0 {
                            best = (t, prim.id);
                        }
                    }
                }
                if best.1 != NO_HIT {
                    let i = (v * w + u) as usize;
                    // The camera-frame ray has unit z, so t is the depth.
                    values[i] = best.0 as f32;
                    ids[i] = best.1;
                }
            }
        }
        let depth = DepthImage::new(w, h, values).expect("rendered depth matches the intrinsics");
        Rendering { depth, ids }
    }

    /// Scan trajectory: two turns from near the room center, the first
    /// looking across the room and the second looking down at the floor.
    pub fn scan_poses(&self) -> Vec<Pose> {
        let cam = &self.spec.camera;
        let [rx, ry] = self.spec.room;
        let center = Vec3::new(rx / 2.0, ry / 2.0, 0.0);
        let half = cam.frames.div_ceil(2).max(1);
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ POSE_SALT);
        (0..cam.frames)
            .map(|i| {
                let near = i >= half;
                let k = if near { i - half } else { i };
                let theta = TAU * (k as f64 + if near { 0.5 } else { 0.0 }) / half as f64;
                let dir = Vec3::new(theta.cos(), theta.sin(), 0.0);
                let mut jitter = |s: f64| rng.random_range(-s..=s);
                let eye = center
                    + dir * (0.1 * rx.min(ry))
                    + Vec3::new(jitter(0.05), jitter(0.05), cam.eye_height + jitter(0.05));
                let (reach, z) = if near { (0.2, 0.0) } else { (0.5, 0.4) };
                let target = Vec3::new(center.x + dir.x * reach * rx, center.y + dir.y * reach * ry, z)
                    + Vec3::new(jitter(0.1), jitter(0.1), 0.0);
                Pose::look_at(eye, target, Vec3::z()).expect("scan targets are never straight below the eye")
            })
            .collect()
    }

    fn noisy_detections(&self, rendering: &Rendering, rng: &mut ChaCha8Rng) -> Vec<Detection> {
        let (w, h) = (self.intrinsics.width, self.intrinsics.height);
        let det = &self.spec.detector;
        let mut out = Vec::new();
        for (k, dense) in rendering.entity_masks(self.spec.entities.len()).into_iter().enumerate() {
            let count = dense.iter().filter(|&&b| b).count();
            if count == 0 || count < det.min_pixels {
                continue;
            }
            let mask = RleMask::from_dense(w, h, &dense);
            let bbox = mask.bounding_rect().expect("mask is non-empty");
            let mut e: Vec<f64> = self.label_embeddings[k]
                .iter()
                .map(|&x| x as f64 + det.embedding_noise * rng.sample::<f64, _>(StandardNormal))
                .collect();
            let n = e.iter().map(|x| x * x).sum::<f64>().sqrt();
            e.iter_mut().for_each(|x| *x /= n);
            let [lo, hi] = det.confidence;
            let confidence = if lo < hi { rng.random_range(lo..=hi) } else { lo };
            out.push(Detection {
                label: self.spec.entities[k].label.clone(),
                bbox,
                mask: Some(mask),
                embedding: e.into_iter().map(|x| x as f32).collect(),
                confidence,
            });
        }
        out
    }

    fn frame_rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }

    fn pose_stream(pose: &Pose) -> u64 {
        let bytes: Vec<u8> = pose.to_row_major().iter().flat_map(|v| v.to_le_bytes()).collect();
        fnv1a(&bytes)
    }

    /// Frame `index` of the scan, seen from `pose`.
    pub fn frame(&self, index: usize, pose: &Pose) -> PosedFrame {
        let rendering = self.render(pose);
        let detections = self.noisy_detections(&rendering, &mut self.frame_rng(index as u64));
        PosedFrame { intrinsics: self.intrinsics, pose: *pose, depth: rendering.depth, color_ref: None, detections }
    }

    pub fn generate_scan(&self) -> Result<ScanArchive, SceneError> {
        let poses = self.scan_poses();
        let frames: Vec<PosedFrame> = poses.par_iter().enumerate().map(|(i, p)| self.frame(i, p)).collect();
        Ok(ScanArchive::new(self.intrinsics, self.vocab_dim(), frames)?)
    }

    fn vocab_dim(&self) -> usize {
        self.spec.vocabulary.dim
    }

    pub fn ground_truth(&self) -> GroundTruth {
        let entities = self
            .spec
            .entities
            .iter()
            .map(|e| {
                let c = e.center();
                EntityTruth {
                    label: e.label.clone(),
                    kind: e.kind,
                    min: e.min,
                    max: e.max(),
                    center: c.into(),
                    voxel: voxel_of(&c, DEFAULT_VOXEL_SIZE).expect("entity centers are finite"),
                }
            })
            .collect();
        GroundTruth { room: self.spec.room, voxel_size: DEFAULT_VOXEL_SIZE, entities }
    }

    fn best_entity(&self, query: &str, visible: impl Iterator<Item = usize>) -> Result<Option<usize>, ProviderError> {
        let q = self.vocab.embed(query)?;
        let mut best: Option<(f64, usize)> = None;
        for k in visible {
            let s: f64 = q.iter().zip(&self.label_embeddings[k]).map(|(&a, &b)| a as f64 * b as f64).sum();
            if s >= SEGMENT_MATCH && best.is_none_or(|(b, _)| s > b) {
                best = Some((s, k));
            }
        }
        Ok(best.map(|(_, k)| k))
    }
}

fn build_prims(spec: &SceneSpec) -> Vec<Prim> {
    let [rx, ry] = spec.room;
    let (t, h) = (WALL_THICKNESS, spec.wall_height);
    let mut prims = vec![
        Prim { lo: Vec3::new(-t, -t, 0.0), hi: Vec3::new(0.0, ry + t, h), id: WALL_ID },
        Prim { lo: Vec3::new(rx, -t, 0.0), hi: Vec3::new(rx + t, ry + t, h), id: WALL_ID },
        Prim { lo: Vec3::new(0.0, -t, 0.0), hi: Vec3::new(rx, 0.0, h), id: WALL_ID },
        Prim { lo: Vec3::new(0.0, ry, 0.0), hi: Vec3::new(rx, ry + t, h), id: WALL_ID },
    ];
    for (k, e) in spec.entities.iter().enumerate() {
        let id = FIRST_ENTITY_ID + k as u32;
        let lo = Vec3::from(e.min);
        let hi = Vec3::from(e.max());
        match e.kind {
            EntityKind::Block => prims.push(Prim { lo, hi, id }),
            EntityKind::Basin => {
                let wt = e.wall;
                let boxes = [
                    (lo, Vec3::new(hi.x, hi.y, lo.z + e.base)),
                    (lo, Vec3::new(lo.x + wt, hi.y, hi.z)),
                    (Vec3::new(hi.x - wt, lo.y, lo.z), hi),
                    (lo, Vec3::new(hi.x, lo.y + wt, hi.z)),
                    (Vec3::new(lo.x, hi.y - wt, lo.z), hi),
                ];
                prims.extend(boxes.into_iter().map(|(lo, hi)| Prim { lo, hi, id }));
            }
        }
    }
    prims
}

/// Renders the scan for `(spec, seed)` and its ground truth.
pub fn gen_synthetic_scene(spec: &SceneSpec, seed: u64) -> Result<(ScanArchive, GroundTruth), SceneError> {
    let world = SyntheticWorld::new(spec.clone(), seed)?;
    Ok((world.generate_scan()?, world.ground_truth()))
}

/// On-disk description of a generated scene, enough to rebuild its world.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneFile {
    pub seed: u64,
    pub spec: SceneSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<TaskSpec>,
}

/// Writes the scan archive plus `scene.json` and `truth.json` into `dir`.
pub fn write_scene(dir: impl AsRef<Path>, scene: &SceneFile) -> Result<(ScanArchive, GroundTruth), SceneError> {
    let dir = dir.as_ref();
    let (scan, truth) = gen_synthetic_scene(&scene.spec, scene.seed)?;
    save_scan(&scan, dir)?;
    std::fs::write(dir.join(SCENE_FILE), serde_json::to_string_pretty(scene)?)?;
    std::fs::write(dir.join(TRUTH_FILE), serde_json::to_string_pretty(&truth)?)?;
    Ok((scan, truth))
}

pub fn read_scene_file(dir: impl AsRef<Path>) -> Result<SceneFile, SceneError> {
    let text = std::fs::read_to_string(dir.as_ref().join(SCENE_FILE))?;
    Ok(serde_json::from_str(&text)?)
}

impl CameraProvider for SyntheticWorld {
    fn capture(&self, pose: &Pose) -> Result<Capture, ProviderError> {
        Ok(Capture { intrinsics: self.intrinsics, pose: *pose, depth: self.render(pose).depth })
    }
}

impl DetectionProvider for SyntheticWorld {
    fn detect(&self, capture: &Capture) -> Result<Vec<Detection>, ProviderError> {
        let rendering = self.render(&capture.pose);
        Ok(self.noisy_detections(&rendering, &mut self.frame_rng(Self::pose_stream(&capture.pose))))
    }
}

impl SegmentationProvider for SyntheticWorld {
    /// Exact mask of the visible entity whose label best matches `query`.
    fn segment(&self, capture: &Capture, query: &str) -> Result<Option<RleMask>, ProviderError> {
        let rendering = self.render(&capture.pose);
        let masks = rendering.entity_masks(self.spec.entities.len());
        let visible = (0..masks.len()).filter(|&k| !masks[k].is_empty());
        let Some(k) = self.best_entity(query, visible)? else {
            return Ok(None);
        };
        Ok(Some(RleMask::from_dense(self.intrinsics.width, self.intrinsics.height, &masks[k])))
    }
}

impl GraspProvider for SyntheticWorld {
    /// Samples surface points on every visible entity, cycling through
    /// horizontal, top-down and 45-degree approaches.
    fn propose(&self, capture: &Capture) -> Result<Vec<GraspProposal>, ProviderError> {
        let rendering = self.render(&capture.pose);
        let mut rng = self.frame_rng(Self::pose_stream(&capture.pose) ^ POSE_SALT);
        let w = self.intrinsics.width as usize;
        let eye = capture.pose.translation();
        let mut out = Vec::new();
        for dense in rendering.entity_masks(self.spec.entities.len()) {
            let pixels: Vec<usize> = dense.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect();
            if pixels.is_empty() {
                continue;
            }
            let picks: Vec<usize> =
                pixels.choose_multiple(&mut rng, GRASPS_PER_ENTITY.min(pixels.len())).copied().collect();
            for (j, i) in picks.into_iter().enumerate() {
                let (u, v) = ((i % w) as u32, (i / w) as u32);
                let d = rendering.depth.values()[i] as f64;
                let point = backproject_pixel(u, v, d, &self.intrinsics, &capture.pose);
                let horizontal = Vec3::new(point.x - eye.x, point.y - eye.y, 0.0)
                    .try_normalize(1e-9)
                    .unwrap_or_else(|| Vec3::new(1.0, 0.0, 0.0));
                let approach = match j % 3 {
                    0 => horizontal,
                    1 => Vec3::new(0.0, 0.0, -1.0),
                    _ => (horizontal - Vec3::z()).normalize(),
                };
                out.push(GraspProposal {
                    point,
                    approach,
                    width: 0.08,
                    height: 0.02,
                    depth: 0.04,
                    score: rng.random_range(0.3..1.0),
                });
            }
        }
        Ok(out)
    }
}

/// A generated apartment room with a task whose objects exist in it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Apartment {
    pub spec: SceneSpec,
    pub task: TaskSpec,
}

const FURNITURE: [(&str, [f64; 3]); 4] = [
    ("table", [1.0, 0.6, 0.75]),
    ("kitchen counter", [1.4, 0.6, 0.9]),
    ("nightstand", [0.45, 0.45, 0.55]),
    ("dresser", [0.9, 0.5, 0.8]),
];

/// (label, size, bottom thickness)
const CONTAINERS: [(&str, [f64; 3], f64); 4] = [
    ("sink", [0.6, 0.5, 0.9], 0.7),
    ("trash can", [0.4, 0.4, 0.6], 0.03),
    ("basket", [0.5, 0.4, 0.35], 0.03),
    ("box", [0.5, 0.5, 0.4], 0.03),
];

const SMALL_OBJECTS: [&str; 12] =
    ["mug", "bottle", "apple", "banana", "book", "toy", "can", "bowl", "cup", "shoe", "plate", "tissue box"];

/// Random room with two pieces of furniture and two containers along the
/// walls and one to three small objects on the furniture tops.
pub fn random_apartment(seed: u64) -> Apartment {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let room = [rng.random_range(4.0..6.0), rng.random_range(4.0..6.0)];

    let mut furniture = FURNITURE.to_vec();
    furniture.shuffle(&mut rng);
    let mut containers = CONTAINERS.to_vec();
    containers.shuffle(&mut rng);
    let mut sides = [0usize, 1, 2, 3];
    sides.shuffle(&mut rng);

    let mut entities = Vec::new();
    let pieces = furniture[..2]
        .iter()
        .map(|&(l, s)| (l, s, None))
        .chain(containers[..2].iter().map(|&(l, s, b)| (l, s, Some(b))));
    for ((label, [len, dep, h], base), side) in pieces.zip(sides) {
        let along_room = if side < 2 { room[0] } else { room[1] };
        let a = rng.random_range(0.8..along_room - 0.8 - len);
        let (min, size) = match side {
            0 => ([a, 0.05, 0.0], [len, dep, h]),
            1 => ([a, room[1] - 0.05 - dep, 0.0], [len, dep, h]),
            2 => ([0.05, a, 0.0], [dep, len, h]),
            _ => ([room[0] - 0.05 - dep, a, 0.0], [dep, len, h]),
        };
        entities.push(match base {
            None => EntitySpec::block(label, min, size),
            Some(b) => EntitySpec::basin(label, min, size, b),
        });
    }

    let mut labels = SMALL_OBJECTS.to_vec();
    labels.shuffle(&mut rng);
    let count = rng.random_range(1..=3);
    let mut objects: Vec<(EntitySpec, usize)> = Vec::new();
    for label in labels.into_iter().take(count) {
        for _ in 0..50 {
            let support = rng.random_range(0..2);
            let top = &entities[support];
            let (w, d, h) = (rng.random_range(0.06..0.12), rng.random_range(0.06..0.12), rng.random_range(0.06..0.2));
            let top_max = top.max();
            let x = rng.random_range(top.min[0] + 0.08..top_max[0] - 0.08 - w);
            let y = rng.random_range(top.min[1] + 0.08..top_max[1] - 0.08 - d);
            let clear = objects.iter().all(|(o, _)| {
                let om = o.max();
                x > om[0] + 0.05 || x + w < o.min[0] - 0.05 || y > om[1] + 0.05 || y + d < o.min[1] - 0.05
            });
            if clear {
                objects.push((EntitySpec::block(label, [x, y, top_max[2]], [w, d, h]), support));
                break;
            }
        }
    }

    let (picked, support) = objects[rng.random_range(0..objects.len())].clone();
    let from = rng.random_bool(0.5).then(|| entities[support].label.clone());
    let drop_choices: Vec<usize> = (0..entities.len()).filter(|&i| i != support).collect();
    let drop = entities[drop_choices[rng.random_range(0..drop_choices.len())]].label.clone();
    entities.extend(objects.into_iter().map(|(o, _)| o));

    let spec = SceneSpec {
        room,
        wall_height: default_wall_height(),
        entities,
        camera: ScanCamera::default(),
        vocabulary: VocabSpec::default(),
        detector: DetectorSpec::default(),
    };
    let task = TaskSpec::new(&picked.label, from.as_deref(), &drop).expect("generated labels are non-empty");
    Apartment { spec, task }
}
