//! Model-facing interfaces.
//!
//! The pipeline never runs model inference itself. Text encoders,
//! detectors, grasp generators and segmenters sit behind these traits; the
//! crate ships deterministic synthetic implementations and file-backed
//! "precomputed" ones for outputs produced offline.

use std::collections::BTreeMap;
use std::path::Path;

use thiserror::Error;

use crate::geom::{CameraIntrinsics, DepthImage, Pose};
use crate::grasping::{parse_proposals, GraspProposal};
use crate::mask::RleMask;
use crate::memory::Detection;

#[derive(Debug, Error, PartialEq)]
pub enum ProviderError {
    #[error("empty text")]
    EmptyText,
    #[error("no precomputed output for `{0}`")]
    Missing(String),
    #[error("provider failed: {0}")]
    Failed(String),
}

/// One RGB-D capture from the robot's head camera.
#[derive(Debug, Clone, PartialEq)]
pub struct Capture {
    pub intrinsics: CameraIntrinsics,
    pub pose: Pose,
    pub depth: DepthImage,
}

pub trait EmbeddingProvider: Sync {
    fn dim(&self) -> usize;

    /// Unit-norm embedding; identical text gives identical output.
    fn embed_text(&self, text: &str) -> Result<Vec<f32>, ProviderError>;
}

pub trait DetectionProvider: Sync {
    fn detect(&self, capture: &Capture) -> Result<Vec<Detection>, ProviderError>;
}

pub trait CameraProvider: Sync {
    fn capture(&self, pose: &Pose) -> Result<Capture, ProviderError>;
}

pub trait GraspProvider: Sync {
    /// Proposals in world coordinates for the scene seen by `capture`.
    fn propose(&self, capture: &Capture) -> Result<Vec<GraspProposal>, ProviderError>;
}

pub trait SegmentationProvider: Sync {
    /// Mask of the object described by `query`, or `None` if not found.
    fn segment(&self, capture: &Capture, query: &str) -> Result<Option<RleMask>, ProviderError>;
}

/// The set of providers a task run needs.
#[derive(Clone, Copy)]
pub struct Providers<'a> {
    pub embedder: &'a dyn EmbeddingProvider,
    pub camera: &'a dyn CameraProvider,
    pub grasper: &'a dyn GraspProvider,
    pub segmenter: &'a dyn SegmentationProvider,
}

/// Text embeddings computed offline, keyed by query text.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecomputedEmbeddings {
    dim: usize,
    table: BTreeMap<String, Vec<f32>>,
}

impl PrecomputedEmbeddings {
    pub fn new(table: BTreeMap<String, Vec<f32>>) -> Result<Self, ProviderError> {
        let dim = table.values().next().map_or(0, Vec::len);
        for (text, v) in &table {
            let norm = v.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt();
            if v.len() != dim || (norm - 1.0).abs() > 1e-6 {
                return Err(ProviderError::Failed(format!("embedding for `{text}` is not a unit {dim}-vector")));
            }
        }
        let table = table.into_iter().map(|(k, v)| (normalize_text(&k), v)).collect();
        Ok(Self { dim, table })
    }

    /// Reads a JSON object mapping text to embedding arrays.
    pub fn from_json(json: &str) -> Result<Self, ProviderError> {
        let table: BTreeMap<String, Vec<f32>> =
            serde_json::from_str(json).map_err(|e| ProviderError::Failed(e.to_string()))?;
        Self::new(table)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ProviderError> {
        let text = std::fs::read_to_string(path).map_err(|e| ProviderError::Failed(e.to_string()))?;
        Self::from_json(&text)
    }

    /// Snapshot another provider's outputs for a fixed set of texts.
    pub fn capture_from(provider: &dyn EmbeddingProvider, texts: &[&str]) -> Result<Self, ProviderError> {
        let table =
            texts.iter().map(|t| provider.embed_text(t).map(|v| (t.to_string(), v))).collect::<Result<_, _>>()?;
        Self::new(table)
    }
}

impl EmbeddingProvider for PrecomputedEmbeddings {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_text(&self, text: &str) -> Result<Vec<f32>, ProviderError> {
        let key = normalize_text(text);
        if key.is_empty() {
            return Err(ProviderError::EmptyText);
        }
        self.table.get(&key).cloned().ok_or(ProviderError::Missing(key))
    }
}

/// Grasp proposals read from a proposal file; the same list is returned for
/// every capture.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecomputedGrasps {
    pub proposals: Vec<GraspProposal>,
}

impl PrecomputedGrasps {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ProviderError> {
        let text = std::fs::read_to_string(path).map_err(|e| ProviderError::Failed(e.to_string()))?;
        let proposals = parse_proposals(&text).map_err(|e| ProviderError::Failed(e.to_string()))?;
        Ok(Self { proposals })
    }
}

impl GraspProvider for PrecomputedGrasps {
    fn propose(&self, _capture: &Capture) -> Result<Vec<GraspProposal>, ProviderError> {
        Ok(self.proposals.clone())
    }
}

/// Lowercases and collapses whitespace.
pub(crate) fn normalize_text(text: &str) -> String {
    text.split_whitespace().map(str::to_lowercase).collect::<Vec<_>>().join(" ")
}
