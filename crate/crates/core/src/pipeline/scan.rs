//! Scan archives: a directory holding `manifest.json` (UTF-8 JSON metadata)
//! and `frames.bin` (little-endian f32 payloads referenced by byte offset).
//!
//! Each frame stores its depth image as one row-major block of
//! `width * height` floats; each detection stores its embedding as one block
//! of `embedding_dim` floats. Masks are kept in the manifest as run lengths.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{CameraIntrinsics, DepthImage, Pose};
use crate::mask::{PixelRect, RleMask};
use crate::memory::{Detection, PosedFrame};

pub const SCAN_FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const PAYLOAD_FILE: &str = "frames.bin";

#[derive(Debug, Error)]
pub enum ScanError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed manifest: {0}")]
    Manifest(String),
    #[error("unsupported scan format version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("manifest declares {declared} frames but lists {found}")]
    FrameCount { declared: usize, found: usize },
    #[error("frame {index}: {reason}")]
    Frame { index: usize, reason: String },
}

fn frame_err(index: usize, reason: impl ToString) -> ScanError {
    ScanError::Frame { index, reason: reason.to_string() }
}

/// A validated sequence of posed frames sharing one camera.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanArchive {
    intrinsics: CameraIntrinsics,
    embedding_dim: usize,
    frames: Vec<PosedFrame>,
}

impl ScanArchive {
    /// Checks that every frame uses `intrinsics`, has a matching depth image
    /// and carries valid `embedding_dim`-sized detections.
    pub fn new(intrinsics: CameraIntrinsics, embedding_dim: usize, frames: Vec<PosedFrame>) -> Result<Self, ScanError> {
        intrinsics.validate().map_err(|e| ScanError::Manifest(e.to_string()))?;
        if embedding_dim == 0 {
            return Err(ScanError::Manifest("embedding dimension must be positive".into()));
        }
        for (index, frame) in frames.iter().enumerate() {
            if frame.intrinsics != intrinsics {
                return Err(frame_err(index, "intrinsics differ from the archive's"));
            }
            frame.depth.check_matches(&intrinsics).map_err(|e| frame_err(index, e))?;
            for (d, det) in frame.detections.iter().enumerate() {
                det.check(d, &intrinsics, embedding_dim)
                    .map_err(|e| frame_err(index, format!("detection {d}: {e}")))?;
            }
        }
        Ok(Self { intrinsics, embedding_dim, frames })
    }

    pub fn intrinsics(&self) -> &CameraIntrinsics {
        &self.intrinsics
    }

    pub fn embedding_dim(&self) -> usize {
        self.embedding_dim
    }

    pub fn frames(&self) -> &[PosedFrame] {
        &self.frames
    }

    pub fn into_frames(self) -> Vec<PosedFrame> {
        self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    format_version: u32,
    frame_count: usize,
    intrinsics: CameraIntrinsics,
    embedding_dim: usize,
    frames: Vec<FrameRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
struct FrameRecord {
    /// Camera-to-world [R | t], row-major.
    pose: [f64; 12],
    depth_offset: u64,
    #[serde(default)]
    color_ref: Option<String>,
    detections: Vec<DetectionRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
struct DetectionRecord {
    label: String,
    bbox: PixelRect,
    #[serde(default)]
    mask: Option<Vec<u32>>,
    embedding_offset: u64,
    embedding_len: usize,
    confidence: f32,
}

fn push_f32s(out: &mut Vec<u8>, values: &[f32]) -> u64 {
    let offset = out.len() as u64;
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    offset
}

fn read_f32s(payload: &[u8], offset: u64, count: usize) -> Option<Vec<f32>> {
    let start = usize::try_from(offset).ok()?;
    let end = start.checked_add(count.checked_mul(4)?)?;
    let bytes = payload.get(start..end)?;
    Some(bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect())
}

/// Serializes to the manifest text and the payload bytes.
pub fn encode_scan(scan: &ScanArchive) -> (String, Vec<u8>) {
    let mut payload = Vec::new();
    let frames = scan
        .frames
        .iter()
        .map(|f| FrameRecord {
            pose: f.pose.to_row_major(),
            depth_offset: push_f32s(&mut payload, f.depth.values()),
            color_ref: f.color_ref.clone(),
            detections: f
                .detections
                .iter()
                .map(|d| DetectionRecord {
                    label: d.label.clone(),
                    bbox: d.bbox,
                    mask: d.mask.as_ref().map(|m| m.runs().to_vec()),
                    embedding_offset: push_f32s(&mut payload, &d.embedding),
                    embedding_len: d.embedding.len(),
                    confidence: d.confidence,
                })
                .collect(),
        })
        .collect();
    let manifest = Manifest {
        format_version: SCAN_FORMAT_VERSION,
        frame_count: scan.frames.len(),
        intrinsics: scan.intrinsics,
        embedding_dim: scan.embedding_dim,
        frames,
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    (text, payload)
}

/// Parses a manifest and its payload, validating every record.
pub fn decode_scan(manifest: &str, payload: &[u8]) -> Result<ScanArchive, ScanError> {
    // Peek at the version before committing to the full schema.
    let probe: serde_json::Value = serde_json::from_str(manifest).map_err(|e| ScanError::Manifest(e.to_string()))?;
    let found = probe
        .get("format_version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| ScanError::Manifest("missing format_version".into()))?;
    if found != SCAN_FORMAT_VERSION as u64 {
        return Err(ScanError::Version { found: found as u32, expected: SCAN_FORMAT_VERSION });
    }
    let m: Manifest = serde_json::from_value(probe).map_err(|e| ScanError::Manifest(e.to_string()))?;
    if m.frame_count != m.frames.len() {
        return Err(ScanError::FrameCount { declared: m.frame_count, found: m.frames.len() });
    }
    let intr = m.intrinsics;
    intr.validate().map_err(|e| ScanError::Manifest(e.to_string()))?;

    let mut frames = Vec::with_capacity(m.frames.len());
    for (index, rec) in m.frames.into_iter().enumerate() {
        let pose = Pose::from_row_major(&rec.pose).map_err(|e| frame_err(index, e))?;
        let values = read_f32s(payload, rec.depth_offset, intr.pixel_count())
            .ok_or_else(|| frame_err(index, "depth block runs past the end of the payload"))?;
        let depth = DepthImage::new(intr.width, intr.height, values).map_err(|e| frame_err(index, e))?;
        let mut detections = Vec::with_capacity(rec.detections.len());
        for (d, det) in rec.detections.into_iter().enumerate() {
            if det.embedding_len != m.embedding_dim {
                return Err(frame_err(
                    index,
                    format!(
                        "detection {d}: embedding dimension {} differs from {}",
                        det.embedding_len, m.embedding_dim
                    ),
                ));
            }
            let embedding = read_f32s(payload, det.embedding_offset, m.embedding_dim).ok_or_else(|| {
                frame_err(index, format!("detection {d}: embedding runs past the end of the payload"))
            })?;
            let mask = det
                .mask
                .map(|runs| RleMask::new(intr.width, intr.height, runs))
                .transpose()
                .map_err(|e| frame_err(index, format!("detection {d}: {e}")))?;
            detections.push(Detection {
                label: det.label,
                bbox: det.bbox,
                mask,
                embedding,
                confidence: det.confidence,
            });
        }
        frames.push(PosedFrame { intrinsics: intr, pose, depth, color_ref: rec.color_ref, detections });
    }
    ScanArchive::new(intr, m.embedding_dim, frames)
}

/// Reads `manifest.json` and `frames.bin` from `dir`. Embedding dimension
/// mismatches in the manifest surface as frame errors; a missing payload is
/// accepted only when no frame references it.
pub fn load_scan(dir: impl AsRef<Path>) -> Result<ScanArchive, ScanError> {
    let dir = dir.as_ref();
    let manifest = fs::read_to_string(dir.join(MANIFEST_FILE))?;
    let payload_path = dir.join(PAYLOAD_FILE);
    let payload = if payload_path.exists() { fs::read(payload_path)? } else { Vec::new() };
    decode_scan(&manifest, &payload)
}

pub fn save_scan(scan: &ScanArchive, dir: impl AsRef<Path>) -> Result<(), ScanError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let (manifest, payload) = encode_scan(scan);
    fs::write(dir.join(MANIFEST_FILE), manifest)?;
    fs::write(dir.join(PAYLOAD_FILE), payload)?;
    Ok(())
}
