//! Language-conditioned grasp selection.
//!
//! Proposals come from an external grasp generator. They are kept only if
//! the grasp point projects into the object's segmentation mask, then
//! ranked by graspness minus a penalty that grows with the approach
//! direction's tilt away from horizontal.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{project, CameraIntrinsics, Pose, Vec3};
use crate::mask::RleMask;

/// Standoff distances (m) along the approach vector, farthest first.
pub const PREGRASP_OFFSETS: [f64; 4] = [0.2, 0.08, 0.04, 0.0];

const UNIT_TOL: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum GraspError {
    #[error("no grasp proposals to rank")]
    NoGrasp,
    #[error("approach vector is not unit length (norm {0})")]
    NonUnitApproach(f64),
    #[error("mask is {mask_w}x{mask_h} but the camera is {cam_w}x{cam_h}")]
    MaskMismatch { mask_w: u32, mask_h: u32, cam_w: u32, cam_h: u32 },
    #[error("proposal line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspProposal {
    /// Grasp point, world frame (m).
    pub point: Vec3,
    /// Unit direction the gripper travels toward `point`.
    pub approach: Vec3,
    pub width: f64,
    pub height: f64,
    pub depth: f64,
    /// Graspness score from the generator.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedGrasp {
    pub proposal: GraspProposal,
    /// Input position of the proposal.
    pub index: usize,
    /// Tilt of the approach away from the horizontal plane, in [0, pi/2].
    pub theta: f64,
    pub heuristic_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspRanking {
    /// Best first; ties keep input order.
    pub ranked: Vec<RankedGrasp>,
}

impl GraspRanking {
    pub fn best(&self) -> &RankedGrasp {
        &self.ranked[0]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspTrajectory {
    pub waypoints: [Vec3; 4],
    /// The gripper closes after the last waypoint.
    pub close_gripper: bool,
}

/// Keeps the proposals whose grasp point projects onto a set mask pixel.
pub fn filter_by_mask(
    proposals: &[GraspProposal],
    mask: &RleMask,
    intr: &CameraIntrinsics,
    pose: &Pose,
) -> Result<Vec<GraspProposal>, GraspError> {
    if mask.width() != intr.width || mask.height() != intr.height {
        return Err(GraspError::MaskMismatch {
            mask_w: mask.width(),
            mask_h: mask.height(),
            cam_w: intr.width,
            cam_h: intr.height,
        });
    }
    let dense = mask.to_dense();
    let w = mask.width() as usize;
    Ok(proposals
        .iter()
        .filter(|g| {
            project(&g.point, intr, pose).is_some_and(|px| {
                let (u, v) = px.pixel();
                dense[v as usize * w + u as usize]
            })
        })
        .cloned()
        .collect())
}

/// Approach tilt from horizontal: `|pi/2 - angle(approach, floor_normal)|`.
///
/// Evaluated as `atan2(|a . n|, |a x n|)`, which stays accurate for nearly
/// vertical and nearly horizontal approaches alike.
pub fn approach_tilt(approach: &Vec3, floor_normal: &Vec3) -> f64 {
    approach.dot(floor_normal).abs().atan2(approach.cross(floor_normal).norm())
}

pub fn heuristic_score(graspness: f64, theta: f64) -> f64 {
    graspness - theta.powi(4) / 10.0
}

pub fn rank_grasps(proposals: &[GraspProposal], floor_normal: &Vec3) -> Result<GraspRanking, GraspError> {
    if proposals.is_empty() {
        return Err(GraspError::NoGrasp);
    }
    let mut ranked: Vec<RankedGrasp> = proposals
        .iter()
        .enumerate()
        .map(|(index, g)| {
            let theta = approach_tilt(&g.approach, floor_normal);
            RankedGrasp { proposal: g.clone(), index, theta, heuristic_score: heuristic_score(g.score, theta) }
        })
        .collect();
    ranked.sort_by(|a, b| b.heuristic_score.total_cmp(&a.heuristic_score));
    Ok(GraspRanking { ranked })
}

/// Straight-line approach with shrinking steps, ending at the grasp point.
pub fn pregrasp_trajectory(g: &GraspProposal) -> Result<GraspTrajectory, GraspError> {
    let norm = g.approach.norm();
    if !((norm - 1.0).abs() <= UNIT_TOL) {
        return Err(GraspError::NonUnitApproach(norm));
    }
    let waypoints = PREGRASP_OFFSETS.map(|k| g.point - k * g.approach);
    Ok(GraspTrajectory { waypoints, close_gripper: true })
}

impl GraspProposal {
    /// One line of ten whitespace-separated decimals:
    /// `px py pz ax ay az width height depth score`.
    pub fn to_line(&self) -> String {
        let p = &self.point;
        let a = &self.approach;
        format!(
            "{} {} {} {} {} {} {} {} {} {}",
            p.x, p.y, p.z, a.x, a.y, a.z, self.width, self.height, self.depth, self.score
        )
    }

    pub fn parse_line(line: &str, line_no: usize) -> Result<Self, GraspError> {
        let err = |reason: String| GraspError::Parse { line: line_no, reason };
        let vals = line
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<f64>().map_err(|_| err(format!("`{s}` is not a number"))))
            .collect::<Result<Vec<_>, _>>()?;
        if vals.len() != 10 {
            return Err(err(format!("expected 10 fields, found {}", vals.len())));
        }
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(err("non-finite field".into()));
        }
        let approach = Vec3::new(vals[3], vals[4], vals[5]);
        if !((approach.norm() - 1.0).abs() <= UNIT_TOL) {
            return Err(err(format!("approach norm {} is not 1", approach.norm())));
        }
        if vals[6] < 0.0 || vals[7] < 0.0 || vals[8] < 0.0 {
            return Err(err("negative gripper dimension".into()));
        }
        Ok(Self {
            point: Vec3::new(vals[0], vals[1], vals[2]),
            approach,
            width: vals[6],
            height: vals[7],
            depth: vals[8],
            score: vals[9],
        })
    }
}

/// Parses line-delimited proposals; blank lines and `#` comments are skipped.
pub fn parse_proposals(text: &str) -> Result<Vec<GraspProposal>, GraspError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map(|(i, l)| GraspProposal::parse_line(l, i + 1))
        .collect()
}

pub fn proposals_to_text(proposals: &[GraspProposal]) -> String {
    proposals.iter().map(|g| g.to_line() + "\n").collect()
}
