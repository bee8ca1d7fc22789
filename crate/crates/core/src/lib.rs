//! Language-driven pick-and-drop planning over posed RGB-D scans.
//!
//! The crate is organized bottom-up:
//!
//! * [`geom`]: pinhole back-projection/projection and rigid poses.
//! * [`mask`]: run-length encoded pixel masks.
//! * [`memory`]: the semantic voxel map and its similarity queries.
//! * [`navigation`]: obstacle grid, standing-point selection, A* planning.
//! * [`grasping`]: mask filtering, ranking and approach trajectories.
//! * [`dropping`]: drop point and release height over a receptacle cloud.
//! * [`pipeline`]: scan archives, model providers, synthetic scenes and the
//!   pick-and-drop state machine.

// `!(x <= tol)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dropping;
pub mod geom;
pub mod grasping;
pub mod mask;
pub mod memory;
pub mod navigation;
pub mod pipeline;

pub use dropping::{AlignedCloud, DropPoint};
pub use geom::{CameraIntrinsics, DepthImage, PointCloud, Pose, Vec3};
pub use grasping::{GraspProposal, GraspTrajectory, RankedGrasp};
pub use mask::{PixelRect, RleMask};
pub use memory::{Detection, PosedFrame, QueryResult, VoxelIndex, VoxelMap};
pub use navigation::{Cell, CellState, NavTarget, ObstacleGrid};
pub use pipeline::{ScanArchive, TaskReport, TaskSpec};
