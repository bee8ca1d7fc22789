//! The pick-and-drop state machine: navigate to the object, grasp it,
//! navigate to the receptacle, drop. Each stage runs once; the first failure
//! ends the run and is recorded with its stage.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::providers::{normalize_text, Capture, Providers};
use crate::dropping::{align_cloud, compute_drop_with, DropConfig, DropPoint};
use crate::geom::{backproject_pixel, PointCloud, Pose, Vec2, Vec3};
use crate::grasping::{filter_by_mask, pregrasp_trajectory, rank_grasps, GraspTrajectory, RankedGrasp};
use crate::memory::{NearQueryConfig, QueryResult, VoxelMap};
use crate::navigation::{
    flood_fill, plan_path_with, select_nav_target_among, Cell, NavTarget, ObstacleGrid, Path, PlannerConfig,
};

#[derive(Debug, Error, PartialEq)]
pub enum TaskError {
    #[error("{0} query is empty")]
    EmptyQuery(&'static str),
}

/// "Pick up A (from B) and drop it on/in C".
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub pick_query: String,
    /// Optional anchor: the object is looked up near this.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub from_query: Option<String>,
    pub drop_query: String,
}

impl TaskSpec {
    pub fn new(pick: &str, from: Option<&str>, drop: &str) -> Result<Self, TaskError> {
        let pick = normalize_text(pick);
        let drop = normalize_text(drop);
        if pick.is_empty() {
            return Err(TaskError::EmptyQuery("pick"));
        }
        if drop.is_empty() {
            return Err(TaskError::EmptyQuery("drop"));
        }
        let from = from.map(normalize_text);
        if from.as_deref() == Some("") {
            return Err(TaskError::EmptyQuery("from"));
        }
        Ok(Self { pick_query: pick, from_query: from, drop_query: drop })
    }

    /// Accepts `"A"` or `"A on B"` as the pick text.
    pub fn parse(pick: &str, drop: &str) -> Result<Self, TaskError> {
        let pick = normalize_text(pick);
        match pick.rsplit_once(" on ") {
            Some((a, b)) => Self::new(a, Some(b), drop),
            None => Self::new(&pick, None, drop),
        }
    }

    pub fn describe(&self) -> String {
        match &self.from_query {
            Some(b) => format!("pick up {} (from {b}) and drop it on/in {}", self.pick_query, self.drop_query),
            None => format!("pick up {} and drop it on/in {}", self.pick_query, self.drop_query),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    NavigateToObject,
    Grasp,
    NavigateToGoal,
    Drop,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Stage::NavigateToObject => "navigate-to-object",
            Stage::Grasp => "grasp",
            Stage::NavigateToGoal => "navigate-to-goal",
            Stage::Drop => "drop",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TaskConfig {
    /// Navigation to the object fails when the best match scores below this.
    /// Zero disables the check.
    pub similarity_floor: f64,
    pub near: NearQueryConfig,
    pub planner: PlannerConfig,
    /// Robot start (m). Defaults to the grid center; either way the nearest
    /// free cell is used.
    pub start: Option<Vec2>,
    /// Height of the head camera used for grasp and drop captures (m).
    pub camera_height: f64,
    pub floor_normal: Vec3,
    pub drop: DropConfig,
}

impl Default for TaskConfig {
    fn default() -> Self {
        Self {
            similarity_floor: 0.0,
            near: NearQueryConfig::default(),
            planner: PlannerConfig::default(),
            start: None,
            camera_height: 1.2,
            floor_normal: Vec3::z(),
            drop: DropConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NavigationStage {
    pub query: QueryResult,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor: Option<QueryResult>,
    pub target: NavTarget,
    pub path: Path,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspStage {
    pub camera: Pose,
    pub proposals: usize,
    pub in_mask: usize,
    pub best: RankedGrasp,
    pub trajectory: GraspTrajectory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropStage {
    pub camera: Pose,
    pub receptacle_points: usize,
    /// In the robot-aligned frame.
    pub drop_point: DropPoint,
    /// The same point in world coordinates.
    pub release: Vec3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageFailure {
    pub stage: Stage,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskReport {
    pub task: TaskSpec,
    pub start: Option<Cell>,
    pub navigate_to_object: Option<NavigationStage>,
    pub grasp: Option<GraspStage>,
    pub navigate_to_goal: Option<NavigationStage>,
    pub drop: Option<DropStage>,
    pub failure: Option<StageFailure>,
}

impl TaskReport {
    pub fn succeeded(&self) -> bool {
        self.failure.is_none()
    }

    pub fn completed_stages(&self) -> usize {
        [self.navigate_to_object.is_some(), self.grasp.is_some(), self.navigate_to_goal.is_some(), self.drop.is_some()]
            .iter()
            .filter(|&&b| b)
            .count()
    }

    /// Pretty JSON; identical reports give identical bytes.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }
}

/// Free cell whose center is nearest to `p`; ties go to the smaller cell.
pub fn nearest_free_cell(grid: &ObstacleGrid, p: Vec2) -> Option<Cell> {
    let mut best: Option<(f64, Cell)> = None;
    for cell in grid.cells() {
        if grid.is_free(cell) {
            let d = (grid.center(cell) - p).norm_squared();
            if best.is_none_or(|(b, _)| d < b) {
                best = Some((d, cell));
            }
        }
    }
    best.map(|(_, c)| c)
}

fn grid_center(grid: &ObstacleGrid) -> Vec2 {
    grid.origin() + Vec2::new(grid.cols() as f64, grid.rows() as f64) * grid.cell_size() / 2.0
}

struct Run<'a> {
    map: &'a VoxelMap,
    grid: &'a ObstacleGrid,
    providers: Providers<'a>,
    config: &'a TaskConfig,
}

type StageResult<T> = Result<T, String>;

impl Run<'_> {
    fn embed(&self, what: &str, text: &str) -> StageResult<Vec<f32>> {
        self.providers.embedder.embed_text(text).map_err(|e| format!("embedding {what} query `{text}`: {e}"))
    }

    fn locate(&self, query: &str, anchor: Option<&str>) -> StageResult<(QueryResult, Option<QueryResult>)> {
        let q = self.embed("object", query)?;
        let (hit, anchor_hit) = match anchor {
            Some(a) => {
                let av = self.embed("anchor", a)?;
                let m = self.map.query_near_with(&q, &av, self.config.near).map_err(|e| e.to_string())?;
                (m.target, Some(m.anchor))
            }
            None => {
                let mut hits = self.map.query(&q, 1).map_err(|e| e.to_string())?;
                (hits.swap_remove(0), None)
            }
        };
        let floor = self.config.similarity_floor;
        if floor > 0.0 && hit.score < floor {
            return Err(format!("could not locate `{query}`: best similarity {:.4} is below {floor}", hit.score));
        }
        Ok((hit, anchor_hit))
    }

    fn navigate(&self, from: Cell, query: &str, anchor: Option<&str>) -> StageResult<NavigationStage> {
        let (hit, anchor) = self.locate(query, anchor)?;
        let reachable = flood_fill(self.grid, from);
        let cols = self.grid.cols();
        let target = select_nav_target_among(self.grid, hit.position.xy(), |c| reachable[c.row * cols + c.col])
            .map_err(|e| format!("no standing point for `{query}`: {e}"))?;
        let path = plan_path_with(self.grid, from, target.cell, self.config.planner).map_err(|e| e.to_string())?;
        Ok(NavigationStage { query: hit, anchor, target, path })
    }

    /// Head camera at the standing point, looking at `point`.
    fn look(&self, target: &NavTarget, point: &Vec3) -> StageResult<Capture> {
        let eye = Vec3::new(target.position.x, target.position.y, self.config.camera_height);
        let pose = Pose::look_at(eye, *point, Vec3::z())
            .or_else(|| {
                // Object straight below the camera: tilt slightly forward.
                let nudge = Vec3::new(target.heading.x, target.heading.y, 0.0) * 1e-3;
                Pose::look_at(eye, point + nudge, Vec3::z())
            })
            .ok_or("degenerate camera pose")?;
        self.providers.camera.capture(&pose).map_err(|e| format!("capture: {e}"))
    }

    fn grasp(&self, nav: &NavigationStage, query: &str) -> StageResult<GraspStage> {
        let capture = self.look(&nav.target, &nav.query.position)?;
        let proposals = self.providers.grasper.propose(&capture).map_err(|e| format!("grasp proposals: {e}"))?;
        let mask = self
            .providers
            .segmenter
            .segment(&capture, query)
            .map_err(|e| format!("segmentation: {e}"))?
            .ok_or_else(|| format!("`{query}` not found in the grasp view"))?;
        let kept = filter_by_mask(&proposals, &mask, &capture.intrinsics, &capture.pose).map_err(|e| e.to_string())?;
        let ranking = rank_grasps(&kept, &self.config.floor_normal)
            .map_err(|e| format!("{e} ({} proposals, none inside the `{query}` mask)", proposals.len()))?;
        let best = ranking.best().clone();
        let trajectory = pregrasp_trajectory(&best.proposal).map_err(|e| e.to_string())?;
        Ok(GraspStage { camera: capture.pose, proposals: proposals.len(), in_mask: kept.len(), best, trajectory })
    }

    fn drop(&self, nav: &NavigationStage, query: &str) -> StageResult<DropStage> {
        let capture = self.look(&nav.target, &nav.query.position)?;
        let mask = self
            .providers
            .segmenter
            .segment(&capture, query)
            .map_err(|e| format!("segmentation: {e}"))?
            .ok_or_else(|| format!("`{query}` not found in the drop view"))?;
        let points: Vec<Vec3> = mask
            .set_pixels()
            .filter_map(|(u, v)| {
                let d = capture.depth.get(u, v);
                (d > 0.0).then(|| backproject_pixel(u, v, d as f64, &capture.intrinsics, &capture.pose))
            })
            .collect();
        let cloud = PointCloud::new(points);
        let robot = nav.target.position;
        let heading = nav.target.heading;
        let aligned = align_cloud(&cloud, robot, heading).map_err(|e| e.to_string())?;
        let drop_point = compute_drop_with(&aligned, &self.config.drop).map_err(|e| e.to_string())?;
        let left = Vec2::new(-heading.y, heading.x);
        let xy = robot + heading * drop_point.x_m + left * drop_point.y_m;
        Ok(DropStage {
            camera: capture.pose,
            receptacle_points: cloud.len(),
            drop_point,
            release: Vec3::new(xy.x, xy.y, drop_point.z_max),
        })
    }
}

/// Runs the four stages in order. Never panics on stage errors: each one is
/// reported as that stage's failure and ends the run.
pub fn run_task(
    map: &VoxelMap,
    grid: &ObstacleGrid,
    task: &TaskSpec,
    providers: Providers<'_>,
    config: &TaskConfig,
) -> TaskReport {
    let mut report = TaskReport {
        task: task.clone(),
        start: None,
        navigate_to_object: None,
        grasp: None,
        navigate_to_goal: None,
        drop: None,
        failure: None,
    };
    let run = Run { map, grid, providers, config };
    let fail = |report: &mut TaskReport, stage, reason: String| {
        report.failure = Some(StageFailure { stage, reason });
    };

    if !grid.is_inflated() {
        fail(&mut report, Stage::NavigateToObject, "obstacle grid is not inflated".into());
        return report;
    }
    let start_point = config.start.unwrap_or_else(|| grid_center(grid));
    let Some(start) = nearest_free_cell(grid, start_point) else {
        fail(&mut report, Stage::NavigateToObject, "no free cell to start from".into());
        return report;
    };
    report.start = Some(start);

    let to_object = match run.navigate(start, &task.pick_query, task.from_query.as_deref()) {
        Ok(s) => s,
        Err(e) => {
            fail(&mut report, Stage::NavigateToObject, e);
            return report;
        }
    };
    let at_object = to_object.target.cell;
    report.navigate_to_object = Some(to_object);

    match run.grasp(report.navigate_to_object.as_ref().expect("set above"), &task.pick_query) {
        Ok(g) => report.grasp = Some(g),
        Err(e) => {
            fail(&mut report, Stage::Grasp, e);
            return report;
        }
    }

    match run.navigate(at_object, &task.drop_query, None) {
        Ok(s) => report.navigate_to_goal = Some(s),
        Err(e) => {
            fail(&mut report, Stage::NavigateToGoal, e);
            return report;
        }
    }

    match run.drop(report.navigate_to_goal.as_ref().expect("set above"), &task.drop_query) {
        Ok(d) => report.drop = Some(d),
        Err(e) => fail(&mut report, Stage::Drop, e),
    }
    report
}
