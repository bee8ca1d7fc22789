//! Acceptance checks. Each criterion prints one PASS/FAIL line; the process
//! exits nonzero if any criterion fails.
//!
//! Run with `cargo test -p pickdrop-core --test acceptance -- --nocapture`
//! (output is printed either way since this target has no harness).

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashSet, VecDeque};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use pickdrop_core::dropping::{compute_drop, AlignedCloud, DropError};
use pickdrop_core::geom::{backproject_pixel, CameraIntrinsics, Pose, Vec2, Vec3};
use pickdrop_core::grasping::{filter_by_mask, heuristic_score, pregrasp_trajectory, rank_grasps, GraspProposal};
use pickdrop_core::mask::RleMask;
use pickdrop_core::memory::{VoxelIndex, VoxelMap};
use pickdrop_core::navigation::{
    flood_fill, inflate, plan_path_with, score, select_nav_target, Cell, CellState, NavError, ObstacleGrid,
    PlannerConfig,
};
use pickdrop_core::pipeline::{build_map, random_apartment, run_task, Providers, SyntheticWorld, TaskConfig};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

// Pinned tolerances and limits.
const QUERY_SCORE_TOL: f64 = 1e-6;
const QUERY_TIME_LIMIT: Duration = Duration::from_secs(10);
const QUERY_MAX_VOXELS: usize = 5000;
const QUERY_DIM: usize = 16;
const SCORE_REL_TOL: f64 = 1e-9;
const NAV_EMPTY_DISTANCE_M: f64 = 0.40;
const NAV_EMPTY_TOL_M: f64 = 0.1;
const PATH_COST_TOL: f64 = 1e-9;
const HEURISTIC_TOL: f64 = 1e-9;
const TILT_TOL: f64 = 1e-12;
const SPOT_GRASPNESS: f64 = 0.9;
const SPOT_EXPECTED: f64 = 0.29119;
const SPOT_TOL: f64 = 5e-6;
const PREGRASP_OFFSETS_M: [f64; 4] = [0.2, 0.08, 0.04, 0.0];
const DROP_BUFFER_M: f64 = 0.2;
const DROP_HALF_WIDTH_M: f64 = 0.1;
const E2E_SCENES: u64 = 10;
const E2E_MIN_COMPLETED: usize = 9;
const E2E_TIME_LIMIT: Duration = Duration::from_secs(60);
const BUILD_FRAMES: usize = 200;
const BUILD_SIZE: (u32, u32) = (256, 192);
const BUILD_TIME_LIMIT: Duration = Duration::from_secs(10);

type Check = (bool, String);
type Criterion = (&'static str, fn() -> Check);

fn main() {
    let criteria: [Criterion; 10] = [
        ("top-k query matches exhaustive ranking", query_matches_oracle),
        ("near query matches exhaustive pair search", near_query_matches_oracle),
        ("navigation score matches direct evaluation", score_table),
        ("navigation target matches exhaustive argmin", nav_target_matches_oracle),
        ("paths are valid, complete and optimal", paths_match_oracles),
        ("grasp filtering and ranking match manual evaluation", grasp_matches_oracle),
        ("pregrasp waypoints are exact", trajectory_is_exact),
        ("drop point matches sort-and-scan", drop_matches_oracle),
        ("end-to-end synthetic tasks succeed deterministically", end_to_end),
        ("200-frame map build is fast and persists bit-exactly", build_performance),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let (pass, detail) = match catch_unwind(check) {
            Ok(r) => r,
            Err(e) => (false, format!("panicked: {}", panic_message(&e))),
        };
        if !pass {
            failed += 1;
        }
        println!("{} {name}: {detail} [{:.2}s]", if pass { "PASS" } else { "FAIL" }, start.elapsed().as_secs_f64());
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

fn panic_message(e: &Box<dyn std::any::Any + Send>) -> String {
    e.downcast_ref::<String>()
        .cloned()
        .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
        .unwrap_or_else(|| "unknown panic".into())
}

/// Collects the first few mismatches; a check passes when none were seen.
#[derive(Default)]
struct Mismatches {
    count: usize,
    first: Vec<String>,
}

impl Mismatches {
    fn push(&mut self, msg: String) {
        self.count += 1;
        if self.first.len() < 3 {
            self.first.push(msg);
        }
    }

    fn check(&mut self, ok: bool, msg: impl FnOnce() -> String) {
        if !ok {
            self.push(msg());
        }
    }

    fn finish(self, summary: String) -> Check {
        if self.count == 0 {
            (true, summary)
        } else {
            (false, format!("{summary}; {} mismatches, e.g. {}", self.count, self.first.join(" | ")))
        }
    }
}

// ---------------------------------------------------------------- queries

fn random_unit_f32(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f32> {
    let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| (x / n) as f32).collect()
}

struct RandomMap {
    map: VoxelMap,
    entries: Vec<(VoxelIndex, Vec<f32>)>,
}

/// Random map with repeated vectors so that exact score ties occur.
fn random_map(rng: &mut ChaCha8Rng, n: usize, extent: i64) -> RandomMap {
    let mut seen = HashSet::new();
    let mut entries: Vec<(VoxelIndex, Vec<f32>)> = Vec::with_capacity(n);
    while entries.len() < n {
        let idx = VoxelIndex([
            rng.random_range(-extent..extent),
            rng.random_range(-extent..extent),
            rng.random_range(0..extent),
        ]);
        if !seen.insert(idx) {
            continue;
        }
        let v = if !entries.is_empty() && rng.random_bool(0.3) {
            entries[rng.random_range(0..entries.len())].1.clone()
        } else {
            let scale: f32 = rng.random_range(0.2..1.0);
            random_unit_f32(rng, QUERY_DIM).into_iter().map(|x| x * scale).collect()
        };
        entries.push((idx, v));
    }
    let map =
        VoxelMap::from_entries(0.05, QUERY_DIM, entries.iter().map(|(i, v)| (*i, v.clone(), 1.0)).collect(), vec![])
            .unwrap();
    RandomMap { map, entries }
}

/// Exhaustive ranking: score descending, voxel index ascending.
fn oracle_top_k(entries: &[(VoxelIndex, Vec<f32>)], q: &[f32], k: usize) -> Vec<(VoxelIndex, f64)> {
    let mut all: Vec<(VoxelIndex, f64)> = entries
        .iter()
        .map(|(i, v)| {
            let mut s = 0.0f64;
            for d in 0..v.len() {
                s += v[d] as f64 * q[d] as f64;
            }
            (*i, s)
        })
        .collect();
    all.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    all.truncate(k);
    all
}

fn query_matches_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut bad = Mismatches::default();
    let mut elapsed = Duration::ZERO;
    let mut queries = 0;
    for m in 0..100 {
        let n = if m % 10 == 0 { QUERY_MAX_VOXELS } else { rng.random_range(1..=QUERY_MAX_VOXELS) };
        let rm = random_map(&mut rng, n, 30);
        for _ in 0..5 {
            let q = if rng.random_bool(0.2) {
                // Query equal to a stored direction produces ties at the top.
                let v = &rm.entries[rng.random_range(0..n)].1;
                let norm = v.iter().map(|&x| x as f64 * x as f64).sum::<f64>().sqrt();
                v.iter().map(|&x| (x as f64 / norm) as f32).collect()
            } else {
                random_unit_f32(&mut rng, QUERY_DIM)
            };
            let k = if rng.random_bool(0.1) { n + 3 } else { rng.random_range(1..=50) };
            let t = Instant::now();
            let got = rm.map.query(&q, k).unwrap();
            elapsed += t.elapsed();
            queries += 1;
            let want = oracle_top_k(&rm.entries, &q, k);
            bad.check(got.len() == want.len(), || format!("map {m}: {} results, expected {}", got.len(), want.len()));
            for (r, (g, w)) in got.iter().zip(&want).enumerate() {
                bad.check(g.index == w.0 && (g.score - w.1).abs() <= QUERY_SCORE_TOL, || {
                    format!("map {m} rank {r}: {:?}/{} vs {:?}/{}", g.index, g.score, w.0, w.1)
                });
            }
        }
    }
    bad.check(elapsed < QUERY_TIME_LIMIT, || format!("queries took {elapsed:?}"));
    bad.finish(format!("{queries} queries over 100 maps in {:.3}s", elapsed.as_secs_f64()))
}

fn near_query_matches_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut bad = Mismatches::default();
    for m in 0..100 {
        // Small extents put many candidates on a shared lattice, so equal
        // distances are common.
        let extent: i64 = if m % 2 == 0 { 6 } else { 20 };
        let n = rng.random_range(1..=2000usize.min((4 * extent * extent * extent) as usize / 2));
        let rm = random_map(&mut rng, n, extent);
        let tq = random_unit_f32(&mut rng, QUERY_DIM);
        let aq = random_unit_f32(&mut rng, QUERY_DIM);
        let got = rm.map.query_near(&tq, &aq).unwrap();

        let targets = oracle_top_k(&rm.entries, &tq, 10);
        let anchors = oracle_top_k(&rm.entries, &aq, 50);
        let center = |i: &VoxelIndex| i.0.map(|c| (c as f64 + 0.5) * 0.05);
        let mut best: Option<(f64, usize, usize)> = None;
        for (i, t) in targets.iter().enumerate() {
            for (j, a) in anchors.iter().enumerate() {
                let (tc, ac) = (center(&t.0), center(&a.0));
                let (dx, dy, dz) = (tc[0] - ac[0], tc[1] - ac[1], tc[2] - ac[2]);
                let d = (dx * dx + dy * dy + dz * dz).sqrt();
                if best.is_none() || d < best.unwrap().0 {
                    best = Some((d, i, j));
                }
            }
        }
        let (d, i, j) = best.unwrap();
        bad.check(
            got.target.index == targets[i].0
                && got.anchor.index == anchors[j].0
                && got.target_rank == i
                && got.anchor_rank == j
                && got.distance == d,
            || {
                format!(
                    "map {m}: got ({}, {}, {}) expected ({i}, {j}, {d})",
                    got.target_rank, got.anchor_rank, got.distance
                )
            },
        );
    }
    bad.finish("100 maps".into())
}

// ------------------------------------------------------------- navigation

/// Direct evaluation of the standing-point score from known distances (cm).
fn direct_score(object_cm: f64, obstacle_cm: f64) -> (f64, f64, f64, f64) {
    let s1 = object_cm;
    let s2 = if object_cm < 40.0 { 40.0 - object_cm } else { 0.0 };
    let s3 = if obstacle_cm == 0.0 {
        f64::INFINITY
    } else if obstacle_cm <= 30.0 {
        1.0 / obstacle_cm
    } else {
        0.0
    };
    (s1, s2, s3, s1 + 8.0 * s2 + 8.0 * s3)
}

/// Relative comparison; near zero the scale floors at 1 so that values that
/// should vanish are compared absolutely.
fn close_rel(a: f64, b: f64, tol: f64) -> bool {
    if a.is_infinite() || b.is_infinite() {
        return a == b;
    }
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

fn score_table() -> Check {
    let mut single = ObstacleGrid::filled(41, 41, 0.1, CellState::Navigable);
    single.set_state(Cell::new(20, 20), CellState::Occupied);
    let single = inflate(&single, 0.2).unwrap();
    let clear = inflate(&ObstacleGrid::filled(41, 41, 0.1, CellState::Navigable), 0.2).unwrap();
    let obstacle = single.center(Cell::new(20, 20));

    // (offset of x from the obstacle, offset of the object from x), meters.
    let configs: [([f64; 2], [f64; 2]); 20] = [
        ([0.5, 0.0], [0.0, 0.0]),
        ([0.5, 0.0], [0.1, 0.0]),
        ([0.5, 0.0], [0.25, 0.0]),
        ([0.5, 0.0], [0.399, 0.0]),
        ([0.5, 0.0], [0.4, 0.0]),
        ([0.5, 0.0], [0.0, 0.4]),
        ([0.5, 0.0], [0.41, 0.0]),
        ([0.5, 0.0], [1.0, 0.0]),
        ([0.5, 0.0], [0.3, 0.3]),
        ([0.5, 0.0], [-2.5, 1.0]),
        ([0.3, 0.0], [0.5, 0.0]),
        ([0.0, -0.3], [0.5, 0.0]),
        ([0.25, 0.0], [0.5, 0.0]),
        ([0.31, 0.0], [0.5, 0.0]),
        ([0.2, 0.2], [0.6, 0.0]),
        ([0.21, 0.21], [0.2, 0.0]),
        ([0.3, 0.1], [0.2, 0.1]),
        ([0.12, -0.05], [0.0, 0.0]),
        ([1.0, 1.0], [0.35, -0.1]),
        ([0.0, 0.0], [0.5, 0.0]),
    ];
    let mut bad = Mismatches::default();
    let mut cases = 0;
    for (k, (dx, dobj)) in configs.iter().enumerate() {
        let x = obstacle + Vec2::new(dx[0], dx[1]);
        let object = x + Vec2::new(dobj[0], dobj[1]);
        let object_cm = dobj[0].hypot(dobj[1]) * 100.0;
        for (grid, obstacle_cm, name) in
            [(&single, dx[0].hypot(dx[1]) * 100.0, "one obstacle"), (&clear, f64::INFINITY, "no obstacles")]
        {
            cases += 1;
            let got = score(x, object, grid).unwrap();
            let want = direct_score(object_cm, obstacle_cm);
            let ok = close_rel(got.s1, want.0, SCORE_REL_TOL)
                && close_rel(got.s2, want.1, SCORE_REL_TOL)
                && close_rel(got.s3, want.2, SCORE_REL_TOL)
                && close_rel(got.total, want.3, SCORE_REL_TOL);
            bad.check(ok, || format!("config {k} ({name}): {got:?} vs {want:?}"));
        }
    }
    bad.finish(format!("{cases} scored configurations"))
}

fn fill_rect(rng: &mut ChaCha8Rng, g: &mut ObstacleGrid, state: CellState, max: usize) {
    let (rows, cols) = (g.rows(), g.cols());
    let r0 = rng.random_range(0..rows);
    let c0 = rng.random_range(0..cols);
    let h = rng.random_range(1..=max);
    let w = rng.random_range(1..=max);
    for r in r0..(r0 + h).min(rows) {
        for c in c0..(c0 + w).min(cols) {
            g.set_state(Cell::new(r, c), state);
        }
    }
}

fn random_grid(rng: &mut ChaCha8Rng, max_side: usize) -> ObstacleGrid {
    let rows = rng.random_range(8..=max_side);
    let cols = rng.random_range(8..=max_side);
    let cs = *[0.05, 0.1].choose(rng).unwrap();
    let origin = Vec2::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
    let mut g = ObstacleGrid::new(rows, cols, cs, origin, vec![CellState::Navigable; rows * cols]).unwrap();
    let obstacles = rng.random_range(0..=15);
    for _ in 0..obstacles {
        fill_rect(rng, &mut g, CellState::Occupied, 10);
    }
    let holes = rng.random_range(0..=4);
    for _ in 0..holes {
        fill_rect(rng, &mut g, CellState::Unexplored, 6);
    }
    let radius = [0.0, cs, 0.2, 0.3][rng.random_range(0..4)];
    inflate(&g, radius).unwrap()
}

/// Brute-force blocking and nearest-obstacle distance for every cell.
struct GridOracle {
    blocked: Vec<bool>,
    obstacle_cm: Vec<f64>,
}

fn grid_oracle(grid: &ObstacleGrid) -> GridOracle {
    let (rows, cols, cs) = (grid.rows(), grid.cols(), grid.cell_size());
    let radius = grid.inflation_radius().unwrap();
    let obstacles: Vec<Cell> = grid.cells().filter(|&c| grid.state(c) != CellState::Navigable).collect();
    let window = ((radius.max(0.3) / cs).ceil() as isize) + 1;
    let mut blocked = vec![false; rows * cols];
    let mut obstacle_cm = vec![f64::INFINITY; rows * cols];
    for cell in grid.cells() {
        let mut best: Option<u64> = None;
        for dr in -window..=window {
            for dc in -window..=window {
                let (r, c) = (cell.row as isize + dr, cell.col as isize + dc);
                if r < 0 || c < 0 || r >= rows as isize || c >= cols as isize {
                    continue;
                }
                if grid.state(Cell::new(r as usize, c as usize)) != CellState::Navigable {
                    let d2 = (dr * dr + dc * dc) as u64;
                    best = Some(best.map_or(d2, |b| b.min(d2)));
                }
            }
        }
        let i = cell.row * cols + cell.col;
        if let Some(d2) = best {
            blocked[i] = (d2 as f64).sqrt() * cs <= radius + 1e-9;
            obstacle_cm[i] = (d2 as f64).sqrt() * cs * 100.0;
        } else if !obstacles.is_empty() {
            // Nearest obstacle is outside the window: beyond both the
            // inflation radius and the 30 cm range, so only "far" matters.
            obstacle_cm[i] = f64::MAX;
        }
    }
    GridOracle { blocked, obstacle_cm }
}

fn nav_target_matches_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut bad = Mismatches::default();
    for g in 0..50 {
        let grid = random_grid(&mut rng, 100);
        let oracle = grid_oracle(&grid);
        for cell in grid.cells() {
            let i = cell.row * grid.cols() + cell.col;
            bad.check(grid.is_blocked(cell) == oracle.blocked[i], || format!("grid {g}: blocking differs at {cell:?}"));
        }
        let extent = Vec2::new(grid.cols() as f64, grid.rows() as f64) * grid.cell_size();
        let object =
            grid.origin() + Vec2::new(rng.random_range(-0.5..extent.x + 0.5), rng.random_range(-0.5..extent.y + 0.5));

        let mut best: Option<(f64, Cell)> = None;
        for cell in grid.cells() {
            let i = cell.row * grid.cols() + cell.col;
            if grid.state(cell) != CellState::Navigable || oracle.blocked[i] {
                continue;
            }
            let object_cm = (grid.center(cell) - object).norm() * 100.0;
            let obstacle_cm = oracle.obstacle_cm[i];
            let s1 = object_cm;
            let s2 = 40.0 - object_cm.min(40.0);
            let s3 = if obstacle_cm <= 30.0 + 1e-9 { 1.0 / obstacle_cm } else { 0.0 };
            let total = s1 + 8.0 * s2 + 8.0 * s3;
            if best.is_none() || total < best.unwrap().0 {
                best = Some((total, cell));
            }
        }
        match (select_nav_target(&grid, object), best) {
            (Ok(t), Some((total, cell))) => bad.check(t.cell == cell && t.score.total == total, || {
                format!("grid {g}: {:?}/{} vs {cell:?}/{total}", t.cell, t.score.total)
            }),
            (Err(NavError::UnreachableTarget), None) => {}
            (got, want) => bad.push(format!("grid {g}: {got:?} vs {want:?}")),
        }
    }

    // Open 5 m floor: the best standing point sits at arm's reach.
    let open = inflate(&ObstacleGrid::filled(50, 50, 0.1, CellState::Navigable), 0.2).unwrap();
    let object = Vec2::new(2.5, 2.5);
    let t = select_nav_target(&open, object).unwrap();
    let d = (t.position - object).norm();
    bad.check((d - NAV_EMPTY_DISTANCE_M).abs() <= NAV_EMPTY_TOL_M, || format!("open floor distance {d}"));
    bad.finish(format!("50 random grids; open-floor distance {d:.3} m"))
}

const STEPS: [(isize, isize); 8] = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)];

fn free_neighbors(grid: &ObstacleGrid, c: Cell) -> Vec<(Cell, f64)> {
    STEPS
        .iter()
        .filter_map(|&(dr, dc)| {
            let (r, col) = (c.row as isize + dr, c.col as isize + dc);
            if r < 0 || col < 0 || r >= grid.rows() as isize || col >= grid.cols() as isize {
                return None;
            }
            let n = Cell::new(r as usize, col as usize);
            (!grid.is_blocked(n)).then(|| (n, if dr != 0 && dc != 0 { 2f64.sqrt() } else { 1.0 }))
        })
        .collect()
}

fn bfs_reachable(grid: &ObstacleGrid, start: Cell) -> HashSet<Cell> {
    let mut seen = HashSet::from([start]);
    let mut queue = VecDeque::from([start]);
    while let Some(c) = queue.pop_front() {
        for (n, _) in free_neighbors(grid, c) {
            if seen.insert(n) {
                queue.push_back(n);
            }
        }
    }
    seen
}

/// Plain Dijkstra over geometric step lengths.
fn dijkstra(grid: &ObstacleGrid, start: Cell, goal: Cell) -> Option<f64> {
    #[derive(PartialEq)]
    struct Key(f64);
    impl Eq for Key {}
    impl PartialOrd for Key {
        fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
            Some(self.cmp(o))
        }
    }
    impl Ord for Key {
        fn cmp(&self, o: &Self) -> std::cmp::Ordering {
            self.0.total_cmp(&o.0)
        }
    }
    let mut dist = std::collections::HashMap::from([(start, 0.0)]);
    let mut heap = BinaryHeap::from([Reverse((Key(0.0), start))]);
    while let Some(Reverse((Key(d), c))) = heap.pop() {
        if c == goal {
            return Some(d);
        }
        if d > dist[&c] {
            continue;
        }
        for (n, step) in free_neighbors(grid, c) {
            let nd = d + step;
            if dist.get(&n).is_none_or(|&old| nd < old) {
                dist.insert(n, nd);
                heap.push(Reverse((Key(nd), n)));
            }
        }
    }
    None
}

fn paths_match_oracles() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut bad = Mismatches::default();
    let (mut reachable, mut unreachable) = (0, 0);
    let mut g = 0;
    while g < 200 {
        let mut raw = random_grid(&mut rng, 60);
        if g % 4 == 0 {
            // A full-height wall separates the grid into two halves.
            let mut walled = ObstacleGrid::new(
                raw.rows(),
                raw.cols(),
                raw.cell_size(),
                raw.origin(),
                vec![CellState::Navigable; raw.rows() * raw.cols()],
            )
            .unwrap();
            for cell in raw.cells() {
                walled.set_state(cell, raw.state(cell));
            }
            let col = raw.cols() / 2;
            for row in 0..raw.rows() {
                walled.set_state(Cell::new(row, col), CellState::Occupied);
            }
            raw = inflate(&walled, raw.inflation_radius().unwrap()).unwrap();
        }
        let grid = raw;
        let free: Vec<Cell> = grid.cells().filter(|&c| !grid.is_blocked(c)).collect();
        if free.len() < 2 {
            continue;
        }
        g += 1;
        let start = *free.choose(&mut rng).unwrap();
        let goal = *free.choose(&mut rng).unwrap();
        let reach = bfs_reachable(&grid, start);
        let fill = flood_fill(&grid, start);
        for cell in grid.cells() {
            let i = cell.row * grid.cols() + cell.col;
            bad.check(fill[i] == reach.contains(&cell), || format!("grid {g}: flood fill differs at {cell:?}"));
        }

        for weight in [0.0, 1.0] {
            let config = PlannerConfig { obstacle_weight: weight };
            match plan_path_with(&grid, start, goal, config) {
                Ok(path) => {
                    bad.check(reach.contains(&goal), || format!("grid {g}: path to an unreachable goal"));
                    let cells = &path.cells;
                    bad.check(cells.first() == Some(&start) && cells.last() == Some(&goal), || {
                        format!("grid {g}: endpoints {:?} -> {:?}", cells.first(), cells.last())
                    });
                    bad.check(cells.iter().all(|&c| grid.is_free(c)), || {
                        format!("grid {g}: path crosses a blocked cell")
                    });
                    bad.check(cells.windows(2).all(|w| w[0].chebyshev(&w[1]) == 1), || {
                        format!("grid {g}: path is not 8-connected")
                    });
                    if weight == 0.0 {
                        let steps: f64 = cells
                            .windows(2)
                            .map(|w| if w[0].row != w[1].row && w[0].col != w[1].col { 2f64.sqrt() } else { 1.0 })
                            .sum();
                        let optimal = dijkstra(&grid, start, goal).unwrap_or(f64::NAN);
                        bad.check((path.cost - optimal).abs() <= PATH_COST_TOL, || {
                            format!("grid {g}: cost {} vs optimal {optimal}", path.cost)
                        });
                        bad.check((steps - path.cost).abs() <= PATH_COST_TOL, || {
                            format!("grid {g}: reported cost {} vs walked {steps}", path.cost)
                        });
                        reachable += 1;
                    }
                }
                Err(NavError::NoPath { .. }) => {
                    bad.check(!reach.contains(&goal), || format!("grid {g}: reachable goal reported unreachable"));
                    if weight == 0.0 {
                        unreachable += 1;
                    }
                }
                Err(e) => bad.push(format!("grid {g}: {e}")),
            }
        }
    }
    bad.finish(format!("200 grids, {reachable} reachable and {unreachable} unreachable pairs"))
}

// --------------------------------------------------------------- grasping

fn random_unit3(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3::new(rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal));
        if v.norm() > 1e-3 {
            return v.normalize();
        }
    }
}

fn proposal(point: Vec3, approach: Vec3, score: f64) -> GraspProposal {
    GraspProposal { point, approach, width: 0.05, height: 0.02, depth: 0.03, score }
}

/// Manual projection: camera coordinates `R^T (p - t)`, pinhole, nearest
/// pixel, bounds.
fn oracle_keeps(p: &Vec3, mask: &RleMask, intr: &CameraIntrinsics, pose: &Pose) -> bool {
    let r = pose.rotation();
    let t = pose.translation();
    let d = [p.x - t.x, p.y - t.y, p.z - t.z];
    let c: Vec<f64> = (0..3).map(|j| r[(0, j)] * d[0] + r[(1, j)] * d[1] + r[(2, j)] * d[2]).collect();
    if c[2] <= 0.0 {
        return false;
    }
    let u = intr.fx * c[0] / c[2] + intr.cx;
    let v = intr.fy * c[1] / c[2] + intr.cy;
    let (pu, pv) = ((u + 0.5).floor(), (v + 0.5).floor());
    if pu < 0.0 || pv < 0.0 || pu >= intr.width as f64 || pv >= intr.height as f64 {
        return false;
    }
    mask.get(pu as u32, pv as u32)
}

fn oracle_tilt(a: &Vec3, n: &Vec3) -> f64 {
    let angle = a.cross(n).norm().atan2(a.dot(n));
    (std::f64::consts::FRAC_PI_2 - angle).abs()
}

fn grasp_matches_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let mut bad = Mismatches::default();
    let up = Vec3::z();
    let mut kept_total = 0;

    for scene in 0..10 {
        let (w, h) = (rng.random_range(32..=128), rng.random_range(32..=128));
        let intr = CameraIntrinsics::centered(rng.random_range(40.0..150.0), w, h).unwrap();
        let eye = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(0.5..1.5));
        let target = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(1.5..3.0), rng.random_range(0.0..0.8));
        let pose = Pose::look_at(eye, target, up).unwrap();
        let mut dense = vec![false; (w * h) as usize];
        for _ in 0..rng.random_range(1..=6) {
            let (x0, y0) = (rng.random_range(0..w), rng.random_range(0..h));
            let (x1, y1) = ((x0 + rng.random_range(1..=w / 2)).min(w), (y0 + rng.random_range(1..=h / 2)).min(h));
            for y in y0..y1 {
                for x in x0..x1 {
                    dense[(y * w + x) as usize] = true;
                }
            }
        }
        let mask = RleMask::from_dense(w, h, &dense);

        let mut proposals = Vec::with_capacity(100);
        for i in 0..100 {
            let point = match i % 10 {
                0..=6 => {
                    let (u, v) = (rng.random_range(0..w), rng.random_range(0..h));
                    let p = backproject_pixel(u, v, rng.random_range(0.3..4.0), &intr, &pose);
                    p + random_unit3(&mut rng) * rng.random_range(0.0..0.01)
                }
                7 | 8 => eye + random_unit3(&mut rng) * rng.random_range(0.1..3.0),
                _ => {
                    // Close to the image border.
                    let u = if rng.random_bool(0.5) { 0 } else { w - 1 };
                    let p = backproject_pixel(u, rng.random_range(0..h), 1.0, &intr, &pose);
                    p + random_unit3(&mut rng) * 0.004
                }
            };
            proposals.push(proposal(point, random_unit3(&mut rng), rng.random_range(0.0..1.0)));
        }
        let got = filter_by_mask(&proposals, &mask, &intr, &pose).unwrap();
        let want: Vec<GraspProposal> =
            proposals.iter().filter(|g| oracle_keeps(&g.point, &mask, &intr, &pose)).cloned().collect();
        kept_total += want.len();
        bad.check(got == want, || format!("scene {scene}: kept {} vs {}", got.len(), want.len()));
    }

    let mut proposals: Vec<GraspProposal> = (0..1000)
        .map(|i| {
            let approach = match i % 5 {
                0 => Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), 0.0).normalize(),
                1 => -up,
                _ => random_unit3(&mut rng),
            };
            let score = if i % 7 == 0 { 0.5 } else { rng.random_range(0.0..1.0) };
            proposal(Vec3::zeros(), approach, score)
        })
        .collect();
    proposals.shuffle(&mut rng);
    let ranking = rank_grasps(&proposals, &up).unwrap();
    let mut prev: Option<(f64, usize)> = None;
    for r in &ranking.ranked {
        let theta = oracle_tilt(&r.proposal.approach, &up);
        let want = r.proposal.score - theta.powi(4) / 10.0;
        bad.check((r.theta - theta).abs() <= TILT_TOL, || format!("tilt {} vs {theta}", r.theta));
        bad.check((r.heuristic_score - want).abs() <= HEURISTIC_TOL, || {
            format!("heuristic {} vs {want}", r.heuristic_score)
        });
        bad.check(proposals[r.index] == r.proposal, || format!("index {} does not point at its proposal", r.index));
        if let Some((h, i)) = prev {
            bad.check(h > r.heuristic_score || (h == r.heuristic_score && i < r.index), || {
                format!("order broken at index {}", r.index)
            });
        }
        prev = Some((r.heuristic_score, r.index));
    }

    let spot = heuristic_score(SPOT_GRASPNESS, std::f64::consts::FRAC_PI_2);
    bad.check((spot - SPOT_EXPECTED).abs() <= SPOT_TOL, || format!("spot value {spot}"));
    let top_down = rank_grasps(&[proposal(Vec3::zeros(), -up, SPOT_GRASPNESS)], &up).unwrap();
    bad.check((top_down.best().heuristic_score - SPOT_EXPECTED).abs() <= SPOT_TOL, || {
        format!("top-down ranked value {}", top_down.best().heuristic_score)
    });

    for pair in 0..100 {
        let s = rng.random_range(0.0..1.0);
        let side = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), 0.0).normalize();
        let r = rank_grasps(&[proposal(Vec3::zeros(), -up, s), proposal(Vec3::zeros(), side, s)], &up).unwrap();
        bad.check(r.best().index == 1, || format!("pair {pair}: vertical approach ranked first"));
    }
    bad.finish(format!("{kept_total} of 1000 proposals kept; 1000 ranked; spot {spot:.6}"))
}

fn trajectory_is_exact() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let mut bad = Mismatches::default();
    for i in 0..100 {
        let p = Vec3::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), rng.random_range(0.0..2.0));
        let a = random_unit3(&mut rng);
        let t = pregrasp_trajectory(&proposal(p, a, 0.5)).unwrap();
        for (w, k) in t.waypoints.iter().zip(PREGRASP_OFFSETS_M) {
            let want = [p.x - k * a.x, p.y - k * a.y, p.z - k * a.z];
            bad.check([w.x, w.y, w.z] == want, || format!("proposal {i}: {w:?} vs {want:?} at offset {k}"));
        }
        bad.check(t.close_gripper, || format!("proposal {i}: gripper stays open"));
    }
    bad.finish("100 trajectories".into())
}

// --------------------------------------------------------------- dropping

/// Sort both axes, take the lower medians, scan for the tallest eligible
/// point.
fn oracle_drop(points: &[Vec3]) -> Result<[f64; 3], DropError> {
    if points.is_empty() {
        return Err(DropError::NoReceptacle);
    }
    let mut xs: Vec<f64> = points.iter().map(|p| p.x).collect();
    let mut ys: Vec<f64> = points.iter().map(|p| p.y).collect();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ys.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let (xm, ym) = (xs[(xs.len() - 1) / 2], ys[(ys.len() - 1) / 2]);
    let mut top = f64::NEG_INFINITY;
    for p in points {
        if p.x >= 0.0 && p.x <= xm && (p.y - ym).abs() < DROP_HALF_WIDTH_M && p.z > top {
            top = p.z;
        }
    }
    if top == f64::NEG_INFINITY {
        return Err(DropError::DegenerateReceptacle);
    }
    Ok([xm, ym, DROP_BUFFER_M + top])
}

fn drop_matches_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let mut bad = Mismatches::default();
    let mut degenerate = 0;
    for c in 0..100 {
        let n = if c % 25 == 0 { 10_000 } else { rng.random_range(1..=10_000) };
        let spread_y = if c % 3 == 0 { 0.05 } else { 1.0 };
        let x0 = if c % 10 == 9 { -2.0 } else { -0.5 };
        let points: Vec<Vec3> = (0..n)
            .map(|_| {
                Vec3::new(rng.random_range(x0..2.0), rng.random_range(-spread_y..spread_y), rng.random_range(0.0..1.5))
            })
            .collect();
        let got = compute_drop(&AlignedCloud { points: points.clone() }).map(|d| d.as_array());
        let want = oracle_drop(&points);
        if want.is_err() {
            degenerate += 1;
        }
        bad.check(got == want, || format!("cloud {c} ({n} points): {got:?} vs {want:?}"));
    }

    // One point entirely behind the robot: nothing eligible.
    let behind = compute_drop(&AlignedCloud { points: vec![Vec3::new(-0.5, 0.0, 0.3)] });
    bad.check(behind == Err(DropError::DegenerateReceptacle), || format!("behind robot: {behind:?}"));
    let empty = compute_drop(&AlignedCloud { points: vec![] });
    bad.check(empty == Err(DropError::NoReceptacle), || format!("empty cloud: {empty:?}"));

    let three = compute_drop(&AlignedCloud {
        points: vec![Vec3::new(0.2, 0.0, 0.7), Vec3::new(0.4, 0.0, 0.75), Vec3::new(0.6, 0.0, 0.8)],
    })
    .unwrap();
    bad.check(three.as_array() == [0.4, 0.0, 0.95], || format!("three-point example: {three:?}"));

    // Sink: rim at 0.9 m around a basin whose bottom is at 0.5 m.
    let mut sink = Vec::new();
    for i in 0..=20 {
        for j in 0..=20 {
            let (x, y) = (0.3 + i as f64 * 0.03, -0.3 + j as f64 * 0.03);
            let rim = i == 0 || i == 20 || j == 0 || j == 20;
            sink.push(Vec3::new(x, y, if rim { 0.9 } else { 0.5 }));
        }
    }
    let d = compute_drop(&AlignedCloud { points: sink.clone() }).unwrap();
    bad.check(d.z_max == DROP_BUFFER_M + 0.9, || format!("sink release {} below the rim", d.z_max));
    bad.check(d.as_array() == oracle_drop(&sink).unwrap(), || format!("sink: {d:?}"));
    bad.finish(format!("100 random clouds ({degenerate} degenerate); sink release {:.2} m", d.z_max))
}

// ------------------------------------------------------------- end to end

fn run_apartment(seed: u64) -> Result<(bool, bool, String), String> {
    let apt = random_apartment(seed);
    let world = SyntheticWorld::new(apt.spec, seed).map_err(|e| e.to_string())?;
    let scan = world.generate_scan().map_err(|e| e.to_string())?;
    let (map, grid) = build_map(&scan).map_err(|e| e.to_string())?;
    let providers = Providers { embedder: world.vocabulary(), camera: &world, grasper: &world, segmenter: &world };
    let report = run_task(&map, &grid, &apt.task, providers, &TaskConfig::default());
    let grounded = report.navigate_to_object.as_ref().is_some_and(|nav| {
        world.ground_truth().entity(&apt.task.pick_query).is_some_and(|t| t.near(&nav.query.position, map.voxel_size()))
    });
    Ok((report.completed_stages() == 4, grounded, report.to_json()))
}

fn end_to_end() -> Check {
    let start = Instant::now();
    let mut bad = Mismatches::default();
    let mut completed = 0;
    let mut grounded = 0;
    let mut first = Vec::new();
    for seed in 0..E2E_SCENES {
        match catch_unwind(AssertUnwindSafe(|| run_apartment(seed))) {
            Ok(Ok((done, on_target, json))) => {
                completed += done as usize;
                grounded += on_target as usize;
                first.push(Some(json));
            }
            Ok(Err(e)) => {
                bad.push(format!("seed {seed}: {e}"));
                first.push(None);
            }
            Err(p) => {
                bad.push(format!("seed {seed} panicked: {}", panic_message(&p)));
                first.push(None);
            }
        }
    }
    let mut identical = 0;
    for (seed, json) in first.iter().enumerate() {
        let Some(json) = json else { continue };
        match catch_unwind(AssertUnwindSafe(|| run_apartment(seed as u64))) {
            Ok(Ok((_, _, again))) if &again == json => identical += 1,
            _ => bad.push(format!("seed {seed}: report differs on regeneration")),
        }
    }
    let elapsed = start.elapsed();
    bad.check(completed >= E2E_MIN_COMPLETED, || format!("only {completed} tasks completed"));
    bad.check(elapsed < E2E_TIME_LIMIT, || format!("took {elapsed:?}"));
    bad.finish(format!(
        "{completed}/{E2E_SCENES} completed all four stages, {grounded} grounded on the true object, \
         {identical} reproduced byte-for-byte, {:.1}s for both passes",
        elapsed.as_secs_f64()
    ))
}

fn build_performance() -> Check {
    let mut bad = Mismatches::default();
    let mut spec = random_apartment(1000).spec;
    spec.camera.width = BUILD_SIZE.0;
    spec.camera.height = BUILD_SIZE.1;
    spec.camera.frames = BUILD_FRAMES;
    let world = SyntheticWorld::new(spec, 1000).unwrap();
    let scan = world.generate_scan().unwrap();
    bad.check(scan.len() == BUILD_FRAMES, || format!("{} frames", scan.len()));

    let start = Instant::now();
    let (map, _) = build_map(&scan).unwrap();
    let elapsed = start.elapsed();
    bad.check(elapsed < BUILD_TIME_LIMIT, || format!("build took {elapsed:?}"));

    let bytes = map.to_bytes().unwrap();
    let restored = VoxelMap::read_from(bytes.as_slice()).unwrap();
    let same = restored.voxel_size() == map.voxel_size()
        && restored.dim() == map.dim()
        && restored.entries().eq(map.entries())
        && restored.geometry_voxels() == map.geometry_voxels();
    bad.check(same, || "restored map differs".into());
    bad.check(restored.to_bytes().unwrap() == bytes, || "re-serialized bytes differ".into());
    bad.finish(format!(
        "{} frames at {}x{} built in {:.2}s, {} voxels, {} bytes round-tripped",
        scan.len(),
        BUILD_SIZE.0,
        BUILD_SIZE.1,
        elapsed.as_secs_f64(),
        map.len(),
        bytes.len()
    ))
}
