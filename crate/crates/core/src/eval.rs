//! BEV rasterization, collision rates, L2 metric, and solve-time
//! aggregation.
//!
//! Cell membership is decided by center-point sampling: a cell is occupied
//! iff its center lies strictly inside an oriented rectangle, or within half
//! a cell (plus a 1e-9 snap tolerance) of a stroked polyline. Curbs are
//! stroked one cell wide.

use crate::dynamics::EgoState;
use crate::geometry::{OrientedRect, Vec2};
use crate::scene::{point_segment_distance, Scene, SceneError};
use serde::{Deserialize, Serialize};
use std::fmt;

const STROKE_SNAP: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum EvalError {
    LengthMismatch { expected: usize, got: usize },
    InvalidInput(String),
    Scene(SceneError),
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalError::LengthMismatch { expected, got } => {
                write!(f, "length mismatch: expected {expected}, got {got}")
            }
            EvalError::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
            EvalError::Scene(e) => write!(f, "scene error: {e}"),
        }
    }
}

impl std::error::Error for EvalError {}

impl From<SceneError> for EvalError {
    fn from(e: SceneError) -> Self {
        EvalError::Scene(e)
    }
}

/// Grid geometry: resolution and full extents, centered on `center`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub resolution: f64,
    pub x_extent: f64,
    pub y_extent: f64,
    pub center: Vec2,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            resolution: 0.1,
            x_extent: 60.0,
            y_extent: 30.0,
            center: Vec2::ZERO,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<(), EvalError> {
        if !(self.resolution > 0.0) || !(self.x_extent > 0.0) || !(self.y_extent > 0.0) {
            return Err(EvalError::InvalidInput(
                "grid resolution and extents must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn width(&self) -> usize {
        (self.x_extent / self.resolution).round() as usize
    }

    pub fn height(&self) -> usize {
        (self.y_extent / self.resolution).round() as usize
    }

    fn origin(&self) -> Vec2 {
        Vec2::new(
            self.center.x - 0.5 * self.x_extent,
            self.center.y - 0.5 * self.y_extent,
        )
    }

    pub fn cell_center(&self, col: usize, row: usize) -> Vec2 {
        let o = self.origin();
        Vec2::new(
            o.x + (col as f64 + 0.5) * self.resolution,
            o.y + (row as f64 + 0.5) * self.resolution,
        )
    }

    fn col_range(&self, x_min: f64, x_max: f64) -> (usize, usize) {
        let o = self.origin();
        let lo = ((x_min - o.x) / self.resolution).floor().max(0.0) as usize;
        let hi = (((x_max - o.x) / self.resolution).ceil() as usize).min(self.width());
        (lo.min(self.width()), hi)
    }

    fn row_range(&self, y_min: f64, y_max: f64) -> (usize, usize) {
        let o = self.origin();
        let lo = ((y_min - o.y) / self.resolution).floor().max(0.0) as usize;
        let hi = (((y_max - o.y) / self.resolution).ceil() as usize).min(self.height());
        (lo.min(self.height()), hi)
    }
}

/// Boolean occupancy raster, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct BevGrid {
    pub spec: GridSpec,
    pub cells: Vec<bool>,
}

impl BevGrid {
    pub fn empty(spec: GridSpec) -> Self {
        BevGrid {
            cells: vec![false; spec.width() * spec.height()],
            spec,
        }
    }

    fn idx(&self, col: usize, row: usize) -> usize {
        row * self.spec.width() + col
    }

    pub fn occupied_count(&self) -> usize {
        self.cells.iter().filter(|c| **c).count()
    }

    pub fn intersects(&self, other: &BevGrid) -> bool {
        debug_assert_eq!(self.cells.len(), other.cells.len());
        self.cells
            .iter()
            .zip(&other.cells)
            .any(|(a, b)| *a && *b)
    }

    fn mark_rect(&mut self, rect: &OrientedRect) {
        let vs = crate::geometry::rect_vertices(rect);
        let x_min = vs.iter().map(|v| v.x).fold(f64::INFINITY, f64::min);
        let x_max = vs.iter().map(|v| v.x).fold(f64::NEG_INFINITY, f64::max);
        let y_min = vs.iter().map(|v| v.y).fold(f64::INFINITY, f64::min);
        let y_max = vs.iter().map(|v| v.y).fold(f64::NEG_INFINITY, f64::max);
        let (c0, c1) = self.spec.col_range(x_min, x_max);
        let (r0, r1) = self.spec.row_range(y_min, y_max);
        let hl = 0.5 * rect.l;
        let hw = 0.5 * rect.w;
        for row in r0..r1 {
            for col in c0..c1 {
                let p = rect.to_frame(self.spec.cell_center(col, row));
                // strict interior test; boundary cells stay free
                if p.x.abs() < hl && p.y.abs() < hw {
                    let i = self.idx(col, row);
                    self.cells[i] = true;
                }
            }
        }
    }

    fn mark_polyline(&mut self, polyline: &[Vec2]) {
        let half = 0.5 * self.spec.resolution + STROKE_SNAP;
        for seg in polyline.windows(2) {
            let x_min = seg[0].x.min(seg[1].x) - half;
            let x_max = seg[0].x.max(seg[1].x) + half;
            let y_min = seg[0].y.min(seg[1].y) - half;
            let y_max = seg[0].y.max(seg[1].y) + half;
            let (c0, c1) = self.spec.col_range(x_min, x_max);
            let (r0, r1) = self.spec.row_range(y_min, y_max);
            for row in r0..r1 {
                for col in c0..c1 {
                    let p = self.spec.cell_center(col, row);
                    if point_segment_distance(p, seg[0], seg[1]) <= half {
                        let i = self.idx(col, row);
                        self.cells[i] = true;
                    }
                }
            }
        }
    }
}

/// Shapes accepted by the rasterizer. Polylines are stroked one cell wide.
#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    Rect(OrientedRect),
    Polyline(Vec<Vec2>),
}

/// Rasterize shapes onto a fresh grid. Shapes outside the extent are
/// clipped.
pub fn rasterize(shapes: &[Shape], spec: GridSpec) -> Result<BevGrid, EvalError> {
    spec.validate()?;
    let mut grid = BevGrid::empty(spec);
    for shape in shapes {
        match shape {
            Shape::Rect(r) => grid.mark_rect(r),
            Shape::Polyline(p) => grid.mark_polyline(p),
        }
    }
    Ok(grid)
}

/// Per-timestep collision flags of a planning-frame trajectory against the
/// scene's agents and curbs, via rasterized overlap at the grid resolution.
///
/// The scene is transformed into the planning frame (ego pose at `t = 0`)
/// before rasterization. Lane dividers are not collision objects.
pub fn collision_rates(
    traj: &[EgoState],
    footprint: &crate::geometry::EgoFootprint,
    scene: &Scene,
    spec: GridSpec,
) -> Result<(Vec<bool>, Vec<bool>), EvalError> {
    spec.validate()?;
    let origin = scene.ego_state_at(0.0)?;
    let to_planning = |p: Vec2| (p - origin.position()).rotated(-origin.theta);

    let curb_shapes: Vec<Shape> = scene
        .curbs
        .iter()
        .map(|curb| Shape::Polyline(curb.iter().map(|p| to_planning(*p)).collect()))
        .collect();
    let curb_grid = rasterize(&curb_shapes, spec)?;

    let mut agent_hits = Vec::with_capacity(traj.len());
    let mut curb_hits = Vec::with_capacity(traj.len());
    for (i, state) in traj.iter().enumerate() {
        let t = (i + 1) as f64 * scene.dt;
        let ego_rect = OrientedRect {
            cx: state.px,
            cy: state.py,
            theta: state.theta,
            l: 2.0 * footprint.half_length,
            w: 2.0 * footprint.half_width,
        };
        let ego_grid = rasterize(&[Shape::Rect(ego_rect)], spec)?;

        let agent_shapes: Vec<Shape> = scene
            .agents
            .iter()
            .map(|a| {
                let r = a.rect_at(t);
                let c = to_planning(r.center());
                Shape::Rect(OrientedRect {
                    cx: c.x,
                    cy: c.y,
                    theta: crate::geometry::wrap_angle(r.theta - origin.theta),
                    l: r.l,
                    w: r.w,
                })
            })
            .collect();
        let agent_grid = rasterize(&agent_shapes, spec)?;

        agent_hits.push(ego_grid.intersects(&agent_grid));
        curb_hits.push(ego_grid.intersects(&curb_grid));
    }
    Ok((agent_hits, curb_hits))
}

/// Per-timestep Euclidean position error and its mean.
pub fn l2_metric(traj: &[EgoState], gt: &[EgoState]) -> Result<(Vec<f64>, f64), EvalError> {
    if traj.len() != gt.len() {
        return Err(EvalError::LengthMismatch {
            expected: gt.len(),
            got: traj.len(),
        });
    }
    if traj.is_empty() {
        return Err(EvalError::InvalidInput("empty trajectory".into()));
    }
    let per_t: Vec<f64> = traj
        .iter()
        .zip(gt)
        .map(|(a, b)| (a.position() - b.position()).norm())
        .collect();
    let avg = per_t.iter().sum::<f64>() / per_t.len() as f64;
    Ok((per_t, avg))
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SolveTimeStats {
    pub count: usize,
    pub mean_s: f64,
    pub median_s: f64,
    pub p95_s: f64,
    pub max_s: f64,
}

impl SolveTimeStats {
    pub fn from_samples(samples: &[f64]) -> Self {
        if samples.is_empty() {
            return SolveTimeStats::default();
        }
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        let percentile = |q: f64| -> f64 {
            let pos = q * (sorted.len() - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            let frac = pos - lo as f64;
            sorted[lo] * (1.0 - frac) + sorted[hi] * frac
        };
        SolveTimeStats {
            count: sorted.len(),
            mean_s: sorted.iter().sum::<f64>() / sorted.len() as f64,
            median_s: percentile(0.5),
            p95_s: percentile(0.95),
            max_s: *sorted.last().unwrap(),
        }
    }
}

/// Aggregated metrics over a batch of scenes.
///
/// `acr_per_t[k]` / `ccr_per_t[k]` are the fractions of trajectories with
/// any agent / curb collision at steps `<= k+1` (cumulative, matching the
/// any-timestamp trajectory rule). The `_avg` values average the rates at
/// the 1 s / 2 s / 3 s horizons (steps 2, 4, 6). `l2_per_t` is the mean
/// per-step error; `l2_avg` averages the time-averaged error at the same
/// three horizons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub acr_per_t: Vec<f64>,
    pub ccr_per_t: Vec<f64>,
    pub acr_avg: f64,
    pub ccr_avg: f64,
    pub l2_per_t: Vec<f64>,
    pub l2_avg: f64,
    pub solve_time_stats: SolveTimeStats,
}

/// Order-independent accumulator for [`MetricsReport`].
#[derive(Debug, Clone, Default)]
pub struct MetricsAccumulator {
    horizon: usize,
    scenes: usize,
    agent_cum_hits: Vec<usize>,
    curb_cum_hits: Vec<usize>,
    l2_sums: Vec<f64>,
    solve_times: Vec<f64>,
}

impl MetricsAccumulator {
    pub fn new(horizon: usize) -> Self {
        MetricsAccumulator {
            horizon,
            scenes: 0,
            agent_cum_hits: vec![0; horizon],
            curb_cum_hits: vec![0; horizon],
            l2_sums: vec![0.0; horizon],
            solve_times: Vec::new(),
        }
    }

    pub fn add_scene(
        &mut self,
        agent_hits: &[bool],
        curb_hits: &[bool],
        l2_per_t: &[f64],
        solve_time: f64,
    ) -> Result<(), EvalError> {
        for (name, len) in [
            ("agent flags", agent_hits.len()),
            ("curb flags", curb_hits.len()),
            ("l2", l2_per_t.len()),
        ] {
            if len != self.horizon {
                return Err(EvalError::InvalidInput(format!(
                    "{name} has length {len}, expected {}",
                    self.horizon
                )));
            }
        }
        self.scenes += 1;
        let mut agent_any = false;
        let mut curb_any = false;
        for k in 0..self.horizon {
            agent_any |= agent_hits[k];
            curb_any |= curb_hits[k];
            if agent_any {
                self.agent_cum_hits[k] += 1;
            }
            if curb_any {
                self.curb_cum_hits[k] += 1;
            }
            self.l2_sums[k] += l2_per_t[k];
        }
        self.solve_times.push(solve_time);
        Ok(())
    }

    /// Steps reported as the 1 s / 2 s / 3 s horizons for a 0.5 s grid,
    /// clamped into range for short horizons.
    fn horizon_steps(&self) -> Vec<usize> {
        let mut steps: Vec<usize> = [2usize, 4, 6]
            .iter()
            .map(|s| (*s).min(self.horizon))
            .collect();
        steps.dedup();
        steps
    }

    pub fn report(&self) -> MetricsReport {
        let n = self.scenes.max(1) as f64;
        let acr_per_t: Vec<f64> = self.agent_cum_hits.iter().map(|h| *h as f64 / n).collect();
        let ccr_per_t: Vec<f64> = self.curb_cum_hits.iter().map(|h| *h as f64 / n).collect();
        let l2_per_t: Vec<f64> = self.l2_sums.iter().map(|s| s / n).collect();
        let steps = self.horizon_steps();
        let avg_at = |per_t: &[f64]| -> f64 {
            if steps.is_empty() {
                return 0.0;
            }
            steps.iter().map(|&s| per_t[s - 1]).sum::<f64>() / steps.len() as f64
        };
        // time-averaged L2 up to each horizon, then averaged across horizons
        let l2_avg = if steps.is_empty() {
            0.0
        } else {
            steps
                .iter()
                .map(|&s| l2_per_t[..s].iter().sum::<f64>() / s as f64)
                .sum::<f64>()
                / steps.len() as f64
        };
        MetricsReport {
            acr_avg: avg_at(&acr_per_t),
            ccr_avg: avg_at(&ccr_per_t),
            acr_per_t,
            ccr_per_t,
            l2_per_t,
            l2_avg,
            solve_time_stats: SolveTimeStats::from_samples(&self.solve_times),
        }
    }
}
