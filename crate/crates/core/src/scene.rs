//! Scene data model, deterministic synthetic scenario generator, obstacle
//! point extraction, and frame transforms.
//!
//! A [`Scene`] is the single ground-truth container consumed by both the
//! annotator and the evaluator. Scenes serialize to JSON with SI units and
//! radian angles; unknown keys are rejected.

use crate::dynamics::{step, Control, EgoState};
use crate::geometry::{angle_diff, wrap_angle, EgoFootprint, OrientedRect, Vec2};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum SceneError {
    InvalidInput(String),
    UnknownKind(String),
    TimeOutOfRange { t: f64, lo: f64, hi: f64 },
}

impl fmt::Display for SceneError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SceneError::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
            SceneError::UnknownKind(k) => write!(f, "unknown scenario kind: {k}"),
            SceneError::TimeOutOfRange { t, lo, hi } => {
                write!(f, "time {t} outside covered range [{lo}, {hi}]")
            }
        }
    }
}

impl std::error::Error for SceneError {}

/// Timestamped ego sample from the driving log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EgoLogEntry {
    pub t: f64,
    pub px: f64,
    pub py: f64,
    pub theta: f64,
    pub v: f64,
}

impl EgoLogEntry {
    pub fn state(&self) -> EgoState {
        EgoState {
            px: self.px,
            py: self.py,
            theta: self.theta,
            v: self.v,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentPose {
    pub t: f64,
    pub px: f64,
    pub py: f64,
    pub theta: f64,
}

/// A tracked traffic participant with its bounding-box half-dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentTrack {
    pub id: String,
    pub half_length: f64,
    pub half_width: f64,
    pub poses: Vec<AgentPose>,
}

impl AgentTrack {
    /// Pose at time `t`: linear in position, shortest-arc in heading,
    /// clamped to the track endpoints outside coverage. Exact stored
    /// timestamps are returned verbatim.
    pub fn pose_at(&self, t: f64) -> (Vec2, f64) {
        let (p, q, alpha) = interp_bracket(&self.poses, t, |p| p.t);
        if alpha == 0.0 {
            return (Vec2::new(p.px, p.py), p.theta);
        }
        let pos = Vec2::new(
            p.px + (q.px - p.px) * alpha,
            p.py + (q.py - p.py) * alpha,
        );
        let theta = wrap_angle(p.theta + angle_diff(q.theta, p.theta) * alpha);
        (pos, theta)
    }

    /// Oriented bounding box at time `t`.
    pub fn rect_at(&self, t: f64) -> OrientedRect {
        let (pos, theta) = self.pose_at(t);
        OrientedRect {
            cx: pos.x,
            cy: pos.y,
            theta,
            l: 2.0 * self.half_length,
            w: 2.0 * self.half_width,
        }
    }
}

fn interp_bracket<T: Copy>(items: &[T], t: f64, key: impl Fn(&T) -> f64) -> (T, T, f64) {
    debug_assert!(!items.is_empty());
    if t <= key(&items[0]) {
        return (items[0], items[0], 0.0);
    }
    if t >= key(items.last().unwrap()) {
        let last = *items.last().unwrap();
        return (last, last, 0.0);
    }
    let idx = items.partition_point(|it| key(it) < t);
    // exact hit returns the stored sample bit-for-bit
    if key(&items[idx]) == t {
        return (items[idx], items[idx], 0.0);
    }
    let a = items[idx - 1];
    let b = items[idx];
    let alpha = (t - key(&a)) / (key(&b) - key(&a));
    (a, b, alpha)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObstacleTag {
    Agent,
    Curb,
    Lane,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaggedPoint {
    pub p: Vec2,
    pub tag: ObstacleTag,
}

/// The sampled obstacle points for one timestamp.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ObstaclePointSet {
    pub points: Vec<TaggedPoint>,
}

impl ObstaclePointSet {
    pub fn positions(&self) -> Vec<Vec2> {
        self.points.iter().map(|tp| tp.p).collect()
    }

    pub fn positions_tagged(&self, tag: ObstacleTag) -> Vec<Vec2> {
        self.points
            .iter()
            .filter(|tp| tp.tag == tag)
            .map(|tp| tp.p)
            .collect()
    }
}

/// Ground-truth world: ego log, agents, curbs, lane dividers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scene {
    pub dt: f64,
    pub horizon: u32,
    pub wheelbase: f64,
    pub ego_log: Vec<EgoLogEntry>,
    pub agents: Vec<AgentTrack>,
    pub curbs: Vec<Vec<Vec2>>,
    pub lanes: Vec<Vec<Vec2>>,
    pub footprint: EgoFootprint,
}

impl Scene {
    /// Check the structural invariants: positive `dt`, `horizon >= 1`,
    /// strictly increasing timestamps, a `t = 0` entry, coverage of the
    /// planning horizon, and positive dimensions.
    pub fn validate(&self) -> Result<(), SceneError> {
        if !(self.dt > 0.0) {
            return Err(SceneError::InvalidInput(format!("dt={} must be > 0", self.dt)));
        }
        if self.horizon < 1 {
            return Err(SceneError::InvalidInput("horizon must be >= 1".into()));
        }
        if !(self.wheelbase > 0.0) {
            return Err(SceneError::InvalidInput("wheelbase must be > 0".into()));
        }
        if self.ego_log.is_empty() {
            return Err(SceneError::InvalidInput("ego_log is empty".into()));
        }
        for pair in self.ego_log.windows(2) {
            if !(pair[1].t > pair[0].t) {
                return Err(SceneError::InvalidInput(
                    "ego_log timestamps must be strictly increasing".into(),
                ));
            }
        }
        if !self.ego_log.iter().any(|e| e.t == 0.0) {
            return Err(SceneError::InvalidInput("ego_log must include t=0".into()));
        }
        let t_end = self.horizon as f64 * self.dt;
        let lo = self.ego_log[0].t;
        let hi = self.ego_log.last().unwrap().t;
        if lo > -5.0 + 1e-9 || hi < t_end - 1e-9 {
            return Err(SceneError::InvalidInput(format!(
                "ego_log must cover [-5, {t_end}], got [{lo}, {hi}]"
            )));
        }
        for a in &self.agents {
            if !(a.half_length > 0.0) || !(a.half_width > 0.0) {
                return Err(SceneError::InvalidInput(format!(
                    "agent {} has non-positive dimensions",
                    a.id
                )));
            }
            if a.poses.is_empty() {
                return Err(SceneError::InvalidInput(format!("agent {} has no poses", a.id)));
            }
            for pair in a.poses.windows(2) {
                if !(pair[1].t > pair[0].t) {
                    return Err(SceneError::InvalidInput(format!(
                        "agent {} pose timestamps must be strictly increasing",
                        a.id
                    )));
                }
            }
        }
        EgoFootprint::new(self.footprint.half_length, self.footprint.half_width)
            .map_err(|e| SceneError::InvalidInput(e.to_string()))?;
        Ok(())
    }

    pub fn log_span(&self) -> (f64, f64) {
        (self.ego_log[0].t, self.ego_log.last().unwrap().t)
    }

    /// Interpolated ego state at time `t` (linear position and speed,
    /// shortest-arc heading). Errors outside the log span.
    pub fn ego_state_at(&self, t: f64) -> Result<EgoState, SceneError> {
        let (lo, hi) = self.log_span();
        if t < lo - 1e-9 || t > hi + 1e-9 {
            return Err(SceneError::TimeOutOfRange { t, lo, hi });
        }
        let (a, b, alpha) = interp_bracket(&self.ego_log, t, |e| e.t);
        if alpha == 0.0 {
            return Ok(a.state());
        }
        Ok(EgoState {
            px: a.px + (b.px - a.px) * alpha,
            py: a.py + (b.py - a.py) * alpha,
            theta: wrap_angle(a.theta + angle_diff(b.theta, a.theta) * alpha),
            v: a.v + (b.v - a.v) * alpha,
        })
    }

    /// Ego states at the future planning timestamps `t = dt .. horizon*dt`.
    pub fn future_states(&self) -> Result<Vec<EgoState>, SceneError> {
        (1..=self.horizon)
            .map(|k| self.ego_state_at(k as f64 * self.dt))
            .collect()
    }
}

/// Sample points along a polyline with spacing at most `delta_obs`,
/// keeping every original vertex. Sampling is arc-length uniform per
/// segment, so it is deterministic.
pub fn sample_contour(
    polyline: &[Vec2],
    closed: bool,
    delta_obs: f64,
) -> Result<Vec<Vec2>, SceneError> {
    if polyline.len() < 2 {
        return Err(SceneError::InvalidInput(
            "polyline needs at least two points".into(),
        ));
    }
    if !(delta_obs > 0.0) {
        return Err(SceneError::InvalidInput("delta_obs must be > 0".into()));
    }
    let n = polyline.len();
    let seg_count = if closed { n } else { n - 1 };
    let mut out: Vec<Vec2> = Vec::new();
    out.push(polyline[0]);
    for s in 0..seg_count {
        let a = polyline[s];
        let b = polyline[(s + 1) % n];
        let len = (b - a).norm();
        let subdiv = ((len / delta_obs).ceil() as usize).max(1);
        let last_k = if closed && s == seg_count - 1 {
            subdiv - 1 // the wrap point duplicates the first vertex
        } else {
            subdiv
        };
        for k in 1..=last_k {
            let p = a + (b - a) * (k as f64 / subdiv as f64);
            if out.last() != Some(&p) {
                out.push(p);
            }
        }
    }
    Ok(out)
}

fn seg_seg_intersect(a1: Vec2, a2: Vec2, b1: Vec2, b2: Vec2) -> bool {
    let d1 = a2 - a1;
    let d2 = b2 - b1;
    let denom = d1.x * d2.y - d1.y * d2.x;
    let diff = b1 - a1;
    if denom.abs() < 1e-12 {
        return false; // parallel; proximity handled by the distance test
    }
    let t = (diff.x * d2.y - diff.y * d2.x) / denom;
    let u = (diff.x * d1.y - diff.y * d1.x) / denom;
    (0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&u)
}

/// Distance from point `p` to segment `ab`.
pub fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let d = b - a;
    let len2 = d.dot(d);
    if len2 <= 0.0 {
        return (p - a).norm();
    }
    let t = ((p - a).dot(d) / len2).clamp(0.0, 1.0);
    (p - (a + d * t)).norm()
}

fn seg_seg_distance(a1: Vec2, a2: Vec2, b1: Vec2, b2: Vec2) -> f64 {
    if seg_seg_intersect(a1, a2, b1, b2) {
        return 0.0;
    }
    point_segment_distance(a1, b1, b2)
        .min(point_segment_distance(a2, b1, b2))
        .min(point_segment_distance(b1, a1, a2))
        .min(point_segment_distance(b2, a1, a2))
}

/// Margin below which a lane counts as overlapped by the ego path even
/// without a strict crossing.
pub const LANE_OVERLAP_MARGIN: f64 = 0.25;

/// Keep the lane polylines that the ego trajectory over `t_interval` does
/// not overlap: a lane is discarded iff some ego path segment crosses it or
/// comes within [`LANE_OVERLAP_MARGIN`].
pub fn lane_filter(scene: &Scene, t_interval: (f64, f64)) -> Result<Vec<Vec<Vec2>>, SceneError> {
    let (t0, t1) = t_interval;
    if !(t1 > t0) {
        return Err(SceneError::InvalidInput("empty ego interval".into()));
    }
    // ego path polyline over the interval, densified at the log entries
    let mut path: Vec<Vec2> = Vec::new();
    let s0 = scene.ego_state_at(t0)?;
    path.push(s0.position());
    for e in &scene.ego_log {
        if e.t > t0 && e.t < t1 {
            path.push(Vec2::new(e.px, e.py));
        }
    }
    let s1 = scene.ego_state_at(t1)?;
    path.push(s1.position());
    path.dedup_by(|a, b| (*a - *b).norm() < 1e-12);

    let mut retained = Vec::new();
    'lanes: for lane in &scene.lanes {
        if lane.len() >= 2 && path.len() >= 2 {
            for ls in lane.windows(2) {
                for ps in path.windows(2) {
                    if seg_seg_distance(ps[0], ps[1], ls[0], ls[1]) <= LANE_OVERLAP_MARGIN {
                        continue 'lanes;
                    }
                }
            }
        }
        retained.push(lane.clone());
    }
    Ok(retained)
}

/// Extract the world-frame obstacle point set at time `t`: agent box
/// contours interpolated at `t`, curb polylines, and the retained lanes,
/// all sampled with `delta_obs`.
pub fn obstacle_points_at(
    scene: &Scene,
    t: f64,
    delta_obs: f64,
    retained_lanes: &[Vec<Vec2>],
) -> Result<ObstaclePointSet, SceneError> {
    let mut set = ObstaclePointSet::default();
    for agent in &scene.agents {
        let rect = agent.rect_at(t);
        let corners = crate::geometry::rect_vertices(&rect);
        for p in sample_contour(&corners, true, delta_obs)? {
            set.points.push(TaggedPoint {
                p,
                tag: ObstacleTag::Agent,
            });
        }
    }
    for curb in &scene.curbs {
        for p in sample_contour(curb, false, delta_obs)? {
            set.points.push(TaggedPoint {
                p,
                tag: ObstacleTag::Curb,
            });
        }
    }
    for lane in retained_lanes {
        for p in sample_contour(lane, false, delta_obs)? {
            set.points.push(TaggedPoint {
                p,
                tag: ObstacleTag::Lane,
            });
        }
    }
    Ok(set)
}

/// `p_local = R(-theta) (p_world - origin)` for each point.
pub fn to_local_frame(points: &[Vec2], pose: (f64, f64, f64)) -> Vec<Vec2> {
    let origin = Vec2::new(pose.0, pose.1);
    points
        .iter()
        .map(|p| (*p - origin).rotated(-pose.2))
        .collect()
}

/// Inverse frame transform of [`to_local_frame`].
pub fn to_world_frame(points: &[Vec2], pose: (f64, f64, f64)) -> Vec<Vec2> {
    let origin = Vec2::new(pose.0, pose.1);
    points.iter().map(|p| p.rotated(pose.2) + origin).collect()
}

/// Synthetic scenario families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SceneKind {
    Straight,
    Turn,
    CutIn,
    Narrow,
}

impl SceneKind {
    pub fn parse(name: &str) -> Result<Self, SceneError> {
        match name {
            "straight" => Ok(SceneKind::Straight),
            "turn" => Ok(SceneKind::Turn),
            "cut-in" => Ok(SceneKind::CutIn),
            "narrow" => Ok(SceneKind::Narrow),
            other => Err(SceneError::UnknownKind(other.to_string())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SceneKind::Straight => "straight",
            SceneKind::Turn => "turn",
            SceneKind::CutIn => "cut-in",
            SceneKind::Narrow => "narrow",
        }
    }
}

const GEN_DT: f64 = 0.5;
const GEN_HORIZON: u32 = 6;
const GEN_WHEELBASE: f64 = 2.5;
const GEN_LOG_START: f64 = -5.0;
const GEN_LOG_END: f64 = 5.0;

/// Deterministic desk-scale scenario generator. The ego log is produced by
/// stepping the bicycle model, so it is kinematically consistent by
/// construction, and no agent overlaps the ego pose at `t = 0`.
pub fn gen_scene(seed: u64, kind: SceneKind) -> Scene {
    let stream = match kind {
        SceneKind::Straight => 1u64,
        SceneKind::Turn => 2,
        SceneKind::CutIn => 3,
        SceneKind::Narrow => 4,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e3779b97f4a7c15) ^ stream);
    let scene = match kind {
        SceneKind::Straight => gen_straight(&mut rng, false),
        SceneKind::CutIn => gen_straight(&mut rng, true),
        SceneKind::Turn => gen_turn(&mut rng),
        SceneKind::Narrow => gen_narrow(&mut rng),
    };
    debug_assert!(scene.validate().is_ok());
    debug_assert!(no_agent_on_initial_pose(&scene));
    scene
}

fn no_agent_on_initial_pose(scene: &Scene) -> bool {
    let ego = scene.ego_state_at(0.0).unwrap();
    scene.agents.iter().all(|a| {
        let (pos, _) = a.pose_at(0.0);
        (pos - ego.position()).norm()
            > scene.footprint.half_length + a.half_length + 0.5
    })
}

fn log_times() -> Vec<f64> {
    let steps = ((GEN_LOG_END - GEN_LOG_START) / GEN_DT).round() as usize;
    (0..=steps).map(|k| GEN_LOG_START + k as f64 * GEN_DT).collect()
}

/// Integrate the ego log from a start state with per-step controls.
fn integrate_log(start: EgoState, controls: impl Fn(f64) -> Control) -> Vec<EgoLogEntry> {
    let times = log_times();
    let mut entries = Vec::with_capacity(times.len());
    let mut x = start;
    for (i, &t) in times.iter().enumerate() {
        entries.push(EgoLogEntry {
            t,
            px: x.px,
            py: x.py,
            theta: x.theta,
            v: x.v,
        });
        if i + 1 < times.len() {
            x = step(&x, &controls(t), GEN_DT, GEN_WHEELBASE).expect("generator controls valid");
        }
    }
    entries
}

fn straight_agent(id: &str, start: Vec2, heading: f64, v: f64) -> AgentTrack {
    let poses = log_times()
        .iter()
        .map(|&t| AgentPose {
            t,
            px: start.x + v * t * heading.cos(),
            py: start.y + v * t * heading.sin(),
            theta: heading,
        })
        .collect();
    AgentTrack {
        id: id.to_string(),
        half_length: 2.25,
        half_width: 0.95,
        poses,
    }
}

fn gen_straight(rng: &mut ChaCha8Rng, cut_in: bool) -> Scene {
    let v0: f64 = rng.random_range(4.0..7.0);
    let half_road: f64 = rng.random_range(3.4..4.4);
    let lane_y = -0.5 * half_road;
    let start = EgoState::new(GEN_LOG_START * v0, lane_y, 0.0, v0);
    let ego_log = integrate_log(start, |_| Control::ZERO);
    let x0 = 0.0;
    let x_span = (x0 + GEN_LOG_START * v0 - 15.0, x0 + GEN_LOG_END * v0 + 20.0);
    let curbs = vec![
        vec![Vec2::new(x_span.0, -half_road), Vec2::new(x_span.1, -half_road)],
        vec![Vec2::new(x_span.0, half_road), Vec2::new(x_span.1, half_road)],
    ];
    let lanes = vec![vec![Vec2::new(x_span.0, 0.0), Vec2::new(x_span.1, 0.0)]];

    let mut agents = Vec::new();
    if cut_in {
        // exactly one agent merging from the adjacent lane into the ego lane
        let gap: f64 = rng.random_range(10.0..14.0);
        let v_a = v0 - rng.random_range(0.5..1.5);
        let merge_start = 0.0;
        let merge_end: f64 = rng.random_range(2.0..3.0);
        let y_from = 0.5 * half_road;
        let poses = log_times()
            .iter()
            .map(|&t| {
                let s = ((t - merge_start) / (merge_end - merge_start)).clamp(0.0, 1.0);
                let blend = s * s * (3.0 - 2.0 * s); // smoothstep
                let py = y_from + (lane_y - y_from) * blend;
                // heading from the lateral rate of the blend
                let dblend = 6.0 * s * (1.0 - s) / (merge_end - merge_start);
                let vy = (lane_y - y_from) * if (merge_start..merge_end).contains(&t) { dblend } else { 0.0 };
                AgentPose {
                    t,
                    px: gap + v_a * t,
                    py,
                    theta: vy.atan2(v_a),
                }
            })
            .collect();
        agents.push(AgentTrack {
            id: "cut-in-0".to_string(),
            half_length: 2.25,
            half_width: 0.95,
            poses,
        });
    } else {
        if rng.random_range(0.0..1.0) < 0.7 {
            let gap: f64 = rng.random_range(14.0..22.0);
            agents.push(straight_agent("lead-0", Vec2::new(gap, lane_y), 0.0, v0));
        }
        if rng.random_range(0.0..1.0) < 0.5 {
            let gap: f64 = rng.random_range(20.0..35.0);
            let v_on: f64 = rng.random_range(4.0..7.0);
            agents.push(straight_agent(
                "oncoming-0",
                Vec2::new(gap, 0.5 * half_road),
                std::f64::consts::PI,
                v_on,
            ));
        }
    }

    Scene {
        dt: GEN_DT,
        horizon: GEN_HORIZON,
        wheelbase: GEN_WHEELBASE,
        ego_log,
        agents,
        curbs,
        lanes,
        footprint: EgoFootprint {
            half_length: 2.0,
            half_width: 0.9,
        },
    }
}

fn gen_turn(rng: &mut ChaCha8Rng) -> Scene {
    let v0: f64 = rng.random_range(3.0..5.0);
    let sign = if rng.random_range(0.0..1.0) < 0.5 { 1.0 } else { -1.0 };
    let delta_c: f64 = sign * rng.random_range(0.06..0.10);
    let turn_from: f64 = rng.random_range(-1.5..-0.5);
    let half_road: f64 = rng.random_range(3.4..4.2);
    let start = EgoState::new(0.0, 0.0, 0.0, v0);
    let controls = move |t: f64| {
        if t >= turn_from {
            Control::new(0.0, delta_c)
        } else {
            Control::ZERO
        }
    };
    let ego_log = integrate_log(start, controls);

    // curbs as lateral offsets of the driven path, extended at both ends
    let mut left = Vec::new();
    let mut right = Vec::new();
    let mut center = Vec::new();
    let first = ego_log[0];
    let pre = Vec2::new(
        first.px - 12.0 * first.theta.cos(),
        first.py - 12.0 * first.theta.sin(),
    );
    let entries: Vec<(Vec2, f64)> = std::iter::once((pre, first.theta))
        .chain(ego_log.iter().map(|e| (Vec2::new(e.px, e.py), e.theta)))
        .chain({
            let last = *ego_log.last().unwrap();
            let post = Vec2::new(
                last.px + 12.0 * last.theta.cos(),
                last.py + 12.0 * last.theta.sin(),
            );
            std::iter::once((post, last.theta))
        })
        .collect();
    for (p, theta) in entries {
        let n = Vec2::new(-theta.sin(), theta.cos());
        left.push(p + n * half_road);
        right.push(p - n * half_road);
        center.push(p);
    }

    Scene {
        dt: GEN_DT,
        horizon: GEN_HORIZON,
        wheelbase: GEN_WHEELBASE,
        ego_log,
        agents: Vec::new(),
        curbs: vec![left, right],
        lanes: vec![center],
        footprint: EgoFootprint {
            half_length: 2.0,
            half_width: 0.9,
        },
    }
}

fn gen_narrow(rng: &mut ChaCha8Rng) -> Scene {
    let v0: f64 = rng.random_range(3.0..5.0);
    let start = EgoState::new(GEN_LOG_START * v0, 0.0, 0.0, v0);
    let ego_log = integrate_log(start, |_| Control::ZERO);
    let wide: f64 = rng.random_range(3.5..4.0);
    let tight: f64 = rng.random_range(1.35..1.6);
    let taper_from: f64 = rng.random_range(-2.0..2.0);
    let taper_len: f64 = rng.random_range(8.0..14.0);
    let x_lo = GEN_LOG_START * v0 - 15.0;
    let x_hi = GEN_LOG_END * v0 + 20.0;
    let half_at = move |x: f64| -> f64 {
        if x <= taper_from {
            wide
        } else if x >= taper_from + taper_len {
            tight
        } else {
            wide + (tight - wide) * (x - taper_from) / taper_len
        }
    };
    let mut xs = Vec::new();
    let mut x = x_lo;
    while x < x_hi {
        xs.push(x);
        x += 2.0;
    }
    xs.push(x_hi);
    let upper: Vec<Vec2> = xs.iter().map(|&x| Vec2::new(x, half_at(x))).collect();
    let lower: Vec<Vec2> = xs.iter().map(|&x| Vec2::new(x, -half_at(x))).collect();

    Scene {
        dt: GEN_DT,
        horizon: GEN_HORIZON,
        wheelbase: GEN_WHEELBASE,
        ego_log,
        agents: Vec::new(),
        curbs: vec![upper, lower],
        lanes: Vec::new(),
        footprint: EgoFootprint {
            half_length: 2.0,
            half_width: 0.9,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn sample_contour_even_division() {
        let pts = sample_contour(&[Vec2::ZERO, Vec2::new(1.0, 0.0)], false, 0.5).unwrap();
        assert_eq!(pts.len(), 3);
        assert_relative_eq!(pts[1].x, 0.5);
    }

    #[test]
    fn sample_contour_unit_square() {
        let square = [
            Vec2::ZERO,
            Vec2::new(1.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(0.0, 1.0),
        ];
        let pts = sample_contour(&square, true, 0.5).unwrap();
        assert_eq!(pts.len(), 8);
        for v in square {
            assert!(pts.contains(&v));
        }
    }

    #[test]
    fn sample_contour_short_segment() {
        let pts = sample_contour(&[Vec2::ZERO, Vec2::new(0.3, 0.0)], false, 0.5).unwrap();
        assert_eq!(pts.len(), 2);
    }

    #[test]
    fn sample_contour_rejects_degenerate() {
        assert!(sample_contour(&[], false, 0.5).is_err());
        assert!(sample_contour(&[Vec2::ZERO], false, 0.5).is_err());
    }

    #[test]
    fn to_local_frame_examples() {
        let pts = [Vec2::new(1.0, 2.0)];
        assert_eq!(to_local_frame(&pts, (0.0, 0.0, 0.0))[0], pts[0]);
        let shifted = to_local_frame(&pts, (1.0, 2.0, 0.0));
        assert_relative_eq!(shifted[0].x, 0.0);
        assert_relative_eq!(shifted[0].y, 0.0);
        let rotated = to_local_frame(&[Vec2::new(1.0, 0.0)], (0.0, 0.0, FRAC_PI_2));
        assert_relative_eq!(rotated[0].x, 0.0, epsilon = 1e-15);
        assert_relative_eq!(rotated[0].y, -1.0, epsilon = 1e-15);
    }

    #[test]
    fn gen_scene_deterministic() {
        for kind in [SceneKind::Straight, SceneKind::Turn, SceneKind::CutIn, SceneKind::Narrow] {
            let a = gen_scene(7, kind);
            let b = gen_scene(7, kind);
            assert_eq!(a, b);
            let c = gen_scene(8, kind);
            assert_ne!(a, c);
        }
    }

    #[test]
    fn gen_straight_has_bracketing_curbs() {
        let scene = gen_scene(3, SceneKind::Straight);
        assert_eq!(scene.curbs.len(), 2);
        let ego_y = scene.ego_state_at(0.0).unwrap().py;
        let ys: Vec<f64> = scene.curbs.iter().map(|c| c[0].y).collect();
        assert!(ys.iter().any(|&y| y < ego_y) && ys.iter().any(|&y| y > ego_y));
    }

    #[test]
    fn gen_cut_in_has_one_crossing_agent() {
        let scene = gen_scene(11, SceneKind::CutIn);
        assert_eq!(scene.agents.len(), 1);
        let agent = &scene.agents[0];
        let lane = &scene.lanes[0];
        // the agent path must cross the lane divider into the ego lane
        let before = agent.pose_at(-1.0).0.y;
        let after = agent.pose_at(4.0).0.y;
        assert!(before > lane[0].y && after < lane[0].y);
    }

    #[test]
    fn gen_scene_validates_and_is_kinematic() {
        for kind in [SceneKind::Straight, SceneKind::Turn, SceneKind::CutIn, SceneKind::Narrow] {
            let scene = gen_scene(42, kind);
            scene.validate().unwrap();
            // consecutive log entries satisfy a bicycle step for some control
            for pair in scene.ego_log.windows(2) {
                let v_step = (pair[1].v - pair[0].v) / scene.dt;
                let dtheta = angle_diff(pair[1].theta, pair[0].theta);
                let delta = if pair[0].v.abs() > 1e-9 {
                    (dtheta * scene.wheelbase / (pair[0].v * scene.dt)).atan()
                } else {
                    0.0
                };
                let u = Control::new(v_step, delta);
                let next = step(&pair[0].state(), &u, scene.dt, scene.wheelbase).unwrap();
                assert_relative_eq!(next.px, pair[1].px, epsilon = 1e-9);
                assert_relative_eq!(next.py, pair[1].py, epsilon = 1e-9);
                assert_relative_eq!(next.v, pair[1].v, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn lane_filter_discards_crossed_lane() {
        let scene = gen_scene(5, SceneKind::Turn);
        // the turn centerline is the ego path itself, so it must be dropped
        let retained = lane_filter(&scene, (-5.0, 5.0)).unwrap();
        assert!(retained.is_empty());
    }

    #[test]
    fn lane_filter_retains_distant_lane() {
        let mut scene = gen_scene(5, SceneKind::Straight);
        scene.lanes.push(vec![Vec2::new(-50.0, 10.0), Vec2::new(50.0, 10.0)]);
        let retained = lane_filter(&scene, (-5.0, 5.0)).unwrap();
        assert!(retained.iter().any(|l| l[0].y == 10.0));
    }

    #[test]
    fn lane_filter_margin_is_inclusive() {
        let mut scene = gen_scene(5, SceneKind::Straight);
        scene.lanes.clear();
        let ego_y = scene.ego_state_at(0.0).unwrap().py;
        // tangent lane exactly at the margin: discarded
        scene.lanes.push(vec![
            Vec2::new(-100.0, ego_y + LANE_OVERLAP_MARGIN),
            Vec2::new(100.0, ego_y + LANE_OVERLAP_MARGIN),
        ]);
        // just beyond the margin: retained
        scene.lanes.push(vec![
            Vec2::new(-100.0, ego_y + LANE_OVERLAP_MARGIN + 1e-6),
            Vec2::new(100.0, ego_y + LANE_OVERLAP_MARGIN + 1e-6),
        ]);
        let retained = lane_filter(&scene, (-5.0, 5.0)).unwrap();
        assert_eq!(retained.len(), 1);
    }

    #[test]
    fn obstacle_points_empty_scene() {
        let mut scene = gen_scene(0, SceneKind::Straight);
        scene.agents.clear();
        scene.curbs.clear();
        scene.lanes.clear();
        let set = obstacle_points_at(&scene, 0.0, 0.5, &[]).unwrap();
        assert!(set.points.is_empty());
    }

    #[test]
    fn obstacle_points_agent_box_sample_count() {
        // a 4x2 box sampled at 0.5 m: perimeter 12 -> 24 points after dedup
        let mut scene = gen_scene(0, SceneKind::Straight);
        scene.curbs.clear();
        scene.lanes.clear();
        scene.agents = vec![AgentTrack {
            id: "a".into(),
            half_length: 2.0,
            half_width: 1.0,
            poses: vec![AgentPose {
                t: 0.0,
                px: 10.0,
                py: 0.0,
                theta: 0.0,
            }],
        }];
        let set = obstacle_points_at(&scene, 0.0, 0.5, &[]).unwrap();
        assert_eq!(set.points.len(), 24);
        assert!(set.points.iter().all(|tp| tp.tag == ObstacleTag::Agent));
    }

    #[test]
    fn obstacle_points_tags_curbs() {
        let scene = gen_scene(0, SceneKind::Straight);
        let set = obstacle_points_at(&scene, 0.0, 0.5, &[]).unwrap();
        assert!(set.points.iter().any(|tp| tp.tag == ObstacleTag::Curb));
    }

    #[test]
    fn interpolation_exact_at_stored_pose() {
        let scene = gen_scene(1, SceneKind::Turn);
        for e in &scene.ego_log {
            let s = scene.ego_state_at(e.t).unwrap();
            assert_eq!(s, e.state());
        }
    }

    #[test]
    fn unknown_kind_is_rejected() {
        assert!(matches!(
            SceneKind::parse("zigzag"),
            Err(SceneError::UnknownKind(_))
        ));
    }

    proptest! {
        #[test]
        fn sample_contour_spacing_bound(
            x0 in -5.0f64..5.0, y0 in -5.0f64..5.0,
            x1 in -5.0f64..5.0, y1 in -5.0f64..5.0,
            x2 in -5.0f64..5.0, y2 in -5.0f64..5.0,
            delta in 0.1f64..2.0,
        ) {
            let poly = [Vec2::new(x0, y0), Vec2::new(x1, y1), Vec2::new(x2, y2)];
            let pts = sample_contour(&poly, false, delta).unwrap();
            for pair in pts.windows(2) {
                prop_assert!((pair[1] - pair[0]).norm() <= delta + 1e-9);
            }
            for v in poly {
                prop_assert!(pts.iter().any(|p| (*p - v).norm() < 1e-9));
            }
        }

        #[test]
        fn local_frame_roundtrip(
            px in -20.0f64..20.0, py in -20.0f64..20.0,
            ox in -20.0f64..20.0, oy in -20.0f64..20.0,
            theta in -3.1f64..3.1,
        ) {
            let p = [Vec2::new(px, py)];
            let local = to_local_frame(&p, (ox, oy, theta));
            let back = to_world_frame(&local, (ox, oy, theta));
            prop_assert!((back[0] - p[0]).norm() < 1e-9);
        }
    }
}
