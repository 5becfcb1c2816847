//! Maximum Empty Rectangle solver and the corridor annotation/refinement
//! pipelines.
//!
//! A corridor is one obstacle-free oriented rectangle per future planning
//! timestamp, expressed in the planning frame (ego frame at `t = 0`). Each
//! rectangle is found by fixing the orientation to the ego heading at that
//! timestamp and solving a maximum-empty-rectangle problem over the sampled
//! obstacle points in that local frame.

use crate::geometry::{wrap_angle, OrientedRect, Vec2};
use crate::scene::{lane_filter, obstacle_points_at, to_local_frame, Scene, SceneError};
use serde::{Deserialize, Serialize};
use std::fmt;

/// Distance below which an obstacle point is considered to sit on the
/// anchor, making the MER problem infeasible.
pub const ANCHOR_BLOCK_RADIUS: f64 = 1e-6;

/// Fallback rectangle edge length used when refinement finds the predicted
/// center blocked by a perceived obstacle.
pub const DEGENERATE_RECT_SIZE: f64 = 0.2;

#[derive(Debug, Clone, PartialEq)]
pub enum AnnotationError {
    /// An obstacle point coincides with the anchor.
    BlockedAnchor,
    /// Annotation failed at a specific future timestep even after the local
    /// resampling retry.
    BlockedTimestamp { step: usize },
    InvalidInput(String),
    Scene(SceneError),
}

impl fmt::Display for AnnotationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AnnotationError::BlockedAnchor => write!(f, "anchor coincides with an obstacle point"),
            AnnotationError::BlockedTimestamp { step } => {
                write!(f, "annotation failed at future step {step}: anchor blocked")
            }
            AnnotationError::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
            AnnotationError::Scene(e) => write!(f, "scene error: {e}"),
        }
    }
}

impl std::error::Error for AnnotationError {}

impl From<SceneError> for AnnotationError {
    fn from(e: SceneError) -> Self {
        AnnotationError::Scene(e)
    }
}

/// The N-step union of per-timestamp safe rectangles, planning frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Corridor {
    pub rects: Vec<OrientedRect>,
}

impl Corridor {
    pub fn len(&self) -> usize {
        self.rects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rects.is_empty()
    }
}

/// Axis-aligned search boundary, full extents, centered on the anchor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MerBoundary {
    pub l_max: f64,
    pub w_max: f64,
}

impl MerBoundary {
    pub fn new(l_max: f64, w_max: f64) -> Result<Self, AnnotationError> {
        if !(l_max > 0.0) || !(w_max > 0.0) {
            return Err(AnnotationError::InvalidInput(format!(
                "boundary extents must be positive, got ({l_max}, {w_max})"
            )));
        }
        Ok(MerBoundary { l_max, w_max })
    }
}

/// Axis-aligned rectangle by edge coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisRect {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl AxisRect {
    pub fn area(&self) -> f64 {
        (self.x_max - self.x_min) * (self.y_max - self.y_min)
    }

    pub fn center(&self) -> Vec2 {
        Vec2::new(
            0.5 * (self.x_min + self.x_max),
            0.5 * (self.y_min + self.y_max),
        )
    }

    pub fn contains(&self, p: Vec2, tol: f64) -> bool {
        p.x >= self.x_min - tol
            && p.x <= self.x_max + tol
            && p.y >= self.y_min - tol
            && p.y <= self.y_max + tol
    }

    pub fn strictly_contains(&self, p: Vec2) -> bool {
        p.x > self.x_min && p.x < self.x_max && p.y > self.y_min && p.y < self.y_max
    }
}

/// Tie-break used among equal-area maxima: lexicographically smallest
/// `(x_min, y_min)`. Keeps the solver, the test oracles, and serialized
/// corridors deterministic.
fn better(area: f64, x_min: f64, y_min: f64, best: &Option<(f64, AxisRect)>) -> bool {
    match best {
        None => true,
        Some((best_area, r)) => {
            area > *best_area
                || (area == *best_area
                    && (x_min < r.x_min || (x_min == r.x_min && y_min < r.y_min)))
        }
    }
}

/// Largest axis-aligned rectangle inside the boundary that contains the
/// anchor and has no obstacle point strictly in its interior.
///
/// Candidate edges are obstacle coordinates and the boundary edges, so each
/// free edge of the result either lies on the boundary or touches an
/// obstacle point. Points exactly on an edge are allowed.
pub fn solve_mer(
    points: &[Vec2],
    boundary: &MerBoundary,
    anchor: Vec2,
) -> Result<AxisRect, AnnotationError> {
    let bx0 = anchor.x - 0.5 * boundary.l_max;
    let bx1 = anchor.x + 0.5 * boundary.l_max;
    let by0 = anchor.y - 0.5 * boundary.w_max;
    let by1 = anchor.y + 0.5 * boundary.w_max;

    let pts: Vec<Vec2> = points
        .iter()
        .copied()
        .filter(|p| p.x >= bx0 && p.x <= bx1 && p.y >= by0 && p.y <= by1)
        .collect();
    if pts
        .iter()
        .any(|p| (*p - anchor).norm() <= ANCHOR_BLOCK_RADIUS)
    {
        return Err(AnnotationError::BlockedAnchor);
    }

    // candidate bottom/top edges: obstacle ordinates on the anchor side,
    // plus the boundary
    let mut y_lo: Vec<f64> = pts.iter().map(|p| p.y).filter(|&y| y <= anchor.y).collect();
    y_lo.push(by0);
    y_lo.sort_by(f64::total_cmp);
    y_lo.dedup();
    let mut y_hi: Vec<f64> = pts.iter().map(|p| p.y).filter(|&y| y >= anchor.y).collect();
    y_hi.push(by1);
    y_hi.sort_by(f64::total_cmp);
    y_hi.dedup();

    let mut best: Option<(f64, AxisRect)> = None;
    let mut consider = |x_min: f64, x_max: f64, y_min: f64, y_max: f64| {
        let area = (x_max - x_min) * (y_max - y_min);
        if better(area, x_min, y_min, &best) {
            best = Some((
                area,
                AxisRect {
                    x_min,
                    x_max,
                    y_min,
                    y_max,
                },
            ));
        }
    };

    for &y1 in &y_lo {
        for &y2 in &y_hi {
            // widest admissible x-interval for this band: blocked only by
            // points strictly inside (y1, y2)
            let mut left = bx0;
            let mut right = bx1;
            let mut on_anchor_x = false;
            for p in &pts {
                if p.y > y1 && p.y < y2 {
                    if p.x < anchor.x {
                        left = left.max(p.x);
                    } else if p.x > anchor.x {
                        right = right.min(p.x);
                    } else {
                        on_anchor_x = true;
                    }
                }
            }
            if on_anchor_x {
                // a blocker sits exactly on the anchor abscissa: the anchor
                // must lie on one of the vertical edges
                consider(left, anchor.x, y1, y2);
                consider(anchor.x, right, y1, y2);
            } else {
                consider(left, right, y1, y2);
            }
        }
    }

    // the boundary band is always a candidate, so `best` is set
    Ok(best.expect("candidate set is non-empty").1)
}

/// Annotation defaults matching the corridor generation setup: 0.5 m
/// obstacle sampling, a 30 m x 15 m search boundary, and a [-5 s, +5 s] ego
/// window for lane selection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnotationConfig {
    pub delta_obs: f64,
    pub boundary: MerBoundary,
    pub t_ego: (f64, f64),
}

impl Default for AnnotationConfig {
    fn default() -> Self {
        AnnotationConfig {
            delta_obs: 0.5,
            boundary: MerBoundary {
                l_max: 30.0,
                w_max: 15.0,
            },
            t_ego: (-5.0, 5.0),
        }
    }
}

/// Annotate the ground-truth corridor for a scene: for each future step the
/// obstacle points are expressed in the ego frame at that time, the MER is
/// solved with the anchor at the frame origin, and the resulting rectangle
/// is re-expressed in the planning frame with the ego heading.
///
/// A blocked anchor (an obstacle sample landing on the future ego position)
/// is retried once with the sampling threshold halved; if still blocked the
/// scene is flagged via [`AnnotationError::BlockedTimestamp`].
pub fn annotate_corridor(scene: &Scene, cfg: &AnnotationConfig) -> Result<Corridor, AnnotationError> {
    scene.validate()?;
    if !(cfg.delta_obs > 0.0) {
        return Err(AnnotationError::InvalidInput("delta_obs must be > 0".into()));
    }
    let retained = lane_filter(scene, cfg.t_ego)?;
    let origin = scene.ego_state_at(0.0)?;
    let mut rects = Vec::with_capacity(scene.horizon as usize);
    for step in 1..=scene.horizon as usize {
        let t = step as f64 * scene.dt;
        let ego = scene.ego_state_at(t)?;
        let local = solve_timestep(scene, t, cfg.delta_obs, &cfg.boundary, &retained, &ego)
            .or_else(|e| match e {
                AnnotationError::BlockedAnchor => {
                    solve_timestep(scene, t, 0.5 * cfg.delta_obs, &cfg.boundary, &retained, &ego)
                }
                other => Err(other),
            })
            .map_err(|e| match e {
                AnnotationError::BlockedAnchor => AnnotationError::BlockedTimestamp { step },
                other => other,
            })?;

        // local axis-aligned rect -> planning frame
        let center_world = ego.position() + local.center().rotated(ego.theta);
        let center_planning = (center_world - origin.position()).rotated(-origin.theta);
        rects.push(OrientedRect {
            cx: center_planning.x,
            cy: center_planning.y,
            theta: wrap_angle(ego.theta - origin.theta),
            l: local.x_max - local.x_min,
            w: local.y_max - local.y_min,
        });
    }
    Ok(Corridor { rects })
}

fn solve_timestep(
    scene: &Scene,
    t: f64,
    delta_obs: f64,
    boundary: &MerBoundary,
    retained_lanes: &[Vec<Vec2>],
    ego: &crate::dynamics::EgoState,
) -> Result<AxisRect, AnnotationError> {
    let obstacles = obstacle_points_at(scene, t, delta_obs, retained_lanes)?;
    let local = to_local_frame(&obstacles.positions(), (ego.px, ego.py, ego.theta));
    solve_mer(&local, boundary, Vec2::ZERO)
}

/// A refined corridor plus the per-timestep degenerate flags raised when the
/// predicted center was blocked by a perceived obstacle.
#[derive(Debug, Clone, PartialEq)]
pub struct RefinedCorridor {
    pub corridor: Corridor,
    pub degenerate: Vec<bool>,
}

/// Shrink each predicted rectangle around its own center so that no
/// perceived obstacle point lies strictly inside. The MER is solved in the
/// predicted rectangle's frame with the boundary set to the predicted size,
/// so the refined rectangle is always contained in the predicted one.
///
/// `perceived` holds one planning-frame point set per timestep. A blocked
/// center falls back to a 0.2 m x 0.2 m rectangle flagged degenerate.
pub fn refine_corridor(
    predicted: &Corridor,
    perceived: &[Vec<Vec2>],
) -> Result<RefinedCorridor, AnnotationError> {
    if perceived.len() != predicted.len() {
        return Err(AnnotationError::InvalidInput(format!(
            "expected {} perceived point sets, got {}",
            predicted.len(),
            perceived.len()
        )));
    }
    let mut rects = Vec::with_capacity(predicted.len());
    let mut degenerate = vec![false; predicted.len()];
    for (i, rect) in predicted.rects.iter().enumerate() {
        let local: Vec<Vec2> = perceived[i]
            .iter()
            .map(|p| rect.to_frame(*p))
            .collect();
        let boundary = MerBoundary {
            l_max: rect.l,
            w_max: rect.w,
        };
        match solve_mer(&local, &boundary, Vec2::ZERO) {
            Ok(r) => {
                let center = rect.from_frame(r.center());
                rects.push(OrientedRect {
                    cx: center.x,
                    cy: center.y,
                    theta: rect.theta,
                    l: r.x_max - r.x_min,
                    w: r.y_max - r.y_min,
                });
            }
            Err(AnnotationError::BlockedAnchor) => {
                degenerate[i] = true;
                rects.push(OrientedRect {
                    cx: rect.cx,
                    cy: rect.cy,
                    theta: rect.theta,
                    l: DEGENERATE_RECT_SIZE,
                    w: DEGENERATE_RECT_SIZE,
                });
            }
            Err(e) => return Err(e),
        }
    }
    Ok(RefinedCorridor {
        corridor: Corridor { rects },
        degenerate,
    })
}

/// Perceived obstacle points per future timestep in the planning frame:
/// agent box contours and curbs (lane dividers excluded), optionally
/// perturbed by the caller before refinement.
pub fn perceived_points(
    scene: &Scene,
    delta_obs: f64,
) -> Result<Vec<Vec<Vec2>>, AnnotationError> {
    let origin = scene.ego_state_at(0.0)?;
    let mut out = Vec::with_capacity(scene.horizon as usize);
    for step in 1..=scene.horizon as usize {
        let t = step as f64 * scene.dt;
        let set = obstacle_points_at(scene, t, delta_obs, &[])?;
        let world: Vec<Vec2> = set
            .points
            .iter()
            .filter(|tp| tp.tag != crate::scene::ObstacleTag::Lane)
            .map(|tp| tp.p)
            .collect();
        out.push(to_local_frame(&world, (origin.px, origin.py, origin.theta)));
    }
    Ok(out)
}
