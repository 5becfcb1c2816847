//! The corridor training losses with analytic gradients.
//!
//! Corridors enter the losses through a per-timestep encoding
//! `(cx, cy, cos theta, sin theta, l, w)`; gradients are taken with respect
//! to that encoding with the cosine and sine treated as independent
//! coordinates. L1 losses use mean reduction over all encoded elements so
//! their scale does not depend on the horizon length.

use crate::annotation::Corridor;
use crate::dynamics::EgoState;
use crate::geometry::{edge_depths, OrientedRect, Vec2};
use std::fmt;

/// Encoded parameters per corridor timestep.
pub const ENCODING_DIM: usize = 6;

#[derive(Debug, Clone, PartialEq)]
pub enum LossError {
    LengthMismatch { expected: usize, got: usize },
    InvalidInput(String),
}

impl fmt::Display for LossError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LossError::LengthMismatch { expected, got } => {
                write!(f, "length mismatch: expected {expected}, got {got}")
            }
            LossError::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
        }
    }
}

impl std::error::Error for LossError {}

/// A scalar loss together with its gradient in the encoding of the
/// differentiated argument.
#[derive(Debug, Clone, PartialEq)]
pub struct LossValue {
    pub value: f64,
    pub gradient: Vec<f64>,
}

/// Flatten a corridor into its `6N` encoding.
pub fn encode_corridor(corridor: &Corridor) -> Vec<f64> {
    let mut out = Vec::with_capacity(ENCODING_DIM * corridor.len());
    for r in &corridor.rects {
        out.push(r.cx);
        out.push(r.cy);
        out.push(r.theta.cos());
        out.push(r.theta.sin());
        out.push(r.l);
        out.push(r.w);
    }
    out
}

/// Rebuild a corridor from an encoding, renormalizing the angle components.
pub fn decode_corridor(encoding: &[f64]) -> Result<Corridor, LossError> {
    if !encoding.len().is_multiple_of(ENCODING_DIM) {
        return Err(LossError::InvalidInput(format!(
            "encoding length {} is not a multiple of {ENCODING_DIM}",
            encoding.len()
        )));
    }
    let mut rects = Vec::with_capacity(encoding.len() / ENCODING_DIM);
    for chunk in encoding.chunks_exact(ENCODING_DIM) {
        let norm = chunk[2].hypot(chunk[3]);
        if norm < 1e-12 {
            return Err(LossError::InvalidInput(
                "cannot decode a zero (cos, sin) pair".into(),
            ));
        }
        let theta = (chunk[3] / norm).atan2(chunk[2] / norm);
        rects.push(
            OrientedRect::new(chunk[0], chunk[1], theta, chunk[4], chunk[5])
                .map_err(|e| LossError::InvalidInput(e.to_string()))?,
        );
    }
    Ok(Corridor { rects })
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0 // subgradient choice at exact ties
    }
}

/// Mean absolute error over the `6N` encoded elements of two corridors,
/// differentiated with respect to the predicted encoding.
pub fn corridor_loss(pred: &Corridor, gt: &Corridor) -> Result<LossValue, LossError> {
    if pred.len() != gt.len() {
        return Err(LossError::LengthMismatch {
            expected: gt.len(),
            got: pred.len(),
        });
    }
    let ep = encode_corridor(pred);
    let eg = encode_corridor(gt);
    let n = ep.len() as f64;
    let mut value = 0.0;
    let mut gradient = vec![0.0; ep.len()];
    for i in 0..ep.len() {
        let d = ep[i] - eg[i];
        value += d.abs() / n;
        gradient[i] = sign(d) / n;
    }
    Ok(LossValue { value, gradient })
}

/// Interior depth of `p` in `rect` plus its gradient in the rect encoding.
/// Zero (with zero gradient) outside or on the boundary.
fn depth_with_gradient(p: Vec2, rect: &OrientedRect) -> (f64, [f64; ENCODING_DIM]) {
    let depths = edge_depths(p, rect);
    let mut edge = 0;
    for (i, d) in depths.iter().enumerate() {
        if *d < depths[edge] {
            edge = i;
        }
    }
    let depth = depths[edge];
    if depth <= 0.0 {
        return (0.0, [0.0; ENCODING_DIM]);
    }
    let (s, c) = rect.theta.sin_cos();
    let dx = p.x - rect.cx;
    let dy = p.y - rect.cy;
    // local coordinates and their partials w.r.t. (cx, cy, cos, sin)
    let dlx = [-c, -s, dx, dy];
    let dly = [s, -c, dy, -dx];
    let mut grad = [0.0; ENCODING_DIM];
    match edge {
        0 => {
            // front: l/2 - lx
            grad[..4].copy_from_slice(&dlx.map(|v| -v));
            grad[4] = 0.5;
        }
        1 => {
            // rear: lx + l/2
            grad[..4].copy_from_slice(&dlx);
            grad[4] = 0.5;
        }
        2 => {
            // left: w/2 - ly
            grad[..4].copy_from_slice(&dly.map(|v| -v));
            grad[5] = 0.5;
        }
        _ => {
            // right: ly + w/2
            grad[..4].copy_from_slice(&dly);
            grad[5] = 0.5;
        }
    }
    (depth, grad)
}

/// Sum over timesteps of the deepest obstacle intrusion into the rectangle;
/// the gradient flows only through the arg-max point and its nearest edge.
/// Ties are broken by the first index.
fn max_depth_loss(corridor: &Corridor, points: &[Vec<Vec2>]) -> Result<LossValue, LossError> {
    if points.len() != corridor.len() {
        return Err(LossError::LengthMismatch {
            expected: corridor.len(),
            got: points.len(),
        });
    }
    let mut value = 0.0;
    let mut gradient = vec![0.0; ENCODING_DIM * corridor.len()];
    for (t, rect) in corridor.rects.iter().enumerate() {
        let mut best = 0.0;
        let mut best_grad = [0.0; ENCODING_DIM];
        for p in &points[t] {
            let (d, g) = depth_with_gradient(*p, rect);
            if d > best {
                best = d;
                best_grad = g;
            }
        }
        value += best;
        gradient[t * ENCODING_DIM..(t + 1) * ENCODING_DIM].copy_from_slice(&best_grad);
    }
    Ok(LossValue { value, gradient })
}

/// Map safety loss over per-timestep curb point sets. Lane dividers are
/// excluded by construction: only curb points are accepted here.
pub fn map_safety_loss(
    corridor: &Corridor,
    curb_points: &[Vec<Vec2>],
) -> Result<LossValue, LossError> {
    max_depth_loss(corridor, curb_points)
}

/// Agent safety loss over per-timestep bounding-box vertex sets.
pub fn agent_safety_loss(
    corridor: &Corridor,
    agent_vertices: &[Vec<Vec2>],
) -> Result<LossValue, LossError> {
    max_depth_loss(corridor, agent_vertices)
}

/// Area penalty `sum_t exp(-alpha * w_t * l_t)` discouraging collapsed
/// rectangles.
pub fn area_loss(corridor: &Corridor, alpha: f64) -> Result<LossValue, LossError> {
    if !(alpha > 0.0) {
        return Err(LossError::InvalidInput(format!("alpha={alpha} must be > 0")));
    }
    let mut value = 0.0;
    let mut gradient = vec![0.0; ENCODING_DIM * corridor.len()];
    for (t, rect) in corridor.rects.iter().enumerate() {
        let e = (-alpha * rect.l * rect.w).exp();
        value += e;
        gradient[t * ENCODING_DIM + 4] = -alpha * rect.w * e;
        gradient[t * ENCODING_DIM + 5] = -alpha * rect.l * e;
    }
    Ok(LossValue { value, gradient })
}

/// Mean absolute error over the `2N` position coordinates of a trajectory
/// against a demonstration, differentiated with respect to the trajectory
/// positions (layout `[x_1, y_1, x_2, y_2, ...]`).
pub fn imitation_loss(traj: &[EgoState], gt: &[EgoState]) -> Result<LossValue, LossError> {
    if traj.len() != gt.len() {
        return Err(LossError::LengthMismatch {
            expected: gt.len(),
            got: traj.len(),
        });
    }
    let n = (2 * traj.len()) as f64;
    let mut value = 0.0;
    let mut gradient = vec![0.0; 2 * traj.len()];
    for (i, (a, b)) in traj.iter().zip(gt).enumerate() {
        let dx = a.px - b.px;
        let dy = a.py - b.py;
        value += (dx.abs() + dy.abs()) / n;
        gradient[2 * i] = sign(dx) / n;
        gradient[2 * i + 1] = sign(dy) / n;
    }
    Ok(LossValue { value, gradient })
}
