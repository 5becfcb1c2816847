//! Oriented-rectangle primitives: vertices, halfspace conversion, interior
//! distance, and linearized footprint constraint rows.
//!
//! Conventions used throughout the crate:
//! - angles are radians wrapped to `(-pi, pi]`,
//! - `l` and `w` are *full* extents (vertices sit at `±l/2`, `±w/2`),
//! - halfspace rows are ordered front, rear, left, right in the rectangle
//!   frame,
//! - boundary points count as inside for halfspace membership and contribute
//!   an interior distance of zero.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

/// 2D point / vector in meters. Serializes as a `[x, y]` pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "(f64, f64)", into = "(f64, f64)")]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    /// Rotate counter-clockwise by `angle` radians.
    pub fn rotated(self, angle: f64) -> Vec2 {
        let (s, c) = angle.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl From<(f64, f64)> for Vec2 {
    fn from(p: (f64, f64)) -> Self {
        Vec2::new(p.0, p.1)
    }
}

impl From<Vec2> for (f64, f64) {
    fn from(p: Vec2) -> Self {
        (p.x, p.y)
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Wrap an angle to `(-pi, pi]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut a = theta % two_pi;
    if a <= -std::f64::consts::PI {
        a += two_pi;
    } else if a > std::f64::consts::PI {
        a -= two_pi;
    }
    a
}

/// Smallest signed difference `a - b` wrapped to `(-pi, pi]`.
pub fn angle_diff(a: f64, b: f64) -> f64 {
    wrap_angle(a - b)
}

#[derive(Debug, Clone, PartialEq)]
pub enum GeometryError {
    /// A rectangle extent or footprint half-dimension was not strictly
    /// positive, or a coordinate was not finite.
    InvalidDimensions(String),
}

impl fmt::Display for GeometryError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeometryError::InvalidDimensions(msg) => write!(f, "invalid dimensions: {msg}"),
        }
    }
}

impl std::error::Error for GeometryError {}

/// Oriented rectangle: center, heading and full extents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrientedRect {
    pub cx: f64,
    pub cy: f64,
    /// Heading, wrapped to `(-pi, pi]`.
    pub theta: f64,
    /// Full length (extent along the heading).
    pub l: f64,
    /// Full width (extent across the heading).
    pub w: f64,
}

impl OrientedRect {
    pub fn new(cx: f64, cy: f64, theta: f64, l: f64, w: f64) -> Result<Self, GeometryError> {
        if !(l > 0.0) || !(w > 0.0) {
            return Err(GeometryError::InvalidDimensions(format!(
                "rectangle extents must be positive, got l={l}, w={w}"
            )));
        }
        if ![cx, cy, theta, l, w].iter().all(|v| v.is_finite()) {
            return Err(GeometryError::InvalidDimensions(
                "rectangle parameters must be finite".into(),
            ));
        }
        Ok(OrientedRect {
            cx,
            cy,
            theta: wrap_angle(theta),
            l,
            w,
        })
    }

    pub fn center(&self) -> Vec2 {
        Vec2::new(self.cx, self.cy)
    }

    pub fn area(&self) -> f64 {
        self.l * self.w
    }

    /// Express a world point in the rectangle frame (center at origin,
    /// x-axis along the heading).
    pub fn to_frame(&self, p: Vec2) -> Vec2 {
        (p - self.center()).rotated(-self.theta)
    }

    /// Inverse of [`OrientedRect::to_frame`].
    pub fn from_frame(&self, p: Vec2) -> Vec2 {
        p.rotated(self.theta) + self.center()
    }

    /// Closed-rectangle membership test with tolerance `tol` (meters).
    pub fn contains(&self, p: Vec2, tol: f64) -> bool {
        let q = self.to_frame(p);
        q.x.abs() <= 0.5 * self.l + tol && q.y.abs() <= 0.5 * self.w + tol
    }
}

/// Ego box half-dimensions used in footprint constraints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EgoFootprint {
    pub half_length: f64,
    pub half_width: f64,
}

impl EgoFootprint {
    pub fn new(half_length: f64, half_width: f64) -> Result<Self, GeometryError> {
        if !(half_length > 0.0) || !(half_width > 0.0) {
            return Err(GeometryError::InvalidDimensions(format!(
                "footprint half-dimensions must be positive, got ({half_length}, {half_width})"
            )));
        }
        Ok(EgoFootprint {
            half_length,
            half_width,
        })
    }

    /// Body-frame vertices, counter-clockwise starting from front-left.
    pub fn vertices(&self) -> [Vec2; 4] {
        corner_offsets(self.half_length, self.half_width)
    }
}

fn corner_offsets(hl: f64, hw: f64) -> [Vec2; 4] {
    [
        Vec2::new(hl, hw),
        Vec2::new(-hl, hw),
        Vec2::new(-hl, -hw),
        Vec2::new(hl, -hw),
    ]
}

/// Vertices in counter-clockwise order starting from front-left:
/// `center + R(theta) * (±l/2, ±w/2)`.
pub fn rect_vertices(rect: &OrientedRect) -> [Vec2; 4] {
    let c = rect.center();
    corner_offsets(0.5 * rect.l, 0.5 * rect.w).map(|v| c + v.rotated(rect.theta))
}

/// A single halfspace `normal · p <= offset` with a unit normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Halfspace {
    pub normal: Vec2,
    pub offset: f64,
}

impl Halfspace {
    pub fn contains(&self, p: Vec2, tol: f64) -> bool {
        self.normal.dot(p) <= self.offset + tol
    }

    /// Signed slack `offset - normal · p`; negative outside.
    pub fn slack(&self, p: Vec2) -> f64 {
        self.offset - self.normal.dot(p)
    }
}

/// Intersection of halfspaces. For a rectangle there are exactly four rows
/// in front, rear, left, right order.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfspaceSet {
    pub rows: Vec<Halfspace>,
}

impl HalfspaceSet {
    pub fn contains(&self, p: Vec2, tol: f64) -> bool {
        self.rows.iter().all(|h| h.contains(p, tol))
    }
}

/// H-representation of an oriented rectangle.
///
/// A point satisfies all four rows iff it lies in the closed rectangle. Row
/// order is fixed (front, rear, left, right) so serialized constraints and
/// dual variables are comparable across runs.
pub fn rect_to_halfspaces(rect: &OrientedRect) -> HalfspaceSet {
    let (s, c) = rect.theta.sin_cos();
    let fwd = Vec2::new(c, s);
    let left = Vec2::new(-s, c);
    let center = rect.center();
    let hl = 0.5 * rect.l;
    let hw = 0.5 * rect.w;
    HalfspaceSet {
        rows: vec![
            Halfspace {
                normal: fwd,
                offset: fwd.dot(center) + hl,
            },
            Halfspace {
                normal: -fwd,
                offset: (-fwd).dot(center) + hl,
            },
            Halfspace {
                normal: left,
                offset: left.dot(center) + hw,
            },
            Halfspace {
                normal: -left,
                offset: (-left).dot(center) + hw,
            },
        ],
    }
}

/// Depths of a point behind each rectangle edge (front, rear, left, right),
/// measured in the rectangle frame. Positive on the interior side, negative
/// outside; the interior distance is the clamped minimum.
pub fn edge_depths(p: Vec2, rect: &OrientedRect) -> [f64; 4] {
    let q = rect.to_frame(p);
    let hl = 0.5 * rect.l;
    let hw = 0.5 * rect.w;
    [hl - q.x, q.x + hl, hw - q.y, q.y + hw]
}

/// Distance from `p` to the closest rectangle edge when `p` is inside, zero
/// on the boundary or outside.
pub fn interior_distance(p: Vec2, rect: &OrientedRect) -> f64 {
    let d = edge_depths(p, rect);
    d.iter().fold(f64::INFINITY, |m, v| m.min(*v)).max(0.0)
}

/// One linearized constraint row on an ego pose `(p_x, p_y, theta)`:
/// `coef_px * p_x + coef_py * p_y + coef_theta * theta <= rhs`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FootprintRow {
    pub coef_px: f64,
    pub coef_py: f64,
    pub coef_theta: f64,
    pub rhs: f64,
}

impl FootprintRow {
    pub fn evaluate(&self, px: f64, py: f64, theta: f64) -> f64 {
        self.coef_px * px + self.coef_py * py + self.coef_theta * theta - self.rhs
    }
}

/// Constraint rows keeping every footprint vertex inside the halfspace set,
/// with the body rotation linearized in `theta` around `theta_nominal`.
///
/// For each halfspace `(a, b)` and body-frame vertex `v` the exact constraint
/// `a · (p + R(theta) v) <= b` is expanded to first order in
/// `theta - theta_nominal`, giving 16 rows for a rectangle. At
/// `theta == theta_nominal` the rows are exact.
pub fn footprint_constraint_rows(
    halfspaces: &HalfspaceSet,
    footprint: &EgoFootprint,
    theta_nominal: f64,
) -> Vec<FootprintRow> {
    let (s, c) = theta_nominal.sin_cos();
    let mut rows = Vec::with_capacity(halfspaces.rows.len() * 4);
    for hs in &halfspaces.rows {
        for v in footprint.vertices() {
            // R(theta_nominal) v and dR/dtheta(theta_nominal) v
            let rv = Vec2::new(c * v.x - s * v.y, s * v.x + c * v.y);
            let sv = Vec2::new(-s * v.x - c * v.y, c * v.x - s * v.y);
            let coef_theta = hs.normal.dot(sv);
            rows.push(FootprintRow {
                coef_px: hs.normal.x,
                coef_py: hs.normal.y,
                coef_theta,
                rhs: hs.offset - hs.normal.dot(rv) + coef_theta * theta_nominal,
            });
        }
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    fn rect(cx: f64, cy: f64, theta: f64, l: f64, w: f64) -> OrientedRect {
        OrientedRect::new(cx, cy, theta, l, w).unwrap()
    }

    #[test]
    fn wrap_angle_range() {
        assert_relative_eq!(wrap_angle(PI), PI);
        assert_relative_eq!(wrap_angle(-PI), PI);
        assert_relative_eq!(wrap_angle(3.0 * PI), PI);
        assert_relative_eq!(wrap_angle(-0.5), -0.5);
        assert_relative_eq!(wrap_angle(2.0 * PI + 0.25), 0.25, epsilon = 1e-12);
    }

    #[test]
    fn rejects_degenerate_rect() {
        assert!(OrientedRect::new(0.0, 0.0, 0.0, 0.0, 1.0).is_err());
        assert!(OrientedRect::new(0.0, 0.0, 0.0, 1.0, -2.0).is_err());
        assert!(OrientedRect::new(f64::NAN, 0.0, 0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn vertices_axis_aligned() {
        let v = rect_vertices(&rect(0.0, 0.0, 0.0, 4.0, 2.0));
        let expected = [(2.0, 1.0), (-2.0, 1.0), (-2.0, -1.0), (2.0, -1.0)];
        for (got, (x, y)) in v.iter().zip(expected) {
            assert_relative_eq!(got.x, x, epsilon = 1e-12);
            assert_relative_eq!(got.y, y, epsilon = 1e-12);
        }
    }

    #[test]
    fn vertices_quarter_turn() {
        let v = rect_vertices(&rect(0.0, 0.0, FRAC_PI_2, 4.0, 2.0));
        let expected = [(-1.0, 2.0), (-1.0, -2.0), (1.0, -2.0), (1.0, 2.0)];
        for (got, (x, y)) in v.iter().zip(expected) {
            assert_relative_eq!(got.x, x, epsilon = 1e-12);
            assert_relative_eq!(got.y, y, epsilon = 1e-12);
        }
    }

    #[test]
    fn vertices_translated_square() {
        let v = rect_vertices(&rect(1.0, 1.0, 0.0, 2.0, 2.0));
        for p in v {
            assert!(p.x.abs() <= 2.0 + 1e-12 && p.x >= -1e-12);
            assert!(p.y.abs() <= 2.0 + 1e-12 && p.y >= -1e-12);
            assert!((p.x - 1.0).abs() == 1.0 && (p.y - 1.0).abs() == 1.0);
        }
    }

    #[test]
    fn halfspaces_axis_aligned() {
        let hs = rect_to_halfspaces(&rect(0.0, 0.0, 0.0, 4.0, 2.0));
        let expected = [
            ((1.0, 0.0), 2.0),
            ((-1.0, 0.0), 2.0),
            ((0.0, 1.0), 1.0),
            ((0.0, -1.0), 1.0),
        ];
        for (row, ((ax, ay), b)) in hs.rows.iter().zip(expected) {
            assert_relative_eq!(row.normal.x, ax, epsilon = 1e-12);
            assert_relative_eq!(row.normal.y, ay, epsilon = 1e-12);
            assert_relative_eq!(row.offset, b, epsilon = 1e-12);
        }
        assert!(hs.contains(Vec2::ZERO, 0.0));
    }

    #[test]
    fn halfspace_membership_matches_rotated_point_test() {
        let r = rect(0.0, 0.0, FRAC_PI_4, 4.0, 2.0);
        let hs = rect_to_halfspaces(&r);
        let mut rng_state = 0x243f6a8885a308d3u64;
        let mut rand01 = move || {
            // xorshift, deterministic
            rng_state ^= rng_state << 13;
            rng_state ^= rng_state >> 7;
            rng_state ^= rng_state << 17;
            (rng_state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..10_000 {
            let p = Vec2::new(rand01() * 8.0 - 4.0, rand01() * 8.0 - 4.0);
            assert_eq!(hs.contains(p, 1e-9), r.contains(p, 1e-9));
        }
    }

    #[test]
    fn interior_distance_examples() {
        let r = rect(0.0, 0.0, 0.0, 4.0, 2.0);
        assert_eq!(interior_distance(Vec2::new(10.0, 10.0), &r), 0.0);
        assert_relative_eq!(interior_distance(Vec2::ZERO, &r), 1.0);
        // oracle: min over per-edge point-line distances
        let p = Vec2::new(1.5, 0.0);
        let edges: [(Vec2, Vec2); 4] = {
            let v = rect_vertices(&r);
            [(v[0], v[1]), (v[1], v[2]), (v[2], v[3]), (v[3], v[0])]
        };
        let oracle = edges
            .iter()
            .map(|(a, b)| {
                let d = *b - *a;
                let n = Vec2::new(-d.y, d.x);
                (n.dot(p - *a) / n.norm()).abs()
            })
            .fold(f64::INFINITY, f64::min);
        assert_relative_eq!(interior_distance(p, &r), oracle, epsilon = 1e-12);
        assert_relative_eq!(interior_distance(p, &r), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn interior_distance_continuous_at_edge() {
        let r = rect(0.0, 0.0, 0.3, 4.0, 2.0);
        for &eps in &[1e-2, 1e-4, 1e-6] {
            // approach the front edge from inside along the heading
            let p = r.from_frame(Vec2::new(2.0 - eps, 0.0));
            assert_relative_eq!(interior_distance(p, &r), eps, epsilon = 1e-9);
        }
        let on_edge = r.from_frame(Vec2::new(2.0, 0.0));
        assert_eq!(interior_distance(on_edge, &r), 0.0);
    }

    #[test]
    fn footprint_rows_axis_aligned_shrink() {
        let hs = rect_to_halfspaces(&rect(0.0, 0.0, 0.0, 4.0, 2.0));
        let fp = EgoFootprint::new(1.0, 0.5).unwrap();
        let rows = footprint_constraint_rows(&hs, &fp, 0.0);
        assert_eq!(rows.len(), 16);
        // with theta fixed at the nominal, feasible centers are |px|<=1, |py|<=0.5
        let feasible = |px: f64, py: f64| rows.iter().all(|r| r.evaluate(px, py, 0.0) <= 1e-12);
        assert!(feasible(0.0, 0.0));
        assert!(feasible(1.0, 0.5));
        assert!(feasible(-1.0, -0.5));
        assert!(!feasible(1.01, 0.0));
        assert!(!feasible(0.0, 0.51));
    }

    #[test]
    fn footprint_rows_exact_fit_single_point() {
        let hs = rect_to_halfspaces(&rect(0.0, 0.0, 0.0, 4.0, 2.0));
        let fp = EgoFootprint::new(2.0, 1.0).unwrap();
        let rows = footprint_constraint_rows(&hs, &fp, 0.0);
        let feasible = |px: f64, py: f64| rows.iter().all(|r| r.evaluate(px, py, 0.0) <= 1e-12);
        assert!(feasible(0.0, 0.0));
        for (px, py) in [(1e-6, 0.0), (-1e-6, 0.0), (0.0, 1e-6), (0.0, -1e-6)] {
            assert!(!feasible(px, py));
        }
    }

    #[test]
    fn footprint_rows_rotated_frame() {
        let hs = rect_to_halfspaces(&rect(0.0, 0.0, FRAC_PI_2, 4.0, 2.0));
        let fp = EgoFootprint::new(1.0, 0.5).unwrap();
        let rows = footprint_constraint_rows(&hs, &fp, FRAC_PI_2);
        let feasible =
            |px: f64, py: f64| rows.iter().all(|r| r.evaluate(px, py, FRAC_PI_2) <= 1e-9);
        // same shrink expressed in the rotated frame: |py|<=1, |px|<=0.5
        assert!(feasible(0.0, 1.0));
        assert!(feasible(0.5, -1.0));
        assert!(!feasible(0.0, 1.01));
        assert!(!feasible(0.51, 0.0));
    }

    #[test]
    fn footprint_rows_match_exact_vertex_containment_at_nominal() {
        // at the linearization heading, row satisfaction == all four exactly
        // rotated vertices inside the original halfspaces
        let r = rect(1.0, -2.0, 0.7, 6.0, 3.0);
        let hs = rect_to_halfspaces(&r);
        let fp = EgoFootprint::new(1.8, 0.8).unwrap();
        let theta = 0.9;
        let rows = footprint_constraint_rows(&hs, &fp, theta);
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut rand01 = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..2000 {
            let p = Vec2::new(rand01() * 10.0 - 4.0, rand01() * 10.0 - 7.0);
            let by_rows = rows.iter().all(|row| row.evaluate(p.x, p.y, theta) <= 1e-9);
            let by_vertices = fp
                .vertices()
                .iter()
                .all(|v| hs.contains(p + v.rotated(theta), 1e-9));
            assert_eq!(by_rows, by_vertices);
        }
    }

    proptest! {
        #[test]
        fn halfspace_membership_equivalence(
            cx in -5.0f64..5.0, cy in -5.0f64..5.0, theta in -3.1f64..3.1,
            l in 0.5f64..8.0, w in 0.5f64..8.0,
            px in -12.0f64..12.0, py in -12.0f64..12.0,
        ) {
            let r = rect(cx, cy, theta, l, w);
            let hs = rect_to_halfspaces(&r);
            let p = Vec2::new(px, py);
            prop_assert_eq!(hs.contains(p, 1e-9), r.contains(p, 1e-9));
        }

        #[test]
        fn interior_distance_bounded_by_half_min_extent(
            cx in -5.0f64..5.0, cy in -5.0f64..5.0, theta in -3.1f64..3.1,
            l in 0.5f64..8.0, w in 0.5f64..8.0,
            px in -12.0f64..12.0, py in -12.0f64..12.0,
        ) {
            let r = rect(cx, cy, theta, l, w);
            let d = interior_distance(Vec2::new(px, py), &r);
            prop_assert!(d >= 0.0);
            prop_assert!(d <= 0.5 * l.min(w) + 1e-12);
        }
    }
}
