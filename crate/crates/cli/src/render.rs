//! SVG overlays: scene geometry, per-timestamp corridor rectangles,
//! reference and optimized trajectories. One file per scene, world frame.

use corridor_core::annotation::Corridor;
use corridor_core::dynamics::EgoState;
use corridor_core::geometry::{rect_vertices, OrientedRect, Vec2};
use corridor_core::scene::Scene;
use std::fmt::Write as _;

/// One color per planning timestamp.
const STEP_COLORS: [&str; 6] = [
    "#e41a1c", "#ff7f00", "#d4aa00", "#4daf4a", "#377eb8", "#984ea3",
];

fn step_color(t: usize) -> &'static str {
    STEP_COLORS[t % STEP_COLORS.len()]
}

struct Canvas {
    body: String,
    min: Vec2,
    max: Vec2,
}

impl Canvas {
    fn new() -> Self {
        Canvas {
            body: String::new(),
            min: Vec2::new(f64::INFINITY, f64::INFINITY),
            max: Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY),
        }
    }

    fn grow(&mut self, p: Vec2) {
        self.min.x = self.min.x.min(p.x);
        self.min.y = self.min.y.min(p.y);
        self.max.x = self.max.x.max(p.x);
        self.max.y = self.max.y.max(p.y);
    }

    fn path_points(&mut self, pts: &[Vec2]) -> String {
        let mut out = String::new();
        for p in pts {
            self.grow(*p);
            // SVG y grows downward
            let _ = write!(out, "{:.2},{:.2} ", p.x, -p.y);
        }
        out.trim_end().to_string()
    }

    fn polyline(&mut self, pts: &[Vec2], style: &str) {
        if pts.len() < 2 {
            return;
        }
        let points = self.path_points(pts);
        let _ = writeln!(self.body, r#"<polyline points="{points}" {style}/>"#);
    }

    fn polygon(&mut self, pts: &[Vec2], style: &str) {
        let points = self.path_points(pts);
        let _ = writeln!(self.body, r#"<polygon points="{points}" {style}/>"#);
    }

    fn circle(&mut self, p: Vec2, r: f64, style: &str) {
        self.grow(p);
        let _ = writeln!(
            self.body,
            r#"<circle cx="{:.2}" cy="{:.2}" r="{r:.2}" {style}/>"#,
            p.x, -p.y
        );
    }

    fn into_svg(self) -> String {
        let pad = 4.0;
        let x = self.min.x - pad;
        let y = -(self.max.y + pad);
        let w = (self.max.x - self.min.x + 2.0 * pad).max(1.0);
        let h = (self.max.y - self.min.y + 2.0 * pad).max(1.0);
        format!(
            concat!(
                r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="{:.2} {:.2} {:.2} {:.2}" "#,
                r#"width="{:.0}" height="{:.0}">"#,
                "\n<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"#fbfbf8\"/>\n{}</svg>\n"
            ),
            x,
            y,
            w,
            h,
            (w * 12.0).min(2400.0),
            (h * 12.0).min(2400.0),
            x,
            y,
            w,
            h,
            self.body
        )
    }
}

fn rect_polygon(canvas: &mut Canvas, rect: &OrientedRect, style: &str) {
    let vs = rect_vertices(rect);
    canvas.polygon(&vs, style);
}

/// Render the scene with optional corridor and planned trajectory overlays.
/// The corridor and plan are given in the planning frame and drawn in the
/// world frame.
pub fn render_svg(
    scene: &Scene,
    corridor: Option<&Corridor>,
    planned: Option<&[EgoState]>,
) -> Result<String, String> {
    let origin = scene
        .ego_state_at(0.0)
        .map_err(|e| format!("scene has no t=0 state: {e}"))?;
    let to_world = |p: Vec2| -> Vec2 { p.rotated(origin.theta) + origin.position() };
    let mut canvas = Canvas::new();

    for lane in &scene.lanes {
        canvas.polyline(
            lane,
            r##"fill="none" stroke="#9a9a9a" stroke-width="0.12" stroke-dasharray="1.2 1.0""##,
        );
    }
    for curb in &scene.curbs {
        canvas.polyline(curb, r##"fill="none" stroke="#2b2b2b" stroke-width="0.22""##);
    }

    let n = scene.horizon as usize;
    for agent in &scene.agents {
        for t in 0..=n {
            let rect = agent.rect_at(t as f64 * scene.dt);
            let color = if t == 0 { "#555555" } else { step_color(t - 1) };
            let style = format!(
                r#"fill="{color}" fill-opacity="0.10" stroke="{color}" stroke-opacity="0.65" stroke-width="0.08""#
            );
            rect_polygon(&mut canvas, &rect, &style);
        }
    }

    if let Some(corridor) = corridor {
        for (t, rect) in corridor.rects.iter().enumerate() {
            let center = to_world(rect.center());
            let world_rect = OrientedRect {
                cx: center.x,
                cy: center.y,
                theta: corridor_core::geometry::wrap_angle(rect.theta + origin.theta),
                l: rect.l,
                w: rect.w,
            };
            let color = step_color(t);
            let style = format!(
                r#"fill="{color}" fill-opacity="0.07" stroke="{color}" stroke-width="0.12""#
            );
            rect_polygon(&mut canvas, &world_rect, &style);
        }
    }

    // reference: the logged ego future
    let reference: Vec<Vec2> = (0..=n)
        .filter_map(|t| scene.ego_state_at(t as f64 * scene.dt).ok())
        .map(|s| s.position())
        .collect();
    canvas.polyline(
        &reference,
        r##"fill="none" stroke="#b15928" stroke-width="0.14" stroke-dasharray="0.6 0.4""##,
    );
    for p in &reference[1..] {
        canvas.circle(*p, 0.18, r##"fill="#b15928""##);
    }

    if let Some(planned) = planned {
        let mut pts = vec![origin.position()];
        pts.extend(planned.iter().map(|s| to_world(s.position())));
        canvas.polyline(&pts, r##"fill="none" stroke="#1a7a2e" stroke-width="0.16""##);
        for (t, s) in planned.iter().enumerate() {
            let color = step_color(t);
            canvas.circle(to_world(s.position()), 0.2, &format!(r#"fill="{color}""#));
        }
    }

    // ego footprint at t = 0
    let ego_rect = OrientedRect {
        cx: origin.px,
        cy: origin.py,
        theta: origin.theta,
        l: 2.0 * scene.footprint.half_length,
        w: 2.0 * scene.footprint.half_width,
    };
    rect_polygon(
        &mut canvas,
        &ego_rect,
        r##"fill="#1a7a2e" fill-opacity="0.25" stroke="#1a7a2e" stroke-width="0.1""##,
    );

    Ok(canvas.into_svg())
}
