//! Finite-difference verification suites for every analytic gradient in the
//! crate: the corridor losses, the dynamics Jacobians, the QP backward
//! pass, and the end-to-end weight gradients through the planner.
//!
//! Comparisons are relative with an absolute floor: a component passes when
//! `|a - f| <= rtol * max(|a|, |f|, scale)` with `scale = max(1, ||a||_inf,
//! ||f||_inf)`, so components that are exactly zero on both sides (or pure
//! solver noise against an analytic zero) do not produce spurious failures.

use crate::annotation::Corridor;
use crate::dynamics::{linearize, step, Control, EgoState, Trajectory};
use crate::geometry::OrientedRect;
use crate::losses::{
    agent_safety_loss, area_loss, corridor_loss, encode_corridor, imitation_loss,
    map_safety_loss, ENCODING_DIM,
};
use crate::planner::{
    imitation_gradients, plan_with_artifacts, GradientTargets, PlanRequest, PlanStatus,
    PlannerConfig,
};
use crate::qp::{self, QpProblem, QpStatus};
use crate::geometry::Vec2;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Outcome of one verification suite.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub name: String,
    pub cases: usize,
    pub comparisons: usize,
    pub failures: usize,
    pub max_rel_err: f64,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.cases > 0 && self.failures == 0
    }
}

/// Compare analytic and finite-difference gradients; returns
/// `(failures, max_relative_error)`.
pub fn compare_gradients(analytic: &[f64], fd: &[f64], rtol: f64) -> (usize, f64) {
    assert_eq!(analytic.len(), fd.len());
    let scale = analytic
        .iter()
        .chain(fd)
        .fold(1.0f64, |m, v| m.max(v.abs()));
    let mut failures = 0;
    let mut max_err = 0.0f64;
    for (a, f) in analytic.iter().zip(fd) {
        let denom = a.abs().max(f.abs()).max(scale);
        let err = (a - f).abs() / denom;
        max_err = max_err.max(err);
        if err > rtol {
            failures += 1;
        }
    }
    (failures, max_err)
}

/// Central finite differences of a scalar function of a flat vector.
pub fn fd_gradient(f: &mut dyn FnMut(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut grad = vec![0.0; x.len()];
    let mut work = x.to_vec();
    for i in 0..x.len() {
        let orig = work[i];
        work[i] = orig + h;
        let hi = f(&work);
        work[i] = orig - h;
        let lo = f(&work);
        work[i] = orig;
        grad[i] = (hi - lo) / (2.0 * h);
    }
    grad
}

fn random_rect(rng: &mut ChaCha8Rng) -> OrientedRect {
    OrientedRect::new(
        rng.random_range(-5.0..5.0),
        rng.random_range(-5.0..5.0),
        rng.random_range(-3.0..3.0),
        rng.random_range(2.0..8.0),
        rng.random_range(1.5..6.0),
    )
    .unwrap()
}

fn random_corridor(rng: &mut ChaCha8Rng, n: usize) -> Corridor {
    Corridor {
        rects: (0..n).map(|_| random_rect(rng)).collect(),
    }
}

/// Kink guards for the max-of-interior-depth losses: every point must be
/// clear of each rectangle boundary and of edge / arg-max ties by `margin`.
fn safety_config_is_smooth(corridor: &Corridor, points: &[Vec<Vec2>], margin: f64) -> bool {
    for (rect, pts) in corridor.rects.iter().zip(points) {
        let mut best = 0.0f64;
        let mut second = 0.0f64;
        for p in pts {
            let depths = crate::geometry::edge_depths(*p, rect);
            let mut sorted = depths;
            sorted.sort_by(f64::total_cmp);
            let min_depth = sorted[0];
            if min_depth.abs() < margin {
                return false; // too close to the boundary
            }
            if min_depth > 0.0 && sorted[1] - sorted[0] < margin {
                return false; // two edges nearly tied
            }
            let d = min_depth.max(0.0);
            if d > best {
                second = best;
                best = d;
            } else if d > second {
                second = d;
            }
        }
        if best > 0.0 && best - second < margin {
            return false; // arg-max nearly tied
        }
    }
    true
}

const LOSS_FD_H: f64 = 1e-6;
const LOSS_RTOL: f64 = 1e-5;
const KINK_MARGIN: f64 = 1e-3;

// The finite-difference side of each loss check evaluates the loss directly
// in the raw (cx, cy, cos, sin, l, w) encoding, the exact function the
// analytic gradient differentiates; rebuilding an OrientedRect would
// renormalize the perturbed (cos, sin) pair and change the function.

fn loss_corridor_suite(seed: u64, cases: usize) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xC0441D04);
    let mut report = SuiteReport {
        name: "loss_corridor".into(),
        cases: 0,
        comparisons: 0,
        failures: 0,
        max_rel_err: 0.0,
    };
    while report.cases < cases {
        let gt = random_corridor(&mut rng, 4);
        let pred = random_corridor(&mut rng, 4);
        let ep = encode_corridor(&pred);
        let eg = encode_corridor(&gt);
        if ep
            .iter()
            .zip(&eg)
            .any(|(a, b)| (a - b).abs() < KINK_MARGIN)
        {
            continue; // L1 residual near a kink
        }
        let analytic = corridor_loss(&pred, &gt).unwrap();
        // the L1 encoding loss is evaluated directly on the encoding
        let mut f = |x: &[f64]| -> f64 {
            let n = x.len() as f64;
            x.iter()
                .zip(&eg)
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>()
                / n
        };
        let fd = fd_gradient(&mut f, &ep, LOSS_FD_H);
        let (failures, max_err) = compare_gradients(&analytic.gradient, &fd, LOSS_RTOL);
        report.cases += 1;
        report.comparisons += fd.len();
        report.failures += failures;
        report.max_rel_err = report.max_rel_err.max(max_err);
    }
    report
}

/// Evaluate a safety loss directly in the raw `(cx, cy, cos, sin, l, w)`
/// encoding, the exact function the analytic gradient differentiates.
fn raw_safety_loss(encoding: &[f64], points: &[Vec<Vec2>]) -> f64 {
    let mut total = 0.0;
    for (t, chunk) in encoding.chunks_exact(ENCODING_DIM).enumerate() {
        let (cx, cy, cos, sin, l, w) = (chunk[0], chunk[1], chunk[2], chunk[3], chunk[4], chunk[5]);
        let mut best = 0.0f64;
        for p in &points[t] {
            let dx = p.x - cx;
            let dy = p.y - cy;
            let lx = cos * dx + sin * dy;
            let ly = -sin * dx + cos * dy;
            let depths = [0.5 * l - lx, lx + 0.5 * l, 0.5 * w - ly, ly + 0.5 * w];
            let d = depths.iter().fold(f64::INFINITY, |m, v| m.min(*v)).max(0.0);
            best = best.max(d);
        }
        total += best;
    }
    total
}

fn loss_safety_suite(name: &str, seed: u64, cases: usize, agents: bool) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ if agents { 0xA6E47 } else { 0x3A9 });
    let mut report = SuiteReport {
        name: name.to_string(),
        cases: 0,
        comparisons: 0,
        failures: 0,
        max_rel_err: 0.0,
    };
    while report.cases < cases {
        let corridor = random_corridor(&mut rng, 4);
        let points: Vec<Vec<Vec2>> = corridor
            .rects
            .iter()
            .map(|rect| {
                let count = rng.random_range(1..4usize);
                (0..count)
                    .map(|_| {
                        // mix of interior and exterior points
                        let inside = rng.random_range(0.0..1.0) < 0.7;
                        if inside {
                            let lx = rng.random_range(-0.45..0.45) * rect.l;
                            let ly = rng.random_range(-0.45..0.45) * rect.w;
                            rect.from_frame(Vec2::new(lx, ly))
                        } else {
                            Vec2::new(rng.random_range(-15.0..15.0), rng.random_range(-15.0..15.0))
                        }
                    })
                    .collect()
            })
            .collect();
        if !safety_config_is_smooth(&corridor, &points, KINK_MARGIN) {
            continue;
        }
        let analytic = if agents {
            agent_safety_loss(&corridor, &points).unwrap()
        } else {
            map_safety_loss(&corridor, &points).unwrap()
        };
        let enc = encode_corridor(&corridor);
        let mut f = |x: &[f64]| raw_safety_loss(x, &points);
        let fd = fd_gradient(&mut f, &enc, LOSS_FD_H);
        let (failures, max_err) = compare_gradients(&analytic.gradient, &fd, LOSS_RTOL);
        report.cases += 1;
        report.comparisons += fd.len();
        report.failures += failures;
        report.max_rel_err = report.max_rel_err.max(max_err);
    }
    report
}

fn loss_area_suite(seed: u64, cases: usize, alpha: f64) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xA4EA);
    let mut report = SuiteReport {
        name: "loss_area".into(),
        cases: 0,
        comparisons: 0,
        failures: 0,
        max_rel_err: 0.0,
    };
    for _ in 0..cases {
        let corridor = random_corridor(&mut rng, 4);
        let analytic = area_loss(&corridor, alpha).unwrap();
        let enc = encode_corridor(&corridor);
        let mut f = |x: &[f64]| -> f64 {
            x.chunks_exact(ENCODING_DIM)
                .map(|c| (-alpha * c[4] * c[5]).exp())
                .sum()
        };
        let fd = fd_gradient(&mut f, &enc, LOSS_FD_H);
        let (failures, max_err) = compare_gradients(&analytic.gradient, &fd, LOSS_RTOL);
        report.cases += 1;
        report.comparisons += fd.len();
        report.failures += failures;
        report.max_rel_err = report.max_rel_err.max(max_err);
    }
    report
}

fn loss_imitation_suite(seed: u64, cases: usize) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x1311);
    let mut report = SuiteReport {
        name: "loss_imitation".into(),
        cases: 0,
        comparisons: 0,
        failures: 0,
        max_rel_err: 0.0,
    };
    while report.cases < cases {
        let n = 6;
        let gt: Trajectory = (0..n)
            .map(|_| {
                EgoState::new(
                    rng.random_range(-10.0..10.0),
                    rng.random_range(-10.0..10.0),
                    0.0,
                    0.0,
                )
            })
            .collect();
        let traj: Trajectory = gt
            .iter()
            .map(|s| {
                EgoState::new(
                    s.px + rng.random_range(-1.0..1.0),
                    s.py + rng.random_range(-1.0..1.0),
                    0.0,
                    0.0,
                )
            })
            .collect();
        if traj
            .iter()
            .zip(&gt)
            .any(|(a, b)| (a.px - b.px).abs() < KINK_MARGIN || (a.py - b.py).abs() < KINK_MARGIN)
        {
            continue;
        }
        let analytic = imitation_loss(&traj, &gt).unwrap();
        let flat: Vec<f64> = traj.iter().flat_map(|s| [s.px, s.py]).collect();
        let mut f = |x: &[f64]| -> f64 {
            let t: Trajectory = x
                .chunks_exact(2)
                .map(|c| EgoState::new(c[0], c[1], 0.0, 0.0))
                .collect();
            imitation_loss(&t, &gt).unwrap().value
        };
        let fd = fd_gradient(&mut f, &flat, LOSS_FD_H);
        let (failures, max_err) = compare_gradients(&analytic.gradient, &fd, LOSS_RTOL);
        report.cases += 1;
        report.comparisons += fd.len();
        report.failures += failures;
        report.max_rel_err = report.max_rel_err.max(max_err);
    }
    report
}

/// FD suites for all five losses at `cases` non-degenerate configurations
/// each. `area_alpha` is the area-loss scale under test.
pub fn loss_suites(seed: u64, cases: usize, area_alpha: f64) -> Vec<SuiteReport> {
    vec![
        loss_corridor_suite(seed, cases),
        loss_safety_suite("loss_map", seed, cases, false),
        loss_safety_suite("loss_agent", seed, cases, true),
        loss_area_suite(seed, cases, area_alpha),
        loss_imitation_suite(seed, cases),
    ]
}

/// FD check of the bicycle-model Jacobians at random nominal points with
/// `|delta| <= 0.5`.
pub fn dynamics_suite(seed: u64, cases: usize) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xD1);
    let mut report = SuiteReport {
        name: "dynamics_jacobians".into(),
        cases: 0,
        comparisons: 0,
        failures: 0,
        max_rel_err: 0.0,
    };
    let dt = 0.5;
    let wb = 2.5;
    let h = 1e-6;
    for _ in 0..cases {
        let x = EgoState::new(
            rng.random_range(-10.0..10.0),
            rng.random_range(-10.0..10.0),
            rng.random_range(-3.0..3.0),
            rng.random_range(0.0..9.0),
        );
        let u = Control::new(rng.random_range(-3.0..3.0), rng.random_range(-0.5..0.5));
        let lin = linearize(&x, &u, dt, wb).unwrap();
        let mut analytic = Vec::new();
        let mut fd = Vec::new();
        let eval = |xv: [f64; 4], uv: [f64; 2]| -> [f64; 4] {
            let s = step(
                &EgoState {
                    px: xv[0],
                    py: xv[1],
                    theta: xv[2],
                    v: xv[3],
                },
                &Control::new(uv[0], uv[1]),
                dt,
                wb,
            )
            .unwrap();
            [s.px, s.py, s.theta, s.v]
        };
        let xv = [x.px, x.py, x.theta, x.v];
        let uv = [u.a, u.delta];
        for j in 0..4 {
            let mut p = xv;
            let mut m = xv;
            p[j] += h;
            m[j] -= h;
            let fp = eval(p, uv);
            let fm = eval(m, uv);
            for i in 0..4 {
                analytic.push(lin.a[(i, j)]);
                fd.push((fp[i] - fm[i]) / (2.0 * h));
            }
        }
        for j in 0..2 {
            let mut p = uv;
            let mut m = uv;
            p[j] += h;
            m[j] -= h;
            let fp = eval(xv, p);
            let fm = eval(xv, m);
            for i in 0..4 {
                analytic.push(lin.b[(i, j)]);
                fd.push((fp[i] - fm[i]) / (2.0 * h));
            }
        }
        let (failures, max_err) = compare_gradients(&analytic, &fd, 1e-6);
        report.cases += 1;
        report.comparisons += fd.len();
        report.failures += failures;
        report.max_rel_err = report.max_rel_err.max(max_err);
    }
    report
}

/// Random strictly convex QP with a known feasible point. Some inequality
/// rows are placed close to the feasible point so active sets are exercised.
pub fn random_strictly_convex_qp(
    rng: &mut ChaCha8Rng,
    n_max: usize,
    mi_max: usize,
    allow_eq: bool,
) -> QpProblem {
    let n = rng.random_range(1..=n_max);
    let mi = rng.random_range(0..=mi_max);
    let me = if allow_eq && n >= 2 && rng.random_range(0.0..1.0) < 0.4 {
        1
    } else {
        0
    };
    let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let h = &m.transpose() * &m + DMatrix::identity(n, n) * 0.5;
    // symmetrize exactly against rounding in the product
    let h = (&h + &h.transpose()) * 0.5;
    let g = DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
    let z0 = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
    let a_in = DMatrix::from_fn(mi, n, |_, _| rng.random_range(-1.0..1.0));
    let b_in = if mi > 0 {
        &a_in * &z0
            + DVector::from_fn(mi, |_, _| {
                if rng.random_range(0.0..1.0) < 0.5 {
                    rng.random_range(0.01..0.3)
                } else {
                    rng.random_range(0.5..2.0)
                }
            })
    } else {
        DVector::zeros(0)
    };
    let a_eq = DMatrix::from_fn(me, n, |_, _| rng.random_range(-1.0..1.0));
    let b_eq = if me > 0 { &a_eq * &z0 } else { DVector::zeros(0) };
    QpProblem::new(h, g, a_eq, b_eq, a_in, b_in).unwrap()
}

/// Strict complementarity with margin: every row has either a clearly
/// positive multiplier or clearly positive slack.
pub fn strictly_complementary(p: &QpProblem, sol: &qp::QpSolution, margin: f64) -> bool {
    if p.num_in() == 0 {
        return true;
    }
    let slack = &p.b_in - &p.a_in * &sol.z;
    (0..p.num_in()).all(|i| sol.lambda[i] > margin || slack[i] > margin)
}

/// FD check of the QP backward pass on non-degenerate random problems:
/// gradients w.r.t. `g`, `b_in`, the `H` diagonal and all `A_in` entries.
pub fn qp_backward_suite(seed: u64, cases: usize) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9b);
    let mut report = SuiteReport {
        name: "qp_backward".into(),
        cases: 0,
        comparisons: 0,
        failures: 0,
        max_rel_err: 0.0,
    };
    let tol = 1e-10;
    let h = 1e-6;
    let rtol = 1e-4;
    while report.cases < cases {
        let p = random_strictly_convex_qp(&mut rng, 6, 8, true);
        let sol = match qp::solve(&p, tol) {
            Ok(s) if s.status == QpStatus::Optimal => s,
            _ => continue,
        };
        if !strictly_complementary(&p, &sol, 1e-3) || sol.kkt_residual > 1e-10 {
            continue;
        }
        let n = p.num_vars();
        let dl_dz = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let grads = match qp::backward(&p, &sol, &dl_dz) {
            Ok(g) if !g.degenerate => g,
            _ => continue,
        };

        let loss_of = |prob: &QpProblem| -> Option<f64> {
            let s = qp::solve(prob, tol).ok()?;
            if s.status != QpStatus::Optimal {
                return None;
            }
            Some(dl_dz.dot(&s.z))
        };

        let mut analytic = Vec::new();
        let mut fd = Vec::new();
        let mut bad_probe = false;
        let mut probe = |an: f64, plus: &QpProblem, minus: &QpProblem| match (loss_of(plus), loss_of(minus)) {
            (Some(hi), Some(lo)) => {
                analytic.push(an);
                fd.push((hi - lo) / (2.0 * h));
            }
            _ => bad_probe = true,
        };

        for i in 0..n {
            let mut plus = p.clone();
            plus.g[i] += h;
            let mut minus = p.clone();
            minus.g[i] -= h;
            probe(grads.dl_dg[i], &plus, &minus);
        }
        for i in 0..p.num_in() {
            let mut plus = p.clone();
            plus.b_in[i] += h;
            let mut minus = p.clone();
            minus.b_in[i] -= h;
            probe(grads.dl_db_in[i], &plus, &minus);
        }
        for j in 0..n {
            let mut plus = p.clone();
            plus.h[(j, j)] += h;
            let mut minus = p.clone();
            minus.h[(j, j)] -= h;
            probe(grads.dl_dh[(j, j)], &plus, &minus);
        }
        for i in 0..p.num_in() {
            for k in 0..n {
                let mut plus = p.clone();
                plus.a_in[(i, k)] += h;
                let mut minus = p.clone();
                minus.a_in[(i, k)] -= h;
                probe(grads.dl_da_in[(i, k)], &plus, &minus);
            }
        }
        if bad_probe {
            continue;
        }

        // inactive rows must carry exactly zero b-gradients
        let slack = &p.b_in - &p.a_in * &sol.z;
        let exact_zero_ok = (0..p.num_in())
            .filter(|&i| sol.lambda[i] <= qp::COMPLEMENTARITY_MARGIN && slack[i] > 1e-3)
            .all(|i| grads.dl_db_in[i] == 0.0);

        let (failures, max_err) = compare_gradients(&analytic, &fd, rtol);
        report.cases += 1;
        report.comparisons += fd.len();
        report.failures += failures + usize::from(!exact_zero_ok);
        report.max_rel_err = report.max_rel_err.max(max_err);
    }
    report
}

/// Build a planning request from a generated scene, expressed in the
/// planning frame, with the ground-truth future as the reference.
pub fn scene_request(seed: u64, kind: crate::scene::SceneKind) -> (PlanRequest, PlannerConfig) {
    let scene = crate::scene::gen_scene(seed, kind);
    let corridor =
        crate::annotation::annotate_corridor(&scene, &crate::annotation::AnnotationConfig::default())
            .expect("generated scenes annotate cleanly");
    let origin = scene.ego_state_at(0.0).unwrap();
    let reference: Trajectory = scene
        .future_states()
        .unwrap()
        .iter()
        .map(|s| {
            let p = (s.position() - origin.position()).rotated(-origin.theta);
            EgoState::new(
                p.x,
                p.y,
                crate::geometry::wrap_angle(s.theta - origin.theta),
                s.v,
            )
        })
        .collect();
    let cfg = PlannerConfig {
        dt: scene.dt,
        horizon: scene.horizon as usize,
        wheelbase: scene.wheelbase,
        ..PlannerConfig::default()
    };
    let req = PlanRequest {
        x_init: EgoState::new(0.0, 0.0, 0.0, origin.v),
        reference,
        corridor,
        footprint: scene.footprint,
    };
    (req, cfg)
}

/// FD check of `d(imitation loss) / d(Q_diag, R_diag)` through
/// assemble -> solve -> rollout on synthetic scenes.
pub fn plan_weights_suite(seed: u64, scenes: usize) -> SuiteReport {
    let mut report = SuiteReport {
        name: "plan_weight_gradients".into(),
        cases: 0,
        comparisons: 0,
        failures: 0,
        max_rel_err: 0.0,
    };
    let h = 1e-5;
    let rtol = 1e-3;
    let kinds = [
        crate::scene::SceneKind::Straight,
        crate::scene::SceneKind::CutIn,
        crate::scene::SceneKind::Turn,
    ];
    let mut attempt = 0u64;
    while report.cases < scenes && attempt < 200 {
        attempt += 1;
        let kind = kinds[(attempt as usize) % kinds.len()];
        let (req, cfg) = scene_request(seed.wrapping_add(attempt), kind);
        // demonstration offset keeps the L1 residuals away from kinks
        let demo: Trajectory = req
            .reference
            .iter()
            .enumerate()
            .map(|(i, s)| {
                EgoState::new(
                    s.px + 0.25 + 0.05 * i as f64,
                    s.py - 0.35 + 0.04 * i as f64,
                    s.theta,
                    s.v,
                )
            })
            .collect();

        let Ok((res, art)) = plan_with_artifacts(&req, &cfg) else {
            continue;
        };
        if res.status != PlanStatus::Optimal {
            continue;
        }
        let residual = art.solution.as_ref().map_or(f64::INFINITY, |s| s.kkt_residual);
        if residual > 1e-10 {
            continue;
        }
        let Ok(grads) = imitation_gradients(&req, &cfg, &res, &art, &demo, GradientTargets::default())
        else {
            continue;
        };
        if grads.degenerate {
            continue;
        }
        // residuals must stay away from the L1 kink under perturbation
        if res
            .trajectory
            .iter()
            .zip(&demo)
            .any(|(a, b)| (a.px - b.px).abs() < 1e-3 || (a.py - b.py).abs() < 1e-3)
        {
            continue;
        }

        let loss_at = |q: [f64; 4], r: [f64; 2]| -> Option<f64> {
            let cfg_p = PlannerConfig {
                q_diag: q,
                r_diag: r,
                ..cfg
            };
            let (res_p, _) = plan_with_artifacts(&req, &cfg_p).ok()?;
            if res_p.status != PlanStatus::Optimal {
                return None;
            }
            Some(imitation_loss(&res_p.trajectory, &demo).ok()?.value)
        };

        let mut analytic = Vec::new();
        let mut fd = Vec::new();
        let mut bad = false;
        for k in 0..4 {
            let mut qp_ = cfg.q_diag;
            let mut qm = cfg.q_diag;
            qp_[k] += h;
            qm[k] -= h;
            match (loss_at(qp_, cfg.r_diag), loss_at(qm, cfg.r_diag)) {
                (Some(hi), Some(lo)) => {
                    analytic.push(grads.q_diag[k]);
                    fd.push((hi - lo) / (2.0 * h));
                }
                _ => bad = true,
            }
        }
        for k in 0..2 {
            let mut rp = cfg.r_diag;
            let mut rm = cfg.r_diag;
            rp[k] += h;
            rm[k] -= h;
            match (loss_at(cfg.q_diag, rp), loss_at(cfg.q_diag, rm)) {
                (Some(hi), Some(lo)) => {
                    analytic.push(grads.r_diag[k]);
                    fd.push((hi - lo) / (2.0 * h));
                }
                _ => bad = true,
            }
        }
        if bad {
            continue;
        }
        let (failures, max_err) = compare_gradients(&analytic, &fd, rtol);
        report.cases += 1;
        report.comparisons += fd.len();
        report.failures += failures;
        report.max_rel_err = report.max_rel_err.max(max_err);
    }
    report
}

/// Run every FD suite with its standard case counts.
pub fn run_all(seed: u64, area_alpha: f64) -> Vec<SuiteReport> {
    let mut reports = loss_suites(seed, 50, area_alpha);
    reports.push(dynamics_suite(seed, 100));
    reports.push(qp_backward_suite(seed, 50));
    reports.push(plan_weights_suite(seed, 10));
    reports
}
