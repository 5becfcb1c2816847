//! Subcommand implementations. Every output file gets a manifest written
//! alongside it; nothing is written when a command fails.

use crate::config::ToolConfig;
use crate::manifest::ManifestBuilder;
use crate::render::render_svg;
use corridor_core::annotation::{annotate_corridor, perceived_points, refine_corridor};
use corridor_core::dynamics::{EgoState, Trajectory};
use corridor_core::eval::{collision_rates, l2_metric, MetricsAccumulator};
use corridor_core::geometry::{wrap_angle, Vec2};
use corridor_core::io;
use corridor_core::planner::{fit_weights_with_threads, plan, PlanRequest, PlannerConfig};
use corridor_core::scene::{gen_scene, Scene, SceneKind};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::path::Path;

pub type CmdResult = Result<(), String>;

fn fail<E: std::fmt::Display>(context: &str) -> impl FnOnce(E) -> String + '_ {
    move |e| format!("{context}: {e}")
}

/// Concurrency cap: `CORRIDOR_THREADS` when set, otherwise the available
/// parallelism capped at 8.
pub fn thread_cap() -> usize {
    if let Ok(raw) = std::env::var("CORRIDOR_THREADS") {
        if let Ok(n) = raw.trim().parse::<usize>() {
            return n.max(1);
        }
    }
    std::thread::available_parallelism()
        .map(|n| n.get().min(8))
        .unwrap_or(1)
}

/// The logged ego future expressed in the planning frame (ego at t = 0).
fn planning_frame_future(scene: &Scene) -> Result<Trajectory, String> {
    let origin = scene.ego_state_at(0.0).map_err(fail("scene"))?;
    Ok(scene
        .future_states()
        .map_err(fail("scene"))?
        .iter()
        .map(|s| {
            let p = (s.position() - origin.position()).rotated(-origin.theta);
            EgoState::new(p.x, p.y, wrap_angle(s.theta - origin.theta), s.v)
        })
        .collect())
}

fn request_for(
    scene: &Scene,
    corridor: corridor_core::Corridor,
    cfg: &ToolConfig,
) -> Result<(PlanRequest, PlannerConfig), String> {
    let origin = scene.ego_state_at(0.0).map_err(fail("scene"))?;
    let reference = planning_frame_future(scene)?;
    if corridor.len() != reference.len() {
        return Err(format!(
            "corridor has {} rects but the scene horizon is {}",
            corridor.len(),
            reference.len()
        ));
    }
    let planner_cfg = cfg.planner_for(scene);
    let req = PlanRequest {
        x_init: EgoState::new(0.0, 0.0, 0.0, origin.v),
        reference,
        corridor,
        footprint: scene.footprint,
    };
    Ok((req, planner_cfg))
}

pub fn cmd_gen(kind: SceneKind, seed: u64, out: &Path, cfg: &ToolConfig) -> CmdResult {
    let manifest = ManifestBuilder::new("gen").seed(seed);
    let scene = gen_scene(seed, kind);
    io::write_scene(out, &scene).map_err(fail("writing scene"))?;
    manifest.write(out, cfg)?;
    println!(
        "wrote {} ({} agents, {} curbs, {} lanes)",
        out.display(),
        scene.agents.len(),
        scene.curbs.len(),
        scene.lanes.len()
    );
    Ok(())
}

pub fn cmd_annotate(scene_path: &Path, out: &Path, cfg: &ToolConfig) -> CmdResult {
    let manifest = ManifestBuilder::new("annotate").input("scene", scene_path);
    let scene = io::read_scene(scene_path).map_err(fail("reading scene"))?;
    let corridor =
        annotate_corridor(&scene, &cfg.annotation()).map_err(fail("annotating"))?;
    io::write_corridor(out, &corridor).map_err(fail("writing corridor"))?;
    manifest.write(out, cfg)?;
    let min_area = corridor
        .rects
        .iter()
        .map(|r| r.area())
        .fold(f64::INFINITY, f64::min);
    println!(
        "wrote {} ({} rects, min area {:.1} m^2)",
        out.display(),
        corridor.len(),
        min_area
    );
    Ok(())
}

pub fn cmd_refine(
    scene_path: &Path,
    corridor_path: &Path,
    out: &Path,
    perturb: Option<f64>,
    seed: u64,
    cfg: &ToolConfig,
) -> CmdResult {
    let manifest = ManifestBuilder::new("refine")
        .input("scene", scene_path)
        .input("corridor", corridor_path)
        .seed(seed);
    let scene = io::read_scene(scene_path).map_err(fail("reading scene"))?;
    let corridor = io::read_corridor(corridor_path).map_err(fail("reading corridor"))?;
    let mut perceived =
        perceived_points(&scene, cfg.delta_obs).map_err(fail("extracting obstacles"))?;
    if let Some(sigma) = perturb {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for points in &mut perceived {
            for p in points.iter_mut() {
                // uniform noise of comparable spread keeps this dependency-free
                p.x += rng.random_range(-sigma..=sigma);
                p.y += rng.random_range(-sigma..=sigma);
            }
        }
    }
    let refined = refine_corridor(&corridor, &perceived).map_err(fail("refining"))?;
    io::write_corridor(out, &refined.corridor).map_err(fail("writing corridor"))?;
    manifest.write(out, cfg)?;
    let degenerate: Vec<usize> = refined
        .degenerate
        .iter()
        .enumerate()
        .filter_map(|(i, d)| d.then_some(i + 1))
        .collect();
    if degenerate.is_empty() {
        println!("wrote {} (no degenerate steps)", out.display());
    } else {
        println!("wrote {} (degenerate steps: {degenerate:?})", out.display());
    }
    Ok(())
}

pub fn cmd_plan(scene_path: &Path, corridor_path: &Path, out: &Path, cfg: &ToolConfig) -> CmdResult {
    let manifest = ManifestBuilder::new("plan")
        .input("scene", scene_path)
        .input("corridor", corridor_path);
    let scene = io::read_scene(scene_path).map_err(fail("reading scene"))?;
    let corridor = io::read_corridor(corridor_path).map_err(fail("reading corridor"))?;
    let (req, planner_cfg) = request_for(&scene, corridor, cfg)?;
    let result = plan(&req, &planner_cfg).map_err(fail("planning"))?;
    io::write_plan(out, &result).map_err(fail("writing plan"))?;
    manifest.write(out, cfg)?;
    println!(
        "wrote {} (status {:?}, {:.2} ms)",
        out.display(),
        result.status,
        result.solve_time * 1e3
    );
    Ok(())
}

pub fn cmd_eval(
    scene_path: &Path,
    plan_path: &Path,
    out: &Path,
    grid_res: Option<f64>,
    cfg: &ToolConfig,
) -> CmdResult {
    let manifest = ManifestBuilder::new("eval")
        .input("scene", scene_path)
        .input("plan", plan_path);
    let mut cfg = cfg.clone();
    if let Some(res) = grid_res {
        cfg.grid_resolution = res;
    }
    let scene = io::read_scene(scene_path).map_err(fail("reading scene"))?;
    let plan_file = io::read_plan(plan_path).map_err(fail("reading plan"))?;
    let traj = plan_file.trajectory_states();
    let gt = planning_frame_future(&scene)?;
    let (agent_hits, curb_hits) =
        collision_rates(&traj, &scene.footprint, &scene, cfg.grid()).map_err(fail("rasterizing"))?;
    let (l2_per_t, _) = l2_metric(&traj, &gt).map_err(fail("l2"))?;
    let mut acc = MetricsAccumulator::new(gt.len());
    acc.add_scene(&agent_hits, &curb_hits, &l2_per_t, plan_file.solve_time_s)
        .map_err(fail("aggregating"))?;
    let report = acc.report();
    io::write_metrics(out, &report).map_err(fail("writing metrics"))?;
    manifest.write(out, &cfg)?;
    println!(
        "wrote {} (ACR avg {:.3}, CCR avg {:.3}, L2 avg {:.3} m)",
        out.display(),
        report.acr_avg,
        report.ccr_avg,
        report.l2_avg
    );
    Ok(())
}

pub fn cmd_gradcheck(seed: u64, out: Option<&Path>, cfg: &ToolConfig) -> CmdResult {
    let reports = corridor_core::gradcheck::run_all(seed, cfg.area_alpha);
    let mut all_ok = true;
    println!("{:<24} {:>6} {:>12} {:>10}  result", "suite", "cases", "comparisons", "max err");
    for r in &reports {
        let ok = r.passed();
        all_ok &= ok;
        println!(
            "{:<24} {:>6} {:>12} {:>10.2e}  {}",
            r.name,
            r.cases,
            r.comparisons,
            r.max_rel_err,
            if ok { "pass" } else { "FAIL" }
        );
    }
    if let Some(path) = out {
        let manifest = ManifestBuilder::new("gradcheck").seed(seed);
        io::write_json(path, &reports).map_err(fail("writing report"))?;
        manifest.write(path, cfg)?;
    }
    if all_ok {
        Ok(())
    } else {
        Err("gradient check failed".into())
    }
}

pub fn cmd_fit(
    kind: SceneKind,
    count: usize,
    seed: u64,
    steps: usize,
    lr: f64,
    out: &Path,
    cfg: &ToolConfig,
) -> CmdResult {
    if count == 0 {
        return Err("count must be at least 1".into());
    }
    let manifest = ManifestBuilder::new("fit").seed(seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xf17);
    let mut dataset = Vec::with_capacity(count);
    let mut planner_cfg = None;
    for i in 0..count {
        let scene = gen_scene(seed.wrapping_add(i as u64), kind);
        let corridor =
            annotate_corridor(&scene, &cfg.annotation()).map_err(fail("annotating"))?;
        let (mut req, pc) = request_for(&scene, corridor, cfg)?;
        planner_cfg.get_or_insert(pc);
        // demonstrations are the logged future; references get a lateral
        // zigzag standing in for an imperfect upstream trajectory
        let demo = req.reference.clone();
        let amplitude = rng.random_range(0.25..0.45);
        for (t, s) in req.reference.iter_mut().enumerate() {
            let side = if t % 2 == 0 { 1.0 } else { -1.0 };
            let normal = Vec2::new(-s.theta.sin(), s.theta.cos());
            s.px += normal.x * amplitude * side;
            s.py += normal.y * amplitude * side;
        }
        dataset.push((req, demo));
    }
    let planner_cfg = planner_cfg.expect("count >= 1");
    let threads = thread_cap();
    let outcome = fit_weights_with_threads(&dataset, &planner_cfg, steps, lr, threads)
        .map_err(fail("fitting"))?;
    io::write_json(out, &outcome).map_err(fail("writing weights"))?;
    manifest.write(out, cfg)?;
    println!(
        "wrote {} (loss {:.5} -> {:.5}, Q {:?}, R {:?}, {} threads)",
        out.display(),
        outcome.history.first().unwrap_or(&f64::NAN),
        outcome.history.last().unwrap_or(&f64::NAN),
        outcome.q_diag,
        outcome.r_diag,
        threads
    );
    Ok(())
}

pub fn cmd_render(
    scene_path: &Path,
    corridor_path: Option<&Path>,
    plan_path: Option<&Path>,
    out: &Path,
    cfg: &ToolConfig,
) -> CmdResult {
    let mut manifest = ManifestBuilder::new("render").input("scene", scene_path);
    let scene = io::read_scene(scene_path).map_err(fail("reading scene"))?;
    let corridor = match corridor_path {
        Some(p) => {
            manifest = manifest.input("corridor", p);
            Some(io::read_corridor(p).map_err(fail("reading corridor"))?)
        }
        None => None,
    };
    let planned = match plan_path {
        Some(p) => {
            manifest = manifest.input("plan", p);
            Some(io::read_plan(p).map_err(fail("reading plan"))?)
        }
        None => None,
    };
    let traj = planned.as_ref().map(|p| p.trajectory_states());
    let svg = render_svg(&scene, corridor.as_ref(), traj.as_deref())?;
    std::fs::write(out, svg).map_err(fail("writing svg"))?;
    manifest.write(out, cfg)?;
    println!("wrote {}", out.display());
    Ok(())
}
