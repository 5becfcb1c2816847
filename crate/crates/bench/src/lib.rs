//! Shared setup for the criterion benchmarks: representative planning
//! requests and obstacle sets built from the synthetic scenes.

use corridor_core::annotation::{annotate_corridor, AnnotationConfig};
use corridor_core::dynamics::EgoState;
use corridor_core::geometry::{wrap_angle, Vec2};
use corridor_core::planner::{PlanRequest, PlannerConfig};
use corridor_core::scene::{gen_scene, SceneKind};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// A planning request over an annotated cut-in scene, planning frame.
pub fn cut_in_request(seed: u64) -> (PlanRequest, PlannerConfig) {
    let scene = gen_scene(seed, SceneKind::CutIn);
    let corridor = annotate_corridor(&scene, &AnnotationConfig::default())
        .expect("synthetic scenes annotate cleanly");
    let origin = scene.ego_state_at(0.0).unwrap();
    let reference = scene
        .future_states()
        .unwrap()
        .iter()
        .map(|s| {
            let p = (s.position() - origin.position()).rotated(-origin.theta);
            EgoState::new(p.x, p.y, wrap_angle(s.theta - origin.theta), s.v)
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

/// Random obstacle points inside a 30 m x 15 m boundary around the origin.
pub fn random_obstacles(seed: u64, count: usize) -> Vec<Vec2> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(count);
    while points.len() < count {
        let p = Vec2::new(rng.random_range(-15.0..15.0), rng.random_range(-7.5..7.5));
        if p.norm() > 1e-3 {
            points.push(p);
        }
    }
    points
}

/// A cut-in scene for annotation benchmarks.
pub fn bench_scene(seed: u64) -> corridor_core::Scene {
    gen_scene(seed, SceneKind::CutIn)
}
