// Validation uses `!(x > 0.0)` style comparisons throughout so that NaN
// inputs fail closed; the suggested `x <= 0.0` rewrite would let NaN pass.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Safe-corridor planning toolkit: annotate spatio-temporal obstacle-free
//! rectangles from scene geometry, score them with corridor losses, and
//! generate kinematically feasible trajectories with a corridor-constrained,
//! differentiable quadratic program over a linearized bicycle model.

pub mod annotation;
pub mod dynamics;
pub mod eval;
pub mod geometry;
pub mod gradcheck;
pub mod io;
pub mod losses;
pub mod planner;
pub mod qp;
pub mod scene;

pub use annotation::{
    annotate_corridor, refine_corridor, solve_mer, AnnotationConfig, AnnotationError, AxisRect,
    Corridor, MerBoundary, RefinedCorridor,
};
pub use dynamics::{
    linearize, rollout, step, Control, ControlSequence, EgoState, LinearDynamics,
    LinearizationForm, Trajectory,
};
pub use eval::{
    collision_rates, l2_metric, rasterize, BevGrid, GridSpec, MetricsAccumulator, MetricsReport,
    Shape, SolveTimeStats,
};
pub use geometry::{
    footprint_constraint_rows, interior_distance, rect_to_halfspaces, rect_vertices, EgoFootprint,
    FootprintRow, Halfspace, HalfspaceSet, OrientedRect, Vec2,
};
pub use losses::{
    agent_safety_loss, area_loss, corridor_loss, encode_corridor, imitation_loss, map_safety_loss,
    LossValue,
};
pub use planner::{
    assemble, fit_weights, plan, FitOutcome, PlanRequest, PlanResult, PlanStatus, PlannerConfig,
};
pub use qp::{QpProblem, QpSolution, QpStatus};
pub use scene::{gen_scene, sample_contour, Scene, SceneKind};
