//! Corridor-constrained trajectory optimization: assemble the tracking QP,
//! solve with fallbacks, roll out the controls, and fit the cost weights by
//! gradient descent through the solver.
//!
//! The stacked decision variable is `z = (x_1 .. x_N, u_0 .. u_{N-1})` with
//! 4 state and 2 control entries per step (`n = 6N`). Dynamics enter as
//! `4N` equality rows, the corridor as 16 linearized footprint rows per
//! step, and the control bounds as `4N` inequality rows. Inequality rows
//! are ordered corridor first, control bounds after, so the soft fallback
//! can relax exactly the corridor block.

use crate::annotation::Corridor;
use crate::dynamics::{
    linearize_with_form, rollout, Control, ControlSequence, EgoState, LinearDynamics,
    LinearizationForm, Trajectory,
};
use crate::geometry::{
    footprint_constraint_rows, rect_to_halfspaces, wrap_angle, EgoFootprint, OrientedRect, Vec2,
};
use crate::losses::{imitation_loss, LossError, ENCODING_DIM};
use crate::qp::{self, QpError, QpProblem, QpSolution, QpStatus};
use nalgebra::{DMatrix, DVector, Vector4};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::time::Instant;

/// Rows of the linearized footprint constraint per corridor rectangle
/// (4 halfspaces x 4 vertices).
pub const ROWS_PER_RECT: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub enum PlanError {
    InvalidInput(String),
    Loss(LossError),
    Qp(QpError),
    Dynamics(crate::dynamics::DynamicsError),
}

impl fmt::Display for PlanError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PlanError::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
            PlanError::Loss(e) => write!(f, "loss error: {e}"),
            PlanError::Qp(e) => write!(f, "qp error: {e}"),
            PlanError::Dynamics(e) => write!(f, "dynamics error: {e}"),
        }
    }
}

impl std::error::Error for PlanError {}

impl From<QpError> for PlanError {
    fn from(e: QpError) -> Self {
        PlanError::Qp(e)
    }
}

impl From<LossError> for PlanError {
    fn from(e: LossError) -> Self {
        PlanError::Loss(e)
    }
}

impl From<crate::dynamics::DynamicsError> for PlanError {
    fn from(e: crate::dynamics::DynamicsError) -> Self {
        PlanError::Dynamics(e)
    }
}

/// Tracking weights, control bounds and solver settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlannerConfig {
    /// Diagonal state tracking weights (position x/y, heading, speed).
    pub q_diag: [f64; 4],
    /// Diagonal control effort weights (acceleration, steering).
    pub r_diag: [f64; 2],
    pub u_min: Control,
    pub u_max: Control,
    pub dt: f64,
    pub horizon: usize,
    pub wheelbase: f64,
    pub tol: f64,
    pub slack_weight: f64,
    /// Safety margin subtracted from each corridor rectangle extent before
    /// building constraint rows; absorbs linearization and rollout error.
    pub corridor_margin: f64,
    pub linearization: LinearizationForm,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            q_diag: [1.0, 1.0, 0.5, 0.5],
            r_diag: [0.1, 0.1],
            u_min: Control::new(-6.0, -0.6),
            u_max: Control::new(4.0, 0.6),
            dt: 0.5,
            horizon: 6,
            wheelbase: 2.5,
            tol: 1e-8,
            slack_weight: 1e3,
            corridor_margin: 0.2,
            linearization: LinearizationForm::SteeringAngle,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<(), PlanError> {
        if self.q_diag.iter().any(|q| *q < 0.0) {
            return Err(PlanError::InvalidInput("q_diag must be >= 0".into()));
        }
        if self.r_diag.iter().any(|r| !(*r > 0.0)) {
            return Err(PlanError::InvalidInput("r_diag must be > 0".into()));
        }
        if !(self.u_min.a < self.u_max.a) || !(self.u_min.delta < self.u_max.delta) {
            return Err(PlanError::InvalidInput(
                "u_min must be componentwise below u_max".into(),
            ));
        }
        let half_pi = std::f64::consts::FRAC_PI_2;
        if !(self.u_min.delta > -half_pi) || !(self.u_max.delta < half_pi) {
            return Err(PlanError::InvalidInput(
                "steering bounds must stay inside (-pi/2, pi/2)".into(),
            ));
        }
        if !(self.dt > 0.0) || !(self.wheelbase > 0.0) || self.horizon == 0 {
            return Err(PlanError::InvalidInput(
                "dt, wheelbase and horizon must be positive".into(),
            ));
        }
        if !(self.tol > 0.0) || !(self.slack_weight > 0.0) || self.corridor_margin < 0.0 {
            return Err(PlanError::InvalidInput(
                "tol and slack_weight must be positive, margin nonnegative".into(),
            ));
        }
        Ok(())
    }

    pub fn num_vars(&self) -> usize {
        6 * self.horizon
    }
}

/// One planning query: initial state, reference to track, corridor to stay
/// inside, and the ego footprint.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanRequest {
    pub x_init: EgoState,
    pub reference: Trajectory,
    pub corridor: Corridor,
    pub footprint: EgoFootprint,
}

impl PlanRequest {
    fn validate(&self, cfg: &PlannerConfig) -> Result<(), PlanError> {
        if self.reference.len() != cfg.horizon {
            return Err(PlanError::InvalidInput(format!(
                "reference has {} states, expected horizon {}",
                self.reference.len(),
                cfg.horizon
            )));
        }
        if self.corridor.len() != cfg.horizon {
            return Err(PlanError::InvalidInput(format!(
                "corridor has {} rects, expected horizon {}",
                self.corridor.len(),
                cfg.horizon
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlanStatus {
    Optimal,
    SoftFallback,
    ReferencePassthrough,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanResult {
    pub trajectory: Trajectory,
    pub controls: ControlSequence,
    pub status: PlanStatus,
    /// Wall time of assemble + solve + rollout, seconds.
    pub solve_time: f64,
}

/// Assembled problem plus the bookkeeping needed for differentiation.
#[derive(Debug, Clone)]
pub struct AssembledQp {
    pub problem: QpProblem,
    /// Unwrapped reference headings used as linearization nominals.
    pub theta_nominal: Vec<f64>,
    /// Reference states with unwrapped headings (the tracking target).
    pub reference: Vec<Vector4<f64>>,
    /// Per-step linear models along the nominal.
    pub models: Vec<LinearDynamics>,
}

impl AssembledQp {
    pub fn corridor_rows(&self, cfg: &PlannerConfig) -> Vec<usize> {
        (0..ROWS_PER_RECT * cfg.horizon).collect()
    }
}

fn state_var(t: usize, k: usize) -> usize {
    debug_assert!(t >= 1);
    (t - 1) * 4 + k
}

fn control_var(horizon: usize, j: usize, k: usize) -> usize {
    4 * horizon + 2 * j + k
}

/// Shrink a rectangle by the corridor margin, clamping at a tiny positive
/// extent; a rectangle thinner than the margin becomes infeasible for any
/// footprint, which is what routes such requests to the soft fallback.
fn shrunk_rect(rect: &OrientedRect, margin: f64) -> OrientedRect {
    OrientedRect {
        cx: rect.cx,
        cy: rect.cy,
        theta: rect.theta,
        l: (rect.l - 2.0 * margin).max(1e-3),
        w: (rect.w - 2.0 * margin).max(1e-3),
    }
}

/// Build the tracking QP for a request.
///
/// Cost: `sum_t (x_t - ref_t)' Q (x_t - ref_t) + u_t' R u_t` in the
/// crate-wide `z' H z + g' z` convention. Equalities: the linearized
/// dynamics with their affine remainders, nominal at the reference poses
/// with finite-differenced speeds and zero nominal controls. Inequalities:
/// 16 footprint rows per step followed by the control bounds.
pub fn assemble(req: &PlanRequest, cfg: &PlannerConfig) -> Result<AssembledQp, PlanError> {
    cfg.validate()?;
    req.validate(cfg)?;
    let n_steps = cfg.horizon;
    let n = cfg.num_vars();
    let me = 4 * n_steps;
    let mi = ROWS_PER_RECT * n_steps + 4 * n_steps;

    // unwrap reference headings against the initial state
    let mut theta_nominal = Vec::with_capacity(n_steps);
    let mut prev_theta = req.x_init.theta;
    for s in &req.reference {
        let unwrapped = prev_theta + crate::geometry::angle_diff(s.theta, prev_theta);
        theta_nominal.push(unwrapped);
        prev_theta = unwrapped;
    }
    let reference: Vec<Vector4<f64>> = req
        .reference
        .iter()
        .zip(&theta_nominal)
        .map(|(s, &th)| Vector4::new(s.px, s.py, th, s.v))
        .collect();

    // nominal states: reference poses with finite-differenced speeds
    let mut nominal = Vec::with_capacity(n_steps + 1);
    nominal.push(req.x_init);
    let mut prev_pos = req.x_init.position();
    for (s, &th) in req.reference.iter().zip(&theta_nominal) {
        let v_fd = (s.position() - prev_pos).norm() / cfg.dt;
        nominal.push(EgoState {
            px: s.px,
            py: s.py,
            theta: th,
            v: v_fd,
        });
        prev_pos = s.position();
    }

    let models: Vec<LinearDynamics> = nominal[..n_steps]
        .iter()
        .map(|x| linearize_with_form(x, &Control::ZERO, cfg.dt, cfg.wheelbase, cfg.linearization))
        .collect::<Result<_, _>>()?;

    let mut h = DMatrix::zeros(n, n);
    let mut g = DVector::zeros(n);
    for t in 1..=n_steps {
        #[allow(clippy::needless_range_loop)] // k maps through state_var
        for k in 0..4 {
            let idx = state_var(t, k);
            h[(idx, idx)] = cfg.q_diag[k];
            g[idx] = -2.0 * cfg.q_diag[k] * reference[t - 1][k];
        }
    }
    for j in 0..n_steps {
        for k in 0..2 {
            let idx = control_var(n_steps, j, k);
            h[(idx, idx)] = cfg.r_diag[k];
        }
    }

    let mut a_eq = DMatrix::zeros(me, n);
    let mut b_eq = DVector::zeros(me);
    for j in 0..n_steps {
        let m = &models[j];
        for r in 0..4 {
            let row = 4 * j + r;
            a_eq[(row, state_var(j + 1, r))] = 1.0;
            if j >= 1 {
                for c in 0..4 {
                    a_eq[(row, state_var(j, c))] = -m.a[(r, c)];
                }
            }
            for c in 0..2 {
                a_eq[(row, control_var(n_steps, j, c))] = -m.b[(r, c)];
            }
            b_eq[row] = m.c[r];
            if j == 0 {
                b_eq[row] += (m.a * req.x_init.to_vector())[r];
            }
        }
    }

    let mut a_in = DMatrix::zeros(mi, n);
    let mut b_in = DVector::zeros(mi);
    for t in 1..=n_steps {
        let rect = shrunk_rect(&req.corridor.rects[t - 1], cfg.corridor_margin);
        let halfspaces = rect_to_halfspaces(&rect);
        let rows = footprint_constraint_rows(&halfspaces, &req.footprint, theta_nominal[t - 1]);
        for (r, frow) in rows.iter().enumerate() {
            let row = ROWS_PER_RECT * (t - 1) + r;
            a_in[(row, state_var(t, 0))] = frow.coef_px;
            a_in[(row, state_var(t, 1))] = frow.coef_py;
            a_in[(row, state_var(t, 2))] = frow.coef_theta;
            b_in[row] = frow.rhs;
        }
    }
    let bound_base = ROWS_PER_RECT * n_steps;
    for j in 0..n_steps {
        let row = bound_base + 4 * j;
        let (a_idx, d_idx) = (control_var(n_steps, j, 0), control_var(n_steps, j, 1));
        a_in[(row, a_idx)] = 1.0;
        b_in[row] = cfg.u_max.a;
        a_in[(row + 1, a_idx)] = -1.0;
        b_in[row + 1] = -cfg.u_min.a;
        a_in[(row + 2, d_idx)] = 1.0;
        b_in[row + 2] = cfg.u_max.delta;
        a_in[(row + 3, d_idx)] = -1.0;
        b_in[row + 3] = -cfg.u_min.delta;
    }

    let problem = QpProblem::new(h, g, a_eq, b_eq, a_in, b_in)?;
    Ok(AssembledQp {
        problem,
        theta_nominal,
        reference,
        models,
    })
}

fn extract_controls(z: &DVector<f64>, cfg: &PlannerConfig) -> ControlSequence {
    (0..cfg.horizon)
        .map(|j| {
            Control::new(
                z[control_var(cfg.horizon, j, 0)].clamp(cfg.u_min.a, cfg.u_max.a),
                z[control_var(cfg.horizon, j, 1)].clamp(cfg.u_min.delta, cfg.u_max.delta),
            )
        })
        .collect()
}

/// Everything `plan` produced, kept for differentiation.
#[derive(Debug, Clone)]
pub struct PlanArtifacts {
    pub assembled: AssembledQp,
    pub solution: Option<QpSolution>,
}

/// Plan a trajectory. Never fails on solver trouble: a hard-infeasible QP
/// falls back to relaxing the corridor rows with slack variables, and if
/// even that fails the reference is passed through unchanged.
pub fn plan(req: &PlanRequest, cfg: &PlannerConfig) -> Result<PlanResult, PlanError> {
    plan_with_artifacts(req, cfg).map(|(res, _)| res)
}

pub fn plan_with_artifacts(
    req: &PlanRequest,
    cfg: &PlannerConfig,
) -> Result<(PlanResult, PlanArtifacts), PlanError> {
    let start = Instant::now();
    let assembled = assemble(req, cfg)?;
    let hard = qp::solve(&assembled.problem, cfg.tol)?;

    let (solution, status) = if hard.status == QpStatus::Optimal {
        (Some(hard), PlanStatus::Optimal)
    } else {
        let corridor_rows = assembled.corridor_rows(cfg);
        let soft = qp::solve_soft(&assembled.problem, &corridor_rows, cfg.slack_weight, cfg.tol)?;
        if soft.status == QpStatus::SoftFallback {
            (Some(soft), PlanStatus::SoftFallback)
        } else {
            (None, PlanStatus::ReferencePassthrough)
        }
    };

    let (trajectory, controls) = match &solution {
        Some(sol) => {
            let controls = extract_controls(&sol.z, cfg);
            let trajectory = rollout(&req.x_init, &controls, cfg.dt, cfg.wheelbase)?;
            (trajectory, controls)
        }
        None => (req.reference.clone(), vec![Control::ZERO; cfg.horizon]),
    };

    let result = PlanResult {
        trajectory,
        controls,
        status,
        solve_time: start.elapsed().as_secs_f64(),
    };
    Ok((result, PlanArtifacts { assembled, solution }))
}

/// Max violation of the corridor rows at the QP solution (negative when all
/// rows hold); diagnostic for the corridor-satisfaction property.
pub fn corridor_row_violation(art: &PlanArtifacts, cfg: &PlannerConfig) -> Option<f64> {
    let sol = art.solution.as_ref()?;
    let p = &art.assembled.problem;
    let mut worst = f64::NEG_INFINITY;
    for row in art.assembled.corridor_rows(cfg) {
        let lhs = (p.a_in.row(row) * &sol.z)[(0, 0)];
        worst = worst.max(lhs - p.b_in[row]);
    }
    Some(worst)
}

/// Which inputs receive gradients from [`imitation_gradients`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GradientTargets {
    pub weights: bool,
    pub reference: bool,
    pub corridor: bool,
}

impl Default for GradientTargets {
    fn default() -> Self {
        GradientTargets {
            weights: true,
            reference: false,
            corridor: false,
        }
    }
}

/// Gradients of the imitation loss with respect to the selected inputs.
#[derive(Debug, Clone, Default)]
pub struct PlanGradients {
    pub loss: f64,
    pub q_diag: [f64; 4],
    pub r_diag: [f64; 2],
    /// d loss / d reference positions, one `(x, y)` pair per step.
    pub reference_positions: Vec<Vec2>,
    /// d loss / d corridor encoding (6 per step).
    pub corridor_encoding: Vec<f64>,
    pub degenerate: bool,
}

/// Differentiate the imitation loss of a planned trajectory against a
/// demonstration, through rollout and the QP solution map.
///
/// The rollout is backpropagated with the step Jacobians along the executed
/// trajectory; the QP is differentiated through its KKT system. The
/// linearization nominals are treated as constants, so reference gradients
/// flow through the tracking cost and corridor gradients through the
/// constraint rows.
pub fn imitation_gradients(
    req: &PlanRequest,
    cfg: &PlannerConfig,
    result: &PlanResult,
    artifacts: &PlanArtifacts,
    demonstration: &[EgoState],
    targets: GradientTargets,
) -> Result<PlanGradients, PlanError> {
    if result.status != PlanStatus::Optimal {
        return Err(PlanError::InvalidInput(
            "gradients require an optimal-status plan".into(),
        ));
    }
    let sol = artifacts
        .solution
        .as_ref()
        .ok_or_else(|| PlanError::InvalidInput("missing QP solution".into()))?;
    let loss = imitation_loss(&result.trajectory, demonstration)?;

    // backpropagate through the nonlinear rollout: adjoint over the step
    // Jacobians evaluated along the executed trajectory
    let n_steps = cfg.horizon;
    let mut adjoint: Vec<Vector4<f64>> = (0..n_steps)
        .map(|t| Vector4::new(loss.gradient[2 * t], loss.gradient[2 * t + 1], 0.0, 0.0))
        .collect();
    let mut dl_du = vec![[0.0; 2]; n_steps];
    for t in (0..n_steps).rev() {
        let x_prev = if t == 0 {
            req.x_init
        } else {
            result.trajectory[t - 1]
        };
        let lin = linearize_with_form(
            &x_prev,
            &result.controls[t],
            cfg.dt,
            cfg.wheelbase,
            cfg.linearization,
        )?;
        let gt = adjoint[t];
        let du = lin.b.transpose() * gt;
        dl_du[t][0] += du[0];
        dl_du[t][1] += du[1];
        if t > 0 {
            let carried = lin.a.transpose() * gt;
            adjoint[t - 1] += carried;
        }
    }

    let n = cfg.num_vars();
    let mut dl_dz = DVector::zeros(n);
    for j in 0..n_steps {
        dl_dz[control_var(n_steps, j, 0)] = dl_du[j][0];
        dl_dz[control_var(n_steps, j, 1)] = dl_du[j][1];
    }

    let qp_grads = qp::backward(&artifacts.assembled.problem, sol, &dl_dz)?;

    let mut out = PlanGradients {
        loss: loss.value,
        degenerate: qp_grads.degenerate,
        ..Default::default()
    };

    if targets.weights {
        for t in 1..=n_steps {
            for k in 0..4 {
                let idx = state_var(t, k);
                out.q_diag[k] += qp_grads.dl_dh[(idx, idx)];
                // g on state blocks is -2 Q_k ref_k
                out.q_diag[k] +=
                    qp_grads.dl_dg[idx] * (-2.0 * artifacts.assembled.reference[t - 1][k]);
            }
        }
        for j in 0..n_steps {
            for k in 0..2 {
                let idx = control_var(n_steps, j, k);
                out.r_diag[k] += qp_grads.dl_dh[(idx, idx)];
            }
        }
    }

    if targets.reference {
        out.reference_positions = (0..n_steps)
            .map(|t| {
                Vec2::new(
                    qp_grads.dl_dg[state_var(t + 1, 0)] * (-2.0 * cfg.q_diag[0]),
                    qp_grads.dl_dg[state_var(t + 1, 1)] * (-2.0 * cfg.q_diag[1]),
                )
            })
            .collect();
    }

    if targets.corridor {
        out.corridor_encoding =
            corridor_encoding_gradients(req, cfg, artifacts, &qp_grads.dl_da_in, &qp_grads.dl_db_in);
    }

    Ok(out)
}

/// Chain the QP's `(A_in, b_in)` gradients on the corridor rows back to the
/// per-step corridor encoding `(cx, cy, cos, sin, l, w)`.
fn corridor_encoding_gradients(
    req: &PlanRequest,
    cfg: &PlannerConfig,
    artifacts: &PlanArtifacts,
    dl_da_in: &DMatrix<f64>,
    dl_db_in: &DVector<f64>,
) -> Vec<f64> {
    let n_steps = cfg.horizon;
    let mut grads = vec![0.0; ENCODING_DIM * n_steps];
    for t in 1..=n_steps {
        let rect = &req.corridor.rects[t - 1];
        let shrunk = shrunk_rect(rect, cfg.corridor_margin);
        let clamped_l = shrunk.l <= 1e-3;
        let clamped_w = shrunk.w <= 1e-3;
        let (sin_t, cos_t) = rect.theta.sin_cos();
        let (cx, cy) = (rect.cx, rect.cy);
        let theta_nom = artifacts.assembled.theta_nominal[t - 1];
        let (s_nom, c_nom) = theta_nom.sin_cos();

        // per-halfspace derivatives of (a, b) in the rect encoding
        // order: front, rear, left, right (matches rect_to_halfspaces)
        // each entry: d(a.x), d(a.y), d(b) as rows over (cx, cy, cos, sin, l, w)
        let half = 0.5;
        let hs_dax: [[f64; 6]; 4] = [
            [0.0, 0.0, 1.0, 0.0, 0.0, 0.0],
            [0.0, 0.0, -1.0, 0.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, -1.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, 1.0, 0.0, 0.0],
        ];
        let hs_day: [[f64; 6]; 4] = [
            [0.0, 0.0, 0.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, -1.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0, 0.0, 0.0],
            [0.0, 0.0, -1.0, 0.0, 0.0, 0.0],
        ];
        let dl_term = if clamped_l { 0.0 } else { half };
        let dw_term = if clamped_w { 0.0 } else { half };
        let hs_db: [[f64; 6]; 4] = [
            [cos_t, sin_t, cx, cy, dl_term, 0.0],
            [-cos_t, -sin_t, -cx, -cy, dl_term, 0.0],
            [-sin_t, cos_t, cy, -cx, 0.0, dw_term],
            [sin_t, -cos_t, -cy, cx, 0.0, dw_term],
        ];

        let vertices = req.footprint.vertices();
        for (hs_idx, ((dax, day), db)) in hs_dax.iter().zip(&hs_day).zip(&hs_db).enumerate() {
            for (v_idx, v) in vertices.iter().enumerate() {
                let row = ROWS_PER_RECT * (t - 1) + 4 * hs_idx + v_idx;
                let rv = Vec2::new(c_nom * v.x - s_nom * v.y, s_nom * v.x + c_nom * v.y);
                let sv = Vec2::new(-s_nom * v.x - c_nom * v.y, c_nom * v.x - s_nom * v.y);
                let da_px = dl_da_in[(row, state_var(t, 0))];
                let da_py = dl_da_in[(row, state_var(t, 1))];
                let da_th = dl_da_in[(row, state_var(t, 2))];
                let db_row = dl_db_in[row];
                for e in 0..ENCODING_DIM {
                    // row coefficients: (a.x, a.y, a·sv); rhs = b - a·rv + (a·sv)·theta_nom
                    let d_ax = dax[e];
                    let d_ay = day[e];
                    let d_coef_theta = d_ax * sv.x + d_ay * sv.y;
                    let d_rhs = db[e] - (d_ax * rv.x + d_ay * rv.y) + d_coef_theta * theta_nom;
                    grads[ENCODING_DIM * (t - 1) + e] += da_px * d_ax
                        + da_py * d_ay
                        + da_th * d_coef_theta
                        + db_row * d_rhs;
                }
            }
        }
    }
    grads
}

/// Outcome of [`fit_weights`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOutcome {
    pub q_diag: [f64; 4],
    pub r_diag: [f64; 2],
    /// Mean imitation loss at the weights entering each step, plus the
    /// final weights (length `steps + 1`).
    pub history: Vec<f64>,
    /// Samples skipped because their solve degraded to non-optimal.
    pub skipped_samples: usize,
}

/// Projected gradient descent on the mean imitation loss over a dataset of
/// `(request, demonstration)` pairs, treating `Q` and `R` diagonals as the
/// learnable parameters. `Q` is projected onto `>= 0`, `R` onto `>= 1e-6`.
///
/// Every request must solve with optimal status at the initial weights;
/// samples that degrade during descent are skipped for that step.
pub fn fit_weights(
    dataset: &[(PlanRequest, Trajectory)],
    cfg: &PlannerConfig,
    steps: usize,
    lr: f64,
) -> Result<FitOutcome, PlanError> {
    fit_weights_with_threads(dataset, cfg, steps, lr, 1)
}

/// [`fit_weights`] with per-sample evaluation fanned out over `threads`
/// worker threads. Gradients are summed in sample order regardless of the
/// thread count, so the result is identical to the sequential run.
pub fn fit_weights_with_threads(
    dataset: &[(PlanRequest, Trajectory)],
    cfg: &PlannerConfig,
    steps: usize,
    lr: f64,
    threads: usize,
) -> Result<FitOutcome, PlanError> {
    if dataset.is_empty() {
        return Err(PlanError::InvalidInput("empty dataset".into()));
    }
    if !(lr >= 0.0) {
        return Err(PlanError::InvalidInput(format!("lr={lr} must be >= 0")));
    }
    let mut work = *cfg;
    for (i, (req, _)) in dataset.iter().enumerate() {
        let (res, _) = plan_with_artifacts(req, &work)?;
        if res.status != PlanStatus::Optimal {
            return Err(PlanError::InvalidInput(format!(
                "sample {i} is not optimal at the initial weights"
            )));
        }
    }

    let mut history = Vec::with_capacity(steps + 1);
    let mut skipped_total = 0usize;
    for _ in 0..steps {
        let evals = evaluate_dataset(dataset, &work, threads.max(1))?;
        let mut grad_q = [0.0; 4];
        let mut grad_r = [0.0; 2];
        let mut loss_sum = 0.0;
        let mut used = 0usize;
        for eval in &evals {
            if let Some(g) = eval {
                loss_sum += g.loss;
                for (acc, d) in grad_q.iter_mut().zip(&g.q_diag) {
                    *acc += d;
                }
                for (acc, d) in grad_r.iter_mut().zip(&g.r_diag) {
                    *acc += d;
                }
                used += 1;
            } else {
                skipped_total += 1;
            }
        }
        if used == 0 {
            return Err(PlanError::InvalidInput(
                "every sample degraded to non-optimal during fitting".into(),
            ));
        }
        let scale = 1.0 / used as f64;
        history.push(loss_sum * scale);
        for (w, g) in work.q_diag.iter_mut().zip(&grad_q) {
            *w = (*w - lr * g * scale).max(0.0);
        }
        for (w, g) in work.r_diag.iter_mut().zip(&grad_r) {
            *w = (*w - lr * g * scale).max(1e-6);
        }
    }

    // loss at the final weights
    let evals = evaluate_dataset(dataset, &work, threads.max(1))?;
    let (mut loss_sum, mut used) = (0.0, 0usize);
    for eval in evals.iter().flatten() {
        loss_sum += eval.loss;
        used += 1;
    }
    history.push(if used > 0 { loss_sum / used as f64 } else { f64::NAN });

    Ok(FitOutcome {
        q_diag: work.q_diag,
        r_diag: work.r_diag,
        history,
        skipped_samples: skipped_total,
    })
}

fn evaluate_sample(
    req: &PlanRequest,
    demo: &Trajectory,
    cfg: &PlannerConfig,
) -> Result<Option<PlanGradients>, PlanError> {
    let (res, art) = plan_with_artifacts(req, cfg)?;
    if res.status != PlanStatus::Optimal {
        return Ok(None);
    }
    imitation_gradients(req, cfg, &res, &art, demo, GradientTargets::default()).map(Some)
}

fn evaluate_dataset(
    dataset: &[(PlanRequest, Trajectory)],
    cfg: &PlannerConfig,
    threads: usize,
) -> Result<Vec<Option<PlanGradients>>, PlanError> {
    if threads <= 1 || dataset.len() <= 1 {
        return dataset
            .iter()
            .map(|(req, demo)| evaluate_sample(req, demo, cfg))
            .collect();
    }
    let mut results: Vec<Result<Option<PlanGradients>, PlanError>> =
        (0..dataset.len()).map(|_| Ok(None)).collect();
    let chunk = dataset.len().div_ceil(threads);
    std::thread::scope(|scope| {
        for (slot_chunk, data_chunk) in results.chunks_mut(chunk).zip(dataset.chunks(chunk)) {
            scope.spawn(move || {
                for (slot, (req, demo)) in slot_chunk.iter_mut().zip(data_chunk) {
                    *slot = evaluate_sample(req, demo, cfg);
                }
            });
        }
    });
    results.into_iter().collect()
}

/// Wrapped heading difference helper for tracking-error reporting.
pub fn heading_error(a: f64, b: f64) -> f64 {
    wrap_angle(a - b)
}
