//! Kinematic bicycle model: nonlinear forward-Euler step, per-timestep
//! linearization, and rollout.

use crate::geometry::wrap_angle;
use nalgebra::{Matrix4, Matrix4x2, Vector2, Vector4};
use serde::{Deserialize, Serialize};
use std::fmt;

/// Vehicle state `[p_x, p_y, theta, v]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EgoState {
    pub px: f64,
    pub py: f64,
    pub theta: f64,
    pub v: f64,
}

impl EgoState {
    pub fn new(px: f64, py: f64, theta: f64, v: f64) -> Self {
        EgoState {
            px,
            py,
            theta: wrap_angle(theta),
            v,
        }
    }

    pub fn position(&self) -> crate::geometry::Vec2 {
        crate::geometry::Vec2::new(self.px, self.py)
    }

    pub fn to_vector(&self) -> Vector4<f64> {
        Vector4::new(self.px, self.py, self.theta, self.v)
    }

    pub fn from_vector(v: &Vector4<f64>) -> Self {
        EgoState {
            px: v[0],
            py: v[1],
            theta: v[2],
            v: v[3],
        }
    }
}

/// Control input `[a, delta]`: acceleration and steering angle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Control {
    pub a: f64,
    pub delta: f64,
}

impl Control {
    pub const ZERO: Control = Control { a: 0.0, delta: 0.0 };

    pub fn new(a: f64, delta: f64) -> Self {
        Control { a, delta }
    }

    pub fn to_vector(&self) -> Vector2<f64> {
        Vector2::new(self.a, self.delta)
    }
}

pub type Trajectory = Vec<EgoState>;
pub type ControlSequence = Vec<Control>;

/// One-step linear model `x_next = A x + B u + c`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearDynamics {
    pub a: Matrix4<f64>,
    pub b: Matrix4x2<f64>,
    /// Affine remainder making the model exact at the nominal point.
    pub c: Vector4<f64>,
}

/// Which angle enters the yaw-rate partials of the linearization.
///
/// `SteeringAngle` is the standard bicycle model (`dtheta/dt = v tan(delta)/L`,
/// so the partials are taken in the steering angle). `HeadingAngle` instead
/// evaluates those two entries at the vehicle heading; it is kept selectable
/// for diagnostics and comparison, and requires `|theta| < pi/2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinearizationForm {
    #[default]
    SteeringAngle,
    HeadingAngle,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DynamicsError {
    /// `|delta| >= pi/2` hits the tangent singularity.
    SteeringOutOfRange(f64),
    /// `dt` and the wheelbase must be strictly positive.
    InvalidParameter(String),
    /// Heading-angle linearization is undefined at `|theta| >= pi/2`.
    HeadingOutOfRange(f64),
}

impl fmt::Display for DynamicsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DynamicsError::SteeringOutOfRange(d) => {
                write!(f, "steering angle {d} outside (-pi/2, pi/2)")
            }
            DynamicsError::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            DynamicsError::HeadingOutOfRange(t) => write!(
                f,
                "heading {t} outside (-pi/2, pi/2) for heading-angle linearization"
            ),
        }
    }
}

impl std::error::Error for DynamicsError {}

fn check_params(dt: f64, wheelbase: f64, u: &Control) -> Result<(), DynamicsError> {
    if !(dt > 0.0) {
        return Err(DynamicsError::InvalidParameter(format!("dt={dt}")));
    }
    if !(wheelbase > 0.0) {
        return Err(DynamicsError::InvalidParameter(format!(
            "wheelbase={wheelbase}"
        )));
    }
    if !(u.delta.abs() < std::f64::consts::FRAC_PI_2) {
        return Err(DynamicsError::SteeringOutOfRange(u.delta));
    }
    Ok(())
}

/// Forward-Euler step of the nonlinear bicycle model.
pub fn step(x: &EgoState, u: &Control, dt: f64, wheelbase: f64) -> Result<EgoState, DynamicsError> {
    check_params(dt, wheelbase, u)?;
    Ok(EgoState {
        px: x.px + x.v * x.theta.cos() * dt,
        py: x.py + x.v * x.theta.sin() * dt,
        theta: wrap_angle(x.theta + x.v * u.delta.tan() / wheelbase * dt),
        v: x.v + u.a * dt,
    })
}

/// Jacobians of [`step`] at `(x_nom, u_nom)` plus the affine remainder `c`
/// chosen so that `step(x_nom, u_nom) == A x_nom + B u_nom + c` exactly.
pub fn linearize(
    x_nom: &EgoState,
    u_nom: &Control,
    dt: f64,
    wheelbase: f64,
) -> Result<LinearDynamics, DynamicsError> {
    linearize_with_form(x_nom, u_nom, dt, wheelbase, LinearizationForm::SteeringAngle)
}

pub fn linearize_with_form(
    x_nom: &EgoState,
    u_nom: &Control,
    dt: f64,
    wheelbase: f64,
    form: LinearizationForm,
) -> Result<LinearDynamics, DynamicsError> {
    check_params(dt, wheelbase, u_nom)?;
    let (sin_t, cos_t) = x_nom.theta.sin_cos();
    let v = x_nom.v;

    let mut a = Matrix4::identity();
    a[(0, 2)] = -v * sin_t * dt;
    a[(0, 3)] = cos_t * dt;
    a[(1, 2)] = v * cos_t * dt;
    a[(1, 3)] = sin_t * dt;

    let mut b = Matrix4x2::zeros();
    b[(3, 0)] = dt;

    match form {
        LinearizationForm::SteeringAngle => {
            let cos_d = u_nom.delta.cos();
            a[(2, 3)] = u_nom.delta.tan() / wheelbase * dt;
            b[(2, 1)] = v / (wheelbase * cos_d * cos_d) * dt;
        }
        LinearizationForm::HeadingAngle => {
            if !(x_nom.theta.abs() < std::f64::consts::FRAC_PI_2) {
                return Err(DynamicsError::HeadingOutOfRange(x_nom.theta));
            }
            a[(2, 3)] = x_nom.theta.tan() / wheelbase * dt;
            b[(2, 1)] = v / (wheelbase * cos_t * cos_t) * dt;
        }
    }

    let next = step(x_nom, u_nom, dt, wheelbase)?;
    let c = next.to_vector() - a * x_nom.to_vector() - b * u_nom.to_vector();
    Ok(LinearDynamics { a, b, c })
}

/// Iterated nonlinear step; state `t` (1-based) uses `controls[t-1]`.
pub fn rollout(
    x0: &EgoState,
    controls: &[Control],
    dt: f64,
    wheelbase: f64,
) -> Result<Trajectory, DynamicsError> {
    let mut out = Vec::with_capacity(controls.len());
    let mut x = *x0;
    for u in controls {
        x = step(&x, u, dt, wheelbase)?;
        out.push(x);
    }
    Ok(out)
}

/// Linear-model propagation with the supplied per-step models; diagnostic
/// counterpart of [`rollout`].
pub fn rollout_linear(x0: &EgoState, models: &[LinearDynamics], controls: &[Control]) -> Trajectory {
    let mut out = Vec::with_capacity(controls.len());
    let mut x = x0.to_vector();
    for (m, u) in models.iter().zip(controls) {
        x = m.a * x + m.b * u.to_vector() + m.c;
        out.push(EgoState::from_vector(&x));
    }
    out
}
