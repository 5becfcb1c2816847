//! One configuration file for every stage, with CLI overrides on top.

use corridor_core::annotation::{AnnotationConfig, MerBoundary};
use corridor_core::dynamics::Control;
use corridor_core::eval::GridSpec;
use corridor_core::planner::PlannerConfig;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Defaults follow the corridor generation setup: 0.5 m obstacle sampling,
/// a 30 m x 15 m search boundary, a [-5 s, +5 s] lane-selection window,
/// six 0.5 s planning steps, and a 0.1 m evaluation grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToolConfig {
    pub delta_obs: f64,
    pub boundary_l_max: f64,
    pub boundary_w_max: f64,
    pub t_ego: (f64, f64),
    pub area_alpha: f64,
    pub q_diag: [f64; 4],
    pub r_diag: [f64; 2],
    pub u_min: [f64; 2],
    pub u_max: [f64; 2],
    pub dt: f64,
    pub horizon: usize,
    pub wheelbase: f64,
    pub tol: f64,
    pub slack_weight: f64,
    pub corridor_margin: f64,
    pub grid_resolution: f64,
    pub grid_extent: [f64; 2],
}

impl Default for ToolConfig {
    fn default() -> Self {
        let planner = PlannerConfig::default();
        ToolConfig {
            delta_obs: 0.5,
            boundary_l_max: 30.0,
            boundary_w_max: 15.0,
            t_ego: (-5.0, 5.0),
            area_alpha: 0.01,
            q_diag: planner.q_diag,
            r_diag: planner.r_diag,
            u_min: [planner.u_min.a, planner.u_min.delta],
            u_max: [planner.u_max.a, planner.u_max.delta],
            dt: planner.dt,
            horizon: planner.horizon,
            wheelbase: planner.wheelbase,
            tol: planner.tol,
            slack_weight: planner.slack_weight,
            corridor_margin: planner.corridor_margin,
            grid_resolution: 0.1,
            grid_extent: [60.0, 30.0],
        }
    }
}

impl ToolConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, String> {
        match path {
            None => Ok(ToolConfig::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| format!("cannot read config {}: {e}", p.display()))?;
                serde_json::from_str(&text)
                    .map_err(|e| format!("cannot parse config {}: {e}", p.display()))
            }
        }
    }

    pub fn annotation(&self) -> AnnotationConfig {
        AnnotationConfig {
            delta_obs: self.delta_obs,
            boundary: MerBoundary {
                l_max: self.boundary_l_max,
                w_max: self.boundary_w_max,
            },
            t_ego: self.t_ego,
        }
    }

    /// Planner settings; the scene is authoritative for the time base.
    pub fn planner_for(&self, scene: &corridor_core::Scene) -> PlannerConfig {
        PlannerConfig {
            q_diag: self.q_diag,
            r_diag: self.r_diag,
            u_min: Control::new(self.u_min[0], self.u_min[1]),
            u_max: Control::new(self.u_max[0], self.u_max[1]),
            dt: scene.dt,
            horizon: scene.horizon as usize,
            wheelbase: scene.wheelbase,
            tol: self.tol,
            slack_weight: self.slack_weight,
            corridor_margin: self.corridor_margin,
            linearization: Default::default(),
        }
    }

    pub fn grid(&self) -> GridSpec {
        GridSpec {
            resolution: self.grid_resolution,
            x_extent: self.grid_extent[0],
            y_extent: self.grid_extent[1],
            center: corridor_core::Vec2::ZERO,
        }
    }
}
