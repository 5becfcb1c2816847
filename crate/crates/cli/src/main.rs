//! `corridor`: annotate safe corridors for driving scenes, plan trajectories
//! through them, and evaluate the results.
//!
//! Exit codes: 0 on success, 1 on domain errors (bad files, failed checks),
//! 2 on usage errors.

mod commands;
mod config;
mod manifest;
mod render;

use clap::{Parser, Subcommand, ValueEnum};
use config::ToolConfig;
use corridor_core::scene::SceneKind;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "corridor",
    version,
    about = "Safe-corridor annotation, corridor-constrained planning, and BEV evaluation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum KindArg {
    Straight,
    Turn,
    CutIn,
    Narrow,
}

impl From<KindArg> for SceneKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Straight => SceneKind::Straight,
            KindArg::Turn => SceneKind::Turn,
            KindArg::CutIn => SceneKind::CutIn,
            KindArg::Narrow => SceneKind::Narrow,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic scene
    Gen {
        #[arg(long, value_enum)]
        kind: KindArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Annotate the safe corridor of a scene
    Annotate {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Shrink a corridor against (optionally perturbed) perceived obstacles
    Refine {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        corridor: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Uniform perception noise half-width in meters
        #[arg(long)]
        perturb: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Track the logged future through a corridor-constrained QP
    Plan {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        corridor: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Rasterized collision rates and L2 error of a plan
    Eval {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Grid resolution in meters (default 0.1)
        #[arg(long = "grid-res")]
        grid_res: Option<f64>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Finite-difference verification of every analytic gradient
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Fit the tracking/effort weights by descending through the solver
    Fit {
        #[arg(long, value_enum)]
        kind: KindArg,
        #[arg(long, default_value_t = 20)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        steps: usize,
        #[arg(long, default_value_t = 1e-2)]
        lr: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// SVG overlay of a scene with optional corridor and plan
    Render {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        corridor: Option<PathBuf>,
        #[arg(long)]
        plan: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> commands::CmdResult {
    match cli.command {
        Command::Gen {
            kind,
            seed,
            out,
            config,
        } => {
            let cfg = ToolConfig::load(config.as_deref())?;
            commands::cmd_gen(kind.into(), seed, &out, &cfg)
        }
        Command::Annotate { scene, out, config } => {
            let cfg = ToolConfig::load(config.as_deref())?;
            commands::cmd_annotate(&scene, &out, &cfg)
        }
        Command::Refine {
            scene,
            corridor,
            out,
            perturb,
            seed,
            config,
        } => {
            let cfg = ToolConfig::load(config.as_deref())?;
            commands::cmd_refine(&scene, &corridor, &out, perturb, seed, &cfg)
        }
        Command::Plan {
            scene,
            corridor,
            out,
            config,
        } => {
            let cfg = ToolConfig::load(config.as_deref())?;
            commands::cmd_plan(&scene, &corridor, &out, &cfg)
        }
        Command::Eval {
            scene,
            plan,
            out,
            grid_res,
            config,
        } => {
            let cfg = ToolConfig::load(config.as_deref())?;
            commands::cmd_eval(&scene, &plan, &out, grid_res, &cfg)
        }
        Command::Gradcheck { seed, out, config } => {
            let cfg = ToolConfig::load(config.as_deref())?;
            commands::cmd_gradcheck(seed, out.as_deref(), &cfg)
        }
        Command::Fit {
            kind,
            count,
            seed,
            steps,
            lr,
            out,
            config,
        } => {
            let cfg = ToolConfig::load(config.as_deref())?;
            commands::cmd_fit(kind.into(), count, seed, steps, lr, &out, &cfg)
        }
        Command::Render {
            scene,
            corridor,
            plan,
            out,
            config,
        } => {
            let cfg = ToolConfig::load(config.as_deref())?;
            commands::cmd_render(&scene, corridor.as_deref(), plan.as_deref(), &out, &cfg)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
    }
}
