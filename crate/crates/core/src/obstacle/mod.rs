//! Minimal supersolutions above obstacles: the alternating box construction,
//! the Poisson modification and the approximation pipeline for lower
//! semicontinuous obstacles.

mod checks;
mod construct;
mod lsc;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::{EnumerationOrder, SpaceTimeGrid};
use crate::pme::SolverConfig;

pub use checks::{
    inactive_set_residual, verify_minimality, BumpClass, BumpResidual, CompetitorOutcome, InactiveReport,
    InactiveStatus, MinimalityReport, INACTIVE_BATTERY,
};
pub use construct::{construct_step, poisson_modify, solve_obstacle_continuous};
pub use lsc::{inf_convolution, k_schedule, solve_obstacle_lsc, LscOutcome, LscStep};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regularity {
    #[default]
    Continuous,
    LowerSemicontinuous,
}

/// Obstacle sampled at the grid nodes, with its bound `M` and regularity tag.
#[derive(Clone, Debug, PartialEq)]
pub struct Obstacle {
    field: ScalarField,
    bound: f64,
    regularity: Regularity,
}

impl Obstacle {
    /// Bound taken as the supremum of the samples.
    pub fn new(field: ScalarField, regularity: Regularity) -> Self {
        let bound = field.sup();
        Obstacle {
            field,
            bound,
            regularity,
        }
    }

    pub fn with_bound(field: ScalarField, bound: f64, regularity: Regularity) -> Result<Self> {
        if !(bound.is_finite() && bound >= field.sup()) {
            return Err(Error::Domain(format!(
                "obstacle bound {bound} is below the sampled supremum {}",
                field.sup()
            )));
        }
        Ok(Obstacle {
            field,
            bound,
            regularity,
        })
    }

    pub fn from_fn(grid: &SpaceTimeGrid, f: impl Fn(&[f64], f64) -> f64, regularity: Regularity) -> Result<Self> {
        Ok(Obstacle::new(ScalarField::from_fn(grid, f)?, regularity))
    }

    pub fn field(&self) -> &ScalarField {
        &self.field
    }

    pub fn grid(&self) -> &SpaceTimeGrid {
        self.field.grid()
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn regularity(&self) -> Regularity {
        self.regularity
    }
}

/// Settings of the alternating construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ObstacleConfig {
    pub solver: SolverConfig,
    /// Sweep stopping tolerance; `1e-8 · (1 + M)` when absent.
    pub stop_tol: Option<f64>,
    pub max_sweeps: usize,
    /// Finest enumeration level; the grid's finest useful level when absent.
    pub max_level: Option<usize>,
    pub order: EnumerationOrder,
    /// Budget of approximation steps for lower semicontinuous obstacles.
    pub max_k_steps: usize,
}

impl Default for ObstacleConfig {
    fn default() -> Self {
        ObstacleConfig {
            solver: SolverConfig::default(),
            stop_tol: None,
            max_sweeps: 2000,
            max_level: None,
            order: EnumerationOrder::Lexicographic,
            max_k_steps: 40,
        }
    }
}

impl ObstacleConfig {
    pub fn new(m: f64) -> Self {
        ObstacleConfig {
            solver: SolverConfig::new(m),
            ..ObstacleConfig::default()
        }
    }

    pub fn m(&self) -> f64 {
        self.solver.m
    }

    pub fn stop_tol(&self, bound: f64) -> f64 {
        self.stop_tol.unwrap_or(1e-8 * (1.0 + bound))
    }

    pub fn validate(&self) -> Result<()> {
        self.solver.validate()?;
        if let Some(t) = self.stop_tol {
            if !(t > 0.0) {
                return Err(Error::config("stop_tol", "must be positive"));
            }
        }
        if self.max_sweeps == 0 {
            return Err(Error::config("max_sweeps", "must be at least 1"));
        }
        if self.max_k_steps == 0 {
            return Err(Error::config("max_k_steps", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxRecord {
    pub sweep: usize,
    pub level: usize,
    pub box_id: usize,
    pub box_level: usize,
    /// `max (f_{j+1} − f_j)` over the box.
    pub increment: f64,
    pub newton_iterations: usize,
    pub max_residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub sweep: usize,
    pub level: usize,
    pub boxes: usize,
    pub max_increment: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    #[default]
    Running,
    /// The first sweep over the whole family changed nothing.
    InitialSweepStationary,
    /// Every level up to the finest converged.
    LevelsConverged,
    SweepBudgetExhausted,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub boxes: Vec<BoxRecord>,
    pub sweeps: Vec<SweepRecord>,
    pub stop_reason: StopReason,
    pub stop_tol: f64,
}

impl IterationTrace {
    pub fn sweep_count(&self) -> usize {
        self.sweeps.len()
    }

    pub fn box_solves(&self) -> usize {
        self.boxes.len()
    }

    pub fn min_increment(&self) -> f64 {
        self.boxes.iter().map(|b| b.increment).fold(f64::INFINITY, f64::min)
    }

    pub fn increments_nonnegative(&self) -> bool {
        self.boxes.iter().all(|b| b.increment >= 0.0)
    }

    /// One row per box solve.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("sweep,level,box_id,box_level,increment,newton_iterations,max_residual\n");
        for b in &self.boxes {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                b.sweep, b.level, b.box_id, b.box_level, b.increment, b.newton_iterations, b.max_residual
            );
        }
        out
    }
}
