//! Implicit finite-difference solver for `∂t u − Δ u^m = 0` on space-time
//! boxes, the Barenblatt profile, the discrete weak form and the box
//! comparison check.

mod barenblatt;
mod bvp;
mod comparison;
mod linalg;
mod weak;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use barenblatt::{barenblatt, barenblatt_field, Barenblatt};
pub use bvp::{solve_box, solve_bvp, step_backward_euler, BoxSolution, BvpSpec, StepOutcome};
pub use comparison::{check_comparison, ComparisonReport};
pub use linalg::thomas_solve;
pub use weak::{
    bump_profile, residual_weak_form, test_battery, w11_norm, weak_tolerance, TestFunction, WEAK_FORM_CONSTANT,
};

/// Nonlinear solver settings shared by every box solve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Diffusion exponent, `m > 1`.
    pub m: f64,
    /// Sup-norm tolerance on the nonlinear residual of each time step.
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    /// Scale of the Jacobian floor: `u^{m-1}` is replaced by
    /// `max(u^{m-1}, δ)` with `δ = jacobian_floor · (1 + sup g)^{m-1}`.
    /// The residual is never regularized.
    pub jacobian_floor: f64,
    /// Clamp Newton iterates at zero.
    pub positivity_clamp: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            m: 2.0,
            newton_tol: 1e-11,
            newton_max_iter: 60,
            jacobian_floor: 1e-10,
            positivity_clamp: true,
        }
    }
}

impl SolverConfig {
    pub fn new(m: f64) -> Self {
        SolverConfig {
            m,
            ..SolverConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.m.is_finite() && self.m > 1.0) {
            return Err(Error::config("m", format!("exponent must exceed 1, got {}", self.m)));
        }
        if !(self.newton_tol > 0.0) {
            return Err(Error::config("newton_tol", "must be positive"));
        }
        if self.newton_max_iter == 0 {
            return Err(Error::config("newton_max_iter", "must be at least 1"));
        }
        if !(self.jacobian_floor > 0.0) {
            return Err(Error::config("jacobian_floor", "must be positive"));
        }
        Ok(())
    }
}
