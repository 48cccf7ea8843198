use serde::Serialize;

use crate::error::Result;
use crate::field::ScalarField;
use crate::grid::enumerate_boxes;
use crate::pme::{check_comparison, residual_weak_form, test_battery, weak_tolerance, TestFunction};

use super::{Obstacle, ObstacleConfig};

/// Level of the box family used to pre-check competitors for supercaloricity.
const PRECHECK_LEVEL: usize = 2;

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CompetitorOutcome {
    Rejected {
        index: usize,
        reason: String,
    },
    Checked {
        index: usize,
        /// `min (v − u)` and its node `(s, k)`.
        margin: f64,
        location: (usize, usize),
        pass: bool,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MinimalityReport {
    pub tol: f64,
    pub outcomes: Vec<CompetitorOutcome>,
    /// True when every admitted competitor lies above `u − tol`.
    pub pass: bool,
}

impl MinimalityReport {
    pub fn rejected(&self) -> usize {
        self.outcomes
            .iter()
            .filter(|o| matches!(o, CompetitorOutcome::Rejected { .. }))
            .count()
    }
}

/// Checks `v ≥ u − tol` for every competitor `v` that lies above `ψ` and
/// passes the box comparison pre-check. `tol = 2 · stop_tol`.
pub fn verify_minimality(
    u: &ScalarField,
    psi: &Obstacle,
    competitors: &[ScalarField],
    cfg: &ObstacleConfig,
) -> Result<MinimalityReport> {
    let stop_tol = cfg.stop_tol(psi.bound());
    let tol = 2.0 * stop_tol;
    let boxes = enumerate_boxes(u.grid(), PRECHECK_LEVEL);
    let mut outcomes = Vec::with_capacity(competitors.len());
    for (index, v) in competitors.iter().enumerate() {
        let (below, s, k) = v.min_difference(psi.field())?;
        if below < 0.0 {
            outcomes.push(CompetitorOutcome::Rejected {
                index,
                reason: format!("below the obstacle by {} at node {s}, level {k}", -below),
            });
            continue;
        }
        let mut failed = None;
        for eb in &boxes {
            let r = check_comparison(v, &eb.bx, &cfg.solver, 10.0 * stop_tol)?;
            if !r.pass {
                failed = Some((eb.id, r.min_diff));
                break;
            }
        }
        if let Some((id, d)) = failed {
            outcomes.push(CompetitorOutcome::Rejected {
                index,
                reason: format!("fails comparison on box {id} by {}", -d),
            });
            continue;
        }
        let (margin, s, k) = v.min_difference(u)?;
        outcomes.push(CompetitorOutcome::Checked {
            index,
            margin,
            location: (s, k),
            pass: margin >= -tol,
        });
    }
    let pass = outcomes
        .iter()
        .all(|o| !matches!(o, CompetitorOutcome::Checked { pass: false, .. }));
    Ok(MinimalityReport { tol, outcomes, pass })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BumpClass {
    /// Support inside `{u > ψ + margin}`: the residual must vanish.
    Inactive,
    /// Support meets both sets: only the supersolution side is required.
    Straddling,
    /// Support inside the contact set: supersolution side.
    Contact,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InactiveStatus {
    /// No node lies in `{u > ψ + margin}`.
    Vacuous,
    Checked,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BumpResidual {
    pub class: BumpClass,
    pub phi: TestFunction,
    pub residual: f64,
    pub tol: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InactiveReport {
    pub status: InactiveStatus,
    pub margin: f64,
    pub inactive_nodes: usize,
    pub inactive_bumps: usize,
    pub other_bumps: usize,
    /// `max |residual| / tol` over inactive bumps.
    pub worst_inactive_ratio: f64,
    /// `max (−residual) / tol` over straddling and contact bumps.
    pub worst_super_ratio: f64,
    pub failures: Vec<BumpResidual>,
    pub pass: bool,
}

/// Battery sizes used to probe the inactive set.
pub const INACTIVE_BATTERY: [usize; 4] = [4, 8, 16, 32];

/// Weak residuals of `u` on the bump battery, classified against the
/// inactive set `{u > ψ + 10 · stop_tol}`.
pub fn inactive_set_residual(u: &ScalarField, psi: &Obstacle, cfg: &ObstacleConfig) -> Result<InactiveReport> {
    u.same_grid(psi.field())?;
    let grid = u.grid();
    let ns = grid.n_nodes_space();
    let margin = 10.0 * cfg.stop_tol(psi.bound());
    let inactive: Vec<bool> = u
        .values()
        .iter()
        .zip(psi.field().values())
        .map(|(a, b)| *a > b + margin)
        .collect();
    let inactive_nodes = inactive.iter().filter(|&&b| b).count();
    let mut report = InactiveReport {
        status: InactiveStatus::Vacuous,
        margin,
        inactive_nodes,
        inactive_bumps: 0,
        other_bumps: 0,
        worst_inactive_ratio: 0.0,
        worst_super_ratio: f64::NEG_INFINITY,
        failures: Vec::new(),
        pass: true,
    };
    if inactive_nodes == 0 {
        return Ok(report);
    }
    report.status = InactiveStatus::Checked;
    let m = cfg.m();
    for size in INACTIVE_BATTERY {
        for phi in test_battery(grid, size) {
            let nodes = phi.support_nodes(grid);
            let n_in = nodes.iter().filter(|&&(s, k)| inactive[k * ns + s]).count();
            let class = if n_in == nodes.len() {
                BumpClass::Inactive
            } else if n_in > 0 {
                BumpClass::Straddling
            } else {
                BumpClass::Contact
            };
            let residual = residual_weak_form(u, &phi, m)?;
            let tol = weak_tolerance(grid, u.sup(), m, &phi);
            let ok = match class {
                BumpClass::Inactive => {
                    report.inactive_bumps += 1;
                    report.worst_inactive_ratio = report.worst_inactive_ratio.max(ratio(residual.abs(), tol));
                    residual.abs() <= tol
                }
                _ => {
                    report.other_bumps += 1;
                    report.worst_super_ratio = report.worst_super_ratio.max(ratio(-residual, tol));
                    residual >= -tol
                }
            };
            if !ok {
                report.pass = false;
                report.failures.push(BumpResidual {
                    class,
                    phi,
                    residual,
                    tol,
                });
            }
        }
    }
    Ok(report)
}

fn ratio(a: f64, tol: f64) -> f64 {
    if tol > 0.0 {
        a / tol
    } else if a > 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}
