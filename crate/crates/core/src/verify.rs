//! Weak super/subsolution certification and the named invariant suites.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::approximation::build_eps_family;
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::{enumerate_boxes, EnumerationOrder};
use crate::obstacle::{inactive_set_residual, Obstacle, Regularity};
use crate::pme::{check_comparison, residual_weak_form, test_battery, weak_tolerance, TestFunction};
use crate::runconfig::{run_case, CaseRun, RunConfig};

pub const DEFAULT_BATTERY: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CertificationReport {
    pub battery_size: usize,
    pub bumps: usize,
    /// Residual furthest on the wrong side, relative to its tolerance.
    pub worst_ratio: f64,
    pub worst_residual: f64,
    pub worst_bump: Option<TestFunction>,
    pub pass: bool,
}

fn certify(
    u: &ScalarField,
    m: f64,
    battery_size: usize,
    sign: f64,
    keep: impl Fn(&TestFunction) -> bool + Sync,
) -> Result<CertificationReport> {
    let grid = u.grid();
    let battery: Vec<TestFunction> = test_battery(grid, battery_size).into_iter().filter(|p| keep(p)).collect();
    let rows: Vec<(f64, f64)> = battery
        .par_iter()
        .map(|phi| Ok((residual_weak_form(u, phi, m)?, weak_tolerance(grid, u.sup(), m, phi))))
        .collect::<Result<_>>()?;
    let mut report = CertificationReport {
        battery_size,
        bumps: battery.len(),
        worst_ratio: f64::NEG_INFINITY,
        worst_residual: 0.0,
        worst_bump: None,
        pass: true,
    };
    for (phi, &(r, tol)) in battery.iter().zip(&rows) {
        // violation measured on the wrong side of zero
        let bad = -sign * r;
        let ratio = if tol > 0.0 {
            bad / tol
        } else if bad > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        if ratio > report.worst_ratio {
            report.worst_ratio = ratio;
            report.worst_residual = r;
            report.worst_bump = Some(phi.clone());
        }
        if bad > tol {
            report.pass = false;
        }
    }
    Ok(report)
}

/// Passes iff every bump of the battery has residual `≥ −tol`.
pub fn certify_supersolution(u: &ScalarField, m: f64, battery_size: usize) -> Result<CertificationReport> {
    certify(u, m, battery_size, 1.0, |_| true)
}

/// Passes iff every bump whose support nodes all lie in `mask` (indexed
/// like the field values) has residual `≤ tol`.
pub fn certify_subsolution(u: &ScalarField, m: f64, battery_size: usize, mask: &[bool]) -> Result<CertificationReport> {
    let grid = u.grid();
    if mask.len() != grid.n_nodes() {
        return Err(Error::Geometry("mask length differs from the node count".into()));
    }
    let ns = grid.n_nodes_space();
    certify(u, m, battery_size, -1.0, |phi| {
        phi.support_nodes(grid).iter().all(|&(s, k)| mask[k * ns + s])
    })
}

/// Identifiers of the invariant suites.
pub const SUITES: [&str; 11] = [
    "increments-nonnegative",
    "sup-bound",
    "obstacle-dominance",
    "box-comparison",
    "enumeration-independence",
    "obstacle-comparison",
    "idempotence",
    "supersolution",
    "inactive-solution",
    "eps-lower-bound",
    "eps-monotone",
];

pub const EPS_SCHEDULE: [f64; 4] = [0.4, 0.2, 0.1, 0.05];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Verdict {
    pub case: String,
    pub suite: String,
    pub pass: bool,
    /// Measured quantity compared against `threshold`.
    pub value: f64,
    pub threshold: f64,
    pub detail: String,
}

/// Expands `all` and rejects unknown identifiers.
pub fn resolve_suites(ids: &[String]) -> Result<Vec<&'static str>> {
    let mut out = Vec::new();
    for id in ids {
        if id == "all" {
            out.extend(SUITES);
        } else if let Some(s) = SUITES.iter().find(|s| **s == id.as_str()) {
            out.push(*s);
        } else {
            return Err(Error::config("suite", format!("unknown suite `{id}`")));
        }
    }
    let mut seen = std::collections::HashSet::new();
    out.retain(|s| seen.insert(*s));
    Ok(out)
}

fn verdict(case: &str, suite: &str, value: f64, threshold: f64, pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        case: case.into(),
        suite: suite.into(),
        pass,
        value,
        threshold,
        detail: detail.into(),
    }
}

struct Context<'a> {
    cfg: &'a RunConfig,
    run: CaseRun,
    eps: Option<Vec<ScalarField>>,
}

impl Context<'_> {
    fn eps_members(&mut self) -> Result<&[ScalarField]> {
        if self.eps.is_none() {
            let fam = build_eps_family(&self.run.u, &EPS_SCHEDULE, &self.cfg.obstacle_config())?;
            self.eps = Some(fam.members);
        }
        Ok(self.eps.as_deref().unwrap())
    }
}

fn run_one(ctx: &mut Context<'_>, suite: &str) -> Result<Verdict> {
    let name = ctx.cfg.name.clone();
    let run = &ctx.run;
    let u = &run.u;
    let psi = &run.obstacle;
    let stop_tol = run.stop_tol;
    let ocfg = ctx.cfg.obstacle_config();
    Ok(match suite {
        "increments-nonnegative" => {
            let min = run.traces.iter().map(|t| t.min_increment()).fold(f64::INFINITY, f64::min);
            let n: usize = run.traces.iter().map(|t| t.box_solves()).sum();
            verdict(&name, suite, min, 0.0, min >= 0.0, format!("{n} box solves"))
        }
        "sup-bound" => {
            let excess = u.sup() - psi.bound();
            verdict(&name, suite, excess, 1e-6, excess <= 1e-6, "sup u − sup ψ")
        }
        "obstacle-dominance" => {
            let (d, s, k) = u.min_difference(psi.field())?;
            verdict(&name, suite, d, 0.0, d >= 0.0, format!("min (u − ψ) at node {s}, level {k}"))
        }
        "box-comparison" => {
            let tol = 10.0 * stop_tol;
            let boxes = enumerate_boxes(u.grid(), ocfg.max_level.unwrap_or(usize::MAX));
            let reports: Vec<(usize, f64)> = boxes
                .par_iter()
                .map(|eb| Ok((eb.id, check_comparison(u, &eb.bx, &ocfg.solver, tol)?.min_diff)))
                .collect::<Result<_>>()?;
            let (id, worst) = reports
                .iter()
                .copied()
                .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
            verdict(&name, suite, worst, -tol, worst >= -tol, format!("{} boxes, worst box {id}", boxes.len()))
        }
        "enumeration-independence" => {
            let mut other = ctx.cfg.clone();
            other.order = match ctx.cfg.order {
                EnumerationOrder::Lexicographic => EnumerationOrder::ReversedWithinLevel,
                EnumerationOrder::ReversedWithinLevel => EnumerationOrder::Lexicographic,
            };
            let alt = run_case(&other)?;
            let d = alt.u.sup_distance(u)?;
            verdict(&name, suite, d, 5.0 * stop_tol, d <= 5.0 * stop_tol, "sup distance between orders")
        }
        "obstacle-comparison" => {
            let lower = Obstacle::new(psi.field().map(|v| 0.5 * v)?, psi.regularity());
            let low = crate::runconfig::solve_with(&lower, &ocfg)?;
            let (d, _, _) = u.min_difference(&low.u)?;
            verdict(&name, suite, d, -2.0 * stop_tol, d >= -2.0 * stop_tol, "min (u[ψ] − u[ψ/2])")
        }
        "idempotence" => {
            let again = Obstacle::new(u.clone(), Regularity::Continuous);
            let out = crate::runconfig::solve_with(&again, &ocfg)?;
            let d = out.u.sup_distance(u)?;
            verdict(&name, suite, d, stop_tol, d <= stop_tol, "sup distance after re-solving above u")
        }
        "supersolution" => {
            let r = certify_supersolution(u, ocfg.m(), DEFAULT_BATTERY)?;
            verdict(&name, suite, r.worst_ratio, 1.0, r.pass, format!("{} bumps, residual/tol", r.bumps))
        }
        "inactive-solution" => {
            let r = inactive_set_residual(u, psi, &ocfg)?;
            let value = r.worst_inactive_ratio.max(r.worst_super_ratio);
            verdict(
                &name,
                suite,
                value,
                1.0,
                r.pass,
                format!("{:?}: {} inactive bumps, {} others", r.status, r.inactive_bumps, r.other_bumps),
            )
        }
        "eps-lower-bound" => {
            let members = ctx.eps_members()?;
            let worst = EPS_SCHEDULE
                .iter()
                .zip(members)
                .map(|(&e, f)| f.min() - e)
                .fold(f64::INFINITY, f64::min);
            verdict(&name, suite, worst, 0.0, worst >= 0.0, "min (u_ε − ε)")
        }
        "eps-monotone" => {
            let members = ctx.eps_members()?;
            let mut worst = f64::INFINITY;
            for w in members.windows(2) {
                worst = worst.min(w[0].min_difference(&w[1])?.0);
            }
            verdict(&name, suite, worst, -2.0 * stop_tol, worst >= -2.0 * stop_tol, "min (u_ε − u_ε')")
        }
        other => return Err(Error::config("suite", format!("unknown suite `{other}`"))),
    })
}

/// One verdict per (case, suite), cases in the given order.
pub fn run_suite(cases: &[RunConfig], suites: &[String]) -> Result<Vec<Verdict>> {
    let ids = resolve_suites(suites)?;
    let per_case: Vec<Vec<Verdict>> = cases
        .par_iter()
        .map(|cfg| {
            let run = run_case(cfg)?;
            let mut ctx = Context { cfg, run, eps: None };
            ids.iter().map(|s| run_one(&mut ctx, s)).collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    Ok(per_case.into_iter().flatten().collect())
}

/// Fixed-width table of verdicts.
pub fn verdict_table(verdicts: &[Verdict]) -> String {
    let mut out = format!("{:<24} {:<26} {:<5} {:>12} {:>12}\n", "case", "suite", "pass", "value", "threshold");
    for v in verdicts {
        out.push_str(&format!(
            "{:<24} {:<26} {:<5} {:>12.4e} {:>12.4e}\n",
            v.case,
            v.suite,
            if v.pass { "ok" } else { "FAIL" },
            v.value,
            v.threshold
        ));
    }
    out
}

/// Pass counts per suite.
pub fn summarize(verdicts: &[Verdict]) -> BTreeMap<String, (usize, usize)> {
    let mut out = BTreeMap::new();
    for v in verdicts {
        let e = out.entry(v.suite.clone()).or_insert((0, 0));
        e.1 += 1;
        if v.pass {
            e.0 += 1;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;

    #[test]
    fn constants_certify_both_ways() {
        let g = build_grid(&[(0.0, 1.0)], &[21], 21, 1.0).unwrap();
        let u = ScalarField::constant(&g, 1.5).unwrap();
        let sup = certify_supersolution(&u, 2.0, 4).unwrap();
        assert!(sup.pass);
        assert!(sup.worst_ratio < 1e-9);
        let mask = vec![true; g.n_nodes()];
        let sub = certify_subsolution(&u, 2.0, 4, &mask).unwrap();
        assert!(sub.pass);
        assert_eq!(sub.bumps, 4 * 4 + 3 * 3);
    }

    #[test]
    fn unknown_suite_is_a_configuration_error() {
        assert!(resolve_suites(&["no-such-suite".into()]).unwrap_err().is_configuration());
        assert_eq!(resolve_suites(&["all".into(), "sup-bound".into()]).unwrap().len(), SUITES.len());
    }

    #[test]
    fn empty_case_list_gives_no_verdicts() {
        assert!(run_suite(&[], &["all".into()]).unwrap().is_empty());
    }
}
