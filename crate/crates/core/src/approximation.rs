//! ε-approximations of supercaloric functions by supersolutions bounded
//! away from zero, their convergence diagnostics and the Oleĭnik pairing.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::{enumerate_boxes, SpaceTimeBox, SpaceTimeGrid};
use crate::obstacle::{solve_obstacle_continuous, IterationTrace, Obstacle, ObstacleConfig, Regularity};
use crate::pme::{check_comparison, solve_bvp, BvpSpec, SolverConfig};

/// Level of the box family used for the supercaloric pre-check of the base.
pub const PRECHECK_LEVEL: usize = 2;

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("ε must lie in (0, 1), got {eps}")))
    }
}

/// `(u^m + ε^m)^{1/m}` nodewise.
pub fn lift_values(u: &ScalarField, eps: f64, m: f64) -> Result<ScalarField> {
    check_eps(eps)?;
    let em = eps.powf(m);
    // the max only absorbs rounding of the power pair
    u.map(|v| (v.powf(m) + em).powf(1.0 / m).max(v).max(eps))
}

pub fn lift_obstacle(u: &ScalarField, eps: f64, m: f64) -> Result<Obstacle> {
    Ok(Obstacle::new(lift_values(u, eps, m)?, Regularity::Continuous))
}

#[derive(Clone, Debug)]
pub struct EpsFamily {
    pub schedule: Vec<f64>,
    pub members: Vec<ScalarField>,
    pub traces: Vec<IterationTrace>,
    pub base: ScalarField,
    pub m: f64,
}

fn validate_schedule(schedule: &[f64]) -> Result<()> {
    if schedule.is_empty() {
        return Err(Error::config("schedule", "needs at least one ε"));
    }
    for &e in schedule {
        if !(e > 0.0 && e < 1.0) {
            return Err(Error::config("schedule", format!("ε = {e} is outside (0, 1)")));
        }
    }
    if schedule.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::config("schedule", "must be strictly decreasing"));
    }
    Ok(())
}

/// Rejects `u` unless it passes the box comparison check on every box of
/// the family up to [`PRECHECK_LEVEL`].
pub fn supercaloric_precheck(u: &ScalarField, cfg: &SolverConfig, tol: f64) -> Result<()> {
    for eb in enumerate_boxes(u.grid(), PRECHECK_LEVEL) {
        let r = check_comparison(u, &eb.bx, cfg, tol)?;
        if !r.pass {
            return Err(Error::Rejected(format!(
                "base field fails comparison on box {} by {:e}",
                eb.id, -r.min_diff
            )));
        }
    }
    Ok(())
}

/// `u_ε` = minimal supersolution above `(u^m + ε^m)^{1/m}` for every ε.
pub fn build_eps_family(u: &ScalarField, schedule: &[f64], cfg: &ObstacleConfig) -> Result<EpsFamily> {
    cfg.validate()?;
    validate_schedule(schedule)?;
    let m = cfg.m();
    supercaloric_precheck(u, &cfg.solver, 10.0 * cfg.stop_tol(u.sup()))?;
    let solved: Vec<(ScalarField, IterationTrace)> = schedule
        .par_iter()
        .map(|&eps| solve_obstacle_continuous(&lift_obstacle(u, eps, m)?, cfg))
        .collect::<Result<_>>()?;
    let (members, traces) = solved.into_iter().unzip();
    Ok(EpsFamily {
        schedule: schedule.to_vec(),
        members,
        traces,
        base: u.clone(),
        m,
    })
}

/// Product trapezoid weights over space and time.
pub fn trapezoid_weights(grid: &SpaceTimeGrid) -> Vec<f64> {
    let space = spatial_weights(grid);
    let nt = grid.n_time();
    let mut out = Vec::with_capacity(grid.n_nodes());
    for k in 0..nt {
        let wt = if k == 0 || k + 1 == nt { 0.5 * grid.tau() } else { grid.tau() };
        out.extend(space.iter().map(|w| w * wt));
    }
    out
}

fn spatial_weights(grid: &SpaceTimeGrid) -> Vec<f64> {
    let ns = grid.n_nodes_space();
    (0..ns)
        .map(|s| {
            let idx = grid.unflat(s);
            (0..grid.dim())
                .map(|a| {
                    let edge = idx[a] == 0 || idx[a] + 1 == grid.n_space(a);
                    if edge {
                        0.5 * grid.h(a)
                    } else {
                        grid.h(a)
                    }
                })
                .product()
        })
        .collect()
}

/// Nodewise discrete gradient: centred inside, one-sided on the walls.
pub fn gradient(grid: &SpaceTimeGrid, values: &[f64]) -> Vec<[f64; 2]> {
    let ns = grid.n_nodes_space();
    let mut out = vec![[0.0; 2]; values.len()];
    for (idx, g) in out.iter_mut().enumerate() {
        let s = idx % ns;
        let base = idx - s;
        let pos = grid.unflat(s);
        for a in 0..grid.dim() {
            let st = grid.stride(a);
            let n = grid.n_space(a);
            let h = grid.h(a);
            g[a] = if pos[a] == 0 {
                (values[base + s + st] - values[base + s]) / h
            } else if pos[a] + 1 == n {
                (values[base + s] - values[base + s - st]) / h
            } else {
                (values[base + s + st] - values[base + s - st]) / (2.0 * h)
            };
        }
    }
    out
}

/// Ten fixed smooth vector fields used as weak-convergence probes.
pub fn pairing_fields(grid: &SpaceTimeGrid) -> Vec<Vec<[f64; 2]>> {
    use std::f64::consts::PI;
    let ns = grid.n_nodes_space();
    (0..10)
        .map(|j| {
            let kx = (j % 3 + 1) as f64;
            let kt = (j / 3) as f64;
            let phase = 0.3 * j as f64;
            (0..grid.n_nodes())
                .map(|idx| {
                    let x = grid.position(idx % ns);
                    let theta = grid.time(idx / ns) / grid.t_final();
                    let mut v = [0.0; 2];
                    for a in 0..grid.dim() {
                        let (lo, hi) = grid.domain(a);
                        let xi = (x[a] - lo) / (hi - lo);
                        v[a] = (PI * kx * xi + phase + a as f64).sin() * (PI * kt * theta).cos();
                    }
                    v
                })
                .collect()
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpsRow {
    pub eps: f64,
    /// `max |u_ε − u|`.
    pub max_gap: f64,
    /// `‖u_ε^q − u^q‖_{L^p(Ω_T)}`.
    pub lp_gap: f64,
    /// Same on the `t₀` slice.
    pub slice_gap: f64,
    /// `‖∇(u_ε^m − u^m)‖_{L²(Ω_T)}`.
    pub grad_l2_gap: f64,
    /// `max_Φ |∬ ∇u_ε^m·Φ − ∬ ∇u^m·Φ|` over the probe fields.
    pub pairing_gap: f64,
    /// Nodewise `|∇u_ε^m − ∇u^m|`: maximum and mean.
    pub grad_gap_max: f64,
    pub grad_gap_mean: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub q: f64,
    pub p: f64,
    pub t0: f64,
    pub rows: Vec<EpsRow>,
}

impl ConvergenceReport {
    /// True when every quantity decreases strictly along the schedule.
    pub fn monotone(&self) -> bool {
        self.rows.windows(2).all(|w| {
            let (a, b) = (&w[0], &w[1]);
            b.max_gap < a.max_gap
                && b.lp_gap < a.lp_gap
                && b.slice_gap < a.slice_gap
                && b.grad_l2_gap < a.grad_l2_gap
                && b.pairing_gap < a.pairing_gap
                && b.grad_gap_max < a.grad_gap_max
                && b.grad_gap_mean < a.grad_gap_mean
        })
    }

    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("eps,max_gap,lp_gap,slice_gap,grad_l2_gap,pairing_gap,grad_gap_max,grad_gap_mean\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                r.eps, r.max_gap, r.lp_gap, r.slice_gap, r.grad_l2_gap, r.pairing_gap, r.grad_gap_max, r.grad_gap_mean
            ));
        }
        out
    }
}

/// Time level at `t0`, which must be an interior level of the grid.
pub fn interior_level(grid: &SpaceTimeGrid, t0: f64) -> Result<usize> {
    let k = grid.nearest_level(t0);
    if (grid.time(k) - t0).abs() > 1e-9 * grid.t_final() {
        return Err(Error::Resolution(format!("t0 = {t0} is not a time level of the grid")));
    }
    if k == 0 || k == grid.last_level() {
        return Err(Error::Resolution(format!("t0 = {t0} is not an interior time level")));
    }
    Ok(k)
}

pub fn convergence_report(family: &EpsFamily, q: f64, p: f64, t0: f64) -> Result<ConvergenceReport> {
    if !(q > 0.0) {
        return Err(Error::config("q", "must be positive"));
    }
    if !(p >= 1.0) {
        return Err(Error::config("p", "must be at least 1"));
    }
    let base = &family.base;
    let grid = base.grid();
    for member in &family.members {
        base.same_grid(member)?;
    }
    let k0 = interior_level(grid, t0)?;
    let ns = grid.n_nodes_space();
    let m = family.m;
    let w = trapezoid_weights(grid);
    let ws = spatial_weights(grid);
    let probes = pairing_fields(grid);
    let base_m: Vec<f64> = base.values().iter().map(|v| v.powf(m)).collect();
    let base_grad = gradient(grid, &base_m);
    let base_q: Vec<f64> = base.values().iter().map(|v| v.powf(q)).collect();
    let pair = |grad: &[[f64; 2]], phi: &[[f64; 2]]| -> f64 {
        grad.iter()
            .zip(phi)
            .zip(&w)
            .map(|((g, f), wi)| (g[0] * f[0] + g[1] * f[1]) * wi)
            .sum()
    };
    let base_pairs: Vec<f64> = probes.iter().map(|phi| pair(&base_grad, phi)).collect();

    let rows = family
        .schedule
        .iter()
        .zip(&family.members)
        .map(|(&eps, ue)| {
            let vals = ue.values();
            let max_gap = ue.sup_distance(base).unwrap_or(f64::NAN);
            let dq: Vec<f64> = vals.iter().zip(&base_q).map(|(a, bq)| (a.powf(q) - bq).abs()).collect();
            let lp_gap = dq.iter().zip(&w).map(|(d, wi)| d.powf(p) * wi).sum::<f64>().powf(1.0 / p);
            let slice_gap = dq[k0 * ns..(k0 + 1) * ns]
                .iter()
                .zip(&ws)
                .map(|(d, wi)| d.powf(p) * wi)
                .sum::<f64>()
                .powf(1.0 / p);
            let um: Vec<f64> = vals.iter().map(|v| v.powf(m)).collect();
            let grad = gradient(grid, &um);
            let gaps: Vec<f64> = grad
                .iter()
                .zip(&base_grad)
                .map(|(a, b)| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt())
                .collect();
            let grad_l2_gap = gaps.iter().zip(&w).map(|(g, wi)| g * g * wi).sum::<f64>().sqrt();
            let pairing_gap = probes
                .iter()
                .zip(&base_pairs)
                .map(|(phi, bp)| (pair(&grad, phi) - bp).abs())
                .fold(0.0, f64::max);
            EpsRow {
                eps,
                max_gap,
                lp_gap,
                slice_gap,
                grad_l2_gap,
                pairing_gap,
                grad_gap_max: gaps.iter().cloned().fold(0.0, f64::max),
                grad_gap_mean: gaps.iter().sum::<f64>() / gaps.len() as f64,
            }
        })
        .collect();
    Ok(ConvergenceReport { q, p, t0, rows })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairingReport {
    pub eps: f64,
    pub m: f64,
    pub bound: f64,
    /// `|Ω_T|`.
    pub measure: f64,
    /// `∬ (u_ε − u)(u_ε^m − u^m)`.
    pub lhs: f64,
    /// `ε^m |Ω_T| (M + 1) + ε |Ω_T| (M + 1)^m`.
    pub rhs: f64,
    pub pass: bool,
}

pub fn pairing_bound(eps: f64, m: f64, bound: f64, measure: f64) -> f64 {
    eps.powf(m) * measure * (bound + 1.0) + eps * measure * (bound + 1.0).powf(m)
}

pub fn oleinik_pairing(u_eps: &ScalarField, u: &ScalarField, eps: f64, m: f64, bound: f64) -> Result<PairingReport> {
    u.same_grid(u_eps)?;
    check_eps(eps)?;
    if bound < u.sup() {
        return Err(Error::Domain(format!(
            "bound M = {bound} is below the supremum {} of the solution",
            u.sup()
        )));
    }
    let grid = u.grid();
    let w = trapezoid_weights(grid);
    let lhs: f64 = u_eps
        .values()
        .iter()
        .zip(u.values())
        .zip(&w)
        .map(|((a, b), wi)| (a - b) * (a.powf(m) - b.powf(m)) * wi)
        .sum();
    let measure = grid.measure();
    let rhs = pairing_bound(eps, m, bound, measure);
    Ok(PairingReport {
        eps,
        m,
        bound,
        measure,
        lhs,
        rhs,
        pass: lhs <= rhs * (1.0 + 1e-12),
    })
}

/// Solutions on the whole cylinder with data `g` and `(g^m + ε^m)^{1/m}`.
pub fn bvp_pair(g: &ScalarField, eps: f64, cfg: &SolverConfig) -> Result<(ScalarField, ScalarField)> {
    let bx = SpaceTimeBox::full(g.grid());
    let u = solve_bvp(
        &BvpSpec {
            bx: bx.clone(),
            data: g.clone(),
        },
        cfg,
    )?;
    let u_eps = solve_bvp(
        &BvpSpec {
            bx,
            data: lift_values(g, eps, cfg.m)?,
        },
        cfg,
    )?;
    Ok((u, u_eps))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ElementaryReport {
    pub nodes: usize,
    pub violations: usize,
    /// `max |a − b|^{m+1} / ((a − b)(a^m − b^m))` over nodes where `a ≠ b`.
    pub worst_ratio: f64,
}

/// Nodewise `|a − b|^{m+1} ≤ (a − b)(a^m − b^m)`, allowing four units of
/// rounding in the product.
pub fn elementary_inequality(u_eps: &ScalarField, u: &ScalarField, m: f64) -> Result<ElementaryReport> {
    u.same_grid(u_eps)?;
    let mut violations = 0;
    let mut worst: f64 = 0.0;
    for (&a, &b) in u_eps.values().iter().zip(u.values()) {
        let lhs = (a - b).abs().powf(m + 1.0);
        let rhs = (a - b) * (a.powf(m) - b.powf(m));
        if lhs > rhs * (1.0 + 4.0 * f64::EPSILON) {
            violations += 1;
        }
        if rhs > 0.0 {
            worst = worst.max(lhs / rhs);
        }
    }
    Ok(ElementaryReport {
        nodes: u.values().len(),
        violations,
        worst_ratio: worst,
    })
}
