use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::ScalarField;

use super::construct::solve_obstacle_continuous;
use super::{IterationTrace, Obstacle, ObstacleConfig, Regularity};

/// `min_y (g(y) + step · |i − j|)` along a line of equally spaced samples.
fn cone_pass(g: &mut [f64], step: f64) {
    for i in 1..g.len() {
        g[i] = g[i].min(g[i - 1] + step);
    }
    for i in (0..g.len().saturating_sub(1)).rev() {
        g[i] = g[i].min(g[i + 1] + step);
    }
}

/// Parabolic inf-convolution `ψ_k(z) = min_w (ψ(w) + k·(|x − y| + |t − s|))`
/// over the grid nodes `w = (y, s)`.
///
/// The time part of the distance separates, so the minimum is taken in
/// space on each level and then along time.
pub fn inf_convolution(psi: &Obstacle, k: f64) -> Result<Obstacle> {
    if !(k.is_finite() && k >= 1.0) {
        return Err(Error::Domain(format!("inf-convolution slope must be at least 1, got {k}")));
    }
    let grid = psi.grid();
    let ns = grid.n_nodes_space();
    let nt = grid.n_time();
    let mut v = psi.field().values().to_vec();

    if grid.dim() == 1 {
        let step = k * grid.h(0);
        for lvl in v.chunks_mut(ns) {
            cone_pass(lvl, step);
        }
    } else {
        let pos: Vec<[f64; 2]> = (0..ns).map(|s| grid.position(s)).collect();
        let mut out = vec![0.0; ns];
        for lvl in v.chunks_mut(ns) {
            for (z, o) in out.iter_mut().enumerate() {
                let mut best = lvl[z];
                for (w, &pw) in lvl.iter().enumerate() {
                    if pw >= best {
                        continue;
                    }
                    let d = ((pos[z][0] - pos[w][0]).powi(2) + (pos[z][1] - pos[w][1]).powi(2)).sqrt();
                    best = best.min(pw + k * d);
                }
                *o = best;
            }
            lvl.copy_from_slice(&out);
        }
    }

    let step = k * grid.tau();
    let mut line = vec![0.0; nt];
    for s in 0..ns {
        for (lk, l) in line.iter_mut().enumerate() {
            *l = v[lk * ns + s];
        }
        cone_pass(&mut line, step);
        for (lk, l) in line.iter().enumerate() {
            v[lk * ns + s] = *l;
        }
    }
    Ok(Obstacle::with_bound(
        ScalarField::from_values(grid, v)?,
        psi.bound(),
        Regularity::Continuous,
    )?)
}

/// Slopes `k_j = 2^j (1 + M) / min(h, τ)` from the first `j` with `k_j ≥ 1`
/// through `j = 1`. From `j = 0` on, `ψ_k = ψ` on the grid.
pub fn k_schedule(psi: &Obstacle) -> Vec<f64> {
    let grid = psi.grid();
    let base = (1.0 + psi.bound()) / grid.h_min().min(grid.tau());
    let j0 = -(base.log2().floor() as i32);
    (j0.min(0)..=1)
        .map(|j| base * 2f64.powi(j))
        .filter(|&k| k >= 1.0)
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct LscStep {
    /// Slope of the approximation; `None` when the obstacle is used as is.
    pub k: Option<f64>,
    /// `max (ψ − ψ_k)`.
    pub obstacle_gap: f64,
    /// `max |u_k − u_{k−1}|`, absent for the first step.
    pub change: Option<f64>,
    /// `min (u_k − u_{k−1})`, absent for the first step.
    pub min_change: Option<f64>,
    pub trace: IterationTrace,
}

#[derive(Clone, Debug)]
pub struct LscOutcome {
    pub u: ScalarField,
    pub steps: Vec<LscStep>,
}

/// Solves along `ψ_{k_j}` until consecutive solutions agree to `stop_tol`.
/// Continuous obstacles take a single step with `ψ_k = ψ`.
pub fn solve_obstacle_lsc(psi: &Obstacle, cfg: &ObstacleConfig) -> Result<LscOutcome> {
    cfg.validate()?;
    if psi.regularity() == Regularity::Continuous {
        let (u, trace) = solve_obstacle_continuous(psi, cfg)?;
        return Ok(LscOutcome {
            u,
            steps: vec![LscStep {
                k: None,
                obstacle_gap: 0.0,
                change: None,
                min_change: None,
                trace,
            }],
        });
    }
    let tol = cfg.stop_tol(psi.bound());
    let mut steps: Vec<LscStep> = Vec::new();
    let mut prev: Option<ScalarField> = None;
    for k in k_schedule(psi).into_iter().take(cfg.max_k_steps) {
        let psi_k = inf_convolution(psi, k)?;
        let obstacle_gap = psi.field().sup_distance(psi_k.field())?;
        let (u, trace) = solve_obstacle_continuous(&psi_k, cfg)?;
        let (change, min_change) = match &prev {
            Some(p) => (Some(u.sup_distance(p)?), Some(u.min_difference(p)?.0)),
            None => (None, None),
        };
        steps.push(LscStep {
            k: Some(k),
            obstacle_gap,
            change,
            min_change,
            trace,
        });
        if change.is_some_and(|c| c <= tol) {
            return Ok(LscOutcome { u, steps });
        }
        prev = Some(u);
    }
    let trace = steps.pop().map(|s| s.trace).unwrap_or_default();
    Err(Error::Convergence {
        message: format!("approximating obstacles did not settle within {} steps", cfg.max_k_steps),
        trace: Box::new(trace),
    })
}
