//! Weak Harnack quantities: the spatial mean at `t₀`, the waiting time, the
//! forward cylinder minimum and the tail term, and an empirical fit of the
//! two constants on a search lattice.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::verify::certify_supersolution;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HarnackQuantities {
    pub x0: Vec<f64>,
    pub rho: f64,
    pub t0: f64,
    pub c1: f64,
    pub m: f64,
    /// Mean of `u(·, t₀)` over `B(x₀, ρ)`.
    pub avg: f64,
    /// `min(T − t₀, C₁ ρ² avg^{−(m−1)})`.
    pub tau: f64,
    /// Time levels of `V = B(x₀, 4ρ) × [t₀ + τ/2, t₀ + τ]`.
    pub levels: (usize, usize),
    pub essinf: f64,
    /// `(ρ² / (T − t₀))^{1/(m−1)}`.
    pub tail: f64,
}

impl HarnackQuantities {
    /// `(C₁ ρ² / (T − t₀))^{1/(m−1)}`.
    pub fn tail_term(&self) -> f64 {
        self.c1.powf(1.0 / (self.m - 1.0)) * self.tail
    }

    pub fn holds(&self, c2: f64) -> bool {
        self.avg <= self.tail_term() + c2 * self.essinf
    }

    /// Smallest `C₂` for which the inequality holds (infinite when the
    /// minimum vanishes and the tail does not cover the mean).
    pub fn required_c2(&self) -> f64 {
        let excess = self.avg - self.tail_term();
        if excess <= 0.0 {
            0.0
        } else if self.essinf > 0.0 {
            excess / self.essinf
        } else {
            f64::INFINITY
        }
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn harnack_quantities(u: &ScalarField, x0: &[f64], rho: f64, t0: f64, c1: f64, m: f64) -> Result<HarnackQuantities> {
    let grid = u.grid();
    let dim = grid.dim();
    if x0.len() != dim {
        return Err(Error::Geometry("x0 dimension differs from grid dimension".into()));
    }
    if !(rho > 0.0) || !(c1 > 0.0) || !(m > 1.0) {
        return Err(Error::Domain("ρ and C₁ must be positive and m > 1".into()));
    }
    for a in 0..dim {
        let (lo, hi) = grid.domain(a);
        let slack = 1e-12 * (hi - lo);
        if x0[a] - 8.0 * rho < lo - slack || x0[a] + 8.0 * rho > hi + slack {
            return Err(Error::Geometry(format!("B(x0, 8ρ) leaves Ω on axis {a}")));
        }
    }
    let t_final = grid.t_final();
    let k0 = grid.nearest_level(t0);
    if (grid.time(k0) - t0).abs() > 1e-9 * t_final || k0 == 0 || k0 == grid.last_level() {
        return Err(Error::Resolution(format!("t0 = {t0} is not an interior time level")));
    }

    // midpoint rule over cells whose centre lies in the ball
    let slice = u.slice(k0);
    let (cells_x, cells_y) = (grid.n_space(0) - 1, if dim == 2 { grid.n_space(1) - 1 } else { 1 });
    let (mut sum, mut vol) = (0.0, 0.0);
    for j in 0..cells_y {
        for i in 0..cells_x {
            let mut mid = [0.5 * (grid.coord(0, i) + grid.coord(0, i + 1)), 0.0];
            let mut corners = vec![grid.flat(&[i, j][..dim]), grid.flat(&[i + 1, j][..dim])];
            let mut cell = grid.h(0);
            if dim == 2 {
                mid[1] = 0.5 * (grid.coord(1, j) + grid.coord(1, j + 1));
                corners.push(grid.flat(&[i, j + 1]));
                corners.push(grid.flat(&[i + 1, j + 1]));
                cell *= grid.h(1);
            }
            if distance(&mid[..dim], x0) < rho {
                let v = corners.iter().map(|&s| slice[s]).sum::<f64>() / corners.len() as f64;
                sum += v * cell;
                vol += cell;
            }
        }
    }
    if vol == 0.0 {
        return Err(Error::Resolution(format!("B(x0, {rho}) contains no cell centre")));
    }
    let avg = sum / vol;

    let remaining = t_final - t0;
    let tau = if avg > 0.0 {
        remaining.min(c1 * rho * rho * avg.powf(-(m - 1.0)))
    } else {
        remaining
    };
    let slack = 1e-12 * t_final;
    let k_lo = (k0..grid.n_time()).find(|&k| grid.time(k) >= t0 + 0.5 * tau - slack);
    let k_hi = (k0..grid.n_time()).rev().find(|&k| grid.time(k) <= t0 + tau + slack);
    let (k_lo, k_hi) = match (k_lo, k_hi) {
        (Some(a), Some(b)) if a <= b => (a, b),
        _ => {
            return Err(Error::Resolution(format!(
                "window [t0 + τ/2, t0 + τ] with τ = {tau:e} holds no time level"
            )))
        }
    };
    let ball: Vec<usize> = (0..grid.n_nodes_space())
        .filter(|&s| distance(&grid.position(s)[..dim], x0) <= 4.0 * rho)
        .collect();
    let mut essinf = f64::INFINITY;
    for k in k_lo..=k_hi {
        for &s in &ball {
            essinf = essinf.min(u.get(s, k));
        }
    }
    Ok(HarnackQuantities {
        x0: x0.to_vec(),
        rho,
        t0,
        c1,
        m,
        avg,
        tau,
        levels: (k_lo, k_hi),
        essinf,
        tail: (rho * rho / remaining).powf(1.0 / (m - 1.0)),
    })
}

#[derive(Clone, Debug)]
pub struct HarnackCase {
    pub u: ScalarField,
    pub x0: Vec<f64>,
    pub rho: f64,
    pub t0: f64,
}

/// `C = 2^{k/2}` for `k = −10..=20`.
pub fn lattice() -> Vec<f64> {
    (-10..=20).map(|k| 2f64.powf(k as f64 / 2.0)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FrontierPoint {
    pub c1: f64,
    /// Smallest lattice `C₂` that works with this `C₁`; absent when none does.
    pub c2: Option<f64>,
    /// Largest required `C₂` over the cases and the case attaining it.
    pub required: f64,
    pub binding_case: Option<usize>,
    pub note: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FitReport {
    pub feasible: bool,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub binding_case: Option<usize>,
    /// On failure, the best achievable `max_i avg_i / (tail term + C₂ essinf_i)`.
    pub worst_ratio: Option<f64>,
    pub frontier: Vec<FrontierPoint>,
}

/// Battery size for the supersolution pre-check of fitting cases.
const PRECHECK_BATTERY: usize = 6;

/// Smallest lattice pair `(C₁, C₂)`, ordered by `C₁` first, for which the
/// inequality holds on every case.
pub fn fit_constants(cases: &[HarnackCase], m: f64) -> Result<FitReport> {
    if cases.len() < 3 {
        return Err(Error::config("cases", "fitting needs at least three cases"));
    }
    for (i, c) in cases.iter().enumerate() {
        let cert = certify_supersolution(&c.u, m, PRECHECK_BATTERY)?;
        if !cert.pass {
            return Err(Error::Rejected(format!(
                "case {i} fails the supersolution pre-check (worst ratio {:.3})",
                cert.worst_ratio
            )));
        }
    }
    let grid_c = lattice();
    let c2_max = *grid_c.last().unwrap();
    let mut frontier = Vec::with_capacity(grid_c.len());
    let mut best_ratio = f64::INFINITY;
    for &c1 in &grid_c {
        let mut required: f64 = 0.0;
        let mut binding = None;
        let mut note = None;
        let mut ratio: f64 = 0.0;
        for (i, c) in cases.iter().enumerate() {
            match harnack_quantities(&c.u, &c.x0, c.rho, c.t0, c1, m) {
                Ok(q) => {
                    let r = q.required_c2();
                    if binding.is_none() || r > required {
                        required = r;
                        binding = Some(i);
                    }
                    let denom = q.tail_term() + c2_max * q.essinf;
                    ratio = ratio.max(if denom > 0.0 { q.avg / denom } else if q.avg > 0.0 { f64::INFINITY } else { 0.0 });
                }
                Err(Error::Resolution(msg)) => {
                    note = Some(format!("case {i}: {msg}"));
                    required = f64::INFINITY;
                    binding = Some(i);
                    ratio = f64::INFINITY;
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        best_ratio = best_ratio.min(ratio);
        let c2 = grid_c.iter().copied().find(|&c| c >= required);
        frontier.push(FrontierPoint {
            c1,
            c2,
            required,
            binding_case: binding,
            note,
        });
    }
    let chosen = frontier.iter().find(|p| p.c2.is_some());
    Ok(match chosen {
        Some(p) => FitReport {
            feasible: true,
            c1: Some(p.c1),
            c2: p.c2,
            binding_case: p.binding_case,
            worst_ratio: None,
            frontier,
        },
        None => FitReport {
            feasible: false,
            c1: None,
            c2: None,
            binding_case: None,
            worst_ratio: Some(best_ratio),
            frontier,
        },
    })
}
