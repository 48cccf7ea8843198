use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::{enumerate_boxes_ordered, max_level, EnumeratedBox, SpaceTimeBox};
use crate::pme::{solve_box, solve_bvp, BvpSpec, SolverConfig};

use super::{BoxRecord, IterationTrace, Obstacle, ObstacleConfig, Regularity, StopReason, SweepRecord};

/// `u` outside the box, the solution with data `u` on `∂_p` inside.
pub fn poisson_modify(u: &ScalarField, bx: &SpaceTimeBox, cfg: &SolverConfig) -> Result<ScalarField> {
    solve_bvp(
        &BvpSpec {
            bx: bx.clone(),
            data: u.clone(),
        },
        cfg,
    )
}

struct StepStats {
    increment: f64,
    newton_iterations: usize,
    max_residual: f64,
}

/// `f ← max(g, f)` inside the box, in place.
fn step_in_place(f: &mut ScalarField, bx: &SpaceTimeBox, cfg: &SolverConfig) -> Result<StepStats> {
    let g = solve_box(f, bx, cfg)?;
    let mut increment: f64 = 0.0;
    for (s, k, v) in g.interior_values() {
        let old = f.get(s, k);
        if v > old {
            increment = increment.max(v - old);
            f.raise(s, k, v);
        }
    }
    Ok(StepStats {
        increment,
        newton_iterations: g.newton_iterations,
        max_residual: g.max_residual,
    })
}

/// One step of the construction: returns `f_{j+1}` and `max (f_{j+1} − f_j)`.
pub fn construct_step(
    f_j: &ScalarField,
    bx: &SpaceTimeBox,
    psi: &Obstacle,
    cfg: &SolverConfig,
) -> Result<(ScalarField, f64)> {
    let (d, s, k) = f_j.min_difference(psi.field())?;
    if d < 0.0 {
        return Err(Error::Domain(format!(
            "iterate lies below the obstacle by {} at node {s}, level {k}",
            -d
        )));
    }
    let mut next = f_j.clone();
    let stats = step_in_place(&mut next, bx, cfg)?;
    Ok((next, stats.increment))
}

fn sweep(
    f: &mut ScalarField,
    boxes: &[EnumeratedBox],
    level: usize,
    cfg: &SolverConfig,
    trace: &mut IterationTrace,
) -> Result<f64> {
    let sweep = trace.sweeps.len();
    let mut max_inc: f64 = 0.0;
    for eb in boxes {
        let st = step_in_place(f, &eb.bx, cfg)?;
        max_inc = max_inc.max(st.increment);
        trace.boxes.push(BoxRecord {
            sweep,
            level,
            box_id: eb.id,
            box_level: eb.level,
            increment: st.increment,
            newton_iterations: st.newton_iterations,
            max_residual: st.max_residual,
        });
    }
    trace.sweeps.push(SweepRecord {
        sweep,
        level,
        boxes: boxes.len(),
        max_increment: max_inc,
    });
    Ok(max_inc)
}

/// On the finest level the sweeps must also bound the remaining distance to
/// the limit: with `ρ` the ratio of the last two sweep increments, the
/// geometric tail `inc · ρ / (1 − ρ)` has to be below `tol`.
fn tail_settled(trace: &IterationTrace, tol: f64) -> bool {
    let n = trace.sweeps.len();
    let inc = trace.sweeps[n - 1].max_increment;
    if inc <= 0.01 * tol {
        return true;
    }
    if n < 2 || trace.sweeps[n - 2].level != trace.sweeps[n - 1].level {
        return false;
    }
    let rho = inc / trace.sweeps[n - 2].max_increment;
    rho < 1.0 && inc * rho / (1.0 - rho) <= tol
}

/// Limit of the alternating construction started from `f_0 = ψ`.
///
/// A first sweep over the whole box family detects obstacles that are already
/// fixed points. Otherwise levels `0, 1, …, L` are swept in turn, each until a
/// sweep raises no node by more than `stop_tol`; see [`tail_settled`] for the
/// finest level.
pub fn solve_obstacle_continuous(psi: &Obstacle, cfg: &ObstacleConfig) -> Result<(ScalarField, IterationTrace)> {
    cfg.validate()?;
    if psi.regularity() != Regularity::Continuous {
        return Err(Error::config(
            "obstacle.regularity",
            "the alternating construction takes continuous obstacles; use the lsc pipeline",
        ));
    }
    let grid = psi.grid();
    let finest = max_level(grid);
    let top = cfg.max_level.map_or(finest, |l| l.min(finest));
    let tol = cfg.stop_tol(psi.bound());
    let mut trace = IterationTrace {
        stop_tol: tol,
        ..IterationTrace::default()
    };
    let mut f = psi.field().clone();

    let all = enumerate_boxes_ordered(grid, top, cfg.order);
    if sweep(&mut f, &all, top, &cfg.solver, &mut trace)? <= tol {
        trace.stop_reason = StopReason::InitialSweepStationary;
        return Ok((f, trace));
    }
    for level in 0..=top {
        let boxes = if level == top {
            all.clone()
        } else {
            enumerate_boxes_ordered(grid, level, cfg.order)
        };
        loop {
            if trace.sweeps.len() >= cfg.max_sweeps {
                trace.stop_reason = StopReason::SweepBudgetExhausted;
                return Err(Error::Convergence {
                    message: format!(
                        "{} sweeps used before level {level} settled below {tol:e}",
                        cfg.max_sweeps
                    ),
                    trace: Box::new(trace),
                });
            }
            let inc = sweep(&mut f, &boxes, level, &cfg.solver, &mut trace)?;
            if inc <= tol && (level < top || tail_settled(&trace, tol)) {
                break;
            }
        }
    }
    trace.stop_reason = StopReason::LevelsConverged;
    Ok((f, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;

    #[test]
    fn constant_obstacle_is_a_fixed_point() {
        let g = build_grid(&[(0.0, 1.0)], &[21], 21, 1.0).unwrap();
        for c in [0.0, 3.0] {
            let psi = Obstacle::new(ScalarField::constant(&g, c).unwrap(), Regularity::Continuous);
            let (u, trace) = solve_obstacle_continuous(&psi, &ObstacleConfig::new(2.0)).unwrap();
            assert!(u.values().iter().all(|&v| v == c));
            assert_eq!(trace.sweep_count(), 1);
            assert_eq!(trace.stop_reason, StopReason::InitialSweepStationary);
        }
    }

    #[test]
    fn step_rejects_iterate_below_obstacle() {
        let g = build_grid(&[(0.0, 1.0)], &[11], 11, 1.0).unwrap();
        let psi = Obstacle::new(ScalarField::constant(&g, 1.0).unwrap(), Regularity::Continuous);
        let f = ScalarField::constant(&g, 0.5).unwrap();
        let bx = SpaceTimeBox::full(&g);
        assert!(matches!(
            construct_step(&f, &bx, &psi, &SolverConfig::new(2.0)),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn lsc_tag_is_refused() {
        let g = build_grid(&[(0.0, 1.0)], &[11], 11, 1.0).unwrap();
        let psi = Obstacle::new(ScalarField::zeros(&g), Regularity::LowerSemicontinuous);
        let err = solve_obstacle_continuous(&psi, &ObstacleConfig::new(2.0)).unwrap_err();
        assert!(err.is_configuration());
    }
}
