use serde::Serialize;

use crate::error::Result;
use crate::field::ScalarField;
use crate::grid::SpaceTimeBox;

use super::bvp::solve_box;
use super::SolverConfig;

/// Outcome of comparing `u` with the solution `w` that shares its data on
/// `∂_p` of a box.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparisonReport {
    /// `min (u − w)` over the unknowns of the box.
    pub min_diff: f64,
    /// `(flat space index, level)` of the minimum.
    pub location: (usize, usize),
    pub tol: f64,
    pub pass: bool,
}

pub fn check_comparison(u: &ScalarField, bx: &SpaceTimeBox, cfg: &SolverConfig, tol: f64) -> Result<ComparisonReport> {
    let w = solve_box(u, bx, cfg)?;
    let mut min_diff = f64::INFINITY;
    let mut location = (0, 0);
    for (s, k, wv) in w.interior_values() {
        let d = u.get(s, k) - wv;
        if d < min_diff {
            min_diff = d;
            location = (s, k);
        }
    }
    Ok(ComparisonReport {
        min_diff,
        location,
        tol,
        pass: min_diff >= -tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;
    use crate::pme::{solve_bvp, BvpSpec};

    #[test]
    fn solution_compares_with_itself() {
        let g = build_grid(&[(0.0, 1.0)], &[31], 31, 0.5).unwrap();
        let data = ScalarField::from_fn(&g, |x, t| if t == 0.0 { (x[0] * (1.0 - x[0]) * 4.0).powi(3) } else { 0.1 }).unwrap();
        let bx = SpaceTimeBox::full(&g);
        let u = solve_bvp(&BvpSpec { bx: bx.clone(), data }, &SolverConfig::new(2.0)).unwrap();
        let r = check_comparison(&u, &bx, &SolverConfig::new(2.0), 1e-9).unwrap();
        assert!(r.pass);
        assert!(r.min_diff.abs() < 1e-10);
    }

    #[test]
    fn downward_spike_fails() {
        let g = build_grid(&[(0.0, 1.0)], &[31], 31, 0.5).unwrap();
        let data = ScalarField::constant(&g, 1.0).unwrap();
        let mut u = data.clone();
        u.set(15, 20, 0.5).unwrap();
        let bx = SpaceTimeBox::new(vec![5], vec![25], 10);
        let r = check_comparison(&u, &bx, &SolverConfig::new(2.0), 1e-9).unwrap();
        assert!(!r.pass);
        assert_eq!(r.location, (15, 20));
        assert!((r.min_diff + 0.5).abs() < 1e-10);
    }
}
