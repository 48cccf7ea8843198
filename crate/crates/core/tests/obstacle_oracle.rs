//! The limit of the box construction against an independent projected
//! Gauss-Seidel solve of the discrete complementarity problem
//! `min(G(u), u − ψ) = 0`, level by level in time.

use porous_obstacle::grid::EnumerationOrder;
use porous_obstacle::obstacle::solve_obstacle_continuous;
use porous_obstacle::{build_grid, Obstacle, ObstacleConfig, Regularity, ScalarField};

fn complementarity_oracle(psi: &ScalarField, m: f64) -> Vec<f64> {
    let g = psi.grid();
    let n = g.n_space(0);
    let lam = g.tau() / (g.h(0) * g.h(0));
    let mut u = psi.values().to_vec();
    for k in 1..g.n_time() {
        let (done, rest) = u.split_at_mut(k * n);
        let prev = &done[(k - 1) * n..];
        let cur = &mut rest[..n];
        loop {
            let mut change: f64 = 0.0;
            for i in 1..n - 1 {
                // scalar Newton for v + 2λ v^m = prev + λ (w_{i-1} + w_{i+1})
                let rhs = prev[i] + lam * (cur[i - 1].powf(m) + cur[i + 1].powf(m));
                let mut v = cur[i].max(1e-3);
                for _ in 0..100 {
                    let f = v + 2.0 * lam * v.powf(m) - rhs;
                    let next = (v - f / (1.0 + 2.0 * lam * m * v.powf(m - 1.0))).max(0.0);
                    let done = (next - v).abs() < 1e-16;
                    v = next;
                    if done {
                        break;
                    }
                }
                let v = v.max(psi.get(i, k));
                change = change.max((v - cur[i]).abs());
                cur[i] = v;
            }
            if change < 1e-15 {
                break;
            }
        }
    }
    u
}

fn check(name: &str, f: impl Fn(&[f64], f64) -> f64) {
    let grid = build_grid(&[(0.0, 1.0)], &[41], 41, 1.0).unwrap();
    let psi = Obstacle::from_fn(&grid, f, Regularity::Continuous).unwrap();
    let oracle = complementarity_oracle(psi.field(), 2.0);
    let mut previous: Option<ScalarField> = None;
    for order in [EnumerationOrder::Lexicographic, EnumerationOrder::ReversedWithinLevel] {
        let mut cfg = ObstacleConfig::new(2.0);
        cfg.order = order;
        let tol = cfg.stop_tol(psi.bound());
        let (u, trace) = solve_obstacle_continuous(&psi, &cfg).unwrap();
        assert!(trace.increments_nonnegative());
        let d = u
            .values()
            .iter()
            .zip(&oracle)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(d <= 5.0 * tol, "{name} {order:?}: distance to oracle {d:e}");
        if let Some(p) = &previous {
            assert!(p.sup_distance(&u).unwrap() <= 5.0 * tol);
        }
        previous = Some(u);
    }
}

#[test]
fn smooth_cap() {
    check("cap", |x, t| {
        (1.0 - ((x[0] - 0.5) / 0.2).powi(2) - ((t - 0.5) / 0.3).powi(2)).max(0.0)
    });
}

#[test]
fn late_plateau() {
    check("plateau", |x, t| {
        if t >= 0.5 && (0.4..=0.6).contains(&x[0]) {
            1.0
        } else {
            0.0
        }
    });
}

#[test]
fn initial_data_only() {
    check("initial", |x, t| {
        if t == 0.0 {
            (1.0 - ((x[0] - 0.5) / 0.3).powi(2)).max(0.0)
        } else {
            0.0
        }
    });
}
