use porous_obstacle::grid::enumerate_boxes;
use porous_obstacle::obstacle::construct_step;
use porous_obstacle::pme::{
    barenblatt_field, residual_weak_form, test_battery, weak_tolerance, Barenblatt,
};
use porous_obstacle::runconfig::{run_case, RunConfig};
use porous_obstacle::verify::{certify_subsolution, certify_supersolution, DEFAULT_BATTERY};
use porous_obstacle::{build_grid, Obstacle, Regularity, ScalarField, SolverConfig};

fn bump_case() -> RunConfig {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus/case_bump.json");
    RunConfig::load(&path).unwrap()
}

#[test]
fn sampled_profiles_stay_within_the_allowance() {
    for (m, c, t_shift, n, nt) in [(2.0, 1.0, 1.0, 41, 41), (2.0, 0.1, 0.5, 41, 41), (3.0, 0.3, 1.0, 41, 41), (2.0, 1.0, 0.2, 81, 161)] {
        let grid = build_grid(&[(-1.5, 1.5)], &[n], nt, 1.0).unwrap();
        let profile = Barenblatt {
            m,
            n: 1,
            c,
            center: vec![0.0],
        };
        let u = barenblatt_field(&grid, &profile, t_shift).unwrap();
        for size in [4, 8, 16] {
            for phi in test_battery(&grid, size) {
                let r = residual_weak_form(&u, &phi, m).unwrap();
                let tol = weak_tolerance(&grid, u.sup(), m, &phi);
                assert!(r.abs() <= 0.2 * tol, "m={m} C={c} size={size}: {r:e} vs {tol:e}");
            }
        }
    }
}

#[test]
fn obstacle_solution_is_a_supersolution() {
    let run = run_case(&bump_case()).unwrap();
    let report = certify_supersolution(&run.u, 2.0, DEFAULT_BATTERY).unwrap();
    assert!(report.pass, "{report:?}");
    assert_eq!(report, certify_supersolution(&run.u, 2.0, DEFAULT_BATTERY).unwrap());
}

#[test]
fn interior_spike_is_caught_locally() {
    let run = run_case(&bump_case()).unwrap();
    let grid = run.u.grid().clone();
    let (s, k) = (10, 30);
    let mut values = run.u.values().to_vec();
    let idx = k * grid.n_nodes_space() + s;
    values[idx] = (values[idx] - 0.3).max(0.0);
    let spiked = ScalarField::from_values(&grid, values).unwrap();
    let report = certify_supersolution(&spiked, 2.0, DEFAULT_BATTERY).unwrap();
    assert!(!report.pass);
    assert!(report.worst_residual < 0.0);
    let phi = report.worst_bump.unwrap();
    let (x, t) = (grid.coord(0, s), grid.time(k));
    assert!((x - phi.center[0]).abs() < phi.radii[0] && (t - phi.t_center).abs() < phi.t_radius);
}

#[test]
fn iterates_are_subsolutions_off_the_obstacle() {
    let cfg = bump_case();
    let psi = cfg.build_obstacle().unwrap();
    let solver = SolverConfig::new(2.0);
    let mut f = psi.field().clone();
    for eb in enumerate_boxes(f.grid(), 2) {
        f = construct_step(&f, &eb.bx, &psi, &solver).unwrap().0;
    }
    let margin = 10.0 * cfg.obstacle_config().stop_tol(psi.bound());
    let mask: Vec<bool> = f
        .values()
        .iter()
        .zip(psi.field().values())
        .map(|(a, b)| *a > b + margin)
        .collect();
    let report = certify_subsolution(&f, 2.0, 16, &mask).unwrap();
    assert!(report.bumps > 0);
    assert!(report.pass, "{report:?}");
}

#[test]
fn upward_jump_fails_the_subsolution_check() {
    let grid = build_grid(&[(0.0, 1.0)], &[41], 41, 1.0).unwrap();
    let u = ScalarField::from_fn(&grid, |_, t| if t > 0.5 { 1.0 } else { 0.0 }).unwrap();
    let mask = vec![true; grid.n_nodes()];
    assert!(certify_supersolution(&u, 2.0, 8).unwrap().pass);
    assert!(!certify_subsolution(&u, 2.0, 8, &mask).unwrap().pass);
    let constant = Obstacle::new(ScalarField::constant(&grid, 2.0).unwrap(), Regularity::Continuous);
    assert!(certify_subsolution(constant.field(), 2.0, 8, &mask).unwrap().pass);
}
