//! End-to-end acceptance checks, one test per criterion. Each test writes a
//! single `criterion N ...: PASS|FAIL` line to stderr, bypassing capture.

use std::io::Write as _;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use porous_obstacle::approximation::{
    bvp_pair, build_eps_family, convergence_report, elementary_inequality, oleinik_pairing,
};
use porous_obstacle::grid::EnumerationOrder;
use porous_obstacle::harnack::{fit_constants, HarnackCase};
use porous_obstacle::obstacle::{inactive_set_residual, solve_obstacle_continuous};
use porous_obstacle::pme::{barenblatt_field, bump_profile, solve_bvp, Barenblatt, BvpSpec};
use porous_obstacle::runconfig::{run_case, solve_to_dir, RunConfig};
use porous_obstacle::{build_grid, Obstacle, ObstacleConfig, Regularity, ScalarField, SolverConfig, SpaceTimeBox};

fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

fn corpus() -> Vec<RunConfig> {
    RunConfig::load_dir(&corpus_dir()).expect("corpus loads")
}

fn corpus_case(file: &str) -> RunConfig {
    RunConfig::load(&corpus_dir().join(file)).expect("corpus case loads")
}

fn sci(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn report(n: usize, name: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "criterion {n:>2} {name:<28} {verdict}  {detail}");
}

fn discrete_barenblatt(grid: &porous_obstacle::SpaceTimeGrid, c: f64, t_shift: f64, center: f64) -> ScalarField {
    let profile = Barenblatt {
        m: 2.0,
        n: 1,
        c,
        center: vec![center],
    };
    let sampled = barenblatt_field(grid, &profile, t_shift).unwrap();
    solve_bvp(
        &BvpSpec {
            bx: SpaceTimeBox::full(grid),
            data: sampled,
        },
        &SolverConfig::new(2.0),
    )
    .unwrap()
}

#[test]
fn criterion_01_barenblatt_reproduction() {
    let profile = Barenblatt::new(2.0, 1, 1.0).unwrap();
    let t_shift = 1.0;
    let mut sup_err = Vec::new();
    let mut l1_err = Vec::new();
    let mut slowest = Duration::ZERO;
    for n in [40usize, 80, 160] {
        let h = 1.0 / n as f64;
        let nodes = 4 * n + 1;
        let levels = n * n + 1;
        let grid = build_grid(&[(-2.0, 2.0)], &[nodes], levels, 1.0).unwrap();
        assert!((grid.h(0) - h).abs() < 1e-15 && (grid.tau() - h * h).abs() < 1e-15);
        let exact = barenblatt_field(&grid, &profile, t_shift).unwrap();
        let start = Instant::now();
        let u = solve_bvp(
            &BvpSpec {
                bx: SpaceTimeBox::full(&grid),
                data: exact.clone(),
            },
            &SolverConfig::new(2.0),
        )
        .unwrap();
        slowest = slowest.max(start.elapsed());
        let mut sup: f64 = 0.0;
        let mut l1 = 0.0;
        for (a, b) in u.values().iter().zip(exact.values()) {
            let d = (a - b).abs();
            if *b > 0.1 {
                sup = sup.max(d);
            }
            l1 += d * grid.h(0) * grid.tau();
        }
        sup_err.push(sup);
        l1_err.push(l1);
    }
    let orders: Vec<f64> = sup_err.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let l1_monotone = l1_err.windows(2).all(|w| w[1] < w[0]);
    let pass = orders.iter().all(|&o| o >= 1.5) && l1_monotone && slowest < Duration::from_secs(30);
    report(
        1,
        "Barenblatt reproduction",
        pass,
        &format!(
            "sup errors {}, orders {orders:.2?}, L1 {}, slowest grid {slowest:.1?}",
            sci(&sup_err),
            sci(&l1_err)
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_02_construction_invariants() {
    let mut lines = Vec::new();
    let mut pass = true;
    for cfg in corpus() {
        let start = Instant::now();
        let run = run_case(&cfg).unwrap();
        let elapsed = start.elapsed();
        let increments = run.traces.iter().all(|t| t.boxes.iter().all(|b| b.increment >= 0.0));
        let (gap, _, _) = run.u.min_difference(run.obstacle.field()).unwrap();
        let sup_ok = run.u.sup() <= run.obstacle.field().sup() + 1e-6;
        let ok = increments && gap >= 0.0 && sup_ok && elapsed < Duration::from_secs(120);
        pass &= ok;
        lines.push(format!("{}:{}({elapsed:.1?})", cfg.name, if ok { "ok" } else { "fail" }));
    }
    report(2, "construction invariants", pass, &lines.join(" "));
    assert!(pass);
}

#[test]
fn criterion_03_fixed_points() {
    let mut pass = true;
    let mut lines = Vec::new();
    for file in ["case_constant.json", "case_barenblatt.json"] {
        let cfg = corpus_case(file);
        let run = run_case(&cfg).unwrap();
        let d = run.u.sup_distance(run.obstacle.field()).unwrap();
        let ok = d <= 10.0 * run.stop_tol;
        pass &= ok;
        lines.push(format!("{}: |u − ψ| = {d:.2e} (limit {:.1e})", cfg.name, 10.0 * run.stop_tol));
    }
    report(3, "fixed points", pass, &lines.join(", "));
    assert!(pass);
}

#[test]
fn criterion_04_enumeration_independence() {
    let mut pass = true;
    let mut worst: f64 = 0.0;
    for cfg in corpus() {
        let mut other = cfg.clone();
        other.order = EnumerationOrder::ReversedWithinLevel;
        let a = run_case(&cfg).unwrap();
        let b = run_case(&other).unwrap();
        let d = a.u.sup_distance(&b.u).unwrap();
        worst = worst.max(d / a.stop_tol);
        pass &= d <= 5.0 * a.stop_tol;
    }
    report(4, "enumeration independence", pass, &format!("worst distance {worst:.3} stop_tol (limit 5)"));
    assert!(pass);
}

fn random_bump(rng: &mut ChaCha8Rng) -> impl Fn(&[f64], f64) -> f64 {
    let height = rng.gen_range(0.2..1.5);
    let c = rng.gen_range(0.2..0.8);
    let r = rng.gen_range(0.1..0.35);
    let tc = rng.gen_range(0.1..0.9);
    let tr = rng.gen_range(0.1..0.5);
    move |x: &[f64], t: f64| height * bump_profile((x[0] - c) / r).0 * bump_profile((t - tc) / tr).0
}

#[test]
fn criterion_05_obstacle_comparison() {
    let grid = build_grid(&[(0.0, 1.0)], &[21], 21, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(20_251_016);
    let cfg = ObstacleConfig::new(2.0);
    let mut violations = 0;
    let mut worst = f64::INFINITY;
    for _ in 0..20 {
        let lower: Vec<_> = (0..rng.gen_range(1..4)).map(|_| random_bump(&mut rng)).collect();
        let extra = random_bump(&mut rng);
        let psi1 = Obstacle::from_fn(&grid, |x, t| lower.iter().map(|f| f(x, t)).sum(), Regularity::Continuous).unwrap();
        let psi2 = Obstacle::from_fn(
            &grid,
            |x, t| lower.iter().map(|f| f(x, t)).sum::<f64>() + extra(x, t),
            Regularity::Continuous,
        )
        .unwrap();
        assert!(psi2.field().min_difference(psi1.field()).unwrap().0 >= 0.0);
        let (u1, _) = solve_obstacle_continuous(&psi1, &cfg).unwrap();
        let (u2, _) = solve_obstacle_continuous(&psi2, &cfg).unwrap();
        let tol = cfg.stop_tol(psi1.bound()).min(cfg.stop_tol(psi2.bound()));
        let (d, _, _) = u2.min_difference(&u1).unwrap();
        worst = worst.min(d / tol);
        if d < -2.0 * tol {
            violations += 1;
        }
    }
    let pass = violations == 0;
    report(
        5,
        "obstacle comparison",
        pass,
        &format!("20 pairs, {violations} violations, min (u2 − u1) = {worst:.3} stop_tol"),
    );
    assert!(pass);
}

#[test]
fn criterion_06_inactive_set() {
    let cfg = corpus_case("case_indicator.json");
    let run = run_case(&cfg).unwrap();
    assert_eq!(run.obstacle.regularity(), Regularity::LowerSemicontinuous);
    let r = inactive_set_residual(&run.u, &run.obstacle, &cfg.obstacle_config()).unwrap();
    let pass = r.pass && r.inactive_bumps > 0;
    report(
        6,
        "inactive-set solution",
        pass,
        &format!(
            "{} inactive nodes, {} inactive bumps, worst |r|/tol {:.2e}",
            r.inactive_nodes, r.inactive_bumps, r.worst_inactive_ratio
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_07_oleinik_pairing() {
    let grid = build_grid(&[(-1.0, 1.0)], &[41], 41, 1.0).unwrap();
    let cfg = SolverConfig::new(2.0);
    let profile = Barenblatt::new(2.0, 1, 0.2).unwrap();
    let data: Vec<(&str, ScalarField)> = vec![
        ("barenblatt", barenblatt_field(&grid, &profile, 0.5).unwrap()),
        (
            "bump",
            ScalarField::from_fn(&grid, |x, _| 0.8 * bump_profile(x[0] / 0.6).0).unwrap(),
        ),
        ("zero", ScalarField::zeros(&grid)),
    ];
    let configs: [(usize, f64); 10] = [
        (0, 0.4),
        (0, 0.2),
        (0, 0.1),
        (0, 0.05),
        (1, 0.4),
        (1, 0.1),
        (1, 0.05),
        (1, 0.01),
        (2, 0.2),
        (2, 0.05),
    ];
    let mut pass = true;
    let mut worst_ratio: f64 = 0.0;
    let mut violations = 0;
    for (i, eps) in configs {
        let g = &data[i].1;
        let (u, u_eps) = bvp_pair(g, eps, &cfg).unwrap();
        let bound = g.sup().max(u.sup());
        let p = oleinik_pairing(&u_eps, &u, eps, 2.0, bound).unwrap();
        let e = elementary_inequality(&u_eps, &u, 2.0).unwrap();
        worst_ratio = worst_ratio.max(p.lhs / p.rhs);
        violations += e.violations;
        pass &= p.pass && e.violations == 0;
    }
    report(
        7,
        "Oleinik pairing",
        pass,
        &format!("10 configurations, max lhs/rhs {worst_ratio:.3e}, nodewise violations {violations}"),
    );
    assert!(pass);
}

#[test]
fn criterion_08_eps_approximation() {
    let cfg = corpus_case("case_barenblatt.json");
    let base = cfg.build_obstacle().unwrap().field().clone();
    let ocfg = cfg.obstacle_config();
    let schedule = [0.4, 0.2, 0.1, 0.05];
    let family = build_eps_family(&base, &schedule, &ocfg).unwrap();
    let tol = ocfg.stop_tol(base.sup());
    let lower = family.schedule.iter().zip(&family.members).all(|(&e, f)| f.min() >= e);
    let ordered = family
        .members
        .windows(2)
        .all(|w| w[0].min_difference(&w[1]).unwrap().0 >= -2.0 * tol);
    let rep = convergence_report(&family, 1.0, 2.0, 0.5).unwrap();
    let gaps: Vec<f64> = rep.rows.iter().map(|r| r.max_gap).collect();
    let pass = lower && ordered && rep.monotone();
    report(
        8,
        "eps approximation",
        pass,
        &format!("u_eps >= eps {lower}, ordered {ordered}, report monotone {}, max gaps {}", rep.monotone(), sci(&gaps)),
    );
    assert!(pass);
}

#[test]
fn criterion_09_weak_harnack() {
    // h = 1/40 on [-2, 2], T = 0.1 with τ = 2.5e-5
    let grid = build_grid(&[(-2.0, 2.0)], &[161], 4001, 0.1).unwrap();
    let family: Vec<ScalarField> = [(0.5, 1.0), (1.0, 1.0), (2.0, 0.5)]
        .iter()
        .map(|&(c, ts)| discrete_barenblatt(&grid, c, ts, 0.0))
        .collect();
    let t0 = 0.05;
    let mut fits = Vec::new();
    let mut pass = true;
    for rho in [0.05, 0.1, 0.2] {
        for x0 in [0.0, 0.25] {
            let cases: Vec<HarnackCase> = family
                .iter()
                .map(|u| HarnackCase {
                    u: u.clone(),
                    x0: vec![x0],
                    rho,
                    t0,
                })
                .collect();
            let fit = fit_constants(&cases, 2.0).unwrap();
            pass &= fit.feasible;
            fits.push((rho, x0, fit.c1, fit.c2));
        }
    }
    let index = |c: Option<f64>| c.map(|c| (2.0 * c.log2()).round() as i64);
    let spread = |pick: &dyn Fn(&(f64, f64, Option<f64>, Option<f64>)) -> Option<i64>| {
        let v: Vec<i64> = fits.iter().filter_map(pick).collect();
        v.iter().max().zip(v.iter().min()).map_or(i64::MAX, |(a, b)| a - b)
    };
    let c1_spread = spread(&|f| index(f.2));
    let c2_spread = spread(&|f| index(f.3));
    pass &= c1_spread <= 1 && c2_spread <= 1;
    let shown: Vec<String> = fits
        .iter()
        .map(|(r, x, a, b)| format!("ρ={r},x0={x}:({:.4},{:.4})", a.unwrap_or(f64::NAN), b.unwrap_or(f64::NAN)))
        .collect();
    report(
        9,
        "weak Harnack fit",
        pass,
        &format!("{} ; lattice spread C1 {c1_spread}, C2 {c2_spread}", shown.join(" ")),
    );
    assert!(pass);
}

#[test]
fn criterion_10_determinism() {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let cases = corpus();
    for d in &dirs {
        for cfg in &cases {
            solve_to_dir(cfg, &d.path().join(&cfg.name)).unwrap();
        }
    }
    let mut files = 0;
    let mut mismatched = Vec::new();
    for cfg in &cases {
        for f in ["field.csv", "meta.json", "trace.csv", "report.json"] {
            let a = std::fs::read(dirs[0].path().join(&cfg.name).join(f)).unwrap();
            let b = std::fs::read(dirs[1].path().join(&cfg.name).join(f)).unwrap();
            files += 1;
            if a != b {
                mismatched.push(format!("{}/{f}", cfg.name));
            }
        }
    }
    let pass = mismatched.is_empty();
    report(
        10,
        "determinism",
        pass,
        &format!("{files} files compared, mismatches {mismatched:?}"),
    );
    assert!(pass);
}
