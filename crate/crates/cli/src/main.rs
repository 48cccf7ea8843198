use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use porous_obstacle::approximation::{build_eps_family, convergence_report};
use porous_obstacle::grid::{boxes_to_csv, enumerate_boxes_ordered, EnumerationOrder, GridSpec};
use porous_obstacle::harnack::{fit_constants, harnack_quantities, HarnackCase};
use porous_obstacle::pme::{barenblatt_field, Barenblatt};
use porous_obstacle::runconfig::{config_hash, solve_to_dir, write_json, write_outputs, BvpConfig, RunConfig};
use porous_obstacle::verify::{run_suite, verdict_table};
use porous_obstacle::{Error, ObstacleConfig, ScalarField, SpaceTimeGrid};

#[derive(Parser)]
#[command(name = "pme-obstacle", version, about = "Porous medium obstacle problems on space-time grids")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a boundary value problem on a box.
    SolveBvp {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Minimal supersolution above a configured obstacle.
    SolveObstacle {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// ε-approximations of a base field and their convergence report.
    ApproxEps {
        #[arg(long)]
        base: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "0.4,0.2,0.1,0.05")]
        schedule: Vec<f64>,
        #[arg(long, default_value_t = 1.0)]
        q: f64,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        #[arg(long)]
        t0: f64,
        #[arg(long, default_value_t = 2.0)]
        m: f64,
        #[arg(long)]
        stop_tol: Option<f64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Weak Harnack quantities, or a fit of the constants with `--fit`.
    CheckHarnack {
        /// Field CSV; repeat for several fields.
        #[arg(long, required = true)]
        field: Vec<PathBuf>,
        /// Centre coordinates separated by commas; repeat for several centres.
        #[arg(long, required = true)]
        x0: Vec<String>,
        #[arg(long, value_delimiter = ',', required = true)]
        rho: Vec<f64>,
        #[arg(long)]
        t0: f64,
        #[arg(long, default_value_t = 2.0)]
        m: f64,
        #[arg(long, default_value_t = 1.0)]
        c1: f64,
        #[arg(long, default_value_t = 1.0)]
        c2: f64,
        #[arg(long)]
        fit: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample the closed-form self-similar solution on a grid.
    Barenblatt {
        #[arg(long)]
        m: f64,
        #[arg(long)]
        n: usize,
        #[arg(long = "C")]
        c: f64,
        /// Grid JSON, inline or as a path.
        #[arg(long)]
        grid: String,
        /// The profile is evaluated at time `t_shift + t`.
        #[arg(long, default_value_t = 1.0)]
        t_shift: f64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run invariant suites over a corpus of run configs.
    Verify {
        #[arg(long, value_delimiter = ',', default_value = "all")]
        suite: Vec<String>,
        /// A run config or a directory of them.
        #[arg(long)]
        cases: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the boxes of the enumeration up to a level as CSV.
    EnumerateBoxes {
        #[arg(long)]
        grid: String,
        #[arg(long)]
        level: usize,
        #[arg(long, value_enum, default_value = "lexicographic")]
        order: Order,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Order {
    Lexicographic,
    Reversed,
}

enum Failure {
    Invariant(String),
    Error(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Error(e)
    }
}

type Outcome = Result<String, Failure>;

fn parse_grid(arg: &str) -> Result<GridSpec, Error> {
    let text = if arg.trim_start().starts_with('{') {
        arg.to_string()
    } else {
        std::fs::read_to_string(arg).map_err(|e| config_error("grid", format!("{arg}: {e}")))?
    };
    serde_json::from_str(&text).map_err(|e| config_error("grid", e.to_string()))
}

fn config_error(field: &str, message: impl Into<String>) -> Error {
    Error::Config {
        field: field.into(),
        message: message.into(),
    }
}

fn read_field(path: &Path) -> Result<ScalarField, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| config_error("field", format!("{}: {e}", path.display())))?;
    ScalarField::from_csv(&text)
}

fn solve_bvp_cmd(config: &Path, out: &Path) -> Outcome {
    let cfg = BvpConfig::load(config)?;
    let (u, bx) = cfg.solve()?;
    let report = json!({
        "name": cfg.name,
        "box": bx,
        "sup_u": u.sup(),
        "min_u": u.min(),
    });
    write_outputs(out, &config_hash(&cfg)?, &serde_json::to_value(&cfg).map_err(Error::from)?, &u, None, report)?;
    Ok(format!("{}: u in [{:.6e}, {:.6e}]", cfg.name, u.min(), u.sup()))
}

fn solve_obstacle_cmd(config: &Path, out: &Path) -> Outcome {
    let cfg = RunConfig::load(config)?;
    let (_, report) = solve_to_dir(&cfg, out)?;
    if report.pass {
        Ok(report.summary)
    } else {
        Err(Failure::Invariant(format!("{}: construction invariants violated", report.summary)))
    }
}

#[allow(clippy::too_many_arguments)]
fn approx_eps_cmd(base: &Path, schedule: &[f64], q: f64, p: f64, t0: f64, m: f64, stop_tol: Option<f64>, out: &Path) -> Outcome {
    let u = read_field(base)?;
    let mut cfg = ObstacleConfig::new(m);
    cfg.stop_tol = stop_tol;
    let family = build_eps_family(&u, schedule, &cfg)?;
    let report = convergence_report(&family, q, p, t0)?;
    let tol = cfg.stop_tol(u.sup());
    let lower_bound = family.schedule.iter().zip(&family.members).all(|(&e, f)| f.min() >= e);
    let mut ordered = true;
    for w in family.members.windows(2) {
        ordered &= w[0].min_difference(&w[1])?.0 >= -2.0 * tol;
    }
    let config = json!({
        "base": base.display().to_string(),
        "schedule": schedule,
        "q": q,
        "p": p,
        "t0": t0,
        "m": m,
        "stop_tol": stop_tol,
    });
    let hash = config_hash(&config)?;
    let mut trace = String::from("stage,sweep,level,box_id,box_level,increment,newton_iterations,max_residual\n");
    for (i, t) in family.traces.iter().enumerate() {
        for line in t.to_csv().lines().skip(1) {
            trace.push_str(&format!("{i},{line}\n"));
        }
    }
    let last = family.members.last().expect("schedule is non-empty");
    let body = json!({
        "rows": report.rows,
        "monotone": report.monotone(),
        "lower_bound": lower_bound,
        "ordered": ordered,
        "stop_tol": tol,
    });
    write_outputs(out, &hash, &config, last, Some(&trace), body)?;
    std::fs::write(out.join("eps_report.csv"), report.to_csv()).map_err(Error::from)?;
    let summary = format!(
        "{} members, monotone={}, lower_bound={}, ordered={}",
        family.members.len(),
        report.monotone(),
        lower_bound,
        ordered
    );
    if lower_bound && ordered {
        Ok(summary)
    } else {
        Err(Failure::Invariant(summary))
    }
}

fn parse_point(s: &str) -> Result<Vec<f64>, Error> {
    s.split(',')
        .map(|c| c.trim().parse::<f64>().map_err(|e| config_error("x0", format!("`{s}`: {e}"))))
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn check_harnack_cmd(
    fields: &[PathBuf],
    x0s: &[String],
    rhos: &[f64],
    t0: f64,
    m: f64,
    c1: f64,
    c2: f64,
    fit: bool,
    out: Option<&Path>,
) -> Outcome {
    let us = fields.iter().map(|p| read_field(p)).collect::<Result<Vec<_>, _>>()?;
    let points = x0s.iter().map(|s| parse_point(s)).collect::<Result<Vec<_>, _>>()?;
    let config = json!({
        "fields": fields.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
        "x0": points,
        "rho": rhos,
        "t0": t0,
        "m": m,
        "c1": c1,
        "c2": c2,
        "fit": fit,
    });
    let (report, summary, pass) = if fit {
        let mut cases = Vec::new();
        for u in &us {
            for x0 in &points {
                for &rho in rhos {
                    cases.push(HarnackCase {
                        u: u.clone(),
                        x0: x0.clone(),
                        rho,
                        t0,
                    });
                }
            }
        }
        let fit = fit_constants(&cases, m)?;
        let summary = match (fit.c1, fit.c2) {
            (Some(a), Some(b)) => format!("fitted C1={a}, C2={b} over {} cases", cases.len()),
            _ => format!("no lattice pair fits; best ratio {:?}", fit.worst_ratio),
        };
        (serde_json::to_value(&fit).map_err(Error::from)?, summary, fit.feasible)
    } else {
        let mut rows = Vec::new();
        let mut all = true;
        for u in &us {
            for x0 in &points {
                for &rho in rhos {
                    let q = harnack_quantities(u, x0, rho, t0, c1, m)?;
                    let holds = q.holds(c2);
                    all &= holds;
                    let mut v = serde_json::to_value(&q).map_err(Error::from)?;
                    v["tail_term"] = json!(q.tail_term());
                    v["required_c2"] = json!(q.required_c2());
                    v["holds"] = json!(holds);
                    rows.push(v);
                }
            }
        }
        let n = rows.len();
        (json!({ "cases": rows }), format!("{n} cases, inequality holds={all}"), all)
    };
    let full = json!({
        "schema_version": porous_obstacle::runconfig::SCHEMA_VERSION,
        "config_hash": config_hash(&config)?,
        "config": config,
        "report": report,
    });
    match out {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(Error::from)?;
            write_json(&dir.join("report.json"), &full)?;
        }
        None => println!("{}", serde_json::to_string_pretty(&full).map_err(Error::from)?),
    }
    if pass {
        Ok(summary)
    } else {
        Err(Failure::Invariant(summary))
    }
}

fn barenblatt_cmd(m: f64, n: usize, c: f64, grid: &str, t_shift: f64, out: &Path) -> Outcome {
    let spec = parse_grid(grid)?;
    let g = SpaceTimeGrid::from_spec(&spec)?;
    let profile = Barenblatt::new(m, n, c)?;
    let u = barenblatt_field(&g, &profile, t_shift)?;
    let config = json!({ "m": m, "n": n, "C": c, "t_shift": t_shift, "grid": spec });
    let report = json!({
        "alpha": profile.alpha(),
        "beta": profile.beta(),
        "k": profile.k(),
        "sup_u": u.sup(),
    });
    write_outputs(out, &config_hash(&config)?, &config, &u, None, report)?;
    Ok(format!("barenblatt m={m} n={n} C={c}: sup u = {}", u.sup()))
}

fn verify_cmd(suites: &[String], cases: &Path, out: Option<&Path>) -> Outcome {
    let configs = if cases.is_dir() {
        RunConfig::load_dir(cases)?
    } else {
        vec![RunConfig::load(cases)?]
    };
    let verdicts = run_suite(&configs, suites)?;
    print!("{}", verdict_table(&verdicts));
    let hashes = configs.iter().map(|c| c.hash()).collect::<Result<Vec<_>, _>>()?;
    let config = json!({ "suites": suites, "case_hashes": hashes });
    let full = json!({
        "schema_version": porous_obstacle::runconfig::SCHEMA_VERSION,
        "config_hash": config_hash(&config)?,
        "config": config,
        "verdicts": verdicts,
    });
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(Error::from)?;
        write_json(&dir.join("report.json"), &full)?;
    }
    let failed = verdicts.iter().filter(|v| !v.pass).count();
    let summary = format!("{} verdicts over {} cases, {failed} failed", verdicts.len(), configs.len());
    if failed == 0 {
        Ok(summary)
    } else {
        Err(Failure::Invariant(summary))
    }
}

fn enumerate_cmd(grid: &str, level: usize, order: Order, out: Option<&Path>) -> Outcome {
    let g = SpaceTimeGrid::from_spec(&parse_grid(grid)?)?;
    let order = match order {
        Order::Lexicographic => EnumerationOrder::Lexicographic,
        Order::Reversed => EnumerationOrder::ReversedWithinLevel,
    };
    let boxes = enumerate_boxes_ordered(&g, level, order);
    let csv = boxes_to_csv(&g, &boxes);
    match out {
        Some(p) => std::fs::write(p, &csv).map_err(Error::from)?,
        None => print!("{csv}"),
    }
    Ok(format!("{} boxes up to level {level}", boxes.len()))
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::SolveBvp { config, out } => solve_bvp_cmd(&config, &out),
        Command::SolveObstacle { config, out } => solve_obstacle_cmd(&config, &out),
        Command::ApproxEps {
            base,
            schedule,
            q,
            p,
            t0,
            m,
            stop_tol,
            out,
        } => approx_eps_cmd(&base, &schedule, q, p, t0, m, stop_tol, &out),
        Command::CheckHarnack {
            field,
            x0,
            rho,
            t0,
            m,
            c1,
            c2,
            fit,
            out,
        } => check_harnack_cmd(&field, &x0, &rho, t0, m, c1, c2, fit, out.as_deref()),
        Command::Barenblatt {
            m,
            n,
            c,
            grid,
            t_shift,
            out,
        } => barenblatt_cmd(m, n, c, &grid, t_shift, &out),
        Command::Verify { suite, cases, out } => verify_cmd(&suite, &cases, out.as_deref()),
        Command::EnumerateBoxes { grid, level, order, out } => enumerate_cmd(&grid, level, order, out.as_deref()),
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Solver { .. } | Error::Convergence { .. } => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(Failure::Invariant(summary)) => {
            println!("{summary}");
            ExitCode::from(1)
        }
        Err(Failure::Error(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
