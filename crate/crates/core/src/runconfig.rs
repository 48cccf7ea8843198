//! JSON run configurations, obstacle construction from them, and the output
//! directory layout `{field.csv, meta.json, trace.csv, report.json}`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::{EnumerationOrder, GridSpec, SpaceTimeBox, SpaceTimeGrid};
use crate::obstacle::{solve_obstacle_lsc, IterationTrace, LscOutcome, LscStep, Obstacle, ObstacleConfig, Regularity};
use crate::pme::{barenblatt_field, bump_profile, solve_bvp, Barenblatt, BvpSpec, SolverConfig};

/// Embedded in every JSON output.
pub const SCHEMA_VERSION: &str = "porous-obstacle/1";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BarenblattMode {
    /// The closed-form profile sampled at the nodes.
    Sampled,
    /// The discrete solution with the sampled profile as boundary data.
    #[default]
    Discrete,
}

/// Source of nodal data: obstacles for `solve-obstacle`, boundary data for
/// `solve-bvp`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSpec {
    Constant {
        value: f64,
    },
    Barenblatt {
        #[serde(rename = "C")]
        c: f64,
        t_shift: f64,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        center: Vec<f64>,
        #[serde(default)]
        mode: BarenblattMode,
    },
    /// `value` on `{lo < x < hi, t > t1}`, zero elsewhere.
    Indicator {
        value: f64,
        t1: f64,
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
    /// `height · Π b((x_i − c_i)/r) · b((t − t_c)/r_t)` with `b(s) = ((1 − s²)₊)³`.
    Bump {
        height: f64,
        center: Vec<f64>,
        radius: f64,
        t_center: f64,
        t_radius: f64,
    },
    /// Field CSV; relative paths resolve against the config file.
    Table {
        path: String,
    },
}

impl DataSpec {
    fn default_regularity(&self) -> Regularity {
        match self {
            DataSpec::Indicator { .. } => Regularity::LowerSemicontinuous,
            _ => Regularity::Continuous,
        }
    }

    fn check_dim(&self, field: &str, v: &[f64], dim: usize) -> Result<()> {
        if v.len() != dim {
            return Err(Error::config(field, format!("expected {dim} coordinates, got {}", v.len())));
        }
        Ok(())
    }

    /// Samples the data on `grid`; `m` and `solver` are used by the
    /// discrete Barenblatt.
    pub fn sample(&self, grid: &SpaceTimeGrid, solver: &SolverConfig, base_dir: Option<&Path>) -> Result<ScalarField> {
        let dim = grid.dim();
        let nonneg = |name: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::config(name, format!("must be finite and nonnegative, got {v}")))
            }
        };
        match self {
            DataSpec::Constant { value } => {
                nonneg("obstacle.value", *value)?;
                ScalarField::constant(grid, *value)
            }
            DataSpec::Barenblatt { c, t_shift, center, mode } => {
                let center = if center.is_empty() { vec![0.0; dim] } else { center.clone() };
                self.check_dim("obstacle.center", &center, dim)?;
                if !(*c > 0.0) {
                    return Err(Error::config("obstacle.C", "must be positive"));
                }
                if !(*t_shift > 0.0) {
                    return Err(Error::config("obstacle.t_shift", "must be positive"));
                }
                let profile = Barenblatt {
                    m: solver.m,
                    n: dim,
                    c: *c,
                    center,
                };
                let sampled = barenblatt_field(grid, &profile, *t_shift)?;
                match mode {
                    BarenblattMode::Sampled => Ok(sampled),
                    BarenblattMode::Discrete => solve_bvp(
                        &BvpSpec {
                            bx: SpaceTimeBox::full(grid),
                            data: sampled,
                        },
                        solver,
                    ),
                }
            }
            DataSpec::Indicator { value, t1, lo, hi } => {
                nonneg("obstacle.value", *value)?;
                self.check_dim("obstacle.lo", lo, dim)?;
                self.check_dim("obstacle.hi", hi, dim)?;
                ScalarField::from_fn(grid, |x, t| {
                    let inside = t > *t1 && (0..dim).all(|a| x[a] > lo[a] && x[a] < hi[a]);
                    if inside {
                        *value
                    } else {
                        0.0
                    }
                })
            }
            DataSpec::Bump {
                height,
                center,
                radius,
                t_center,
                t_radius,
            } => {
                nonneg("obstacle.height", *height)?;
                self.check_dim("obstacle.center", center, dim)?;
                if !(*radius > 0.0 && *t_radius > 0.0) {
                    return Err(Error::config("obstacle.radius", "radii must be positive"));
                }
                ScalarField::from_fn(grid, |x, t| {
                    let space: f64 = (0..dim).map(|a| bump_profile((x[a] - center[a]) / radius).0).product();
                    height * space * bump_profile((t - t_center) / t_radius).0
                })
            }
            DataSpec::Table { path } => {
                let p = match base_dir {
                    Some(d) if Path::new(path).is_relative() => d.join(path),
                    _ => PathBuf::from(path),
                };
                let text = std::fs::read_to_string(&p)
                    .map_err(|e| Error::config("obstacle.path", format!("{}: {e}", p.display())))?;
                let f = ScalarField::from_csv(&text)?;
                if f.grid().to_spec() != grid.to_spec() {
                    return Err(Error::config("obstacle.path", "table grid differs from the configured grid"));
                }
                Ok(f)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObstacleEntry {
    #[serde(flatten)]
    pub data: DataSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regularity: Option<Regularity>,
}

/// One obstacle problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub name: String,
    pub grid: GridSpec,
    pub m: f64,
    pub obstacle: ObstacleEntry,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_level: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_sweeps: Option<usize>,
    #[serde(default)]
    pub order: EnumerationOrder,
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::config("config", format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::config("config", format!("{}: {e}", path.display())))
}

/// Hex SHA-256 of the compact JSON serialization.
pub fn config_hash<T: Serialize>(cfg: &T) -> Result<String> {
    Ok(hex::encode(Sha256::digest(serde_json::to_vec(cfg)?)))
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::config("config", e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg: RunConfig = read_json(path)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf);
        Ok(cfg)
    }

    /// Every `*.json` file of a directory, sorted by file name.
    pub fn load_dir(dir: &Path) -> Result<Vec<Self>> {
        let entries = std::fs::read_dir(dir).map_err(|e| Error::config("cases", format!("{}: {e}", dir.display())))?;
        let mut paths: Vec<PathBuf> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        paths.iter().map(|p| RunConfig::load(p)).collect()
    }

    pub fn hash(&self) -> Result<String> {
        config_hash(self)
    }

    pub fn grid(&self) -> Result<SpaceTimeGrid> {
        SpaceTimeGrid::from_spec(&self.grid)
    }

    pub fn obstacle_config(&self) -> ObstacleConfig {
        let mut c = ObstacleConfig::new(self.m);
        c.stop_tol = self.stop_tol;
        c.max_level = self.max_level;
        if let Some(s) = self.max_sweeps {
            c.max_sweeps = s;
        }
        c.order = self.order;
        c
    }

    pub fn regularity(&self) -> Regularity {
        self.obstacle.regularity.unwrap_or_else(|| self.obstacle.data.default_regularity())
    }

    pub fn build_obstacle(&self) -> Result<Obstacle> {
        let cfg = self.obstacle_config();
        cfg.validate()?;
        let grid = self.grid()?;
        let field = self.obstacle.data.sample(&grid, &cfg.solver, self.base_dir.as_deref())?;
        Ok(Obstacle::new(field, self.regularity()))
    }
}

/// Result of one configured obstacle problem.
#[derive(Clone, Debug)]
pub struct CaseRun {
    pub u: ScalarField,
    pub obstacle: Obstacle,
    /// One trace per approximation stage (a single one for continuous obstacles).
    pub traces: Vec<IterationTrace>,
    pub steps: Vec<LscStep>,
    pub stop_tol: f64,
}

impl CaseRun {
    pub fn sweeps(&self) -> usize {
        self.traces.iter().map(IterationTrace::sweep_count).sum()
    }

    pub fn box_solves(&self) -> usize {
        self.traces.iter().map(IterationTrace::box_solves).sum()
    }

    /// `u ≡ c, sweeps=n` for constant outputs, otherwise the range of `u`.
    pub fn summary(&self, name: &str) -> String {
        let (lo, hi) = (self.u.min(), self.u.sup());
        if lo == hi {
            format!("u ≡ {hi}, sweeps={}", self.sweeps())
        } else {
            format!(
                "{name}: u in [{lo:.6e}, {hi:.6e}], sweeps={}, box solves={}, stages={}",
                self.sweeps(),
                self.box_solves(),
                self.traces.len()
            )
        }
    }

    /// Trace CSV with a leading `stage` column.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("stage,sweep,level,box_id,box_level,increment,newton_iterations,max_residual\n");
        for (stage, tr) in self.traces.iter().enumerate() {
            for line in tr.to_csv().lines().skip(1) {
                let _ = writeln!(out, "{stage},{line}");
            }
        }
        out
    }
}

/// Dispatches on the regularity tag.
pub fn solve_with(psi: &Obstacle, cfg: &ObstacleConfig) -> Result<LscOutcome> {
    solve_obstacle_lsc(psi, cfg)
}

pub fn run_case(cfg: &RunConfig) -> Result<CaseRun> {
    let psi = cfg.build_obstacle()?;
    let ocfg = cfg.obstacle_config();
    let out = solve_with(&psi, &ocfg)?;
    Ok(CaseRun {
        u: out.u,
        stop_tol: ocfg.stop_tol(psi.bound()),
        obstacle: psi,
        traces: out.steps.iter().map(|s| s.trace.clone()).collect(),
        steps: out.steps,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct StageSummary {
    pub k: Option<f64>,
    pub obstacle_gap: f64,
    pub change: Option<f64>,
    pub sweeps: usize,
    pub box_solves: usize,
    pub stop_reason: crate::obstacle::StopReason,
}

/// Summary of a solved case with its construction invariants.
#[derive(Clone, Debug, Serialize)]
pub struct CaseReport {
    pub name: String,
    pub summary: String,
    pub regularity: Regularity,
    pub stop_tol: f64,
    pub sweeps: usize,
    pub box_solves: usize,
    pub stages: Vec<StageSummary>,
    pub sup_u: f64,
    pub obstacle_bound: f64,
    /// `min (u − ψ)`.
    pub min_gap: f64,
    pub increments_nonnegative: bool,
    pub dominates_obstacle: bool,
    /// `sup u ≤ sup ψ + 10⁻⁶`.
    pub sup_bounded: bool,
    pub pass: bool,
}

impl CaseReport {
    pub fn new(cfg: &RunConfig, run: &CaseRun) -> Result<Self> {
        let min_gap = run.u.min_difference(run.obstacle.field())?.0;
        let increments_nonnegative = run.traces.iter().all(IterationTrace::increments_nonnegative);
        let dominates_obstacle = min_gap >= 0.0;
        let sup_bounded = run.u.sup() <= run.obstacle.bound() + 1e-6;
        Ok(CaseReport {
            name: cfg.name.clone(),
            summary: run.summary(&cfg.name),
            regularity: run.obstacle.regularity(),
            stop_tol: run.stop_tol,
            sweeps: run.sweeps(),
            box_solves: run.box_solves(),
            stages: run
                .steps
                .iter()
                .map(|s| StageSummary {
                    k: s.k,
                    obstacle_gap: s.obstacle_gap,
                    change: s.change,
                    sweeps: s.trace.sweep_count(),
                    box_solves: s.trace.box_solves(),
                    stop_reason: s.trace.stop_reason.clone(),
                })
                .collect(),
            sup_u: run.u.sup(),
            obstacle_bound: run.obstacle.bound(),
            min_gap,
            increments_nonnegative,
            dominates_obstacle,
            sup_bounded,
            pass: increments_nonnegative && dominates_obstacle && sup_bounded,
        })
    }
}

/// Solves a configured case and writes its output directory.
pub fn solve_to_dir(cfg: &RunConfig, dir: &Path) -> Result<(CaseRun, CaseReport)> {
    let run = run_case(cfg)?;
    let report = CaseReport::new(cfg, &run)?;
    write_outputs(
        dir,
        &cfg.hash()?,
        &serde_json::to_value(cfg)?,
        &run.u,
        Some(&run.trace_csv()),
        serde_json::to_value(&report)?,
    )?;
    Ok((run, report))
}

/// Writes `field.csv`, `meta.json`, optionally `trace.csv`, and `report.json`
/// (the given report plus the header fields).
pub fn write_outputs(
    dir: &Path,
    hash: &str,
    config: &Value,
    field: &ScalarField,
    trace_csv: Option<&str>,
    report: Value,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("field.csv"), field.to_csv())?;
    let meta = json!({
        "schema_version": SCHEMA_VERSION,
        "config_hash": hash,
        "grid": field.grid().to_spec(),
        "config": config,
    });
    write_json(&dir.join("meta.json"), &meta)?;
    if let Some(t) = trace_csv {
        std::fs::write(dir.join("trace.csv"), t)?;
    }
    let mut full = json!({
        "schema_version": SCHEMA_VERSION,
        "config_hash": hash,
    });
    if let (Value::Object(head), Value::Object(body)) = (&mut full, report) {
        head.extend(body);
    }
    write_json(&dir.join("report.json"), &full)
}

pub fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Boundary value problem on a box of the configured grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BvpConfig {
    pub name: String,
    pub grid: GridSpec,
    pub m: f64,
    pub data: DataSpec,
    /// The whole cylinder when absent.
    #[serde(default, rename = "box", skip_serializing_if = "Option::is_none")]
    pub bx: Option<SpaceTimeBox>,
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

impl BvpConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg: BvpConfig = read_json(path)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf);
        Ok(cfg)
    }

    pub fn solve(&self) -> Result<(ScalarField, SpaceTimeBox)> {
        let solver = SolverConfig::new(self.m);
        solver.validate()?;
        let grid = SpaceTimeGrid::from_spec(&self.grid)?;
        let data = self.data.sample(&grid, &solver, self.base_dir.as_deref())?;
        let bx = self.bx.clone().unwrap_or_else(|| SpaceTimeBox::full(&grid));
        bx.validate(&grid)?;
        let u = solve_bvp(&BvpSpec { bx: bx.clone(), data }, &solver)?;
        Ok((u, bx))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const CONSTANT: &str = r#"{
        "name": "constant",
        "grid": {"domain": [[0, 1]], "n_space": [21], "n_time": 21, "T": 1},
        "m": 2,
        "obstacle": {"type": "constant", "value": 3}
    }"#;

    #[test]
    fn constant_case_summary() {
        let cfg = RunConfig::from_json(CONSTANT).unwrap();
        let run = run_case(&cfg).unwrap();
        assert_eq!(run.summary(&cfg.name), "u ≡ 3, sweeps=1");
        assert_eq!(run.trace_csv().lines().count(), 1 + run.box_solves());
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = RunConfig::from_json(CONSTANT).unwrap();
        let mut b = a.clone();
        assert_eq!(a.hash().unwrap(), b.hash().unwrap());
        assert_eq!(a.hash().unwrap().len(), 64);
        b.m = 3.0;
        assert_ne!(a.hash().unwrap(), b.hash().unwrap());
    }

    #[test]
    fn indicator_defaults_to_lsc() {
        let text = CONSTANT.replace(
            r#""type": "constant", "value": 3"#,
            r#""type": "indicator", "value": 1, "t1": 0.5, "lo": [0.4], "hi": [0.6]"#,
        );
        let cfg = RunConfig::from_json(&text).unwrap();
        assert_eq!(cfg.regularity(), Regularity::LowerSemicontinuous);
        let psi = cfg.build_obstacle().unwrap();
        assert_eq!(psi.field().get(10, 20), 1.0);
        assert_eq!(psi.field().get(10, 10), 0.0);
        assert_eq!(psi.field().get(8, 20), 0.0);
    }

    #[test]
    fn bad_inputs_are_configuration_errors() {
        assert!(RunConfig::from_json("{").unwrap_err().is_configuration());
        let unknown = CONSTANT.replace(r#""m": 2,"#, r#""m": 2, "colour": 1,"#);
        assert!(RunConfig::from_json(&unknown).unwrap_err().is_configuration());
        let neg = CONSTANT.replace(r#""value": 3"#, r#""value": -3"#);
        assert!(RunConfig::from_json(&neg).unwrap().build_obstacle().unwrap_err().is_configuration());
        let m = CONSTANT.replace(r#""m": 2"#, r#""m": 1"#);
        assert!(RunConfig::from_json(&m).unwrap().build_obstacle().unwrap_err().is_configuration());
    }
}
