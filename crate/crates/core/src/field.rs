use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::grid::SpaceTimeGrid;

/// Non-negative grid function `u(x_i, t_k)`.
///
/// Values are stored level by level, each level a flattened spatial slice.
/// The supremum is cached and kept current by every mutating method.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: SpaceTimeGrid,
    values: Vec<f64>,
    sup: f64,
}

fn check_value(v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("field values must be finite and non-negative, got {v}")))
    }
}

impl ScalarField {
    pub fn constant(grid: &SpaceTimeGrid, c: f64) -> Result<Self> {
        check_value(c)?;
        Ok(ScalarField {
            grid: grid.clone(),
            values: vec![c; grid.n_nodes()],
            sup: c,
        })
    }

    pub fn zeros(grid: &SpaceTimeGrid) -> Self {
        ScalarField {
            grid: grid.clone(),
            values: vec![0.0; grid.n_nodes()],
            sup: 0.0,
        }
    }

    pub fn from_values(grid: &SpaceTimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_nodes() {
            return Err(Error::Geometry(format!(
                "expected {} values, got {}",
                grid.n_nodes(),
                values.len()
            )));
        }
        let mut sup: f64 = 0.0;
        for &v in &values {
            check_value(v)?;
            sup = sup.max(v);
        }
        Ok(ScalarField {
            grid: grid.clone(),
            values,
            sup,
        })
    }

    /// Samples `f(x, t)` at every node.
    pub fn from_fn(grid: &SpaceTimeGrid, f: impl Fn(&[f64], f64) -> f64) -> Result<Self> {
        let ns = grid.n_nodes_space();
        let dim = grid.dim();
        let mut values = Vec::with_capacity(grid.n_nodes());
        for k in 0..grid.n_time() {
            let t = grid.time(k);
            for s in 0..ns {
                let x = grid.position(s);
                values.push(f(&x[..dim], t));
            }
        }
        ScalarField::from_values(grid, values)
    }

    pub fn grid(&self) -> &SpaceTimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn sup(&self) -> f64 {
        self.sup
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn get(&self, s: usize, k: usize) -> f64 {
        self.values[k * self.grid.n_nodes_space() + s]
    }

    pub fn slice(&self, k: usize) -> &[f64] {
        let ns = self.grid.n_nodes_space();
        &self.values[k * ns..(k + 1) * ns]
    }

    pub fn set(&mut self, s: usize, k: usize, v: f64) -> Result<()> {
        check_value(v)?;
        let idx = k * self.grid.n_nodes_space() + s;
        let old = std::mem::replace(&mut self.values[idx], v);
        if v >= self.sup {
            self.sup = v;
        } else if old == self.sup {
            self.recompute_sup();
        }
        Ok(())
    }

    /// Raises node values in place; used by the construction where the new
    /// value is a maximum and therefore never violates the invariants.
    pub(crate) fn raise(&mut self, s: usize, k: usize, v: f64) {
        let idx = k * self.grid.n_nodes_space() + s;
        if v > self.values[idx] {
            self.values[idx] = v;
            if v > self.sup {
                self.sup = v;
            }
        }
    }

    /// Overwrites a node with a value already known to be finite and non-negative.
    pub(crate) fn put(&mut self, s: usize, k: usize, v: f64) {
        debug_assert!(v.is_finite() && v >= 0.0);
        let idx = k * self.grid.n_nodes_space() + s;
        self.values[idx] = v;
    }

    pub(crate) fn recompute_sup(&mut self) {
        self.sup = self.values.iter().cloned().fold(0.0, f64::max);
    }

    /// Nodewise map; the result must stay finite and non-negative.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<ScalarField> {
        ScalarField::from_values(&self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Result<ScalarField> {
        self.same_grid(other)?;
        ScalarField::from_values(
            &self.grid,
            self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        )
    }

    pub fn max_with(&self, other: &ScalarField) -> Result<ScalarField> {
        self.zip_map(other, f64::max)
    }

    pub fn same_grid(&self, other: &ScalarField) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::Geometry("fields live on different grids".into()))
        }
    }

    /// `max |self - other|` over all nodes.
    pub fn sup_distance(&self, other: &ScalarField) -> Result<f64> {
        self.same_grid(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// `min (self - other)` over all nodes with its location `(s, k)`.
    pub fn min_difference(&self, other: &ScalarField) -> Result<(f64, usize, usize)> {
        self.same_grid(other)?;
        let ns = self.grid.n_nodes_space();
        let mut best = (f64::INFINITY, 0, 0);
        for (idx, (a, b)) in self.values.iter().zip(&other.values).enumerate() {
            let d = a - b;
            if d < best.0 {
                best = (d, idx % ns, idx / ns);
            }
        }
        Ok(best)
    }

    /// CSV with header `x[,y],t,u`, one row per node, levels in order.
    /// Numbers use the shortest representation that round-trips.
    pub fn to_csv(&self) -> String {
        let dim = self.grid.dim();
        let mut out = String::with_capacity(self.values.len() * 24);
        out.push_str(if dim == 1 { "x,t,u\n" } else { "x,y,t,u\n" });
        let ns = self.grid.n_nodes_space();
        for k in 0..self.grid.n_time() {
            let t = self.grid.time(k);
            for s in 0..ns {
                let x = self.grid.position(s);
                for xa in &x[..dim] {
                    let _ = write!(out, "{xa},");
                }
                let _ = writeln!(out, "{t},{}", self.values[k * ns + s]);
            }
        }
        out
    }

    /// Parses the format written by [`ScalarField::to_csv`], inferring the
    /// grid from the distinct coordinates.
    pub fn from_csv(text: &str) -> Result<ScalarField> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("empty field CSV".into()))?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        let dim = match cols.as_slice() {
            ["x", "t", "u"] => 1,
            ["x", "y", "t", "u"] => 2,
            _ => return Err(Error::Parse(format!("unexpected field CSV header `{header}`"))),
        };
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let row: std::result::Result<Vec<f64>, _> = line.split(',').map(|c| c.trim().parse::<f64>()).collect();
            let row = row.map_err(|e| Error::Parse(format!("row {}: {e}", lineno + 2)))?;
            if row.len() != dim + 2 {
                return Err(Error::Parse(format!("row {} has {} columns", lineno + 2, row.len())));
            }
            rows.push(row);
        }
        let distinct = |col: usize| -> Vec<f64> {
            let mut v: Vec<f64> = rows.iter().map(|r| r[col]).collect();
            v.sort_by(|a, b| a.partial_cmp(b).unwrap());
            v.dedup();
            v
        };
        let mut domain = Vec::new();
        let mut n_space = Vec::new();
        for axis in 0..dim {
            let xs = distinct(axis);
            if xs.len() < 2 {
                return Err(Error::Parse(format!("axis {axis} has fewer than two coordinates")));
            }
            domain.push((xs[0], xs[xs.len() - 1]));
            n_space.push(xs.len());
        }
        let ts = distinct(dim);
        if ts.len() < 2 || ts[0] != 0.0 {
            return Err(Error::Parse("time column must start at 0 with at least two levels".into()));
        }
        let grid = SpaceTimeGrid::new(&domain, &n_space, ts.len(), ts[ts.len() - 1])?;
        if rows.len() != grid.n_nodes() {
            return Err(Error::Parse(format!("expected {} rows, found {}", grid.n_nodes(), rows.len())));
        }
        let values = rows.iter().map(|r| r[dim + 1]).collect();
        ScalarField::from_values(&grid, values)
    }
}
