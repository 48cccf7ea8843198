//! Space-time grids, boxes ending at the final time, parabolic boundaries and
//! the dyadic box family used by the alternating construction.

use std::collections::HashSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Serializable grid description `{domain, n_space, n_time, T}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub domain: Vec<[f64; 2]>,
    pub n_space: Vec<usize>,
    pub n_time: usize,
    #[serde(rename = "T")]
    pub t_final: f64,
}

/// Uniform tensor grid over `Ω × [0, T]` with `Ω` an axis-aligned box in one
/// or two dimensions.
///
/// Spatial nodes are flattened with axis 0 varying fastest. Coordinates are
/// recomputed from indices on every query so they never accumulate rounding.
#[derive(Clone, Debug, PartialEq)]
pub struct SpaceTimeGrid {
    domain: Vec<(f64, f64)>,
    n_space: Vec<usize>,
    n_time: usize,
    t_final: f64,
    h: Vec<f64>,
    tau: f64,
}

impl SpaceTimeGrid {
    pub fn new(domain: &[(f64, f64)], n_space: &[usize], n_time: usize, t_final: f64) -> Result<Self> {
        build_grid(domain, n_space, n_time, t_final)
    }

    pub fn from_spec(spec: &GridSpec) -> Result<Self> {
        let domain: Vec<(f64, f64)> = spec.domain.iter().map(|d| (d[0], d[1])).collect();
        build_grid(&domain, &spec.n_space, spec.n_time, spec.t_final)
    }

    pub fn to_spec(&self) -> GridSpec {
        GridSpec {
            domain: self.domain.iter().map(|&(a, b)| [a, b]).collect(),
            n_space: self.n_space.clone(),
            n_time: self.n_time,
            t_final: self.t_final,
        }
    }

    pub fn dim(&self) -> usize {
        self.n_space.len()
    }

    pub fn domain(&self, axis: usize) -> (f64, f64) {
        self.domain[axis]
    }

    pub fn n_space(&self, axis: usize) -> usize {
        self.n_space[axis]
    }

    pub fn n_space_all(&self) -> &[usize] {
        &self.n_space
    }

    pub fn n_time(&self) -> usize {
        self.n_time
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn h(&self, axis: usize) -> f64 {
        self.h[axis]
    }

    pub fn h_max(&self) -> f64 {
        self.h.iter().cloned().fold(0.0, f64::max)
    }

    pub fn h_min(&self) -> f64 {
        self.h.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn last_level(&self) -> usize {
        self.n_time - 1
    }

    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        let (a, b) = self.domain[axis];
        a + (b - a) * (i as f64 / (self.n_space[axis] - 1) as f64)
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t_final * (k as f64 / (self.n_time - 1) as f64)
    }

    /// Number of spatial nodes.
    pub fn n_nodes_space(&self) -> usize {
        self.n_space.iter().product()
    }

    /// Total node count, spatial nodes times time levels.
    pub fn n_nodes(&self) -> usize {
        self.n_nodes_space() * self.n_time
    }

    /// Stride of `axis` in the flattened spatial index.
    pub fn stride(&self, axis: usize) -> usize {
        self.n_space[..axis].iter().product()
    }

    pub fn flat(&self, idx: &[usize]) -> usize {
        idx.iter()
            .enumerate()
            .map(|(axis, &i)| i * self.stride(axis))
            .sum()
    }

    pub fn unflat(&self, s: usize) -> [usize; 2] {
        let mut out = [0; 2];
        let mut rest = s;
        for (axis, &n) in self.n_space.iter().enumerate() {
            out[axis] = rest % n;
            rest /= n;
        }
        out
    }

    /// Physical coordinates of spatial node `s` (unused axes are zero).
    pub fn position(&self, s: usize) -> [f64; 2] {
        let idx = self.unflat(s);
        let mut x = [0.0; 2];
        for axis in 0..self.dim() {
            x[axis] = self.coord(axis, idx[axis]);
        }
        x
    }

    /// True when spatial node `s` lies on `∂Ω`.
    pub fn on_wall(&self, s: usize) -> bool {
        let idx = self.unflat(s);
        (0..self.dim()).any(|a| idx[a] == 0 || idx[a] == self.n_space[a] - 1)
    }

    /// Lebesgue measure of `Ω_T`.
    pub fn measure(&self) -> f64 {
        self.domain.iter().map(|(a, b)| b - a).product::<f64>() * self.t_final
    }

    /// Index of the time level closest to `t`.
    pub fn nearest_level(&self, t: f64) -> usize {
        let k = (t / self.tau).round();
        k.clamp(0.0, (self.n_time - 1) as f64) as usize
    }
}

/// Validating constructor for [`SpaceTimeGrid`].
pub fn build_grid(domain: &[(f64, f64)], n_space: &[usize], n_time: usize, t_final: f64) -> Result<SpaceTimeGrid> {
    if domain.is_empty() || domain.len() > 2 {
        return Err(Error::config("domain", "spatial dimension must be 1 or 2"));
    }
    if n_space.len() != domain.len() {
        return Err(Error::config("n_space", "one node count per spatial axis is required"));
    }
    for &(a, b) in domain {
        if !(a.is_finite() && b.is_finite() && b > a) {
            return Err(Error::config("domain", format!("degenerate interval [{a}, {b}]")));
        }
    }
    if n_space.iter().any(|&n| n < 3) {
        return Err(Error::config("n_space", "insufficient spatial resolution (need at least 3 nodes per axis)"));
    }
    if n_time < 2 {
        return Err(Error::config("n_time", "insufficient time resolution (need at least 2 levels)"));
    }
    if !(t_final.is_finite() && t_final > 0.0) {
        return Err(Error::config("T", "final time must be positive"));
    }
    let h = domain
        .iter()
        .zip(n_space)
        .map(|(&(a, b), &n)| (b - a) / (n - 1) as f64)
        .collect();
    Ok(SpaceTimeGrid {
        domain: domain.to_vec(),
        n_space: n_space.to_vec(),
        n_time,
        t_final,
        h,
        tau: t_final / (n_time - 1) as f64,
    })
}

/// A spatial index box `[lo, hi]` (closed) times the time levels
/// `t_start..=last`. The open box `(lo, hi) × (t_start, T]` carries unknowns;
/// the rest of its closure is parabolic boundary.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpaceTimeBox {
    pub lo: Vec<usize>,
    pub hi: Vec<usize>,
    pub t_start: usize,
}

impl SpaceTimeBox {
    pub fn new(lo: Vec<usize>, hi: Vec<usize>, t_start: usize) -> Self {
        SpaceTimeBox { lo, hi, t_start }
    }

    /// The whole cylinder: all of `Ω` from `t = 0`.
    pub fn full(grid: &SpaceTimeGrid) -> Self {
        SpaceTimeBox {
            lo: vec![0; grid.dim()],
            hi: grid.n_space_all().iter().map(|n| n - 1).collect(),
            t_start: 0,
        }
    }

    pub fn validate(&self, grid: &SpaceTimeGrid) -> Result<()> {
        if self.lo.len() != grid.dim() || self.hi.len() != grid.dim() {
            return Err(Error::Geometry("box dimension does not match grid".into()));
        }
        for axis in 0..grid.dim() {
            if self.hi[axis] >= grid.n_space(axis) {
                return Err(Error::Geometry(format!(
                    "box exceeds grid on axis {axis}: hi {} >= {}",
                    self.hi[axis],
                    grid.n_space(axis)
                )));
            }
            if self.hi[axis] < self.lo[axis] + 2 {
                return Err(Error::Geometry(format!("box has no interior node on axis {axis}")));
            }
        }
        if self.t_start >= grid.last_level() {
            return Err(Error::Geometry("box starts at or after the final time level".into()));
        }
        Ok(())
    }

    /// True when the closed spatial box meets `∂Ω`.
    pub fn touches_boundary(&self, grid: &SpaceTimeGrid) -> bool {
        (0..grid.dim()).any(|a| self.lo[a] == 0 || self.hi[a] == grid.n_space(a) - 1)
    }

    pub fn contains_spatial_interior(&self, idx: &[usize]) -> bool {
        self.lo
            .iter()
            .zip(&self.hi)
            .zip(idx)
            .all(|((&lo, &hi), &i)| lo < i && i < hi)
    }

    /// True when node `(idx, k)` carries an unknown of this box.
    pub fn contains_interior(&self, idx: &[usize], k: usize) -> bool {
        k > self.t_start && self.contains_spatial_interior(idx)
    }

    pub fn contains_closure(&self, idx: &[usize], k: usize) -> bool {
        k >= self.t_start
            && self
                .lo
                .iter()
                .zip(&self.hi)
                .zip(idx)
                .all(|((&lo, &hi), &i)| lo <= i && i <= hi)
    }

    /// Flat spatial indices of the closed spatial box, axis 0 fastest.
    pub fn closure_nodes(&self, grid: &SpaceTimeGrid) -> Vec<usize> {
        let mut out = Vec::new();
        match grid.dim() {
            1 => out.extend(self.lo[0]..=self.hi[0]),
            _ => {
                for j in self.lo[1]..=self.hi[1] {
                    for i in self.lo[0]..=self.hi[0] {
                        out.push(grid.flat(&[i, j]));
                    }
                }
            }
        }
        out
    }

    /// Flat spatial indices of the open spatial box, axis 0 fastest.
    pub fn interior_nodes(&self, grid: &SpaceTimeGrid) -> Vec<usize> {
        let mut out = Vec::new();
        match grid.dim() {
            1 => out.extend(self.lo[0] + 1..self.hi[0]),
            _ => {
                for j in self.lo[1] + 1..self.hi[1] {
                    for i in self.lo[0] + 1..self.hi[0] {
                        out.push(grid.flat(&[i, j]));
                    }
                }
            }
        }
        out
    }
}

/// `∂_p Q`: the lateral walls strictly after the start level, plus the whole
/// closed spatial box at the start level. Entries are `(flat space index, time level)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ParabolicBoundary {
    pub lateral: Vec<(usize, usize)>,
    pub initial: Vec<(usize, usize)>,
}

impl ParabolicBoundary {
    pub fn len(&self) -> usize {
        self.lateral.len() + self.initial.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = &(usize, usize)> {
        self.initial.iter().chain(self.lateral.iter())
    }
}

pub fn parabolic_boundary(bx: &SpaceTimeBox, grid: &SpaceTimeGrid) -> Result<ParabolicBoundary> {
    bx.validate(grid)?;
    let closure = bx.closure_nodes(grid);
    let initial = closure.iter().map(|&s| (s, bx.t_start)).collect();
    let walls: Vec<usize> = closure
        .iter()
        .copied()
        .filter(|&s| !bx.contains_spatial_interior(&grid.unflat(s)[..grid.dim()]))
        .collect();
    let mut lateral = Vec::with_capacity(walls.len() * (grid.last_level() - bx.t_start));
    for k in bx.t_start + 1..grid.n_time() {
        lateral.extend(walls.iter().map(|&s| (s, k)));
    }
    Ok(ParabolicBoundary { lateral, initial })
}

/// Visiting order of the boxes within each enumeration level.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnumerationOrder {
    #[default]
    Lexicographic,
    ReversedWithinLevel,
}

/// A box together with the level that introduced it and its position in the
/// lexicographic enumeration (its identity, independent of visiting order).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EnumeratedBox {
    pub level: usize,
    pub id: usize,
    pub bx: SpaceTimeBox,
}

/// Half-shifted dyadic intervals of width `max(2, n_intervals >> level)`
/// covering `[0, n_intervals]`.
fn axis_intervals(n_intervals: usize, level: usize) -> Vec<(usize, usize)> {
    let width = if level >= usize::BITS as usize { 2 } else { (n_intervals >> level).max(2) };
    let shift = (width / 2).max(1);
    let mut out = Vec::new();
    let mut lo = 0;
    while lo + width <= n_intervals {
        out.push((lo, lo + width));
        lo += shift;
    }
    if out.last().map_or(true, |&(_, hi)| hi < n_intervals) {
        out.push((n_intervals - width, n_intervals));
    }
    out
}

fn start_levels(n_time: usize, level: usize) -> Vec<usize> {
    let steps = n_time - 1;
    let count = if level >= 63 { steps } else { (1usize << level).min(steps) };
    (0..count).map(|j| j * steps / count).collect()
}

/// Finest level that can contribute new boxes: every axis has reached width-2
/// boxes and every time level is a start level.
pub fn max_level(grid: &SpaceTimeGrid) -> usize {
    let mut level = 0;
    loop {
        let spatial_done = grid.n_space_all().iter().all(|&n| ((n - 1) >> level) <= 2);
        let time_done = (1usize << level) >= grid.n_time() - 1;
        if spatial_done && time_done {
            return level;
        }
        level += 1;
    }
}

fn candidates(grid: &SpaceTimeGrid, level: usize) -> Vec<SpaceTimeBox> {
    let per_axis: Vec<Vec<(usize, usize)>> = grid
        .n_space_all()
        .iter()
        .map(|&n| axis_intervals(n - 1, level))
        .collect();
    let mut out = Vec::new();
    for t_start in start_levels(grid.n_time(), level) {
        match grid.dim() {
            1 => {
                for &(lo, hi) in &per_axis[0] {
                    out.push(SpaceTimeBox::new(vec![lo], vec![hi], t_start));
                }
            }
            _ => {
                for &(lo0, hi0) in &per_axis[0] {
                    for &(lo1, hi1) in &per_axis[1] {
                        out.push(SpaceTimeBox::new(vec![lo0, lo1], vec![hi0, hi1], t_start));
                    }
                }
            }
        }
    }
    out
}

/// Lexicographic enumeration of all boxes introduced at levels `0..=level`.
///
/// The list at level `L` extends the list at `L - 1`; levels beyond
/// [`max_level`] add nothing.
pub fn enumerate_boxes(grid: &SpaceTimeGrid, level: usize) -> Vec<EnumeratedBox> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for l in 0..=level.min(max_level(grid)) {
        for bx in candidates(grid, l) {
            if seen.insert(bx.clone()) {
                let id = out.len();
                out.push(EnumeratedBox { level: l, id, bx });
            }
        }
    }
    out
}

/// [`enumerate_boxes`] visited in the requested order.
pub fn enumerate_boxes_ordered(grid: &SpaceTimeGrid, level: usize, order: EnumerationOrder) -> Vec<EnumeratedBox> {
    let mut boxes = enumerate_boxes(grid, level);
    if order == EnumerationOrder::ReversedWithinLevel {
        let mut start = 0;
        while start < boxes.len() {
            let l = boxes[start].level;
            let end = start + boxes[start..].iter().take_while(|b| b.level == l).count();
            boxes[start..end].reverse();
            start = end;
        }
    }
    boxes
}

/// Boxes introduced at exactly `level` (empty once granularity exceeds resolution).
pub fn level_boxes(grid: &SpaceTimeGrid, level: usize) -> Vec<EnumeratedBox> {
    enumerate_boxes(grid, level)
        .into_iter()
        .filter(|b| b.level == level)
        .collect()
}

/// CSV rows `level,box_id,lo…,hi…,t_start_index`.
pub fn boxes_to_csv(grid: &SpaceTimeGrid, boxes: &[EnumeratedBox]) -> String {
    let mut out = String::from("level,box_id");
    for a in 0..grid.dim() {
        let _ = write!(out, ",lo_{a}");
    }
    for a in 0..grid.dim() {
        let _ = write!(out, ",hi_{a}");
    }
    out.push_str(",t_start_index\n");
    for b in boxes {
        let _ = write!(out, "{},{}", b.level, b.id);
        for lo in &b.bx.lo {
            let _ = write!(out, ",{lo}");
        }
        for hi in &b.bx.hi {
            let _ = write!(out, ",{hi}");
        }
        let _ = writeln!(out, ",{}", b.bx.t_start);
    }
    out
}
