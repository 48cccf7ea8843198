use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::{SpaceTimeBox, SpaceTimeGrid};

use super::linalg::{pcg, thomas_into};
use super::SolverConfig;

/// Boundary value problem on a box: the data `g` is read on `∂_p` of the box
/// only; every other value of `data` is ignored by the solver.
#[derive(Clone, Debug)]
pub struct BvpSpec {
    pub bx: SpaceTimeBox,
    pub data: ScalarField,
}

#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub values: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// Solution of a box problem, stored on the closed spatial box for every
/// level from the start level to the final one.
#[derive(Clone, Debug)]
pub struct BoxSolution {
    bx: SpaceTimeBox,
    closure: Vec<usize>,
    interior: Vec<usize>,
    levels: Vec<f64>,
    pub newton_iterations: usize,
    pub max_residual: f64,
}

impl BoxSolution {
    pub fn bx(&self) -> &SpaceTimeBox {
        &self.bx
    }

    /// Values on the closed spatial box at level `k`, ordered as
    /// [`SpaceTimeBox::closure_nodes`].
    pub fn level(&self, k: usize) -> &[f64] {
        let nc = self.closure.len();
        let j = k - self.bx.t_start;
        &self.levels[j * nc..(j + 1) * nc]
    }

    pub fn closure(&self) -> &[usize] {
        &self.closure
    }

    /// Iterates `(flat space index, level, value)` over the unknowns of the box.
    pub fn interior_values(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let nc = self.closure.len();
        let n_levels = self.levels.len() / nc;
        (1..n_levels).flat_map(move |j| {
            let k = self.bx.t_start + j;
            self.interior
                .iter()
                .map(move |&l| (self.closure[l], k, self.levels[j * nc + l]))
        })
    }

    /// Copies the solution into `target` inside the box (the Poisson modification).
    pub fn write_into(&self, target: &mut ScalarField) {
        for (s, k, v) in self.interior_values() {
            target.put(s, k, v);
        }
        target.recompute_sup();
    }
}

#[inline]
fn pow_m(u: f64, m: f64) -> f64 {
    if m == 2.0 {
        u * u
    } else {
        u.powf(m)
    }
}

#[inline]
fn pow_m1(u: f64, m: f64) -> f64 {
    if m == 2.0 {
        u
    } else {
        u.powf(m - 1.0)
    }
}

const NONE: usize = usize::MAX;

/// Local stencil on the closed spatial box.
struct Stencil {
    dim: usize,
    lam: [f64; 2],
    stride: [usize; 2],
    /// Closure-local indices of the unknowns.
    interior: Vec<usize>,
    is_interior: Vec<bool>,
    /// Unknown-index neighbours `[-x, +x, -y, +y]`, `NONE` on walls.
    nbr: Vec<[usize; 4]>,
}

impl Stencil {
    fn new(grid: &SpaceTimeGrid, bx: &SpaceTimeBox) -> Self {
        let dim = grid.dim();
        let mut ext = [1usize; 2];
        let mut lam = [0.0; 2];
        for a in 0..dim {
            ext[a] = bx.hi[a] - bx.lo[a] + 1;
            lam[a] = grid.tau() / (grid.h(a) * grid.h(a));
        }
        let stride = [1, ext[0]];
        let nc = ext[0] * ext[1];
        let mut is_interior = vec![false; nc];
        let mut interior = Vec::new();
        for l in 0..nc {
            let i = l % ext[0];
            let j = l / ext[0];
            let inside_x = i > 0 && i + 1 < ext[0];
            let inside_y = dim == 1 || (j > 0 && j + 1 < ext[1]);
            if inside_x && inside_y {
                is_interior[l] = true;
                interior.push(l);
            }
        }
        let mut unknown_of = vec![NONE; nc];
        for (p, &l) in interior.iter().enumerate() {
            unknown_of[l] = p;
        }
        let nbr = interior
            .iter()
            .map(|&l| {
                let mut out = [NONE; 4];
                for a in 0..dim {
                    out[2 * a] = unknown_of[l - stride[a]];
                    out[2 * a + 1] = unknown_of[l + stride[a]];
                }
                out
            })
            .collect();
        Stencil {
            dim,
            lam,
            stride,
            interior,
            is_interior,
            nbr,
        }
    }

    /// Fills `w = u^m` and the residual `f`; returns `max |f|`.
    fn residual(&self, u: &[f64], prev: &[f64], m: f64, w: &mut [f64], f: &mut [f64]) -> f64 {
        for (wl, &ul) in w.iter_mut().zip(u) {
            *wl = pow_m(ul, m);
        }
        let mut res: f64 = 0.0;
        for (p, &l) in self.interior.iter().enumerate() {
            let mut lap = 0.0;
            for a in 0..self.dim {
                let s = self.stride[a];
                lap += self.lam[a] * (w[l + s] - 2.0 * w[l] + w[l - s]);
            }
            f[p] = u[l] - prev[l] - lap;
            res = res.max(f[p].abs());
        }
        res
    }
}

#[derive(Default)]
struct Work {
    w: Vec<f64>,
    f: Vec<f64>,
    d: Vec<f64>,
    du: Vec<f64>,
    rhs: Vec<f64>,
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
    cp: Vec<f64>,
    trial: Vec<f64>,
    trial_w: Vec<f64>,
    trial_f: Vec<f64>,
}

impl Work {
    fn new(nc: usize, n: usize) -> Self {
        Work {
            w: vec![0.0; nc],
            f: vec![0.0; n],
            d: vec![0.0; n],
            du: vec![0.0; n],
            rhs: vec![0.0; n],
            a: vec![0.0; n],
            b: vec![0.0; n],
            c: vec![0.0; n],
            cp: vec![0.0; n],
            trial: vec![0.0; nc],
            trial_w: vec![0.0; nc],
            trial_f: vec![0.0; n],
        }
    }
}

/// Newton iteration for one implicit step. `u` carries the wall values and
/// the initial guess; on success it holds the solution.
/// Returns `(iterations, residual)` either way.
fn newton(
    st: &Stencil,
    prev: &[f64],
    u: &mut [f64],
    cfg: &SolverConfig,
    delta: f64,
    wk: &mut Work,
) -> std::result::Result<(usize, f64), (usize, f64)> {
    let m = cfg.m;
    let n = st.interior.len();
    // The residual cannot be resolved below the rounding of its largest term.
    let scale = u.iter().chain(prev).cloned().fold(0.0, f64::max);
    let lam_sum: f64 = st.lam.iter().sum();
    let tol = cfg
        .newton_tol
        .max(16.0 * f64::EPSILON * (scale + 4.0 * lam_sum * pow_m(scale, m)));

    let mut res = st.residual(u, prev, m, &mut wk.w, &mut wk.f);
    let mut iter = 0;
    while res > tol {
        if iter == cfg.newton_max_iter {
            return Err((iter, res));
        }
        iter += 1;
        for (p, &l) in st.interior.iter().enumerate() {
            wk.d[p] = m * pow_m1(u[l], m).max(delta);
            wk.rhs[p] = -wk.f[p];
        }
        if st.dim == 1 {
            let lam = st.lam[0];
            for p in 0..n {
                wk.b[p] = 1.0 + 2.0 * lam * wk.d[p];
                wk.a[p] = if p > 0 { -lam * wk.d[p - 1] } else { 0.0 };
                wk.c[p] = if p + 1 < n { -lam * wk.d[p + 1] } else { 0.0 };
            }
            thomas_into(&wk.a, &wk.b, &wk.c, &wk.rhs, &mut wk.cp, &mut wk.du);
        } else {
            // (I + A D) du = r  <=>  (D + D A D) du = D r, symmetric positive definite
            let d = &wk.d;
            let lam = st.lam;
            let nbr = &st.nbr;
            let apply = |v: &[f64], out: &mut [f64]| {
                for p in 0..n {
                    let mut av = 0.0;
                    for a in 0..2 {
                        let mut acc = 2.0 * d[p] * v[p];
                        for q in [nbr[p][2 * a], nbr[p][2 * a + 1]] {
                            if q != NONE {
                                acc -= d[q] * v[q];
                            }
                        }
                        av += lam[a] * acc;
                    }
                    out[p] = d[p] * v[p] + d[p] * av;
                }
            };
            let diag: Vec<f64> = (0..n)
                .map(|p| d[p] + d[p] * d[p] * 2.0 * (lam[0] + lam[1]))
                .collect();
            let rhs: Vec<f64> = (0..n).map(|p| d[p] * wk.rhs[p]).collect();
            pcg(apply, &diag, &rhs, &mut wk.du, 1e-12, 20 * n + 100);
        }

        // damped update with clamping at zero
        let mut step = 1.0;
        loop {
            wk.trial.copy_from_slice(u);
            for (p, &l) in st.interior.iter().enumerate() {
                let v = u[l] + step * wk.du[p];
                wk.trial[l] = if cfg.positivity_clamp { v.max(0.0) } else { v };
            }
            let trial_res = st.residual(&wk.trial, prev, m, &mut wk.trial_w, &mut wk.trial_f);
            if trial_res < (1.0 - 1e-4 * step) * res || step < 1e-3 {
                u.copy_from_slice(&wk.trial);
                std::mem::swap(&mut wk.w, &mut wk.trial_w);
                std::mem::swap(&mut wk.f, &mut wk.trial_f);
                res = trial_res;
                break;
            }
            step *= 0.5;
        }
    }
    Ok((iter, res))
}

fn jacobian_floor(cfg: &SolverConfig, sup_data: f64) -> f64 {
    cfg.jacobian_floor * (1.0 + sup_data).powf(cfg.m - 1.0)
}

/// Solves the box problem with data taken from `data` on `∂_p` of `bx` by
/// marching implicit Euler steps from the start level.
pub fn solve_box(data: &ScalarField, bx: &SpaceTimeBox, cfg: &SolverConfig) -> Result<BoxSolution> {
    cfg.validate()?;
    let grid = data.grid();
    bx.validate(grid)?;
    let st = Stencil::new(grid, bx);
    let closure = bx.closure_nodes(grid);
    let nc = closure.len();
    let n_levels = grid.n_time() - bx.t_start;

    let mut sup_data: f64 = 0.0;
    for &s in &closure {
        sup_data = sup_data.max(data.get(s, bx.t_start));
    }
    for k in bx.t_start + 1..grid.n_time() {
        for (l, &s) in closure.iter().enumerate() {
            if !st.is_interior[l] {
                sup_data = sup_data.max(data.get(s, k));
            }
        }
    }
    let delta = jacobian_floor(cfg, sup_data);

    let mut levels = vec![0.0; n_levels * nc];
    for (l, &s) in closure.iter().enumerate() {
        levels[l] = data.get(s, bx.t_start);
    }
    let mut wk = Work::new(nc, st.interior.len());
    let mut total_iters = 0;
    let mut max_res: f64 = 0.0;
    for j in 1..n_levels {
        let k = bx.t_start + j;
        let (before, after) = levels.split_at_mut(j * nc);
        let prev = &before[(j - 1) * nc..];
        let cur = &mut after[..nc];
        for (l, &s) in closure.iter().enumerate() {
            cur[l] = if st.is_interior[l] { prev[l] } else { data.get(s, k) };
        }
        let (iters, res) = newton(&st, prev, cur, cfg, delta, &mut wk).map_err(|(iterations, residual)| {
            Error::Solver {
                level: k,
                iterations,
                residual,
            }
        })?;
        total_iters += iters;
        max_res = max_res.max(res);
    }
    Ok(BoxSolution {
        bx: bx.clone(),
        closure,
        interior: st.interior,
        levels,
        newton_iterations: total_iters,
        max_residual: max_res,
    })
}

/// Solution of the box problem, returned on the whole grid: the data outside
/// the open box and the computed solution inside.
pub fn solve_bvp(spec: &BvpSpec, cfg: &SolverConfig) -> Result<ScalarField> {
    let sol = solve_box(&spec.data, &spec.bx, cfg)?;
    let mut out = spec.data.clone();
    sol.write_into(&mut out);
    Ok(out)
}

/// One implicit Euler step on the spatial box of `bx`.
///
/// `u_prev` and `lateral` are full spatial slices; `lateral` supplies the wall
/// values. The returned slice equals `lateral` outside the open box.
pub fn step_backward_euler(
    grid: &SpaceTimeGrid,
    bx: &SpaceTimeBox,
    u_prev: &[f64],
    lateral: &[f64],
    cfg: &SolverConfig,
) -> Result<StepOutcome> {
    cfg.validate()?;
    let ns = grid.n_nodes_space();
    if u_prev.len() != ns || lateral.len() != ns {
        return Err(Error::Geometry("step slices must cover the spatial grid".into()));
    }
    if let Some(v) = u_prev.iter().chain(lateral).find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::Domain(format!("step data must be finite and non-negative, got {v}")));
    }
    SpaceTimeBox::new(bx.lo.clone(), bx.hi.clone(), 0).validate(grid)?;
    let st = Stencil::new(grid, bx);
    let closure = bx.closure_nodes(grid);
    let prev: Vec<f64> = closure.iter().map(|&s| u_prev[s]).collect();
    let mut cur: Vec<f64> = closure
        .iter()
        .enumerate()
        .map(|(l, &s)| if st.is_interior[l] { u_prev[s] } else { lateral[s] })
        .collect();
    let sup_data = prev.iter().chain(&cur).cloned().fold(0.0, f64::max);
    let delta = jacobian_floor(cfg, sup_data);
    let mut wk = Work::new(closure.len(), st.interior.len());
    let (iterations, residual) = newton(&st, &prev, &mut cur, cfg, delta, &mut wk).map_err(|(iterations, residual)| {
        Error::Solver {
            level: 1,
            iterations,
            residual,
        }
    })?;
    let mut values = lateral.to_vec();
    for &l in &st.interior {
        values[closure[l]] = cur[l];
    }
    Ok(StepOutcome {
        values,
        iterations,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;

    fn cfg() -> SolverConfig {
        SolverConfig::new(2.0)
    }

    #[test]
    fn constants_are_preserved_exactly() {
        let g = build_grid(&[(0.0, 1.0)], &[21], 11, 1.0).unwrap();
        for c in [0.0, 0.3, 3.0] {
            let data = ScalarField::constant(&g, c).unwrap();
            let spec = BvpSpec {
                bx: SpaceTimeBox::full(&g),
                data,
            };
            let u = solve_bvp(&spec, &cfg()).unwrap();
            assert!(u.values().iter().all(|&v| v == c));
        }
    }

    #[test]
    fn step_constant_and_zero() {
        let g = build_grid(&[(0.0, 1.0), (0.0, 1.0)], &[7, 6], 3, 1.0).unwrap();
        let bx = SpaceTimeBox::full(&g);
        let ns = g.n_nodes_space();
        for c in [0.0, 2.5] {
            let out = step_backward_euler(&g, &bx, &vec![c; ns], &vec![c; ns], &cfg()).unwrap();
            assert!(out.values.iter().all(|&v| v == c));
            assert_eq!(out.iterations, 0);
        }
        let mut bad = vec![1.0; ns];
        bad[3] = -1.0;
        assert!(matches!(
            step_backward_euler(&g, &bx, &vec![1.0; ns], &bad, &cfg()),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn step_satisfies_discrete_equation_2d() {
        let g = build_grid(&[(0.0, 1.0), (0.0, 1.0)], &[9, 9], 5, 0.2).unwrap();
        let bx = SpaceTimeBox::full(&g);
        let ns = g.n_nodes_space();
        let prev: Vec<f64> = (0..ns)
            .map(|s| {
                let x = g.position(s);
                (1.0 - 4.0 * ((x[0] - 0.5).powi(2) + (x[1] - 0.4).powi(2))).max(0.0)
            })
            .collect();
        let lateral = vec![0.05; ns];
        let out = step_backward_euler(&g, &bx, &prev, &lateral, &cfg()).unwrap();
        let lam = g.tau() / (g.h(0) * g.h(0));
        for j in 1..8 {
            for i in 1..8 {
                let s = g.flat(&[i, j]);
                let w = |s: usize| out.values[s] * out.values[s];
                let lap = w(s + 1) + w(s - 1) + w(s + 9) + w(s - 9) - 4.0 * w(s);
                let r = out.values[s] - prev[s] - lam * lap;
                assert!(r.abs() < 1e-10, "residual {r}");
            }
        }
    }

    #[test]
    fn bounded_by_data_1d() {
        let g = build_grid(&[(0.0, 1.0)], &[41], 41, 1.0).unwrap();
        let data = ScalarField::from_fn(&g, |x, t| {
            if t == 0.0 {
                (4.0 * x[0] * (1.0 - x[0])).powi(2)
            } else {
                0.2 * t
            }
        })
        .unwrap();
        let u = solve_bvp(
            &BvpSpec {
                bx: SpaceTimeBox::full(&g),
                data: data.clone(),
            },
            &cfg(),
        )
        .unwrap();
        assert!(u.sup() <= 1.0 + 1e-12);
        assert!(u.min() >= 0.0);
    }
}
