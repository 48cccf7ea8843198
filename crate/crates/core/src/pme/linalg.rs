/// Solves the tridiagonal system with sub-diagonal `a`, diagonal `b` and
/// super-diagonal `c` (`a[0]` and `c[n-1]` are ignored). No pivoting; the
/// Newton matrices are column diagonally dominant.
pub fn thomas_solve(a: &[f64], b: &[f64], c: &[f64], d: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut cp = vec![0.0; n];
    thomas_into(a, b, c, d, &mut cp, &mut x);
    x
}

pub(crate) fn thomas_into(a: &[f64], b: &[f64], c: &[f64], d: &[f64], cp: &mut [f64], x: &mut [f64]) {
    let n = b.len();
    if n == 0 {
        return;
    }
    cp[0] = c[0] / b[0];
    x[0] = d[0] / b[0];
    for i in 1..n {
        let denom = b[i] - a[i] * cp[i - 1];
        cp[i] = if i + 1 < n { c[i] / denom } else { 0.0 };
        x[i] = (d[i] - a[i] * x[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        x[i] -= cp[i] * x[i + 1];
    }
}

/// Jacobi-preconditioned conjugate gradients for `S x = rhs` with `S` given
/// as a matrix-free symmetric positive-definite operator. Reductions run in
/// index order, so results are bitwise reproducible.
pub(crate) fn pcg(
    apply: impl Fn(&[f64], &mut [f64]),
    diag: &[f64],
    rhs: &[f64],
    x: &mut [f64],
    rel_tol: f64,
    max_iter: usize,
) -> usize {
    let n = rhs.len();
    x.iter_mut().for_each(|v| *v = 0.0);
    let rhs_norm = rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
    if rhs_norm == 0.0 {
        return 0;
    }
    let mut r = rhs.to_vec();
    let mut z: Vec<f64> = r.iter().zip(diag).map(|(ri, di)| ri / di).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    for iter in 1..=max_iter {
        apply(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rn = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if rn <= rel_tol * rhs_norm {
            return iter;
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    max_iter
}
