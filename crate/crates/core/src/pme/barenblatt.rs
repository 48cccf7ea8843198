use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::SpaceTimeGrid;

/// Self-similar source-type solution
/// `t^{-α} (C − k |x − x₀|² t^{-2β})₊^{1/(m−1)}` with
/// `α = n / (n(m−1) + 2)`, `β = α / n`, `k = α (m−1) / (2 m n)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Barenblatt {
    pub m: f64,
    pub n: usize,
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(default)]
    pub center: Vec<f64>,
}

impl Barenblatt {
    pub fn new(m: f64, n: usize, c: f64) -> Result<Self> {
        let b = Barenblatt {
            m,
            n,
            c,
            center: vec![0.0; n],
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.m > 1.0) {
            return Err(Error::Domain(format!("Barenblatt needs m > 1, got {}", self.m)));
        }
        if !(self.c > 0.0) {
            return Err(Error::Domain(format!("Barenblatt needs C > 0, got {}", self.c)));
        }
        if self.n == 0 {
            return Err(Error::Domain("Barenblatt dimension must be positive".into()));
        }
        if !self.center.is_empty() && self.center.len() != self.n {
            return Err(Error::Domain("center dimension mismatch".into()));
        }
        Ok(())
    }

    pub fn alpha(&self) -> f64 {
        let n = self.n as f64;
        n / (n * (self.m - 1.0) + 2.0)
    }

    pub fn beta(&self) -> f64 {
        self.alpha() / self.n as f64
    }

    pub fn k(&self) -> f64 {
        self.alpha() * (self.m - 1.0) / (2.0 * self.m * self.n as f64)
    }

    pub fn value(&self, x: &[f64], t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::Domain(format!("Barenblatt profile needs t > 0, got {t}")));
        }
        let r2: f64 = x
            .iter()
            .enumerate()
            .map(|(i, &xi)| {
                let c = self.center.get(i).copied().unwrap_or(0.0);
                (xi - c) * (xi - c)
            })
            .sum();
        let inner = self.c - self.k() * r2 * t.powf(-2.0 * self.beta());
        if inner <= 0.0 {
            return Ok(0.0);
        }
        Ok(t.powf(-self.alpha()) * inner.powf(1.0 / (self.m - 1.0)))
    }
}

pub fn barenblatt(x: &[f64], t: f64, m: f64, n: usize, c: f64) -> Result<f64> {
    Barenblatt::new(m, n, c)?.value(x, t)
}

/// Samples the profile on the grid at physical time `t_shift + t`.
pub fn barenblatt_field(grid: &SpaceTimeGrid, profile: &Barenblatt, t_shift: f64) -> Result<ScalarField> {
    profile.validate()?;
    if profile.n != grid.dim() {
        return Err(Error::Geometry("Barenblatt dimension differs from grid dimension".into()));
    }
    if !(t_shift > 0.0) {
        return Err(Error::Domain(format!("time shift must be positive, got {t_shift}")));
    }
    ScalarField::from_fn(grid, |x, t| profile.value(x, t_shift + t).unwrap_or(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponents_for_m2_n1() {
        let b = Barenblatt::new(2.0, 1, 1.0).unwrap();
        assert!((b.alpha() - 1.0 / 3.0).abs() < 1e-15);
        assert!((b.beta() - 1.0 / 3.0).abs() < 1e-15);
        assert!((b.k() - 1.0 / 12.0).abs() < 1e-15);
    }

    #[test]
    fn center_value_and_support() {
        for (m, c, t) in [(2.0, 1.0, 1.0f64), (3.0, 2.0, 0.5), (1.5, 0.7, 2.0)] {
            let b = Barenblatt::new(m, 1, c).unwrap();
            let expected = c.powf(1.0 / (m - 1.0)) * t.powf(-b.alpha());
            assert!((b.value(&[0.0], t).unwrap() - expected).abs() < 1e-14);
            let edge = (c / b.k()).sqrt() * t.powf(b.beta());
            assert_eq!(b.value(&[edge * 1.0001], t).unwrap(), 0.0);
            assert!(b.value(&[edge * 0.999], t).unwrap() > 0.0);
        }
        assert_eq!(barenblatt(&[0.0], 1.0, 2.0, 1, 1.0).unwrap(), 1.0);
        assert!(barenblatt(&[0.0], 0.0, 2.0, 1, 1.0).is_err());
        assert!(barenblatt(&[0.0], 1.0, 1.0, 1, 1.0).is_err());
    }

    /// Finite-difference residual of the closed form inside the support.
    #[test]
    fn solves_pme_away_from_front() {
        for (m, n) in [(2.0, 1usize), (3.0, 1), (2.0, 2)] {
            let b = Barenblatt::new(m, n, 1.0).unwrap();
            let e = 1e-4;
            for &(x0, t) in &[(0.3, 1.0), (1.1, 2.0), (0.0, 0.7)] {
                let mut x = vec![0.0; n];
                x[0] = x0;
                let u = |x: &[f64], t: f64| b.value(x, t).unwrap();
                let ut = (u(&x, t + e) - u(&x, t - e)) / (2.0 * e);
                let mut lap = 0.0;
                for a in 0..n {
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    xp[a] += e;
                    xm[a] -= e;
                    lap += (u(&xp, t).powf(m) - 2.0 * u(&x, t).powf(m) + u(&xm, t).powf(m)) / (e * e);
                }
                assert!((ut - lap).abs() < 1e-5, "m={m} n={n} x={x0} t={t}: {ut} vs {lap}");
            }
        }
    }
}
