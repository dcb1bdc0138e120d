use serde::{Deserialize, Serialize};

use super::schedule::fit_rate;
use crate::error::{Error, Result};
use crate::integrand::ConvexIntegrand;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OscillationRow {
    pub eps: f64,
    pub deviation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OscillationReport {
    pub rows: Vec<OscillationRow>,
    pub rate: Option<f64>,
}

/// `|int_0^1 f(x/eps) phi(x) dx - mean(f) int_0^1 phi|` for `f` 1-periodic,
/// by the midpoint rule with `points_per_period` points in each period.
pub fn riemann_lebesgue_test(f: &dyn Fn(f64) -> f64, phi: &dyn Fn(f64) -> f64, inverse_eps: &[usize], points_per_period: usize) -> Result<OscillationReport> {
    if points_per_period == 0 || inverse_eps.contains(&0) {
        return Err(Error::invalid("quadrature and 1/eps must be positive"));
    }
    let q = points_per_period;
    let mean = (0..q).map(|j| f((j as f64 + 0.5) / q as f64)).sum::<f64>() / q as f64;
    let rows: Vec<OscillationRow> = inverse_eps
        .iter()
        .map(|&k| {
            let n = k * q;
            let h = 1.0 / n as f64;
            let mut osc = 0.0;
            let mut plain = 0.0;
            for i in 0..n {
                let x = (i as f64 + 0.5) * h;
                let p = phi(x);
                osc += f(((i % q) as f64 + 0.5) / q as f64) * p;
                plain += p;
            }
            OscillationRow {
                eps: 1.0 / k as f64,
                deviation: (h * (osc - mean * plain)).abs(),
            }
        })
        .collect();
    let eps: Vec<f64> = rows.iter().map(|r| r.eps).collect();
    let dev: Vec<f64> = rows.iter().map(|r| r.deviation).collect();
    Ok(OscillationReport { rate: fit_rate(&eps, &dev), rows })
}

/// Minimize a convex function of one variable: expand a bracket, then
/// golden-section search.
pub fn minimize_scalar(f: &dyn Fn(f64) -> f64, start: f64, tol: f64) -> f64 {
    let mut step = 1.0;
    let (mut lo, mut hi) = (start - step, start + step);
    for _ in 0..60 {
        let fm = f(0.5 * (lo + hi));
        let ok_lo = f(lo) >= fm;
        let ok_hi = f(hi) >= fm;
        if ok_lo && ok_hi {
            break;
        }
        step *= 2.0;
        if !ok_lo {
            lo -= step;
        }
        if !ok_hi {
            hi += step;
        }
    }
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = hi - g * (hi - lo);
    let mut d = lo + g * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    while hi - lo > tol {
        if fc <= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - g * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + g * (hi - lo);
            fd = f(d);
        }
    }
    0.5 * (lo + hi)
}

/// One piece `Omega_i` of a partition of `(0,1)` with constant data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    pub measure: f64,
    pub a: f64,
    pub b: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JensenReport {
    /// `min_c sum |Omega_i| L(a_i, b_i + c)`.
    pub lhs: f64,
    /// `sum |Omega_i| inf_eta L(a_i, b_i + eta)`.
    pub rhs: f64,
    pub margin: f64,
    /// Minimizing constant flux `c`.
    pub shift: f64,
}

/// The lower bound for piecewise constant data on `(0,1)`. Divergence-free
/// fluxes on an interval are the constants, so the left side is a scalar
/// minimization over `c`.
pub fn jensen_bound_test(l: &dyn ConvexIntegrand, pieces: &[Piece]) -> Result<JensenReport> {
    if l.arity() != 2 {
        return Err(Error::invalid("the bound is evaluated for one-dimensional Lagrangians"));
    }
    if pieces.is_empty() || pieces.iter().any(|p| !(p.measure > 0.0)) {
        return Err(Error::invalid("pieces need positive measure"));
    }
    let tol = 1e-10;
    let total = |c: f64| pieces.iter().map(|p| p.measure * l.value(&[p.a, p.b + c])).sum::<f64>();
    let shift = minimize_scalar(&total, 0.0, tol);
    let lhs = total(shift);
    let rhs: f64 = pieces
        .iter()
        .map(|p| {
            let g = |eta: f64| l.value(&[p.a, eta]);
            p.measure * g(minimize_scalar(&g, p.b, tol))
        })
        .sum();
    Ok(JensenReport {
        lhs,
        rhs,
        margin: lhs - rhs,
        shift,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_section_finds_a_parabola_vertex() {
        let x = minimize_scalar(&|t| (t - 7.3).powi(2) + 1.0, 0.0, 1e-12);
        assert!((x - 7.3).abs() < 1e-6);
    }

    #[test]
    fn constant_oscillation_has_no_deviation() {
        let r = riemann_lebesgue_test(&|_| 3.0, &|x| x * x, &[4, 8, 16], 16).unwrap();
        assert!(r.rows.iter().all(|row| row.deviation < 1e-15));
    }
}
