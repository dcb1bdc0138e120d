use super::field::MonotoneField;
use crate::convex::GapReport;
use crate::error::{Error, Result};

/// Half-width of the box of `xi` values scanned by [`verify_growth`].
pub const GROWTH_SCAN_RADIUS: f64 = 4.0;

/// Scan `<xi, eta> >= max(c1 |xi|^p / p - m1, c2 |eta|^q / q - m2)` over
/// `samples` values of `xi` per axis in every region, testing both ends of
/// set-valued images. The report's `max_gap` is the largest violation and
/// `min_basic_margin` the smallest slack.
pub fn verify_growth(beta: &MonotoneField, samples: usize) -> Result<GapReport> {
    verify_growth_with(beta, samples, GROWTH_SCAN_RADIUS, 1e-9)
}

pub fn verify_growth_with(beta: &MonotoneField, samples: usize, radius: f64, tol: f64) -> Result<GapReport> {
    if samples < 2 {
        return Err(Error::invalid("growth scan needs at least two samples per axis"));
    }
    let g = &beta.growth;
    let (p, q) = (g.p, g.q());
    let dim = beta.dim;
    let total = samples.pow(dim as u32);
    let mut worst = (f64::NEG_INFINITY, Vec::new(), Vec::new(), Vec::new());
    let mut margin = f64::INFINITY;
    let mut checked = 0;
    let mut xi = vec![0.0; dim];
    for r in 0..beta.laws.len() {
        let x = beta.regions.centre(r);
        for flat in 0..total {
            let mut f = flat;
            for k in (0..dim).rev() {
                xi[k] = -radius + 2.0 * radius * (f % samples) as f64 / (samples - 1) as f64;
                f /= samples;
            }
            let (lo, hi) = beta.image(r, &xi);
            for eta in [&lo, &hi] {
                let pair: f64 = xi.iter().zip(eta.iter()).map(|(a, b)| a * b).sum();
                let nx = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
                let ne = eta.iter().map(|v| v * v).sum::<f64>().sqrt();
                let bound = (g.c1 * nx.powf(p) / p - g.m1).max(g.c2 * ne.powf(q) / q - g.m2);
                let v = bound - pair;
                checked += 1;
                margin = margin.min(-v);
                if v > worst.0 {
                    worst = (v, x.clone(), xi.clone(), eta.clone());
                }
            }
        }
    }
    let (violation, x, xi, eta) = worst;
    if violation > tol {
        return Err(Error::GrowthViolation { x, xi, eta, violation });
    }
    let mut point = xi;
    point.extend(eta);
    Ok(GapReport {
        max_gap: violation.max(0.0),
        argmax_point: point,
        tolerance_used: tol,
        min_basic_margin: margin,
        nodes_checked: checked,
    })
}

/// Check `|eta0|^q <= m2` for the least-norm element `eta0` of each
/// `beta(x, 0)`.
pub fn check_eta0(beta: &MonotoneField) -> Result<Vec<Vec<f64>>> {
    let q = beta.growth.q();
    let mut out = Vec::with_capacity(beta.laws.len());
    for r in 0..beta.laws.len() {
        let e = beta.eta0(r);
        let n = e.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n.powf(q) > beta.growth.m2 + 1e-12 {
            return Err(Error::GrowthViolation {
                x: beta.regions.centre(r),
                xi: vec![0.0; beta.dim],
                eta: e,
                violation: n.powf(q) - beta.growth.m2,
            });
        }
        out.push(e);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{FieldKind, Growth, Law};

    fn growth(c1: f64, c2: f64, m1: f64, m2: f64, p: f64) -> Growth {
        Growth { c1, c2, m1, m2, p }
    }

    #[test]
    fn two_phase_linear_passes() {
        let f = MonotoneField::two_phase_linear(1.0, 4.0, growth(1.0, 0.25, 0.0, 0.0, 2.0)).unwrap();
        let r = verify_growth(&f, 401).unwrap();
        assert_eq!(r.max_gap, 0.0);
        // at xi = 4 in the a = 4 phase: 64 - max(8, 32) = 32 by hand
        assert!(r.min_basic_margin >= 0.0);
    }

    #[test]
    fn unit_c2_is_too_strong_for_a_four() {
        let f = MonotoneField::two_phase_linear(1.0, 4.0, growth(1.0, 1.0, 0.0, 0.0, 2.0)).unwrap();
        match verify_growth(&f, 101) {
            Err(Error::GrowthViolation { violation, eta, xi, .. }) => {
                // 16 xi^2 / 2 - 4 xi^2 at xi = 4
                assert!((violation - 64.0).abs() < 1e-9, "{violation} {xi:?} {eta:?}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn cubic_power_passes_with_unit_constants() {
        let law = Law::Power { coef: 1.0, p: 3.0 };
        let f = MonotoneField::uniform(FieldKind::Power, 1, law, growth(1.0, 1.0, 0.0, 0.0, 3.0)).unwrap();
        assert_eq!(verify_growth(&f, 801).unwrap().max_gap, 0.0);
        assert_eq!(check_eta0(&f).unwrap(), vec![vec![0.0]]);
    }

    #[test]
    fn degenerate_phase_is_flagged() {
        let f = MonotoneField::two_phase_linear(0.0, 1.0, growth(1.0, 0.25, 0.0, 0.0, 2.0)).unwrap();
        assert!(matches!(verify_growth(&f, 51), Err(Error::GrowthViolation { .. })));
    }
}
