use rayon::prelude::*;

use super::field::MonotoneField;
use crate::convex::{BoxGrid, TabulatedFunction};
use crate::error::{Error, Result};

/// Fitzpatrick function of a sampled graph,
/// `N(a, b) = max_(xi, eta) <b, xi> + <a, eta> - <xi, eta>`, on the product
/// grid `[ga, gb]`.
pub fn fitzpatrick_from_samples(samples: &[(Vec<f64>, Vec<f64>)], ga: &BoxGrid, gb: &BoxGrid) -> Result<TabulatedFunction> {
    if samples.is_empty() {
        return Err(Error::DomainEmpty);
    }
    if ga.dim != gb.dim {
        return Err(Error::GridMismatch("a and b grids must share a dimension".into()));
    }
    let n = ga.dim;
    // each sample is the affine map (a, b) -> <a, eta> + <b, xi> - <xi, eta>
    let affine: Vec<f64> = samples
        .iter()
        .flat_map(|(xi, eta)| {
            let c = -xi.iter().zip(eta).map(|(x, e)| x * e).sum::<f64>();
            eta.iter().chain(xi.iter()).copied().chain(std::iter::once(c)).collect::<Vec<_>>()
        })
        .collect();
    let stride = 2 * n + 1;
    let factors = vec![ga.clone(), gb.clone()];
    let shell = TabulatedFunction::new(factors.clone(), vec![0.0; ga.len() * gb.len()])?;
    let values: Vec<f64> = (0..shell.len())
        .into_par_iter()
        .map(|flat| {
            let z = shell.node(flat);
            affine
                .chunks_exact(stride)
                .map(|w| w[..2 * n].iter().zip(&z).map(|(c, v)| c * v).sum::<f64>() + w[2 * n])
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    TabulatedFunction::new(factors, values)
}

/// `N(a, b)` at a single point.
pub fn fitzpatrick_at(samples: &[(Vec<f64>, Vec<f64>)], a: &[f64], b: &[f64]) -> f64 {
    samples
        .iter()
        .map(|(xi, eta)| {
            let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(x, y)| x * y).sum::<f64>();
            dot(b, xi) + dot(a, eta) - dot(xi, eta)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Fitzpatrick function of region `r` of `beta`. The graph is sampled over
/// `|xi_k| <= sample_radius` with step `sample_h`.
pub fn fitzpatrick(beta: &MonotoneField, r: usize, ga: &BoxGrid, gb: &BoxGrid, sample_radius: f64, sample_h: f64) -> Result<TabulatedFunction> {
    if r >= beta.laws.len() {
        return Err(Error::invalid(format!("region {r} out of range")));
    }
    let samples = beta.sample_graph(r, sample_radius, sample_h);
    fitzpatrick_from_samples(&samples, ga, gb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{FieldKind, Growth, Law};

    fn growth() -> Growth {
        Growth {
            c1: 1.0,
            c2: 1.0,
            m1: 8.0,
            m2: 0.0,
            p: 2.0,
        }
    }

    #[test]
    fn identity_gives_square_of_mean() {
        let f = MonotoneField::uniform(FieldKind::Linear, 1, Law::Linear { matrix: vec![1.0] }, growth()).unwrap();
        let g = BoxGrid::new(1, 2.0, 257).unwrap();
        let n = fitzpatrick(&f, 0, &g, &g, 4.0, g.spacing()).unwrap();
        let mut worst = 0.0f64;
        for flat in 0..n.len() {
            let z = n.node(flat);
            // sup over xi of (a + b) xi - xi^2
            let exact = (z[0] + z[1]).powi(2) / 4.0;
            worst = worst.max((n.values()[flat] - exact).abs());
            assert!(n.values()[flat] >= z[0] * z[1] - 1e-12);
        }
        assert!(worst <= 1e-3, "{worst}");
    }

    #[test]
    fn abs_subdifferential() {
        let law = Law::Polyline {
            points: vec![(-1.0, -1.0), (0.0, -1.0), (0.0, 1.0), (1.0, 1.0)],
        };
        let f = MonotoneField::uniform(FieldKind::SampledGraph1d, 1, law, growth()).unwrap();
        let g = BoxGrid::new(1, 2.0, 81).unwrap();
        let n = fitzpatrick(&f, 0, &g, &g, 4.0, g.spacing()).unwrap();
        // brute force over the graph {(xi, sgn xi)} and {0} x [-1, 1]
        let mut graph: Vec<(f64, f64)> = (0..=8000).map(|i| -4.0 + i as f64 / 1000.0).map(|x: f64| (x, x.signum())).collect();
        graph.extend((0..=2000).map(|i| (0.0, -1.0 + i as f64 / 1000.0)));
        for flat in 0..n.len() {
            let z = n.node(flat);
            let oracle = graph.iter().map(|&(x, e)| z[1] * x + z[0] * e - x * e).fold(f64::NEG_INFINITY, f64::max);
            assert!((n.values()[flat] - oracle).abs() < 1e-9, "{z:?}");
            if z[0] == 0.0 && z[1].abs() <= 1.0 {
                assert!(n.values()[flat].abs() < 1e-12);
            }
        }
        // steep growth beyond |b| = 1
        assert!(n.eval(&[0.0, 1.5]) >= 1.9);
    }

    #[test]
    fn on_graph_equality() {
        let f = MonotoneField::uniform(FieldKind::Linear, 1, Law::Linear { matrix: vec![4.0] }, growth()).unwrap();
        let g = BoxGrid::new(1, 4.0, 161).unwrap();
        let samples = f.sample_graph(0, 4.0, g.spacing());
        for (xi, eta) in &samples {
            let v = fitzpatrick_at(&samples, xi, eta);
            assert!((v - xi[0] * eta[0]).abs() < 1e-12 * (1.0 + v.abs()), "{xi:?}: {v}");
        }
        assert!(fitzpatrick_from_samples(&[], &g, &g).is_err());
    }
}
