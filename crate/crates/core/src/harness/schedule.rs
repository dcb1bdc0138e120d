use serde::{Deserialize, Serialize};

use crate::dirichlet::DirichletMesh;
use crate::error::{Error, Result};

/// Commensurate cell sizes `eps = 1/k` with a mesh that resolves each period.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsSchedule {
    /// The integers `1/eps`, increasing.
    pub inverse: Vec<usize>,
    /// Mesh nodes per period, at least 8.
    pub nodes_per_period: usize,
}

impl EpsSchedule {
    pub fn new(inverse: Vec<usize>, nodes_per_period: usize) -> Result<Self> {
        if inverse.is_empty() {
            return Err(Error::invalid("empty eps schedule"));
        }
        if inverse.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("1/eps must increase strictly along the schedule"));
        }
        if let Some(k) = inverse.iter().find(|k| ![4, 8, 16, 32, 64].contains(*k)) {
            return Err(Error::invalid(format!("1/eps = {k} not in {{4, 8, 16, 32, 64}}")));
        }
        if nodes_per_period < 8 {
            return Err(Error::invalid(format!("{nodes_per_period} nodes per period do not resolve the cell")));
        }
        Ok(EpsSchedule { inverse, nodes_per_period })
    }

    /// `1/eps` in `{4, 8, 16, 32, 64}`, 8 nodes per period.
    pub fn standard() -> Self {
        EpsSchedule {
            inverse: vec![4, 8, 16, 32, 64],
            nodes_per_period: 8,
        }
    }

    pub fn eps(&self) -> Vec<f64> {
        self.inverse.iter().map(|&k| 1.0 / k as f64).collect()
    }

    /// Interior nodes per axis so that mesh nodes fall on every period boundary.
    pub fn interior_nodes(&self, inverse: usize) -> usize {
        self.nodes_per_period * inverse - 1
    }

    pub fn mesh(&self, dim: usize, inverse: usize) -> Result<DirichletMesh> {
        DirichletMesh::new(dim, self.interior_nodes(inverse))
    }
}

/// Least-squares slope of `log y` against `log eps` over the last three
/// points with positive `y`. `None` with fewer than two such points.
pub fn fit_rate(eps: &[f64], y: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = eps
        .iter()
        .zip(y)
        .filter(|(e, v)| **e > 0.0 && **v > 0.0 && v.is_finite())
        .map(|(e, v)| (e.ln(), v.ln()))
        .collect();
    let tail = &pts[pts.len().saturating_sub(3)..];
    if tail.len() < 2 {
        return None;
    }
    let n = tail.len() as f64;
    let mx = tail.iter().map(|p| p.0).sum::<f64>() / n;
    let my = tail.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = tail.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = tail.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_of_a_power_law() {
        let eps = [0.25, 0.125, 0.0625, 0.03125];
        let y: Vec<f64> = eps.iter().map(|e: &f64| 3.0 * e.powf(1.5)).collect();
        assert!((fit_rate(&eps, &y).unwrap() - 1.5).abs() < 1e-12);
        assert_eq!(fit_rate(&eps, &[0.0; 4]), None);
    }

    #[test]
    fn schedule_rules() {
        let s = EpsSchedule::standard();
        assert_eq!(s.interior_nodes(64), 511);
        assert!(EpsSchedule::new(vec![8, 4], 8).is_err());
        assert!(EpsSchedule::new(vec![4, 6], 8).is_err());
        assert!(EpsSchedule::new(vec![4, 8], 4).is_err());
    }
}
