use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::dirichlet::DirichletMesh;

/// Number of fields in the weak-convergence dictionary.
pub const DICTIONARY_SIZE: usize = 8;

/// Test field `k` of the dictionary at `x`, `N` components. Six polynomial
/// fields of degree at most 2 and two trigonometric ones.
pub fn dictionary_field(k: usize, x: &[f64]) -> Vec<f64> {
    match x.len() {
        1 => {
            let t = x[0];
            vec![match k {
                0 => 1.0,
                1 => t,
                2 => t * t,
                3 => 1.0 - t,
                4 => t * (1.0 - t),
                5 => (t - 0.5).powi(2),
                6 => (PI * t).sin(),
                _ => (PI * t).cos(),
            }]
        }
        _ => {
            let (s, t) = (x[0], x[1]);
            match k {
                0 => vec![1.0, 0.0],
                1 => vec![0.0, 1.0],
                2 => vec![s, 0.0],
                3 => vec![0.0, t],
                4 => vec![s * s, t],
                5 => vec![s * t, s],
                6 => vec![(PI * s).sin() * (PI * t).sin(), 0.0],
                _ => vec![0.0, (PI * s).cos() * (PI * t).cos()],
            }
        }
    }
}

/// Distance of two fluxes in the surrogate of the `T` topology.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TTopologyMeter {
    /// `|int <tau_eps - tau, w>|` per dictionary field.
    pub weak: Vec<f64>,
    /// `|| Delta^-1 div (tau_eps - tau) ||` on the nodes.
    pub strong: f64,
}

impl TTopologyMeter {
    pub fn measure(mesh: &DirichletMesh, tau_eps: &[f64], tau: &[f64]) -> Self {
        let n = mesh.dim;
        let d: Vec<f64> = tau_eps.iter().zip(tau).map(|(a, b)| a - b).collect();
        let weak = (0..DICTIONARY_SIZE)
            .map(|k| {
                let s: f64 = (0..mesh.elements())
                    .map(|e| {
                        let w = dictionary_field(k, &mesh.centroid(e));
                        (0..n).map(|c| d[e * n + c] * w[c]).sum::<f64>()
                    })
                    .sum();
                (s * mesh.element_weight()).abs()
            })
            .collect();
        // K = h^(N-2) Lap, so K^-1 (h^N div) is the discrete Delta^-1 div
        let s = mesh.node_weight();
        let div: Vec<f64> = mesh.divergence(&d).into_iter().map(|v| v * s).collect();
        let strong = mesh.node_norm(&mesh.solve_stiffness(&div));
        TTopologyMeter { weak, strong }
    }

    pub fn weak_max(&self) -> f64 {
        self.weak.iter().copied().fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_fluxes_read_zero() {
        for dim in [1, 2] {
            let mesh = DirichletMesh::new(dim, 15).unwrap();
            let f: Vec<f64> = (0..dim * mesh.elements()).map(|i| (i as f64).sin()).collect();
            let m = TTopologyMeter::measure(&mesh, &f, &f);
            assert_eq!(m.weak, vec![0.0; DICTIONARY_SIZE]);
            assert_eq!(m.strong, 0.0);
        }
    }

    #[test]
    fn constant_shift_pairs_with_the_constant_field() {
        let mesh = DirichletMesh::new(1, 15).unwrap();
        let f = vec![0.0; mesh.elements()];
        let g = vec![0.25; mesh.elements()];
        let m = TTopologyMeter::measure(&mesh, &g, &f);
        assert!((m.weak[0] - 0.25).abs() < 1e-14);
        // a constant 1D flux is divergence-free
        assert!(m.strong < 1e-14);
    }
}
