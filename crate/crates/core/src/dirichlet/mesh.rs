use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::SineTransform;

/// Uniform mesh of `(0,1)^N` with `m` interior nodes per axis and zero
/// boundary values. Elements are the `m + 1` intervals in 1D and the two
/// triangles of each square, split along its anti-diagonal, in 2D. Gradients
/// and fluxes are constant per element, so `<grad u, f> = <u, -div f>`
/// holds exactly.
#[derive(Clone)]
pub struct DirichletMesh {
    pub dim: usize,
    pub m: usize,
    sine: SineTransform,
}

impl std::fmt::Debug for DirichletMesh {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DirichletMesh").field("dim", &self.dim).field("m", &self.m).finish()
    }
}

impl PartialEq for DirichletMesh {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.m == other.m
    }
}

impl DirichletMesh {
    pub fn new(dim: usize, m: usize) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(Error::invalid(format!("domain dimension {dim} not in {{1, 2}}")));
        }
        if m < 8 {
            return Err(Error::invalid(format!("meshes need at least 8 interior nodes per axis, got {m}")));
        }
        Ok(DirichletMesh {
            dim,
            m,
            sine: SineTransform::new(m),
        })
    }

    pub fn spacing(&self) -> f64 {
        1.0 / (self.m + 1) as f64
    }

    pub fn nodes(&self) -> usize {
        self.m.pow(self.dim as u32)
    }

    pub fn elements(&self) -> usize {
        match self.dim {
            1 => self.m + 1,
            _ => 2 * (self.m + 1) * (self.m + 1),
        }
    }

    /// Measure of one element.
    pub fn element_weight(&self) -> f64 {
        let h = self.spacing();
        match self.dim {
            1 => h,
            _ => 0.5 * h * h,
        }
    }

    /// Quadrature weight `h^N` of a node.
    pub fn node_weight(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Coordinates of interior node `i` (row-major, first axis slowest).
    pub fn node(&self, i: usize) -> Vec<f64> {
        let h = self.spacing();
        match self.dim {
            1 => vec![(i + 1) as f64 * h],
            _ => vec![(i / self.m + 1) as f64 * h, (i % self.m + 1) as f64 * h],
        }
    }

    pub fn centroid(&self, e: usize) -> Vec<f64> {
        let h = self.spacing();
        match self.dim {
            1 => vec![(e as f64 + 0.5) * h],
            _ => {
                let (sq, t) = (e / 2, e % 2);
                let (i, j) = (sq / (self.m + 1), sq % (self.m + 1));
                let o = if t == 0 { 1.0 / 3.0 } else { 2.0 / 3.0 };
                vec![(i as f64 + o) * h, (j as f64 + o) * h]
            }
        }
    }

    /// Value at grid point `(i, j)` of the full node lattice, zero on the boundary.
    fn at(&self, u: &[f64], i: usize, j: usize) -> f64 {
        if i == 0 || j == 0 || i > self.m || j > self.m {
            0.0
        } else {
            u[(i - 1) * self.m + (j - 1)]
        }
    }

    fn at1(&self, u: &[f64], i: usize) -> f64 {
        if i == 0 || i > self.m {
            0.0
        } else {
            u[i - 1]
        }
    }

    /// Elementwise gradient, `N` components per element.
    pub fn gradient(&self, u: &[f64]) -> Vec<f64> {
        let h = self.spacing();
        let n = self.m + 1;
        match self.dim {
            1 => (0..n).map(|e| (self.at1(u, e + 1) - self.at1(u, e)) / h).collect(),
            _ => {
                let mut g = vec![0.0; 2 * self.elements()];
                for i in 0..n {
                    for j in 0..n {
                        let e = 2 * (i * n + j);
                        let (c, r, t, rt) = (self.at(u, i, j), self.at(u, i + 1, j), self.at(u, i, j + 1), self.at(u, i + 1, j + 1));
                        g[2 * e] = (r - c) / h;
                        g[2 * e + 1] = (t - c) / h;
                        g[2 * e + 2] = (rt - t) / h;
                        g[2 * e + 3] = (rt - r) / h;
                    }
                }
                g
            }
        }
    }

    /// `G^T W f`: the transpose of [`Self::gradient`] weighted by element measure.
    pub fn gradient_adjoint(&self, f: &[f64]) -> Vec<f64> {
        let h = self.spacing();
        let w = self.element_weight() / h;
        let n = self.m + 1;
        let mut out = vec![0.0; self.nodes()];
        match self.dim {
            1 => {
                for e in 0..n {
                    if e >= 1 {
                        out[e - 1] -= w * f[e];
                    }
                    if e < self.m {
                        out[e] += w * f[e];
                    }
                }
            }
            _ => {
                let m = self.m;
                let mut add = |i: usize, j: usize, v: f64| {
                    if i >= 1 && j >= 1 && i <= m && j <= m {
                        out[(i - 1) * m + (j - 1)] += v;
                    }
                };
                for i in 0..n {
                    for j in 0..n {
                        let e = 2 * (i * n + j);
                        let (fx, fy, gx, gy) = (f[2 * e], f[2 * e + 1], f[2 * e + 2], f[2 * e + 3]);
                        add(i, j, -w * (fx + fy));
                        add(i + 1, j, w * (fx - gy));
                        add(i, j + 1, w * (fy - gx));
                        add(i + 1, j + 1, w * (gx + gy));
                    }
                }
            }
        }
        out
    }

    /// Discrete divergence `-(G^T W f) / h^N` at the interior nodes.
    pub fn divergence(&self, f: &[f64]) -> Vec<f64> {
        let s = self.node_weight();
        self.gradient_adjoint(f).into_iter().map(|v| -v / s).collect()
    }

    /// Apply `r(K)` for a function `r` of the stiffness eigenvalues, where
    /// `K = G^T W G = h^(N-2) (5-point Laplacian)`.
    pub fn spectral(&self, v: &[f64], r: impl Fn(f64) -> f64) -> Vec<f64> {
        let scale = self.spacing().powi(self.dim as i32 - 2);
        self.sine.solve(self.dim, v, |ev| 1.0 / r(scale * ev.iter().sum::<f64>()))
    }

    /// `K^-1 v`.
    pub fn solve_stiffness(&self, v: &[f64]) -> Vec<f64> {
        self.spectral(v, |k| 1.0 / k)
    }

    /// Weighted node inner product `h^N sum u v`.
    pub fn node_dot(&self, u: &[f64], v: &[f64]) -> f64 {
        self.node_weight() * u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn node_norm(&self, u: &[f64]) -> f64 {
        self.node_dot(u, u).sqrt()
    }

    /// Weighted element inner product of `N`-component fields.
    pub fn element_dot(&self, f: &[f64], g: &[f64]) -> f64 {
        self.element_weight() * f.iter().zip(g).map(|(a, b)| a * b).sum::<f64>()
    }
}

/// An elementwise flux with its discrete divergence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FluxField {
    /// `N` components per element.
    pub values: Vec<f64>,
    pub divergence: Vec<f64>,
}

impl FluxField {
    pub fn new(mesh: &DirichletMesh, values: Vec<f64>) -> Self {
        let divergence = mesh.divergence(&values);
        FluxField { values, divergence }
    }

    /// `max |stored divergence - recomputed divergence|`.
    pub fn consistency(&self, mesh: &DirichletMesh) -> f64 {
        mesh.divergence(&self.values).iter().zip(&self.divergence).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// `max |div f + u*|`.
    pub fn residual(&self, u_star: &[f64]) -> f64 {
        self.divergence.iter().zip(u_star).map(|(d, s)| (d + s).abs()).fold(0.0, f64::max)
    }
}

/// The gradient flux `f0 = G w` with `K w = h^N u*`, so `-div f0 = u*`.
/// In 1D this is the zero-mean antiderivative of `-u*`.
pub fn particular_flux(mesh: &DirichletMesh, u_star: &[f64]) -> Result<FluxField> {
    if u_star.len() != mesh.nodes() {
        return Err(Error::GridMismatch(format!("source of length {} on {} nodes", u_star.len(), mesh.nodes())));
    }
    let s = mesh.node_weight();
    let rhs: Vec<f64> = u_star.iter().map(|v| v * s).collect();
    let w = mesh.solve_stiffness(&rhs);
    Ok(FluxField::new(mesh, mesh.gradient(&w)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integration_by_parts_and_stiffness() {
        for dim in [1, 2] {
            let mesh = DirichletMesh::new(dim, 9).unwrap();
            let u: Vec<f64> = (0..mesh.nodes()).map(|i| (i as f64 * 1.3).sin()).collect();
            let f: Vec<f64> = (0..dim * mesh.elements()).map(|i| (i as f64 * 0.37).cos()).collect();
            let lhs = mesh.element_dot(&mesh.gradient(&u), &f);
            let rhs = -mesh.node_dot(&u, &mesh.divergence(&f));
            assert!((lhs - rhs).abs() < 1e-12, "{lhs} {rhs}");
            // K^-1 inverts G^T W G
            let ku = mesh.gradient_adjoint(&mesh.gradient(&u));
            let back = mesh.solve_stiffness(&ku);
            assert!(back.iter().zip(&u).all(|(a, b)| (a - b).abs() < 1e-10));
        }
    }

    #[test]
    fn particular_flux_1d() {
        let mesh = DirichletMesh::new(1, 63).unwrap();
        let f = particular_flux(&mesh, &vec![1.0; 63]).unwrap();
        for e in 0..mesh.elements() {
            assert!((f.values[e] - (0.5 - mesh.centroid(e)[0])).abs() < 1e-10);
        }
        assert!(f.residual(&vec![1.0; 63]) < 1e-10);
        let z = particular_flux(&mesh, &vec![0.0; 63]).unwrap();
        assert!(z.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn particular_flux_2d() {
        let mesh = DirichletMesh::new(2, 31).unwrap();
        let pi = std::f64::consts::PI;
        let s: Vec<f64> = (0..mesh.nodes()).map(|i| mesh.node(i)).map(|x| (pi * x[0]).sin() * (pi * x[1]).sin()).collect();
        let f = particular_flux(&mesh, &s).unwrap();
        assert!(f.residual(&s) < 1e-10 && f.consistency(&mesh) == 0.0);
    }
}
