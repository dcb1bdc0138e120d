use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::mesh::DirichletMesh;
use super::solve::{lifted_value, LiftedLagrangian, SolveOptions};
use crate::error::{Error, Result};
use crate::integrand::{ConvexIntegrand, QuadraticForm};
use crate::splitting::{admm, AdmmOptions, AffineProjector, BlockObjective};

/// A point moved onto the graph of a selfdual Lagrangian, with the
/// certified distance and value bounds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BrlResult {
    pub u: Vec<f64>,
    pub u_star: Vec<f64>,
    /// Gap `L(u0, u0*) - <u0, u0*>` of the starting point.
    pub eps: f64,
    pub distance: f64,
    pub distance_star: f64,
    /// Distance in the product norm, `sqrt(distance^2 + distance_star^2)`.
    pub pair_distance: f64,
    /// `|L(u, u*) - L(u0, u0*)|`.
    pub value_change: f64,
    /// `2 eps + sqrt(eps) (|u0| + |u0*|)`.
    pub value_bound: f64,
    /// Gap of the returned point.
    pub final_gap: f64,
}

impl BrlResult {
    /// Both distances within `sqrt(eps) + tol` and the value change within
    /// its bound plus `tol`.
    pub fn within_bounds(&self, tol: f64) -> bool {
        let r = self.eps.max(0.0).sqrt() + tol;
        self.distance <= r && self.distance_star <= r && self.value_change <= self.value_bound + tol
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Finite-dimensional projection: minimize
/// `L(u0 + v, u0* - v) - <v, u0*> + <u0, v> + |v|^2` by damped Newton steps
/// and return `(u0 + v, u0* - v)`.
pub fn brl_project_point(l: &dyn ConvexIntegrand, u0: &[f64], u0_star: &[f64]) -> Result<BrlResult> {
    let d = u0.len();
    if u0_star.len() != d || l.arity() != 2 * d {
        return Err(Error::invalid("point and Lagrangian dimensions disagree"));
    }
    let pair = |v: &[f64]| -> Vec<f64> { u0.iter().zip(v).map(|(a, b)| a + b).chain(u0_star.iter().zip(v).map(|(a, b)| a - b)).collect() };
    let phi = |v: &[f64]| l.value(&pair(v)) - dot(v, u0_star) + dot(u0, v) + dot(v, v);
    let mut v = vec![0.0; d];
    let mut g = vec![0.0; 2 * d];
    let mut h = vec![0.0; 4 * d * d];
    for _ in 0..200 {
        let z = pair(&v);
        l.gradient(&z, &mut g);
        l.hessian(&z, &mut h);
        let grad = DVector::from_fn(d, |i, _| g[i] - g[d + i] - u0_star[i] + u0[i] + 2.0 * v[i]);
        if grad.amax() < 1e-14 {
            break;
        }
        let hess = DMatrix::from_fn(d, d, |i, j| {
            let at = |r: usize, c: usize| h[r * 2 * d + c];
            at(i, j) - at(i, d + j) - at(d + i, j) + at(d + i, d + j) + if i == j { 2.0 } else { 0.0 }
        });
        let step = hess.cholesky().map(|c| c.solve(&grad)).unwrap_or_else(|| grad.clone() * 0.5);
        let f0 = phi(&v);
        let mut t = 1.0;
        loop {
            let trial: Vec<f64> = v.iter().zip(step.iter()).map(|(a, s)| a - t * s).collect();
            if phi(&trial) <= f0 || t < 1e-12 {
                v = trial;
                break;
            }
            t *= 0.5;
        }
    }
    let u: Vec<f64> = u0.iter().zip(&v).map(|(a, b)| a + b).collect();
    let us: Vec<f64> = u0_star.iter().zip(&v).map(|(a, b)| a - b).collect();
    let mut z0 = u0.to_vec();
    z0.extend_from_slice(u0_star);
    let mut z1 = u.clone();
    z1.extend_from_slice(&us);
    let eps = l.value(&z0) - dot(u0, u0_star);
    let n = dot(&v, &v).sqrt();
    Ok(BrlResult {
        eps,
        distance: n,
        distance_star: n,
        pair_distance: n * 2f64.sqrt(),
        value_change: (l.value(&z1) - l.value(&z0)).abs(),
        value_bound: 2.0 * eps + eps.max(0.0).sqrt() * (dot(u0, u0).sqrt() + dot(u0_star, u0_star).sqrt()),
        final_gap: l.value(&z1) - dot(&u, &us),
        u,
        u_star: us,
    })
}

/// Projection onto `{a = G(u0 + v), -div b = u0* - v, padding = 0}` for
/// element blocks `(a, b)` followed by node blocks `(v, 0, ..)`.
struct BrlProjector<'a> {
    mesh: &'a DirichletMesh,
    u0: Vec<f64>,
    u0_star: Vec<f64>,
}

impl AffineProjector for BrlProjector<'_> {
    fn project(&self, x: &[f64], out: &mut [f64]) {
        let mesh = self.mesh;
        let n = mesh.dim;
        let k = mesh.elements();
        let s = mesh.node_weight();
        let (mut a, mut b) = (Vec::with_capacity(n * k), Vec::with_capacity(n * k));
        for blk in x[..2 * n * k].chunks(2 * n) {
            a.extend_from_slice(&blk[..n]);
            b.extend_from_slice(&blk[n..]);
        }
        let v_hat: Vec<f64> = x[2 * n * k..].chunks(2 * n).map(|c| c[0]).collect();
        let gta = mesh.gradient_adjoint(&a);
        let gtb = mesh.gradient_adjoint(&b);
        let ku0 = mesh.gradient_adjoint(&mesh.gradient(&self.u0));
        let kinv_us = mesh.solve_stiffness(&self.u0_star);
        let kinv_gtb = mesh.solve_stiffness(&gtb);
        let rhs: Vec<f64> = (0..mesh.nodes()).map(|i| gta[i] - ku0[i] + s * s * kinv_us[i] - s * kinv_gtb[i] + s * v_hat[i]).collect();
        let v = mesh.spectral(&rhs, |kk| 1.0 / (kk + s * s / kk + s));
        let u: Vec<f64> = self.u0.iter().zip(&v).map(|(p, q)| p + q).collect();
        let pa = mesh.gradient(&u);
        let corr: Vec<f64> = (0..mesh.nodes()).map(|i| s * (self.u0_star[i] - v[i]) - gtb[i]).collect();
        let gb = mesh.gradient(&mesh.solve_stiffness(&corr));
        for e in 0..k {
            for c in 0..n {
                out[2 * n * e + c] = pa[e * n + c];
                out[2 * n * e + n + c] = b[e * n + c] + gb[e * n + c];
            }
        }
        for (i, blk) in out[2 * n * k..].chunks_mut(2 * n).enumerate() {
            blk.fill(0.0);
            blk[0] = v[i];
        }
    }
}

/// Lifted projection: solve `min_v M(v, -v) + |v|^2` for
/// `M(v, v*) = F(u0 + v, u0* + v*) - <v, u0*> - <u0, v*> - <u0, u0*>` and
/// return `(u0 + v, u0* - v)`. Norms are the `h^N`-weighted Euclidean ones.
pub fn brl_project(lifted: &LiftedLagrangian, u0: &[f64], u0_star: &[f64], opts: &SolveOptions) -> Result<BrlResult> {
    let mesh = &lifted.mesh;
    let nodes = mesh.nodes();
    if u0.len() != nodes || u0_star.len() != nodes {
        return Err(Error::GridMismatch("points must live on the interior nodes".into()));
    }
    let n = mesh.dim;
    let k = mesh.elements();
    let mut diag = DMatrix::identity(2 * n, 2 * n);
    diag[(0, 0)] = 2.0;
    let node_term: Arc<dyn ConvexIntegrand> = Arc::new(QuadraticForm::new(diag, DVector::zeros(2 * n), 0.0)?);
    let mut integrands = lifted.integrands.clone();
    integrands.extend(std::iter::repeat(node_term).take(nodes));
    let mut weights = vec![mesh.element_weight(); k];
    weights.extend(std::iter::repeat(mesh.node_weight()).take(nodes));
    let mut c = vec![0.0; 2 * n * (k + nodes)];
    for i in 0..nodes {
        c[2 * n * (k + i)] = u0_star[i] - u0[i];
    }
    let f = BlockObjective::new(2 * n, integrands, weights).with_linear(c);
    let proj = BrlProjector {
        mesh,
        u0: u0.to_vec(),
        u0_star: u0_star.to_vec(),
    };
    let admm_opts = AdmmOptions {
        rho: 1.0,
        max_iter: opts.max_iter,
        tol: opts.kkt_tol,
        adapt_every: 10,
    };
    let r = admm(&f, &proj, &admm_opts, None, None);
    if !r.converged {
        return Err(Error::SolverStalled {
            point: Vec::new(),
            iterations: r.iterations,
            residual: r.kkt_residual(),
            history: r.history,
        });
    }
    let v: Vec<f64> = r.x[2 * n * k..].chunks(2 * n).map(|c| c[0]).collect();
    let u: Vec<f64> = u0.iter().zip(&v).map(|(a, b)| a + b).collect();
    let us: Vec<f64> = u0_star.iter().zip(&v).map(|(a, b)| a - b).collect();
    let (f_start, _) = lifted_value(lifted, u0, u0_star, opts)?;
    let (f_end, _) = lifted_value(lifted, &u, &us, opts)?;
    let eps = f_start - mesh.node_dot(u0, u0_star);
    let dist = mesh.node_norm(&v);
    Ok(BrlResult {
        eps,
        distance: dist,
        distance_star: dist,
        pair_distance: dist * 2f64.sqrt(),
        value_change: (f_end - f_start).abs(),
        value_bound: 2.0 * eps + eps.max(0.0).sqrt() * (mesh.node_norm(u0) + mesh.node_norm(u0_star)),
        final_gap: f_end - mesh.node_dot(&u, &us),
        u,
        u_star: us,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dirichlet::solve_dirichlet;
    use crate::fields::{potential_lagrangian, RegionMap};
    use crate::integrand::ConvexPotential;

    #[test]
    fn hand_solved_point() {
        let l = QuadraticForm::new(DMatrix::identity(2, 2), DVector::zeros(2), 0.0).unwrap();
        let r = brl_project_point(&l, &[1.0], &[0.0]).unwrap();
        assert_eq!((r.u[0], r.u_star[0]), (0.5, 0.5));
        assert!((r.pair_distance - 0.5f64.sqrt()).abs() < 1e-15 && r.eps == 0.5 && r.distance == 0.5);
        let on = brl_project_point(&l, &[0.3], &[0.3]).unwrap();
        assert_eq!(on.distance, 0.0);
    }

    #[test]
    fn lifted_projection_of_perturbed_solution() {
        let parts = vec![
            (ConvexPotential::power(1.0, 2.0).unwrap(), None),
            (ConvexPotential::power(4.0, 2.0).unwrap(), None),
        ];
        let l = potential_lagrangian(RegionMap::halves(1, 0), parts, None, 8.0).unwrap();
        let mesh = DirichletMesh::new(1, 31).unwrap();
        let src = vec![1.0; 31];
        let sol = solve_dirichlet(&l, 0.25, &mesh, &src, &SolveOptions::default()).unwrap();
        let lifted = LiftedLagrangian::new(&l, &mesh, 0.25).unwrap();
        let u0: Vec<f64> = sol.u.iter().enumerate().map(|(i, u)| u + 0.01 * (i as f64).sin()).collect();
        let us0: Vec<f64> = src.iter().enumerate().map(|(i, s)| s + 0.2 * (i as f64 * 0.3).cos()).collect();
        let r = brl_project(&lifted, &u0, &us0, &SolveOptions::default()).unwrap();
        assert!(r.eps > 0.0 && r.within_bounds(1e-8), "{r:?}");
        assert!(r.final_gap.abs() < 1e-8, "{}", r.final_gap);
    }
}
