//! Alternating direction method of multipliers for
//! `min sum_e w_e L_e(z_e)` over an affine subspace, with the subspace
//! handled by an exact projection.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::integrand::ConvexIntegrand;

/// Orthogonal projection onto an affine subspace, in the inner product
/// weighted by the block weights of the objective.
pub trait AffineProjector: Sync {
    fn project(&self, v: &[f64], out: &mut [f64]);
}

/// `sum_e w_e (L_e(z_e) - <c_e, z_e>)` over equal-length blocks `z_e`; the
/// linear part `c` is optional.
#[derive(Clone)]
pub struct BlockObjective {
    pub block: usize,
    pub integrands: Vec<Arc<dyn ConvexIntegrand>>,
    pub weights: Vec<f64>,
    pub linear: Option<Vec<f64>>,
}

impl BlockObjective {
    pub fn new(block: usize, integrands: Vec<Arc<dyn ConvexIntegrand>>, weights: Vec<f64>) -> Self {
        assert_eq!(integrands.len(), weights.len());
        BlockObjective {
            block,
            integrands,
            weights,
            linear: None,
        }
    }

    pub fn with_linear(mut self, c: Vec<f64>) -> Self {
        assert_eq!(c.len(), self.len());
        self.linear = Some(c);
        self
    }

    pub fn len(&self) -> usize {
        self.integrands.len() * self.block
    }

    pub fn is_empty(&self) -> bool {
        self.integrands.is_empty()
    }

    pub fn value(&self, z: &[f64]) -> f64 {
        let smooth: f64 = z
            .par_chunks(self.block)
            .zip(self.integrands.par_iter().zip(self.weights.par_iter()))
            .map(|(ze, (l, w))| w * l.value(ze))
            .sum();
        match &self.linear {
            None => smooth,
            Some(c) => {
                smooth
                    - z.chunks(self.block)
                        .zip(c.chunks(self.block))
                        .zip(&self.weights)
                        .map(|((ze, ce), w)| w * ze.iter().zip(ce).map(|(a, b)| a * b).sum::<f64>())
                        .sum::<f64>()
            }
        }
    }

    /// Blockwise `argmin L_e(z) - <c_e, z> + rho |z - v|^2 / 2`.
    pub fn prox(&self, v: &[f64], rho: f64, out: &mut [f64]) {
        let t = 1.0 / rho;
        match &self.linear {
            None => out
                .par_chunks_mut(self.block)
                .zip(v.par_chunks(self.block))
                .zip(self.integrands.par_iter())
                .for_each(|((o, ve), l)| l.prox(ve, t, o)),
            Some(c) => out
                .par_chunks_mut(self.block)
                .zip(v.par_chunks(self.block).zip(c.par_chunks(self.block)))
                .zip(self.integrands.par_iter())
                .for_each(|((o, (ve, ce)), l)| {
                    let moved: Vec<f64> = ve.iter().zip(ce).map(|(x, y)| x + t * y).collect();
                    l.prox(&moved, t, o)
                }),
        }
    }

    /// Weighted root-mean-square norm.
    pub fn wrms(&self, v: &[f64]) -> f64 {
        let total: f64 = self.weights.iter().sum();
        let s: f64 = v
            .chunks(self.block)
            .zip(&self.weights)
            .map(|(c, w)| w * c.iter().map(|x| x * x).sum::<f64>())
            .sum();
        (s / total).sqrt()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdmmOptions {
    pub rho: f64,
    pub max_iter: usize,
    /// Stop when both residuals fall below `tol`.
    pub tol: f64,
    /// Rebalance `rho` every `adapt_every` iterations (0 disables).
    pub adapt_every: usize,
}

impl Default for AdmmOptions {
    fn default() -> Self {
        AdmmOptions {
            rho: 1.0,
            max_iter: 20_000,
            tol: 1e-8,
            adapt_every: 10,
        }
    }
}

/// Iterates and diagnostics of a run.
#[derive(Clone, Debug)]
pub struct AdmmResult {
    /// Feasible iterate (in the affine subspace).
    pub x: Vec<f64>,
    /// Prox iterate.
    pub z: Vec<f64>,
    /// Scaled multiplier.
    pub u: Vec<f64>,
    pub rho: f64,
    /// Input `x - u` of the last prox step and the `rho` it used.
    pub prox_input: Vec<f64>,
    pub prox_rho: f64,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    /// `max(primal, dual)` every iteration.
    pub history: Vec<f64>,
    pub converged: bool,
}

impl AdmmResult {
    pub fn kkt_residual(&self) -> f64 {
        self.primal_residual.max(self.dual_residual)
    }

    /// Blockwise subgradients `rho (v - z) in d(L_e - <c_e, .>)(z_e)` from
    /// the last prox step `z = prox(v)`.
    pub fn subgradients(&self) -> Vec<f64> {
        self.prox_input.iter().zip(&self.z).map(|(v, z)| self.prox_rho * (v - z)).collect()
    }
}

/// Warm-start data.
#[derive(Clone, Debug)]
pub struct AdmmStart {
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub rho: f64,
}

/// Run the method from `start` (or from the projection of zero).
/// `stop(iteration, x)` may end the run early with success.
pub fn admm(
    f: &BlockObjective,
    proj: &dyn AffineProjector,
    opts: &AdmmOptions,
    start: Option<AdmmStart>,
    stop: Option<&dyn Fn(usize, &[f64]) -> bool>,
) -> AdmmResult {
    let n = f.len();
    let (mut x, mut u, mut rho) = match start {
        Some(s) if s.x.len() == n => (s.x, s.u, s.rho),
        _ => {
            let mut x = vec![0.0; n];
            proj.project(&vec![0.0; n], &mut x);
            (x, vec![0.0; n], opts.rho)
        }
    };
    let mut z = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut prox_rho = rho;
    let mut x_prev = x.clone();
    let mut history = Vec::new();
    let mut primal = f64::INFINITY;
    let mut dual = f64::INFINITY;
    let mut diff = vec![0.0; n];
    for it in 1..=opts.max_iter {
        for i in 0..n {
            v[i] = x[i] - u[i];
        }
        f.prox(&v, rho, &mut z);
        prox_rho = rho;
        x_prev.copy_from_slice(&x);
        for i in 0..n {
            w[i] = z[i] + u[i];
        }
        proj.project(&w, &mut x);
        for i in 0..n {
            u[i] += z[i] - x[i];
            diff[i] = z[i] - x[i];
        }
        primal = f.wrms(&diff);
        for i in 0..n {
            diff[i] = x[i] - x_prev[i];
        }
        dual = rho * f.wrms(&diff);
        history.push(primal.max(dual));
        let done = primal <= opts.tol && dual <= opts.tol;
        if done || stop.map_or(false, |s| s(it, &x)) {
            return AdmmResult {
                x,
                z,
                u,
                rho,
                prox_input: v,
                prox_rho,
                iterations: it,
                primal_residual: primal,
                dual_residual: dual,
                history,
                converged: true,
            };
        }
        if opts.adapt_every > 0 && it % opts.adapt_every == 0 {
            let factor = if primal > 10.0 * dual {
                2.0
            } else if dual > 10.0 * primal {
                0.5
            } else {
                1.0
            };
            if factor != 1.0 {
                rho *= factor;
                u.iter_mut().for_each(|w| *w /= factor);
            }
        }
    }
    AdmmResult {
        x,
        z,
        u,
        rho,
        prox_input: v,
        prox_rho,
        iterations: opts.max_iter,
        primal_residual: primal,
        dual_residual: dual,
        history,
        converged: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrand::{ConvexPotential, PotentialIntegrand};

    /// `{z : z_0 + z_1 = 2}` in R^2 blocks of length 1.
    struct Line;

    impl AffineProjector for Line {
        fn project(&self, v: &[f64], out: &mut [f64]) {
            let s = (v[0] + v[1] - 2.0) / 2.0;
            out[0] = v[0] - s;
            out[1] = v[1] - s;
        }
    }

    #[test]
    fn weighted_quadratics_on_a_line() {
        // min w0 c0 z0^2/2 + w1 c1 z1^2/2 s.t. z0 + z1 = 2 with equal weights:
        // z0 = 2 c1 / (c0 + c1)
        let l0: Arc<dyn ConvexIntegrand> = Arc::new(PotentialIntegrand(ConvexPotential::power(1.0, 2.0).unwrap(), 1));
        let l1: Arc<dyn ConvexIntegrand> = Arc::new(PotentialIntegrand(ConvexPotential::power(3.0, 2.0).unwrap(), 1));
        let f = BlockObjective::new(1, vec![l0, l1], vec![0.5, 0.5]);
        let r = admm(&f, &Line, &AdmmOptions::default(), None, None);
        assert!(r.converged);
        assert!((r.x[0] - 1.5).abs() < 1e-7 && (r.x[1] - 0.5).abs() < 1e-7, "{:?}", r.x);
        // multipliers are equal at the optimum: c0 z0 = c1 z1 = 1.5
        let y = r.subgradients();
        assert!((y[0] - 1.5).abs() < 1e-6 && (y[1] - 1.5).abs() < 1e-6, "{y:?}");
    }
}
