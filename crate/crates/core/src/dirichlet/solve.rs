use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::mesh::{particular_flux, DirichletMesh, FluxField};
use crate::error::{Error, Result};
use crate::fields::OmegaLagrangian;
use crate::integrand::ConvexIntegrand;
use crate::splitting::{admm, AdmmOptions, AffineProjector, BlockObjective};

/// Stopping rule of the Dirichlet solver.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    /// Certificate threshold: a solve succeeds when its gap is below this.
    pub tol_solve: f64,
    /// Optional early exit once the gap falls below this. The gap bounds the
    /// gradient error only through its square root, so the default stops on
    /// the splitting residuals alone.
    pub stop_gap: Option<f64>,
    /// Stop when both splitting residuals fall below this.
    pub kkt_tol: f64,
    pub max_iter: usize,
    /// Gap evaluation period.
    pub check_every: usize,
}

impl SolveOptions {
    /// `1e-6` for quadratic Lagrangians, `1e-4` otherwise.
    pub fn for_lagrangian(l: &OmegaLagrangian) -> Self {
        if l.bounds.as_ref().map_or(false, |b| b.p == 2.0) {
            Self::quadratic()
        } else {
            Self::power()
        }
    }

    pub fn quadratic() -> Self {
        SolveOptions {
            tol_solve: 1e-6,
            stop_gap: None,
            kkt_tol: 1e-11,
            max_iter: 200_000,
            check_every: 10,
        }
    }

    pub fn power() -> Self {
        SolveOptions {
            tol_solve: 1e-4,
            stop_gap: None,
            kkt_tol: 1e-9,
            max_iter: 200_000,
            check_every: 10,
        }
    }
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self::quadratic()
    }
}

/// Result of a Dirichlet solve.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolverReport {
    /// Interior nodal values.
    pub u: Vec<f64>,
    pub f: FluxField,
    /// `I(u) = sum_T |T| (L(x, grad u, f) - <grad u, f>)`.
    pub gap: f64,
    /// `sum_T |T| L(x, grad u, f)`.
    pub energy: f64,
    /// Largest pointwise gap `L - <grad u, f>` over elements.
    pub max_pointwise_gap: f64,
    /// `max |div f + u*|`.
    pub flux_residual: f64,
    pub iterations: usize,
    pub kkt_residual: f64,
    pub wall_time_ms: u128,
}

/// A selfdual Lagrangian lifted to a mesh: one integrand per element,
/// evaluated at the element centroid, with `x` rescaled by `1/eps`.
#[derive(Clone)]
pub struct LiftedLagrangian {
    pub mesh: DirichletMesh,
    pub integrands: Vec<Arc<dyn ConvexIntegrand>>,
}

impl LiftedLagrangian {
    pub fn new(l: &OmegaLagrangian, mesh: &DirichletMesh, eps: f64) -> Result<Self> {
        if l.dim != mesh.dim {
            return Err(Error::GridMismatch(format!("Lagrangian of dimension {} on a {}-dimensional mesh", l.dim, mesh.dim)));
        }
        if !(eps > 0.0) {
            return Err(Error::invalid("eps must be positive"));
        }
        let integrands = (0..mesh.elements())
            .map(|e| {
                let y: Vec<f64> = mesh.centroid(e).iter().map(|x| x / eps).collect();
                l.integrands[l.region_at(&y)].clone()
            })
            .collect();
        Ok(LiftedLagrangian { mesh: mesh.clone(), integrands })
    }

    /// Elementwise integrands supplied directly.
    pub fn from_elements(mesh: &DirichletMesh, integrands: Vec<Arc<dyn ConvexIntegrand>>) -> Result<Self> {
        if integrands.len() != mesh.elements() || integrands.iter().any(|f| f.arity() != 2 * mesh.dim) {
            return Err(Error::invalid("one (a, b) integrand per element is required"));
        }
        Ok(LiftedLagrangian { mesh: mesh.clone(), integrands })
    }

    /// `sum_T |T| L_T(a_T, b_T)` and the largest pointwise gap.
    pub fn energy(&self, grad: &[f64], flux: &[f64]) -> (f64, f64, f64) {
        let n = self.mesh.dim;
        let w = self.mesh.element_weight();
        let mut z = vec![0.0; 2 * n];
        let (mut energy, mut gap, mut worst) = (0.0, 0.0, f64::NEG_INFINITY);
        for (e, l) in self.integrands.iter().enumerate() {
            z[..n].copy_from_slice(&grad[e * n..(e + 1) * n]);
            z[n..].copy_from_slice(&flux[e * n..(e + 1) * n]);
            let v = l.value(&z);
            let pg = v - (0..n).map(|k| z[k] * z[n + k]).sum::<f64>();
            energy += w * v;
            gap += w * pg;
            worst = worst.max(pg);
        }
        (energy, gap, worst)
    }

    fn objective(&self) -> BlockObjective {
        let k = self.integrands.len();
        BlockObjective::new(2 * self.mesh.dim, self.integrands.clone(), vec![self.mesh.element_weight(); k])
    }
}

/// Projection onto `{(a, b) : a = grad u or a = a_fixed, -div b = u*}`,
/// blocks `(a_T, b_T)`.
struct LiftProjector<'a> {
    mesh: &'a DirichletMesh,
    f0: Vec<f64>,
    fixed_a: Option<Vec<f64>>,
}

impl AffineProjector for LiftProjector<'_> {
    fn project(&self, v: &[f64], out: &mut [f64]) {
        let n = self.mesh.dim;
        let k = self.mesh.elements();
        let mut a = vec![0.0; n * k];
        let mut b = vec![0.0; n * k];
        for e in 0..k {
            a[e * n..(e + 1) * n].copy_from_slice(&v[2 * n * e..2 * n * e + n]);
            b[e * n..(e + 1) * n].copy_from_slice(&v[2 * n * e + n..2 * n * (e + 1)]);
        }
        // b - G K^-1 G^T W (b - f0) keeps the divergence of f0
        let d: Vec<f64> = b.iter().zip(&self.f0).map(|(x, y)| x - y).collect();
        let gb = self.mesh.gradient(&self.mesh.solve_stiffness(&self.mesh.gradient_adjoint(&d)));
        let pa = match &self.fixed_a {
            Some(fixed) => fixed.clone(),
            None => self.mesh.gradient(&self.mesh.solve_stiffness(&self.mesh.gradient_adjoint(&a))),
        };
        for e in 0..k {
            for c in 0..n {
                out[2 * n * e + c] = pa[e * n + c];
                out[2 * n * e + n + c] = b[e * n + c] - gb[e * n + c];
            }
        }
    }
}

fn split(x: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut a = Vec::with_capacity(x.len() / 2);
    let mut b = Vec::with_capacity(x.len() / 2);
    for blk in x.chunks(2 * n) {
        a.extend_from_slice(&blk[..n]);
        b.extend_from_slice(&blk[n..]);
    }
    (a, b)
}

fn interleave(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    a.chunks(n).zip(b.chunks(n)).flat_map(|(x, y)| x.iter().chain(y).copied()).collect()
}

/// Run the splitting with gap-based stopping. Returns the final feasible
/// iterate and diagnostics.
fn run(
    lifted: &LiftedLagrangian,
    proj: &LiftProjector,
    f: &BlockObjective,
    opts: &SolveOptions,
) -> (Vec<f64>, usize, f64, bool, Vec<f64>) {
    let n = lifted.mesh.dim;
    let history = std::cell::RefCell::new(Vec::new());
    let stop = |it: usize, x: &[f64]| {
        if it % opts.check_every != 0 {
            return false;
        }
        let (a, b) = split(x, n);
        let (_, gap, _) = lifted.energy(&a, &b);
        history.borrow_mut().push(gap);
        opts.stop_gap.map_or(false, |g| gap <= g)
    };
    let admm_opts = AdmmOptions {
        rho: 1.0,
        max_iter: opts.max_iter,
        tol: opts.kkt_tol,
        adapt_every: 10,
    };
    let r = admm(f, proj, &admm_opts, None, Some(&stop));
    let kkt = r.kkt_residual();
    (r.x, r.iterations, kkt, r.converged, history.into_inner())
}

/// `F(u, u*) = min sum_T |T| L(x, grad u, f)` over fluxes with `-div f = u*`,
/// for the lifted Lagrangian.
pub fn lifted_value(lifted: &LiftedLagrangian, u: &[f64], u_star: &[f64], opts: &SolveOptions) -> Result<(f64, FluxField)> {
    let mesh = &lifted.mesh;
    if u.len() != mesh.nodes() {
        return Err(Error::GridMismatch(format!("u of length {} on {} nodes", u.len(), mesh.nodes())));
    }
    let f0 = particular_flux(mesh, u_star)?;
    let grad = mesh.gradient(u);
    let proj = LiftProjector {
        mesh,
        f0: f0.values.clone(),
        fixed_a: Some(grad.clone()),
    };
    let admm_opts = AdmmOptions {
        rho: 1.0,
        max_iter: opts.max_iter,
        tol: opts.kkt_tol,
        adapt_every: 10,
    };
    let r = admm(&lifted.objective(), &proj, &admm_opts, None, None);
    if !r.converged {
        return Err(Error::SolverStalled {
            point: Vec::new(),
            iterations: r.iterations,
            residual: r.kkt_residual(),
            history: r.history,
        });
    }
    let (_, b) = split(&r.x, mesh.dim);
    let (energy, _, _) = lifted.energy(&grad, &b);
    Ok((energy, FluxField::new(mesh, b)))
}

/// Minimize `I(u) = F(u, u*) - <u, u*>` jointly over `u` and the flux.
pub fn solve_dirichlet(l: &OmegaLagrangian, eps: f64, mesh: &DirichletMesh, u_star: &[f64], opts: &SolveOptions) -> Result<SolverReport> {
    if l.growth.is_none() && l.bounds.is_none() {
        return Err(Error::CoercivityMissing);
    }
    let lifted = LiftedLagrangian::new(l, mesh, eps)?;
    solve_lifted(&lifted, u_star, opts)
}

/// [`solve_dirichlet`] for an already lifted Lagrangian.
pub fn solve_lifted(lifted: &LiftedLagrangian, u_star: &[f64], opts: &SolveOptions) -> Result<SolverReport> {
    let start = Instant::now();
    let mesh = &lifted.mesh;
    let n = mesh.dim;
    let f0 = particular_flux(mesh, u_star)?;
    // the linear term -<u, u*> equals -<grad u, f0> on the feasible set
    let c = interleave(&f0.values, &vec![0.0; f0.values.len()], n);
    let f = lifted.objective().with_linear(c);
    let proj = LiftProjector {
        mesh,
        f0: f0.values.clone(),
        fixed_a: None,
    };
    let (x, iterations, kkt, converged, history) = run(lifted, &proj, &f, opts);
    let (a, b) = split(&x, n);
    let (energy, gap, worst) = lifted.energy(&a, &b);
    if !converged || gap > opts.tol_solve {
        return Err(Error::SolverStalled {
            point: Vec::new(),
            iterations,
            residual: gap,
            history,
        });
    }
    let u = mesh.solve_stiffness(&mesh.gradient_adjoint(&a));
    let flux = FluxField::new(mesh, b);
    Ok(SolverReport {
        flux_residual: flux.residual(u_star),
        u,
        f: flux,
        gap,
        energy,
        max_pointwise_gap: worst,
        iterations,
        kkt_residual: kkt,
        wall_time_ms: start.elapsed().as_millis(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{potential_lagrangian, RegionMap};
    use crate::integrand::ConvexPotential;

    fn uniform(dim: usize) -> OmegaLagrangian {
        potential_lagrangian(RegionMap::whole(dim), vec![(ConvexPotential::power(1.0, 2.0).unwrap(), None)], None, 8.0).unwrap()
    }

    fn two_phase() -> OmegaLagrangian {
        let parts = vec![
            (ConvexPotential::power(1.0, 2.0).unwrap(), None),
            (ConvexPotential::power(4.0, 2.0).unwrap(), None),
        ];
        potential_lagrangian(RegionMap::halves(1, 0), parts, None, 8.0).unwrap()
    }

    #[test]
    fn constant_coefficient_1d() {
        let mesh = DirichletMesh::new(1, 127).unwrap();
        let r = solve_dirichlet(&uniform(1), 1.0, &mesh, &vec![1.0; 127], &SolveOptions::default()).unwrap();
        let err = (0..127).map(|i| mesh.node(i)[0]).zip(&r.u).map(|(x, u)| (u - x * (1.0 - x) / 2.0).abs()).fold(0.0, f64::max);
        assert!(err < 1e-6, "{err}");
        assert!(r.gap >= -1e-10 && r.gap <= 1e-6);
        assert!(r.flux_residual < 1e-10);
        // F(u, u*) = <u, u*> at the exact solution
        let lifted = LiftedLagrangian::new(&uniform(1), &mesh, 1.0).unwrap();
        let exact: Vec<f64> = (0..127).map(|i| mesh.node(i)[0]).map(|x| x * (1.0 - x) / 2.0).collect();
        let (v, _) = lifted_value(&lifted, &exact, &vec![1.0; 127], &SolveOptions::default()).unwrap();
        assert!((v - mesh.node_dot(&exact, &vec![1.0; 127])).abs() < 1e-6);
    }

    #[test]
    fn oscillating_flux_balance() {
        let mesh = DirichletMesh::new(1, 511).unwrap();
        let r = solve_dirichlet(&two_phase(), 1.0 / 64.0, &mesh, &vec![1.0; 511], &SolveOptions::default()).unwrap();
        let f0 = r.f.values[0];
        for e in 0..mesh.elements() {
            let x = mesh.centroid(e)[0] - 0.5 * mesh.spacing();
            assert!((r.f.values[e] - (f0 - x)).abs() < 1e-6);
        }
    }

    #[test]
    fn zero_source() {
        let mesh = DirichletMesh::new(2, 8).unwrap();
        let r = solve_dirichlet(&uniform(2), 1.0, &mesh, &vec![0.0; 64], &SolveOptions::default()).unwrap();
        assert!(r.u.iter().chain(&r.f.values).all(|v| v.abs() < 1e-9) && r.gap.abs() < 1e-12);
    }

    #[test]
    fn matches_direct_linear_solve_2d() {
        let parts = vec![
            (ConvexPotential::power(1.0, 2.0).unwrap(), None),
            (ConvexPotential::power(4.0, 2.0).unwrap(), None),
        ];
        let l = potential_lagrangian(RegionMap::halves(2, 0), parts, None, 8.0).unwrap();
        let mesh = DirichletMesh::new(2, 8).unwrap();
        let eps = 0.5;
        let src: Vec<f64> = (0..64).map(|i| 1.0 + 0.1 * i as f64).collect();
        let r = solve_dirichlet(&l, eps, &mesh, &src, &SolveOptions::default()).unwrap();
        // assemble G^T W diag(a) G column by column
        let coef: Vec<f64> = (0..mesh.elements())
            .map(|e| {
                let y: Vec<f64> = mesh.centroid(e).iter().map(|x| x / eps).collect();
                if l.region_at(&y) == 0 { 1.0 } else { 4.0 }
            })
            .collect();
        let mut a = nalgebra::DMatrix::zeros(64, 64);
        for j in 0..64 {
            let mut e = vec![0.0; 64];
            e[j] = 1.0;
            let mut g = mesh.gradient(&e);
            g.iter_mut().enumerate().for_each(|(k, v)| *v *= coef[k / 2]);
            for (i, v) in mesh.gradient_adjoint(&g).into_iter().enumerate() {
                a[(i, j)] = v;
            }
        }
        let rhs = nalgebra::DVector::from_iterator(64, src.iter().map(|s| s * mesh.node_weight()));
        let u = a.lu().solve(&rhs).unwrap();
        let err = u.iter().zip(&r.u).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn translation_covariance() {
        use crate::integrand::ShiftedIntegrand;
        let l = two_phase();
        let mesh = DirichletMesh::new(1, 63).unwrap();
        let src: Vec<f64> = (0..63).map(|i| (i as f64 * 0.2).cos()).collect();
        let direct = solve_dirichlet(&l, 0.125, &mesh, &src, &SolveOptions::default()).unwrap();
        let lifted = LiftedLagrangian::new(&l, &mesh, 0.125).unwrap();
        let f0 = particular_flux(&mesh, &src).unwrap();
        // L(a, b + f0) - a f0 at zero source
        let shifted = lifted
            .integrands
            .iter()
            .zip(&f0.values)
            .map(|(f, &c)| Arc::new(ShiftedIntegrand::new(f.clone(), vec![0.0, c], vec![c, 0.0], 0.0)) as Arc<dyn ConvexIntegrand>)
            .collect();
        let moved = LiftedLagrangian::from_elements(&mesh, shifted).unwrap();
        let r = solve_lifted(&moved, &vec![0.0; 63], &SolveOptions::default()).unwrap();
        let err = r.u.iter().zip(&direct.u).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(err < 1e-8, "{err}");
    }
}
