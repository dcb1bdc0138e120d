use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cell::{solve_cell, CellGrid, CellOptions, CellSolution};
use crate::dirichlet::{DirichletMesh, LiftedLagrangian};
use crate::error::{Error, Result};
use crate::fields::OmegaLagrangian;

fn key(a: &[f64], b: &[f64]) -> Vec<i64> {
    a.iter().chain(b).map(|v| (v * 1e9).round() as i64).collect()
}

/// Cell solutions indexed by the macroscopic pair `(a, b)` they were solved at.
#[derive(Clone, Debug)]
pub struct CorrectorBank {
    pub grid: CellGrid,
    entries: BTreeMap<Vec<i64>, CellSolution>,
}

impl CorrectorBank {
    pub fn new(grid: CellGrid) -> Self {
        CorrectorBank {
            grid,
            entries: BTreeMap::new(),
        }
    }

    /// Solve the cell problem at every distinct pair; each entry of `pairs`
    /// holds `a` followed by `b`.
    pub fn precompute(l: &OmegaLagrangian, pairs: &[Vec<f64>], grid: CellGrid, opts: &CellOptions) -> Result<Self> {
        let n = l.dim;
        let mut distinct: BTreeMap<Vec<i64>, &Vec<f64>> = BTreeMap::new();
        for p in pairs {
            if p.len() != 2 * n {
                return Err(Error::GridMismatch(format!("pair of length {} for dimension {n}", p.len())));
            }
            distinct.entry(key(&p[..n], &p[n..])).or_insert(p);
        }
        let solved: Vec<(Vec<i64>, CellSolution)> = distinct
            .into_par_iter()
            .map(|(k, p)| solve_cell(l, &p[..n], &p[n..], &grid, opts).map(|s| (k, s)))
            .collect::<Result<_>>()?;
        Ok(CorrectorBank {
            grid,
            entries: solved.into_iter().collect(),
        })
    }

    /// Correctors for the elementwise `(grad u, tau)` of a mesh function.
    pub fn for_solution(l: &OmegaLagrangian, mesh: &DirichletMesh, u: &[f64], tau: &[f64], grid: CellGrid, opts: &CellOptions) -> Result<Self> {
        let n = mesh.dim;
        let grad = mesh.gradient(u);
        let pairs: Vec<Vec<f64>> = (0..mesh.elements())
            .map(|e| grad[e * n..(e + 1) * n].iter().chain(&tau[e * n..(e + 1) * n]).copied().collect())
            .collect();
        Self::precompute(l, &pairs, grid, opts)
    }

    pub fn insert(&mut self, sol: CellSolution) {
        self.entries.insert(key(&sol.a, &sol.b), sol);
    }

    pub fn get(&self, a: &[f64], b: &[f64]) -> Result<&CellSolution> {
        self.entries
            .get(&key(a, b))
            .ok_or_else(|| Error::PrecomputeRequired(format!("no cell corrector at a = {a:?}, b = {b:?}")))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Smooth cutoff: zero within `delta` of the boundary of `(0,1)^N`, one
/// beyond `2 delta`, a quintic ramp in between.
pub fn cutoff(x: &[f64], delta: f64) -> f64 {
    x.iter()
        .map(|&t| {
            let d = t.min(1.0 - t);
            let s = ((d - delta) / delta).clamp(0.0, 1.0);
            s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)
        })
        .product()
}

/// Periodic multilinear interpolation of node values `phi` at `y`.
pub fn sample_potential(grid: &CellGrid, phi: &[f64], y: &[f64]) -> f64 {
    let n = grid.nodes_per_axis;
    let h = grid.spacing();
    let mut base = Vec::with_capacity(y.len());
    let mut frac = Vec::with_capacity(y.len());
    for &t in y {
        let s = t.rem_euclid(1.0) / h;
        let i = (s.floor() as usize).min(n - 1);
        base.push(i);
        frac.push(s - i as f64);
    }
    let mut total = 0.0;
    for corner in 0..(1usize << y.len()) {
        let mut flat = 0;
        let mut w = 1.0;
        for k in 0..y.len() {
            let up = (corner >> k) & 1;
            flat = flat * n + (base[k] + up) % n;
            w *= if up == 1 { frac[k] } else { 1.0 - frac[k] };
        }
        if w != 0.0 {
            total += w * phi[flat];
        }
    }
    total
}

/// Index of the periodic cell element containing `y`.
pub fn cell_element(grid: &CellGrid, y: &[f64]) -> usize {
    let n = grid.nodes_per_axis;
    y.iter().fold(0, |flat, &t| {
        let i = ((t.rem_euclid(1.0) / grid.spacing()).floor() as usize).min(n - 1);
        flat * n + i
    })
}

/// Collar width `delta = 4 eps` of the recovery cutoff.
pub fn collar(eps: f64) -> f64 {
    4.0 * eps
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RecoveryResult {
    pub eps: f64,
    pub u: Vec<f64>,
    pub tau: Vec<f64>,
    /// `sum_T |T| L(x/eps, grad u_eps, tau_eps)`.
    pub value: f64,
    /// `sum_T |T| L_hom(grad u, tau)` from the bank.
    pub hom_value: f64,
    /// `value - hom_value`.
    pub margin: f64,
}

/// The candidate `u + eps chi phi(x/eps)` with flux `tau + P g(x/eps)`, where
/// `chi` is the cutoff, `phi, g` are the cell correctors at the local
/// `(grad u, tau)` and `P` projects onto discrete divergence-free fields.
pub fn recovery_sequence(l: &OmegaLagrangian, bank: &CorrectorBank, mesh: &DirichletMesh, u: &[f64], tau: &[f64], eps: f64) -> Result<RecoveryResult> {
    let n = mesh.dim;
    if u.len() != mesh.nodes() || tau.len() != n * mesh.elements() {
        return Err(Error::GridMismatch("(u, tau) do not live on the mesh".into()));
    }
    if bank.grid.dim != n {
        return Err(Error::GridMismatch("corrector bank of another dimension".into()));
    }
    let grad = mesh.gradient(u);
    let pair = |e: usize| -> Result<&CellSolution> { bank.get(&grad[e * n..(e + 1) * n], &tau[e * n..(e + 1) * n]) };
    let delta = collar(eps);
    let m = mesh.m;
    let mut u_eps = u.to_vec();
    for (i, ue) in u_eps.iter_mut().enumerate() {
        // element whose lower corner is node i
        let e = match n {
            1 => i + 1,
            _ => 2 * ((i / m + 1) * (m + 1) + i % m + 1),
        };
        let x = mesh.node(i);
        let chi = cutoff(&x, delta);
        if chi > 0.0 {
            let y: Vec<f64> = x.iter().map(|t| t / eps).collect();
            *ue += eps * chi * sample_potential(&bank.grid, &pair(e)?.corrector.phi, &y);
        }
    }
    let mut g = vec![0.0; n * mesh.elements()];
    for e in 0..mesh.elements() {
        let sol = pair(e)?;
        let y: Vec<f64> = mesh.centroid(e).iter().map(|t| t / eps).collect();
        let c = cell_element(&bank.grid, &y);
        for k in 0..n {
            g[e * n + k] = sol.corrector.g[k][c];
        }
    }
    let back = mesh.gradient(&mesh.solve_stiffness(&mesh.gradient_adjoint(&g)));
    let tau_eps: Vec<f64> = tau.iter().zip(&g).zip(&back).map(|((t, a), b)| t + a - b).collect();
    let lifted = LiftedLagrangian::new(l, mesh, eps)?;
    let (value, _, _) = lifted.energy(&mesh.gradient(&u_eps), &tau_eps);
    let hom_value = mesh.element_weight() * (0..mesh.elements()).map(|e| pair(e).map(|s| s.value)).sum::<Result<f64>>()?;
    Ok(RecoveryResult {
        eps,
        u: u_eps,
        tau: tau_eps,
        value,
        hom_value,
        margin: value - hom_value,
    })
}

/// Value of the recovery sequence for affine `u = a.x` and flux `b` on the
/// torus: the cell correctors tiled `1/eps` times per axis on a lattice of
/// the cell's own resolution, evaluated elementwise.
pub fn recovery_torus(l: &OmegaLagrangian, sol: &CellSolution, inverse_eps: usize) -> Result<f64> {
    let grid = sol.grid;
    let n = grid.dim;
    if inverse_eps == 0 {
        return Err(Error::invalid("1/eps must be positive"));
    }
    let eps = 1.0 / inverse_eps as f64;
    let per = grid.nodes_per_axis;
    let side = per * inverse_eps;
    let h = 1.0 / side as f64;
    let total = side.pow(n as u32);
    let mut idx = vec![0; n];
    let shape = vec![side; n];
    let phi_at = |idx: &[usize]| -> f64 {
        let y: Vec<f64> = idx.iter().map(|&i| (i % side) as f64 * h / eps).collect();
        sample_potential(&grid, &sol.corrector.phi, &y)
    };
    let mut sum = 0.0;
    for flat in 0..total {
        crate::convex::unravel(flat, &shape, &mut idx);
        let x: Vec<f64> = idx.iter().map(|&i| (i as f64 + 0.5) * h).collect();
        let y: Vec<f64> = x.iter().map(|t| t / eps).collect();
        let c = cell_element(&grid, &y);
        let p0 = phi_at(&idx);
        let mut a = sol.a.clone();
        for k in 0..n {
            let mut j = idx.clone();
            j[k] += 1;
            // eps phi(x/eps) differenced on a lattice of spacing h
            a[k] += eps * (phi_at(&j) - p0) / h;
        }
        let b: Vec<f64> = (0..n).map(|k| sol.b[k] + sol.corrector.g[k][c]).collect();
        sum += l.value(&y, &a, &b);
    }
    Ok(sum / total as f64)
}

/// One member of a sequence entering the liminf inequality, with its limit.
#[derive(Clone, Debug)]
pub struct LiminfEntry {
    pub eps: f64,
    pub mesh: DirichletMesh,
    pub u_eps: Vec<f64>,
    pub tau_eps: Vec<f64>,
    pub u: Vec<f64>,
    pub tau: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LiminfRow {
    pub eps: f64,
    pub value: f64,
    pub hom_value: f64,
    /// `value - hom_value`; the inequality asks for `margin >= -slack`.
    pub margin: f64,
    pub slack: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LiminfReport {
    pub rows: Vec<LiminfRow>,
    /// Largest `eps` counted as the tail.
    pub tail_from: f64,
    pub passed: bool,
}

/// Evaluate `int L(x/eps, grad u_eps, tau_eps + f)` against
/// `int L_hom(grad u, tau + f)` along a sequence. `f` is a divergence-free
/// flux sampled per element, or `None` for zero.
pub fn liminf_check(
    l: &OmegaLagrangian,
    hom: &OmegaLagrangian,
    sequence: &[LiminfEntry],
    f: Option<&dyn Fn(&DirichletMesh) -> Vec<f64>>,
    slack: &dyn Fn(f64) -> f64,
    tail_from: f64,
) -> Result<LiminfReport> {
    let rows = sequence
        .iter()
        .map(|s| {
            let shift = f.map(|f| f(&s.mesh)).unwrap_or_else(|| vec![0.0; s.tau.len()]);
            let add = |t: &[f64]| -> Vec<f64> { t.iter().zip(&shift).map(|(a, b)| a + b).collect() };
            let (value, _, _) = LiftedLagrangian::new(l, &s.mesh, s.eps)?.energy(&s.mesh.gradient(&s.u_eps), &add(&s.tau_eps));
            let (hom_value, _, _) = LiftedLagrangian::new(hom, &s.mesh, 1.0)?.energy(&s.mesh.gradient(&s.u), &add(&s.tau));
            Ok(LiminfRow {
                eps: s.eps,
                value,
                hom_value,
                margin: value - hom_value,
                slack: slack(s.eps),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let passed = rows.iter().filter(|r| r.eps <= tail_from).all(|r| r.margin >= -r.slack);
    Ok(LiminfReport { rows, tail_from, passed })
}
