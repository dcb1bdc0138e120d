use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::meter::TTopologyMeter;
use super::schedule::{fit_rate, EpsSchedule};
use crate::dirichlet::{solve_dirichlet, DirichletMesh, SolveOptions, SolverReport};
use crate::error::{Error, Result};
use crate::fields::OmegaLagrangian;

/// A source term `u*(x)`.
pub type Source = dyn Fn(&[f64]) -> f64 + Sync;

/// Pass threshold for rates claimed as `O(eps)`.
pub const LINEAR_RATE: f64 = 0.9;
/// Pass threshold for rates claimed as `O(sqrt eps)`.
pub const SQRT_RATE: f64 = 0.45;

/// `u*` sampled on the interior nodes.
pub fn sample_source(mesh: &DirichletMesh, source: &Source) -> Vec<f64> {
    (0..mesh.nodes()).map(|i| source(&mesh.node(i))).collect()
}

/// `(h^N sum |u|^p)^(1/p)` on the interior nodes.
pub fn lp_norm(mesh: &DirichletMesh, u: &[f64], p: f64) -> f64 {
    (mesh.node_weight() * u.iter().map(|v| v.abs().powf(p)).sum::<f64>()).powf(1.0 / p)
}

/// One schedule entry.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepRecord {
    pub inverse_eps: usize,
    pub eps: f64,
    /// Interior mesh nodes per axis.
    pub mesh_nodes: usize,
    /// Certified gap of the oscillating solve.
    pub gap: f64,
    /// Certified gap of the homogenized solve.
    pub hom_gap: f64,
    pub err_u: f64,
    pub flux: TTopologyMeter,
    pub flux_dev_max: f64,
    /// `max |div tau + u*|` over both solves.
    pub div_residual: f64,
    pub energy: f64,
    pub hom_energy: f64,
    pub u_hom_max: f64,
    /// Fitted rate of `err_u` over the records so far.
    pub rate_running: Option<f64>,
    pub iterations: usize,
    pub error: Option<String>,
}

impl SweepRecord {
    fn failed(inverse_eps: usize, mesh_nodes: usize, e: &Error) -> Self {
        SweepRecord {
            inverse_eps,
            eps: 1.0 / inverse_eps as f64,
            mesh_nodes,
            gap: f64::NAN,
            hom_gap: f64::NAN,
            err_u: f64::NAN,
            flux: TTopologyMeter {
                weak: Vec::new(),
                strong: f64::NAN,
            },
            flux_dev_max: f64::NAN,
            div_residual: f64::NAN,
            energy: f64::NAN,
            hom_energy: f64::NAN,
            u_hom_max: f64::NAN,
            rate_running: None,
            iterations: 0,
            error: Some(e.to_string()),
        }
    }

    pub fn ok(&self) -> bool {
        self.error.is_none()
    }
}

/// Solutions behind a record, kept for the liminf and recovery checks.
#[derive(Clone, Debug)]
pub struct SweepSolutions {
    pub mesh: DirichletMesh,
    pub u_star: Vec<f64>,
    pub eps: SolverReport,
    pub hom: SolverReport,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepReport {
    pub exponent: f64,
    pub tol_solve: f64,
    pub records: Vec<SweepRecord>,
    pub rate_u: Option<f64>,
    pub rate_flux: Option<f64>,
    pub rate_u_passed: bool,
    pub rate_flux_passed: bool,
    /// Every successful record has `gap <= tol_solve` on both solves.
    pub gaps_certified: bool,
    #[serde(skip)]
    pub solutions: Vec<Option<SweepSolutions>>,
}

/// Header line of [`SweepReport::to_csv`].
pub const SWEEP_CSV_HEADER: &str = "eps,gap,err_u_Lp,flux_dev_max,div_residual,rate_running";

impl SweepReport {
    pub fn passed(&self) -> bool {
        self.rate_u_passed && self.rate_flux_passed && self.gaps_certified && self.records.iter().all(SweepRecord::ok)
    }

    /// CSV with columns `eps, gap, err_u_Lp, flux_dev_max, div_residual, rate_running`.
    pub fn to_csv(&self) -> String {
        let mut out = format!("{SWEEP_CSV_HEADER}\n");
        for r in &self.records {
            let rate = r.rate_running.map_or(String::new(), |v| format!("{v:.6}"));
            out.push_str(&format!(
                "{:.10},{:.6e},{:.6e},{:.6e},{:.6e},{}\n",
                r.eps, r.gap, r.err_u, r.flux_dev_max, r.div_residual, rate
            ));
        }
        out
    }
}

fn solve_pair(l: &OmegaLagrangian, hom: &OmegaLagrangian, mesh: &DirichletMesh, eps: f64, u_star: &[f64], opts: &SolveOptions) -> Result<(SolverReport, SolverReport)> {
    let s = solve_dirichlet(l, eps, mesh, u_star, opts)?;
    let h = solve_dirichlet(hom, 1.0, mesh, u_star, opts)?;
    Ok((s, h))
}

/// Solve the oscillating problem with `L(x/eps, ., .)` and the homogenized
/// problem on the same mesh for every `eps` of the schedule, and compare.
/// A failing entry is recorded and the sweep continues.
pub fn eps_sweep(l: &OmegaLagrangian, hom: &OmegaLagrangian, source: &Source, schedule: &EpsSchedule, opts: &SolveOptions) -> Result<SweepReport> {
    if hom.dim != l.dim {
        return Err(Error::GridMismatch("homogenized Lagrangian of another dimension".into()));
    }
    if !hom.x_independent() {
        return Err(Error::invalid("the homogenized Lagrangian must not depend on x"));
    }
    let p = l.bounds.as_ref().map_or(2.0, |b| b.p);
    let entries: Vec<(SweepRecord, Option<SweepSolutions>)> = schedule
        .inverse
        .par_iter()
        .map(|&k| {
            let eps = 1.0 / k as f64;
            let mesh = match schedule.mesh(l.dim, k) {
                Ok(m) => m,
                Err(e) => return (SweepRecord::failed(k, schedule.interior_nodes(k), &e), None),
            };
            let u_star = sample_source(&mesh, source);
            match solve_pair(l, hom, &mesh, eps, &u_star, opts) {
                Err(e) => (SweepRecord::failed(k, mesh.m, &e), None),
                Ok((s, h)) => {
                    let diff: Vec<f64> = s.u.iter().zip(&h.u).map(|(a, b)| a - b).collect();
                    let flux = TTopologyMeter::measure(&mesh, &s.f.values, &h.f.values);
                    let record = SweepRecord {
                        inverse_eps: k,
                        eps,
                        mesh_nodes: mesh.m,
                        gap: s.gap,
                        hom_gap: h.gap,
                        err_u: lp_norm(&mesh, &diff, p),
                        flux_dev_max: flux.weak_max(),
                        flux,
                        div_residual: s.f.residual(&u_star).max(h.f.residual(&u_star)),
                        energy: s.energy,
                        hom_energy: h.energy,
                        u_hom_max: h.u.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                        rate_running: None,
                        iterations: s.iterations,
                        error: None,
                    };
                    (record, Some(SweepSolutions { mesh, u_star, eps: s, hom: h }))
                }
            }
        })
        .collect();
    let (mut records, solutions): (Vec<_>, Vec<_>) = entries.into_iter().unzip();
    for i in 0..records.len() {
        let ok: Vec<&SweepRecord> = records[..=i].iter().filter(|r| r.ok()).collect();
        let e: Vec<f64> = ok.iter().map(|r| r.eps).collect();
        let v: Vec<f64> = ok.iter().map(|r| r.err_u).collect();
        records[i].rate_running = fit_rate(&e, &v);
    }
    let ok: Vec<&SweepRecord> = records.iter().filter(|r| r.ok()).collect();
    let e: Vec<f64> = ok.iter().map(|r| r.eps).collect();
    let err: Vec<f64> = ok.iter().map(|r| r.err_u).collect();
    let fl: Vec<f64> = ok.iter().map(|r| r.flux_dev_max).collect();
    let rate_u = fit_rate(&e, &err);
    let rate_flux = fit_rate(&e, &fl);
    // identically vanishing errors have no rate and pass trivially
    let passes = |rate: Option<f64>, v: &[f64]| rate.map_or(v.iter().all(|x| *x <= 1e-12), |r| r >= LINEAR_RATE);
    Ok(SweepReport {
        exponent: p,
        tol_solve: opts.tol_solve,
        rate_u_passed: passes(rate_u, &err),
        rate_flux_passed: passes(rate_flux, &fl),
        gaps_certified: ok.iter().all(|r| r.gap <= opts.tol_solve && r.hom_gap <= opts.tol_solve),
        rate_u,
        rate_flux,
        records,
        solutions,
    })
}
