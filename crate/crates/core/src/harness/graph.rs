use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::recovery::{recovery_sequence, CorrectorBank};
use super::schedule::{fit_rate, EpsSchedule};
use super::sweep::{sample_source, Source, SQRT_RATE};
use crate::cell::{CellGrid, CellOptions};
use crate::dirichlet::{brl_project, lifted_value, solve_dirichlet, DirichletMesh, LiftedLagrangian, SolveOptions};
use crate::error::{Error, Result};
use crate::fields::OmegaLagrangian;

/// One sample point of the homogenized graph carried to a single `eps`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphSample {
    /// Lifted gap of the corrected point under `F_eps`.
    pub gap: f64,
    /// Distance moved by the projection onto the `F_eps` graph.
    pub projection: f64,
    /// `||u_eps - u||` plus `||u*_eps - u*||` in quadrature, from the
    /// homogenized sample point.
    pub distance: f64,
    /// `projection <= sqrt(gap) + tol`.
    pub within_bound: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphRow {
    pub eps: f64,
    pub samples: Vec<GraphSample>,
    pub gap_max: f64,
    pub distance_max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphReport {
    pub rows: Vec<GraphRow>,
    pub distance_rate: Option<f64>,
    pub gap_rate: Option<f64>,
    pub monotonicity_pairs: usize,
    pub monotonicity_violations: usize,
    /// Smallest `<u - v, u* - v*>` over the cross-checked pairs.
    pub worst_pairing: f64,
    pub passed: bool,
}

struct GraphPoint {
    u: Vec<f64>,
    u_star: Vec<f64>,
}

fn carry(l: &OmegaLagrangian, hom: &OmegaLagrangian, mesh: &DirichletMesh, eps: f64, source: &Source, grid: CellGrid, cell: &CellOptions, opts: &SolveOptions, tol: f64) -> Result<(GraphSample, GraphPoint)> {
    let u_star = sample_source(mesh, source);
    let h = solve_dirichlet(hom, 1.0, mesh, &u_star, opts)?;
    let bank = CorrectorBank::for_solution(l, mesh, &h.u, &h.f.values, grid, cell)?;
    let rec = recovery_sequence(l, &bank, mesh, &h.u, &h.f.values, eps)?;
    let lifted = LiftedLagrangian::new(l, mesh, eps)?;
    let (value, _) = lifted_value(&lifted, &rec.u, &u_star, opts)?;
    let gap = value - mesh.node_dot(&rec.u, &u_star);
    let brl = brl_project(&lifted, &rec.u, &u_star, opts)?;
    let du: Vec<f64> = brl.u.iter().zip(&h.u).map(|(a, b)| a - b).collect();
    let ds: Vec<f64> = brl.u_star.iter().zip(&u_star).map(|(a, b)| a - b).collect();
    let distance = (mesh.node_dot(&du, &du) + mesh.node_dot(&ds, &ds)).sqrt();
    let sample = GraphSample {
        gap,
        projection: brl.pair_distance,
        distance,
        within_bound: brl.pair_distance <= gap.max(0.0).sqrt() + tol,
    };
    Ok((sample, GraphPoint { u: brl.u, u_star: brl.u_star }))
}

/// Carry homogenized graph points `(u, u*)`, one per source, to the graphs of
/// `F_eps`: add the cell correctors, measure the lifted gap, and project with
/// the Brondsted-Rockafellar step. At the finest `eps` the projected points
/// are paired against homogenized graph points of the `controls` sources and
/// checked for monotonicity.
pub fn graph_convergence_check(
    l: &OmegaLagrangian,
    hom: &OmegaLagrangian,
    schedule: &EpsSchedule,
    sources: &[&Source],
    controls: &[&Source],
    cell: &CellOptions,
    opts: &SolveOptions,
    tol: f64,
) -> Result<GraphReport> {
    if sources.is_empty() {
        return Err(Error::invalid("graph convergence needs at least one source"));
    }
    let grid = CellGrid::new(l.dim, schedule.nodes_per_period)?;
    let mut rows = Vec::new();
    let mut finest = Vec::new();
    for &k in &schedule.inverse {
        let eps = 1.0 / k as f64;
        let mesh = schedule.mesh(l.dim, k)?;
        let carried: Vec<(GraphSample, GraphPoint)> = sources
            .par_iter()
            .map(|s| carry(l, hom, &mesh, eps, *s, grid, cell, opts, tol))
            .collect::<Result<_>>()?;
        let (samples, points): (Vec<_>, Vec<_>) = carried.into_iter().unzip();
        rows.push(GraphRow {
            eps,
            gap_max: samples.iter().map(|s| s.gap).fold(f64::NEG_INFINITY, f64::max),
            distance_max: samples.iter().map(|s| s.distance).fold(0.0, f64::max),
            samples,
        });
        finest = points.into_iter().map(|p| (mesh.clone(), p)).collect();
    }
    let mut pairs = 0;
    let mut violations = 0;
    let mut worst = f64::INFINITY;
    if let Some((mesh, _)) = finest.first() {
        let others: Vec<GraphPoint> = controls
            .par_iter()
            .map(|s| {
                let u_star = sample_source(mesh, *s);
                solve_dirichlet(hom, 1.0, mesh, &u_star, opts).map(|h| GraphPoint { u: h.u, u_star })
            })
            .collect::<Result<_>>()?;
        for (_, p) in &finest {
            for q in &others {
                let du: Vec<f64> = p.u.iter().zip(&q.u).map(|(a, b)| a - b).collect();
                let ds: Vec<f64> = p.u_star.iter().zip(&q.u_star).map(|(a, b)| a - b).collect();
                let pairing = mesh.node_dot(&du, &ds);
                pairs += 1;
                worst = worst.min(pairing);
                if pairing < -tol {
                    violations += 1;
                }
            }
        }
    }
    let eps: Vec<f64> = rows.iter().map(|r| r.eps).collect();
    let dist: Vec<f64> = rows.iter().map(|r| r.distance_max).collect();
    let gaps: Vec<f64> = rows.iter().map(|r| r.gap_max).collect();
    let distance_rate = fit_rate(&eps, &dist);
    let gap_rate = fit_rate(&eps, &gaps);
    let bounded = rows.iter().all(|r| r.samples.iter().all(|s| s.within_bound));
    let rate_ok = distance_rate.map_or(dist.iter().all(|d| *d <= tol), |r| r >= SQRT_RATE);
    Ok(GraphReport {
        rows,
        distance_rate,
        gap_rate,
        monotonicity_pairs: pairs,
        monotonicity_violations: violations,
        worst_pairing: worst,
        passed: bounded && rate_ok && violations == 0,
    })
}
