use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::grid::CellGrid;
use super::solve::{solve_cell_warm, solve_dual_cell_warm, CellOptions, CellSolution};
use crate::convex::{conjugate, gap_slice, selfdual_gap_check, BoxGrid, Boundary, GapOptions, GapReport, Interpolation, TabulatedFunction};
use crate::error::{Error, Result};
use crate::fields::{Est200, OmegaLagrangian, RegionMap};
use crate::integrand::TableIntegrand;

/// Tabulated homogenized Lagrangian with per-node solver diagnostics.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HomLagrangian {
    pub table: TabulatedFunction,
    pub residuals: Vec<f64>,
    pub iterations: Vec<usize>,
    pub cell: CellGrid,
    /// Growth constants inherited from the Lagrangian.
    pub bounds: Option<Est200>,
    /// Volume fractions of the regions.
    pub fractions: Vec<f64>,
    pub gap: Option<GapReport>,
    pub tol_cell: f64,
}

/// Residual sidecar written next to a table.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ResidualSidecar {
    pub cell_nodes: usize,
    pub tol_cell: f64,
    pub max_residual: f64,
    pub residuals: Vec<f64>,
    pub iterations: Vec<usize>,
}

impl HomLagrangian {
    pub fn sidecar(&self) -> ResidualSidecar {
        ResidualSidecar {
            cell_nodes: self.cell.nodes_per_axis,
            tol_cell: self.tol_cell,
            max_residual: self.residuals.iter().copied().fold(0.0, f64::max),
            residuals: self.residuals.clone(),
            iterations: self.iterations.clone(),
        }
    }

    pub fn a_grid(&self) -> &BoxGrid {
        &self.table.factors()[0]
    }

    pub fn b_grid(&self) -> &BoxGrid {
        &self.table.factors()[1]
    }

    /// The table as an `x`-independent Lagrangian with cubic interpolation.
    pub fn lagrangian(&self) -> Result<OmegaLagrangian> {
        let dim = self.a_grid().dim;
        let f = TableIntegrand::new(self.table.clone().with_interpolation(Interpolation::Cubic));
        OmegaLagrangian::from_integrands(RegionMap::whole(dim), vec![Arc::new(f)], self.bounds.clone(), None)
    }
}

/// Solve the cell problem at every node of `ga x gb`. Rows of fixed `a` are
/// distributed over workers and warm-started along `b`. The selfduality
/// report is attached on success.
pub fn tabulate_hom(l: &OmegaLagrangian, ga: &BoxGrid, gb: &BoxGrid, grid: &CellGrid, opts: &CellOptions) -> Result<HomLagrangian> {
    if ga.dim != l.dim || gb.dim != l.dim {
        return Err(Error::GridMismatch("(a, b) grids must match the Lagrangian dimension".into()));
    }
    let shell = TabulatedFunction::new(vec![ga.clone(), gb.clone()], vec![0.0; ga.len() * gb.len()])?;
    let nb = gb.len();
    let rows: Vec<Vec<(f64, f64, usize)>> = (0..ga.len())
        .into_par_iter()
        .map(|i| {
            let mut warm = None;
            let mut row = Vec::with_capacity(nb);
            for j in 0..nb {
                let z = shell.node(i * nb + j);
                let (a, b) = z.split_at(l.dim);
                let s: CellSolution = solve_cell_warm(l, a, b, grid, opts, warm.take())?;
                row.push((s.value, s.kkt_residual, s.iterations));
                warm = s.warm;
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;
    let flat: Vec<(f64, f64, usize)> = rows.into_iter().flatten().collect();
    let table = TabulatedFunction::new(vec![ga.clone(), gb.clone()], flat.iter().map(|r| r.0).collect())?;
    let mut hom = HomLagrangian {
        table,
        residuals: flat.iter().map(|r| r.1).collect(),
        iterations: flat.iter().map(|r| r.2).collect(),
        cell: *grid,
        bounds: l.bounds.clone(),
        fractions: l.regions.fractions(),
        gap: None,
        tol_cell: opts.tol,
    };
    let gap_opts = GapOptions {
        tol_gap: 1e-6,
        interior_fraction: 0.5,
        convexity_tol: 10.0 * opts.tol,
    };
    hom.gap = Some(selfdual_gap_check(&hom.table, &gap_opts)?);
    Ok(hom)
}

/// Outcome of the two-sided growth check on a homogenized table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    /// Smallest `L_hom - lower bound`.
    pub lower_margin: f64,
    /// Smallest `upper bound - L_hom`.
    pub upper_margin: f64,
    /// Smallest `mean_x L(x, a, b) - L_hom(a, b)`, when `L` was supplied.
    pub mean_margin: Option<f64>,
    /// Nodes `(a, b)` where some bound fails by more than the tolerance.
    pub violations: Vec<Vec<f64>>,
    pub nodes_checked: usize,
    pub tolerance_used: f64,
}

impl BoundsReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Check `C0(|a|^p + |b|^q - n0) <= L_hom(a, b) <= C1(|a|^p + |b|^q + n1)`
/// at every node, and `L_hom <= mean_x L` when `l` is given.
pub fn hom_bounds_check(hom: &HomLagrangian, l: Option<&OmegaLagrangian>) -> Result<BoundsReport> {
    let est = hom.bounds.as_ref().ok_or(Error::CoercivityMissing)?;
    let tol = 10.0 * hom.tol_cell;
    let n = hom.a_grid().dim;
    let mut report = BoundsReport {
        lower_margin: f64::INFINITY,
        upper_margin: f64::INFINITY,
        mean_margin: l.map(|_| f64::INFINITY),
        violations: Vec::new(),
        nodes_checked: 0,
        tolerance_used: tol,
    };
    for flat in 0..hom.table.len() {
        let v = hom.table.values()[flat];
        let z = hom.table.node(flat);
        let (a, b) = z.split_at(n);
        let (lo, hi) = est.mean_bounds(&hom.fractions, a, b);
        let mut bad = v - lo < -tol || hi - v < -tol;
        report.lower_margin = report.lower_margin.min(v - lo);
        report.upper_margin = report.upper_margin.min(hi - v);
        if let (Some(l), Some(m)) = (l, report.mean_margin.as_mut()) {
            let d = l.mean_value(a, b) - v;
            *m = m.min(d);
            bad |= d < -tol;
        }
        if bad {
            report.violations.push(z);
        }
        report.nodes_checked += 1;
    }
    Ok(report)
}

/// Compare `L_hom*` obtained by conjugating the table with the conjugate
/// cell problem, on the interior nodes `|z_k| <= interior_fraction R`.
/// `max_gap` is the largest discrepancy; `min_basic_margin` is the least
/// `L_hom*(a*, b*) - <a*, b*>` of the cell route.
pub fn dual_cell_check(l: &OmegaLagrangian, hom: &HomLagrangian, interior_fraction: f64, opts: &CellOptions) -> Result<GapReport> {
    let conj = l.conjugate_lagrangian()?;
    let route_i = conjugate(&hom.table, hom.table.factors(), Boundary::Lenient)?;
    let n = l.dim;
    let na = hom.a_grid().len();
    let nb = hom.b_grid().len();
    let rows: Vec<Vec<(usize, f64, f64)>> = (0..na)
        .into_par_iter()
        .map(|i| {
            let mut warm = None;
            let mut idx = vec![0; 2 * n];
            let mut z = vec![0.0; 2 * n];
            let mut row = Vec::new();
            for j in 0..nb {
                let flat = i * nb + j;
                route_i.node_into(flat, &mut idx, &mut z);
                if !route_i.in_inner_box(&idx, interior_fraction) {
                    continue;
                }
                let (p, q) = z.split_at(n);
                let (v, w) = solve_dual_cell_warm(&conj, p, q, &hom.cell, opts, warm.take())?;
                warm = Some(w);
                let dot: f64 = p.iter().zip(q).map(|(x, y)| x * y).sum();
                row.push((flat, (v - route_i.values()[flat]).abs(), v - dot));
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;
    let mut report = GapReport {
        max_gap: 0.0,
        argmax_point: route_i.node(0),
        tolerance_used: 1e-3,
        min_basic_margin: f64::INFINITY,
        nodes_checked: 0,
    };
    for (flat, d, m) in rows.into_iter().flatten() {
        report.nodes_checked += 1;
        report.min_basic_margin = report.min_basic_margin.min(m);
        if d > report.max_gap || report.nodes_checked == 1 {
            report.max_gap = d;
            report.argmax_point = route_i.node(flat);
        }
    }
    Ok(report)
}

/// Cell average of `dL(x, a + grad phi, b + g)` at a cell solution. A
/// region whose one-sided difference quotients differ by more than
/// `threshold` marks a set-valued point; the averaged interval hull is
/// returned in the error.
pub fn subdiff_average(l: &OmegaLagrangian, sol: &CellSolution, threshold: f64) -> Result<Vec<f64>> {
    let m = 2 * l.dim;
    let n_el = sol.regions.len() as f64;
    let mut mean = vec![0.0; m];
    let mut hull = vec![(0.0, 0.0); m];
    let mut g = vec![0.0; m];
    let mut w = vec![0.0; m];
    for (z, &r) in sol.fields.chunks(m).zip(&sol.regions) {
        let f = &l.integrands[r];
        f.gradient(z, &mut g);
        let f0 = f.value(z);
        w.copy_from_slice(z);
        for k in 0..m {
            let s = 1e-6 * (1.0 + z[k].abs());
            w[k] = z[k] + s;
            let right = (f.value(&w) - f0) / s;
            w[k] = z[k] - s;
            let left = (f0 - f.value(&w)) / s;
            w[k] = z[k];
            hull[k].0 += left.min(right) / n_el;
            hull[k].1 += left.max(right) / n_el;
            mean[k] += g[k] / n_el;
        }
    }
    if hull.iter().any(|(lo, hi)| hi - lo > threshold) {
        return Err(Error::SetValued { hull });
    }
    Ok(mean)
}

/// One point of an extracted graph.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphPoint {
    pub a: Vec<f64>,
    /// Refined minimizer of `b -> L(a, b) - <a, b>`.
    pub b: Vec<f64>,
    /// Nodes within the tolerance of the minimum, as an interval in 1D.
    pub interval: Option<(f64, f64)>,
    /// Minimum gap.
    pub gap: f64,
}

/// The graph of the field recovered from a homogenized table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HomGraph {
    pub points: Vec<GraphPoint>,
    /// Least-squares slope of `b` against `a` in 1D.
    pub slope: Option<f64>,
}

impl HomGraph {
    /// The point at `a`, if `a` was an extraction node.
    pub fn at(&self, a: &[f64]) -> Option<&GraphPoint> {
        self.points.iter().find(|p| p.a.iter().zip(a).all(|(x, y)| (x - y).abs() < 1e-9))
    }
}

/// Minimize the gap slice over `b` for every `a` node with
/// `|a_k| <= interior_fraction R`, refining the node minimizer by a
/// parabola per axis. Slices whose minimum sits on the `b` boundary are
/// skipped. The result must be monotone.
pub fn beta_hom_extract(hom: &HomLagrangian, interior_fraction: f64, tol: f64) -> Result<HomGraph> {
    let ga = hom.a_grid();
    let gb = hom.b_grid();
    let n = ga.dim;
    let shape_b = vec![gb.points_per_axis; n];
    let mut points = Vec::new();
    let mut idx_a = vec![0; n];
    for fa in 0..ga.len() {
        crate::convex::unravel(fa, &vec![ga.points_per_axis; n], &mut idx_a);
        if idx_a.iter().any(|&i| ga.coord(i).abs() > interior_fraction * ga.radius + 1e-12) {
            continue;
        }
        let a: Vec<f64> = idx_a.iter().map(|&i| ga.coord(i)).collect();
        let (slice, _) = gap_slice(&hom.table, &a)?;
        let (jmin, gmin) = slice.iter().enumerate().fold((0, f64::INFINITY), |acc, (j, &v)| if v < acc.1 { (j, v) } else { acc });
        let mut idx_b = vec![0; n];
        crate::convex::unravel(jmin, &shape_b, &mut idx_b);
        if idx_b.iter().any(|&i| i == 0 || i + 1 == gb.points_per_axis) {
            continue;
        }
        let strides = crate::convex::strides(&shape_b);
        let h = gb.spacing();
        let b: Vec<f64> = (0..n)
            .map(|k| {
                let (m, c, p) = (slice[jmin - strides[k]], slice[jmin], slice[jmin + strides[k]]);
                let curv = m - 2.0 * c + p;
                let shift = if curv > 0.0 { 0.5 * h * (m - p) / curv } else { 0.0 };
                gb.coord(idx_b[k]) + shift.clamp(-0.5 * h, 0.5 * h)
            })
            .collect();
        let interval = if n == 1 {
            let near: Vec<f64> = (0..slice.len()).filter(|&j| slice[j] <= gmin + tol).map(|j| gb.coord(j)).collect();
            Some((near[0], near[near.len() - 1]))
        } else {
            None
        };
        points.push(GraphPoint { a, b, interval, gap: gmin });
    }
    let tol_mono = gb.spacing();
    for (i, p) in points.iter().enumerate() {
        for q in &points[i + 1..] {
            let d: f64 = p.a.iter().zip(&q.a).zip(p.b.iter().zip(&q.b)).map(|((a1, a2), (b1, b2))| (a1 - a2) * (b1 - b2)).sum();
            if d < -tol_mono * p.a.iter().zip(&q.a).map(|(x, y)| (x - y).abs()).sum::<f64>() {
                return Err(Error::NonMonotone { a: p.a.clone() });
            }
        }
    }
    let slope = (n == 1 && points.len() >= 2).then(|| {
        let k = points.len() as f64;
        let ma = points.iter().map(|p| p.a[0]).sum::<f64>() / k;
        let mb = points.iter().map(|p| p.b[0]).sum::<f64>() / k;
        let sab: f64 = points.iter().map(|p| (p.a[0] - ma) * (p.b[0] - mb)).sum();
        let saa: f64 = points.iter().map(|p| (p.a[0] - ma).powi(2)).sum();
        sab / saa
    });
    Ok(HomGraph { points, slope })
}

/// Cell-grid average of `L(x, a, b)`, the value of the zero corrector.
pub fn cell_mean_value(l: &OmegaLagrangian, grid: &CellGrid, a: &[f64], b: &[f64]) -> f64 {
    let regions = super::solve::element_regions(&l.regions, grid);
    let mut z = a.to_vec();
    z.extend_from_slice(b);
    regions.iter().map(|&r| l.integrands[r].value(&z)).sum::<f64>() / regions.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{potential_lagrangian, RegionMap};
    use crate::integrand::ConvexPotential;

    fn two_phase() -> OmegaLagrangian {
        let parts = vec![
            (ConvexPotential::power(1.0, 2.0).unwrap(), None),
            (ConvexPotential::power(4.0, 2.0).unwrap(), None),
        ];
        potential_lagrangian(RegionMap::halves(1, 0), parts, None, 8.0).unwrap()
    }

    #[test]
    fn two_phase_table() {
        let l = two_phase();
        let g = BoxGrid::new(1, 2.0, 33).unwrap();
        let hom = tabulate_hom(&l, &g, &g, &CellGrid::new(1, 16).unwrap(), &CellOptions::default()).unwrap();
        for flat in 0..hom.table.len() {
            let z = hom.table.node(flat);
            let exact = 0.8 * z[0] * z[0] + z[1] * z[1] / 3.2;
            assert!((hom.table.values()[flat] - exact).abs() < 1e-8, "{z:?}");
        }
        let graph = beta_hom_extract(&hom, 0.5, 1e-9).unwrap();
        assert!((graph.slope.unwrap() - 1.6).abs() < 1e-3, "{:?}", graph.slope);
        let mut est = hom.bounds.clone().unwrap();
        est.c0 = 0.2;
        est.c1 = 3.0;
        let mut custom = hom.clone();
        custom.bounds = Some(est);
        let r = hom_bounds_check(&custom, Some(&l)).unwrap();
        assert!(r.passed(), "{r:?}");
        custom.table.values_mut()[100] = -5.0;
        let r = hom_bounds_check(&custom, None).unwrap();
        assert_eq!(r.violations, vec![custom.table.node(100)]);
    }

    #[test]
    fn averaged_subgradient() {
        let l = two_phase();
        let grid = CellGrid::new(1, 64).unwrap();
        let s = crate::cell::solve_cell(&l, &[1.0], &[0.5], &grid, &CellOptions::default()).unwrap();
        let d = subdiff_average(&l, &s, 1e-3).unwrap();
        assert!((d[0] - 1.6).abs() < 1e-3 && (d[1] - 0.5 / 1.6).abs() < 1e-3, "{d:?}");
    }
}
