use serde::{Deserialize, Serialize};

use super::conjugate::swapped_conjugate;
use super::grid::unravel;
use super::table::TabulatedFunction;
use crate::error::{Error, Result};

/// Deviation of a two-argument table from selfduality.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    /// Largest `|L*(b, a) - L(a, b)|` over the checked nodes.
    pub max_gap: f64,
    /// Node `(a, b)` where the largest gap occurs.
    pub argmax_point: Vec<f64>,
    pub tolerance_used: f64,
    /// Smallest `L(a, b) - <a, b>` over all finite nodes.
    pub min_basic_margin: f64,
    /// Number of nodes compared.
    pub nodes_checked: usize,
}

impl GapReport {
    pub fn passed(&self) -> bool {
        self.max_gap <= self.tolerance_used && self.min_basic_margin >= -self.tolerance_used
    }

    pub fn passed_with(&self, tol: f64) -> bool {
        self.max_gap <= tol && self.min_basic_margin >= -tol
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GapOptions {
    pub tol_gap: f64,
    /// Only nodes with `|coord| <= interior_fraction * radius` on every axis
    /// are compared; conjugates near the box edge are truncated.
    pub interior_fraction: f64,
    pub convexity_tol: f64,
}

impl Default for GapOptions {
    fn default() -> Self {
        GapOptions {
            tol_gap: 1e-6,
            interior_fraction: 0.5,
            convexity_tol: 1e-9,
        }
    }
}

impl GapOptions {
    pub fn with_tol(tol_gap: f64) -> Self {
        GapOptions {
            tol_gap,
            ..Default::default()
        }
    }
}

/// Default gap tolerance: tighter for quadratic growth.
pub fn default_tol_gap(p: f64) -> f64 {
    if (p - 2.0).abs() < 1e-12 {
        1e-8
    } else {
        1e-6
    }
}

/// Compare `L(a, b)` with `L*(b, a)` on interior nodes. The table must pass
/// the midpoint-convexity scan.
pub fn selfdual_gap_check(l: &TabulatedFunction, opts: &GapOptions) -> Result<GapReport> {
    if l.factors().len() != 2 {
        return Err(Error::GridMismatch("selfduality needs a two-argument table".into()));
    }
    if !l.has_finite_value() {
        return Err(Error::DomainEmpty);
    }
    if let Some((point, violation)) = l.convexity_violation(opts.convexity_tol) {
        return Err(Error::NotConvex { point, violation });
    }
    let star = swapped_conjugate(l)?;
    Ok(compare(l, &star, opts))
}

/// Gap between `l` and a precomputed `(a, b) -> L*(b, a)` on the same grid.
pub(crate) fn compare(l: &TabulatedFunction, star: &TabulatedFunction, opts: &GapOptions) -> GapReport {
    let n = l.factors()[0].dim;
    let d = l.arity();
    let mut idx = vec![0; d];
    let mut x = vec![0.0; d];
    let mut max_gap = 0.0f64;
    let mut arg = 0usize;
    let mut margin = f64::INFINITY;
    let mut checked = 0;
    for flat in 0..l.len() {
        let v = l.values()[flat];
        l.node_into(flat, &mut idx, &mut x);
        if v.is_finite() {
            let ab: f64 = (0..n).map(|k| x[k] * x[k + n]).sum();
            margin = margin.min(v - ab);
        }
        if !l.in_inner_box(&idx, opts.interior_fraction) {
            continue;
        }
        let s = star.values()[flat];
        if !v.is_finite() && !s.is_finite() {
            continue;
        }
        checked += 1;
        let gap = if v.is_finite() && s.is_finite() { (s - v).abs() } else { f64::INFINITY };
        if gap > max_gap {
            max_gap = gap;
            arg = flat;
        }
    }
    GapReport {
        max_gap,
        argmax_point: l.node(arg),
        tolerance_used: opts.tol_gap,
        min_basic_margin: margin,
        nodes_checked: checked,
    }
}

/// Nodes `b` of the second factor with `L(a, b) - <a, b> <= tol`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphImage {
    pub points: Vec<Vec<f64>>,
    /// `[b_min, b_max]` when `b` is scalar.
    pub interval: Option<(f64, f64)>,
}

/// Sample `b -> L(a, b) - <a, b>` on the `b` nodes and keep the near-zeros.
/// If `a` is not a node of the first factor, `L` is interpolated in `a`.
pub fn graph_extract(l: &TabulatedFunction, a: &[f64], tol: f64) -> Result<GraphImage> {
    let (slice, bgrid) = gap_slice(l, a)?;
    let nb = bgrid.len();
    let dim = l.factors()[1].dim;
    let shape = vec![l.factors()[1].points_per_axis; dim];
    let mut idx = vec![0; dim];
    let mut points = Vec::new();
    for j in 0..nb {
        if slice[j] <= tol {
            unravel(j, &shape, &mut idx);
            points.push(idx.iter().map(|&i| l.factors()[1].coord(i)).collect::<Vec<f64>>());
        }
    }
    if points.is_empty() {
        return Err(Error::EmptyImage { point: a.to_vec() });
    }
    let interval = if dim == 1 {
        let lo = points.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
        let hi = points.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
        Some((lo, hi))
    } else {
        None
    };
    Ok(GraphImage { points, interval })
}

/// `L(a, b) - <a, b>` for every node `b`, row-major.
pub fn gap_slice(l: &TabulatedFunction, a: &[f64]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    if l.factors().len() != 2 {
        return Err(Error::GridMismatch("graph extraction needs a two-argument table".into()));
    }
    let na = l.factors()[0].dim;
    if a.len() != na {
        return Err(Error::GridMismatch(format!("point of length {} for dimension {na}", a.len())));
    }
    let fb = &l.factors()[1];
    let shape = vec![fb.points_per_axis; fb.dim];
    let nb = fb.len();
    let mut idx = vec![0; fb.dim];
    let mut z = a.to_vec();
    z.extend(std::iter::repeat(0.0).take(fb.dim));
    let mut bs = Vec::with_capacity(nb);
    let mut out = Vec::with_capacity(nb);
    for j in 0..nb {
        unravel(j, &shape, &mut idx);
        for k in 0..fb.dim {
            z[na + k] = fb.coord(idx[k]);
        }
        let v = match l.node_index_of(&z) {
            Some(flat) => l.values()[flat],
            None => l.eval_multilinear(&z),
        };
        let ab: f64 = (0..na).map(|k| z[k] * z[na + k]).sum();
        out.push(v - ab);
        bs.push(z[na..].to_vec());
    }
    Ok((out, bs))
}
