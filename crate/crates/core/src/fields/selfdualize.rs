use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::field::MonotoneField;
use super::fitzpatrick::fitzpatrick;
use crate::convex::{conjugate, gap_slice, Boundary, selfdual_gap_check, swapped_conjugate, unravel, BoxGrid, GapOptions, GapReport, TabulatedFunction};
use crate::error::{Error, Result};

/// Grid and tolerance choices for [`selfdualize_region`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelfdualizeOptions {
    /// Half-width of the `a` and `b` boxes.
    pub radius: f64,
    /// Nodes per axis of each factor.
    pub nodes: usize,
    pub tol_gap: f64,
    /// Allowed gap is `tol_gap + slope * h`.
    pub slope: f64,
    /// Fraction of the box over which selfduality is checked.
    pub interior_fraction: f64,
}

impl SelfdualizeOptions {
    pub fn new(radius: f64, nodes: usize) -> Self {
        SelfdualizeOptions {
            radius,
            nodes,
            tol_gap: 1e-6,
            slope: 1.0,
            interior_fraction: 0.5,
        }
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.radius / (self.nodes - 1) as f64
    }
}

/// Result of selfdualizing one region.
#[derive(Clone, Debug)]
pub struct SelfdualTable {
    /// The Fitzpatrick function `N`.
    pub fitzpatrick: TabulatedFunction,
    /// `(a, b) -> N*(b, a)`.
    pub conjugate: TabulatedFunction,
    /// The selfdual Lagrangian `L`.
    pub lagrangian: TabulatedFunction,
    pub gap: GapReport,
    /// Smallest `L - N` and `N* - L` over the resolved interior nodes.
    pub sandwich_margin: (f64, f64),
    /// Interior nodes where the conjugate `N*` does not depend on the box
    /// truncation; the sandwich is only checked there.
    pub resolved_nodes: usize,
}

/// Combine `N` and `M(a, b) = N*(b, a)` into
/// `L(z) = min_(z1 + z2 = 2z) N(z1)/2 + M(z2)/2 + |a1 - a2|^p/(4p) + |b1 - b2|^q/(4q)`
/// over nodes. With `z1` on node `j` and `z` on node `i`, `z2` is node
/// `2i - j`, so the minimum runs over a sub-box of nodes without
/// interpolation. `L` is returned on the centred sub-grid with `inner`
/// nodes per axis; `N` and `M` should extend well beyond it so the
/// splittings of every output node stay away from the box edge.
pub fn average_splitting(n: &TabulatedFunction, m: &TabulatedFunction, p: f64, inner: usize) -> Result<TabulatedFunction> {
    if !n.same_grid(m) || n.factors().len() != 2 {
        return Err(Error::GridMismatch("splitting needs N and M on one product grid".into()));
    }
    let outer = n.factors()[0].points_per_axis;
    if inner % 2 == 0 || inner > outer || n.factors().iter().any(|g| g.points_per_axis != outer) {
        return Err(Error::GridMismatch("inner grid must be an odd centred sub-grid".into()));
    }
    let off = (outer - inner) / 2;
    let out_factors: Vec<BoxGrid> = n
        .factors()
        .iter()
        .map(|g| BoxGrid::new(g.dim, g.coord(g.points_per_axis - 1 - off), inner))
        .collect::<Result<_>>()?;
    let q = p / (p - 1.0);
    let shape = n.shape().to_vec();
    let d = shape.len();
    let dim = n.factors()[0].dim;
    let hs: Vec<f64> = n.axes().iter().map(|a| a.spacing).collect();
    // penalty for every offset delta = j - i in [-(n_k - 1), n_k - 1]
    let kshape: Vec<usize> = shape.iter().map(|&s| 2 * s - 1).collect();
    let ktotal: usize = kshape.iter().product();
    let mut kidx = vec![0; d];
    let kernel: Vec<f64> = (0..ktotal)
        .map(|flat| {
            unravel(flat, &kshape, &mut kidx);
            let da: f64 = (0..dim)
                .map(|k| (2.0 * (kidx[k] as f64 - (shape[k] - 1) as f64) * hs[k]).powi(2))
                .sum::<f64>()
                .sqrt();
            let db: f64 = (dim..d)
                .map(|k| (2.0 * (kidx[k] as f64 - (shape[k] - 1) as f64) * hs[k]).powi(2))
                .sum::<f64>()
                .sqrt();
            da.powf(p) / (4.0 * p) + db.powf(q) / (4.0 * q)
        })
        .collect();
    let kstrides = crate::convex::strides(&kshape);
    let strides = n.strides().to_vec();
    let out_shape = vec![inner; d];
    let total: usize = out_shape.iter().product();
    let nv = n.values();
    let mv = m.values();
    let values: Vec<f64> = (0..total)
        .into_par_iter()
        .map(|flat| {
            let mut i = vec![0; d];
            unravel(flat, &out_shape, &mut i);
            i.iter_mut().for_each(|v| *v += off);
            let lo: Vec<usize> = (0..d).map(|k| (2 * i[k]).saturating_sub(shape[k] - 1)).collect();
            let hi: Vec<usize> = (0..d).map(|k| (2 * i[k]).min(shape[k] - 1)).collect();
            let mut j = lo.clone();
            let mut best = f64::INFINITY;
            loop {
                let mut fj = 0;
                let mut fm = 0;
                let mut fk = 0;
                for k in 0..d {
                    fj += j[k] * strides[k];
                    fm += (2 * i[k] - j[k]) * strides[k];
                    fk += (j[k] + shape[k] - 1 - i[k]) * kstrides[k];
                }
                let v = 0.5 * nv[fj] + 0.5 * mv[fm] + kernel[fk];
                if v < best {
                    best = v;
                }
                let mut k = d;
                loop {
                    if k == 0 {
                        return best;
                    }
                    k -= 1;
                    if j[k] < hi[k] {
                        j[k] += 1;
                        break;
                    }
                    j[k] = lo[k];
                }
            }
        })
        .collect();
    TabulatedFunction::new(out_factors, values)
}

/// Build a selfdual Lagrangian for region `r` of `beta` from its Fitzpatrick
/// function, and certify it. Fails with [`Error::SelfdualizationFailed`] if
/// the gap exceeds `tol_gap + slope * h` on the interior.
pub fn selfdualize_region(beta: &MonotoneField, r: usize, opts: &SelfdualizeOptions) -> Result<SelfdualTable> {
    // N and M live on a box twice as wide as L, with the same spacing
    let wide = BoxGrid::new(beta.dim, 2.0 * opts.radius, 2 * opts.nodes - 1)?;
    let h = wide.spacing();
    let n_wide = fitzpatrick(beta, r, &wide, &wide, 4.0 * opts.radius, h)?;
    let m_wide = swapped_conjugate(&n_wide)?;
    let split = average_splitting(&n_wide, &m_wide, beta.growth.p, opts.nodes)?;
    // the node-restricted minimum is convex only up to O(h^2); take the
    // discrete convex envelope
    let grids = split.factors().to_vec();
    let l = conjugate(&conjugate(&split, &grids, Boundary::Lenient)?, &grids, Boundary::Lenient)?;
    let n = crop(&n_wide, opts.nodes)?;
    let m = crop(&m_wide, opts.nodes)?;
    let allowed = opts.tol_gap + opts.slope * h;
    let gap_opts = GapOptions {
        tol_gap: allowed,
        interior_fraction: opts.interior_fraction,
        convexity_tol: 1e-9 * (1.0 + l.values().iter().filter(|v| v.is_finite()).fold(0.0f64, |a, v| a.max(v.abs()))),
    };
    let gap = selfdual_gap_check(&l, &gap_opts)?;
    let mut idx = vec![0; l.arity()];
    // N* values whose maximizer sits in the outer quarter of the wide box
    // are truncation artifacts (true value possibly +inf); recompute from a
    // narrower N and keep only the nodes where both agree
    let mid = 2 * ((3 * (opts.nodes - 1) / 2) / 2) + 1;
    let narrow = crop(&n_wide, mid)?;
    let fl = l.factors();
    let m_narrow = conjugate(&narrow, &[fl[1].clone(), fl[0].clone()], Boundary::Lenient)?.swap_factors()?;
    let mut lower = f64::INFINITY;
    let mut upper = f64::INFINITY;
    let mut resolved = 0;
    for flat in 0..l.len() {
        unravel(flat, l.shape(), &mut idx);
        let mv = m.values()[flat];
        if !l.in_inner_box(&idx, opts.interior_fraction) || (m_narrow.values()[flat] - mv).abs() > 1e-9 * (1.0 + mv.abs()) {
            continue;
        }
        resolved += 1;
        lower = lower.min(l.values()[flat] - n.values()[flat]);
        upper = upper.min(m.values()[flat] - l.values()[flat]);
    }
    if !gap.passed() {
        return Err(Error::SelfdualizationFailed(gap));
    }
    Ok(SelfdualTable {
        fitzpatrick: n,
        conjugate: m,
        lagrangian: l,
        gap,
        sandwich_margin: (lower, upper),
        resolved_nodes: resolved,
    })
}

/// Centred sub-table with `inner` nodes per axis.
fn crop(t: &TabulatedFunction, inner: usize) -> Result<TabulatedFunction> {
    let outer = t.factors()[0].points_per_axis;
    let off = (outer - inner) / 2;
    let factors: Vec<BoxGrid> = t
        .factors()
        .iter()
        .map(|g| BoxGrid::new(g.dim, g.coord(g.points_per_axis - 1 - off), inner))
        .collect::<Result<_>>()?;
    let d = t.arity();
    let shape = vec![inner; d];
    let mut idx = vec![0; d];
    let values = (0..inner.pow(d as u32))
        .map(|flat| {
            unravel(flat, &shape, &mut idx);
            idx.iter_mut().for_each(|v| *v += off);
            t.values()[t.flat_index(&idx)]
        })
        .collect();
    TabulatedFunction::new(factors, values)
}

/// Largest distance between the extracted image of `L` and the image of
/// `beta` over the interior `a` nodes of a 1D table whose image lies in the
/// interior of the `b` box. The extracted image at
/// `a` is the set of `b` nodes whose gap is within `tol` of the smallest gap.
pub fn graph_deviation(l: &TabulatedFunction, beta: &MonotoneField, r: usize, interior_fraction: f64, tol: f64) -> Result<f64> {
    if beta.dim != 1 {
        return Err(Error::invalid("graph deviation is measured on 1D fields"));
    }
    let ga = &l.factors()[0];
    let c = ga.center_index() as f64;
    let mut worst = 0.0f64;
    for i in 0..ga.points_per_axis {
        if (i as f64 - c).abs() > interior_fraction * c {
            continue;
        }
        let a = ga.coord(i);
        let (elo, ehi) = beta.image(r, &[a]);
        let b_edge = interior_fraction * l.factors()[1].radius;
        if elo[0] < -b_edge || ehi[0] > b_edge {
            continue;
        }
        let (slice, bs) = gap_slice(l, &[a])?;
        let min = slice.iter().copied().fold(f64::INFINITY, f64::min);
        let picked: Vec<f64> = bs.iter().zip(&slice).filter(|(_, &v)| v <= min + tol).map(|(b, _)| b[0]).collect();
        let lo = picked.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = picked.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        worst = worst.max((lo - elo[0]).abs()).max((hi - ehi[0]).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{FieldKind, Growth, Law};

    fn field(law: Law, kind: FieldKind) -> MonotoneField {
        let growth = Growth {
            c1: 1.0,
            c2: 0.25,
            m1: 8.0,
            m2: 0.0,
            p: 2.0,
        };
        MonotoneField::uniform(kind, 1, law, growth).unwrap()
    }

    #[test]
    fn identity_reconstructs_identity() {
        let f = field(Law::Linear { matrix: vec![1.0] }, FieldKind::Linear);
        let opts = SelfdualizeOptions::new(2.0, 81);
        let t = selfdualize_region(&f, 0, &opts).unwrap();
        let h = opts.spacing();
        assert!(graph_deviation(&t.lagrangian, &f, 0, 0.5, 1e-9).unwrap() <= 3.0 * h);
        // on the interior the table should sit near a^2/2 + b^2/2
        let v = t.lagrangian.eval(&[0.5, -0.25]);
        assert!((v - (0.125 + 0.03125)).abs() <= 2.0 * h, "{v}");
        assert!(t.sandwich_margin.0 >= -1e-12 && t.sandwich_margin.1 >= -1e-12);
    }

    #[test]
    fn scaled_linear_on_and_off_graph() {
        let f = field(Law::Linear { matrix: vec![4.0] }, FieldKind::Linear);
        let opts = SelfdualizeOptions::new(8.0, 129);
        let t = selfdualize_region(&f, 0, &opts).unwrap();
        assert!((t.lagrangian.eval(&[1.0, 4.0]) - 4.0).abs() <= 1e-6 + opts.spacing());
        assert!(t.lagrangian.eval(&[1.0, 0.0]) > 0.0);
    }

    #[test]
    fn splitting_of_potential_pair_is_fixed() {
        // N = M = a^2/2 + b^2/2 is selfdual and the splitting returns it
        let g = BoxGrid::new(1, 2.0, 41).unwrap();
        let q = TabulatedFunction::from_fn(vec![g.clone(), g], |z| 0.5 * z[0] * z[0] + 0.5 * z[1] * z[1]).unwrap();
        let l = average_splitting(&q, &q, 2.0, 41).unwrap();
        for (a, b) in l.values().iter().zip(q.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
