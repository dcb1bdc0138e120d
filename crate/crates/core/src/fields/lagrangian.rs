use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::field::{Growth, MonotoneField};
use super::region::RegionMap;
use super::selfdualize::{selfdualize_region, SelfdualizeOptions};
use crate::convex::{BoxGrid, GapReport, Interpolation, TabulatedFunction};
use crate::error::{Error, Result};
use crate::integrand::{check_skew, ConvexIntegrand, ConvexPotential, PotentialForm, ShiftedIntegrand, TableIntegrand};

/// Two-sided growth estimate
/// `C0 (|a|^p + |b|^q - n0) <= L(a, b) <= C1 (|a|^p + |b|^q + n1)` with
/// per-region offsets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Est200 {
    pub c0: f64,
    pub c1: f64,
    pub p: f64,
    pub q: f64,
    pub n0: Vec<f64>,
    pub n1: Vec<f64>,
}

impl Est200 {
    /// Lower and upper bound at `(a, b)` for region `r`.
    pub fn bounds(&self, r: usize, a: &[f64], b: &[f64]) -> (f64, f64) {
        let s = norm(a).powf(self.p) + norm(b).powf(self.q);
        (self.c0 * (s - self.n0[r]), self.c1 * (s + self.n1[r]))
    }

    /// Bounds for the cell average, using mean offsets.
    pub fn mean_bounds(&self, fractions: &[f64], a: &[f64], b: &[f64]) -> (f64, f64) {
        let s = norm(a).powf(self.p) + norm(b).powf(self.q);
        let n0: f64 = fractions.iter().zip(&self.n0).map(|(f, n)| f * n).sum();
        let n1: f64 = fractions.iter().zip(&self.n1).map(|(f, n)| f * n).sum();
        (self.c0 * (s - n0), self.c1 * (s + n1))
    }

    /// Constants for potential-form Lagrangians with closed-form bounds:
    /// pure powers without skew part, or quadratics (any skew part).
    pub fn for_potentials(parts: &[(ConvexPotential, Option<Vec<f64>>)], dim: usize) -> Option<Est200> {
        let mut c0 = f64::INFINITY;
        let mut c1 = 0.0f64;
        let mut exps = None;
        for (phi, gamma) in parts {
            let (lo, hi, p) = match (phi, gamma) {
                (ConvexPotential::Power { coef, p }, None) => {
                    let q = p / (p - 1.0);
                    let (x, y) = (coef / p, coef.powf(1.0 - q) / q);
                    (x.min(y), x.max(y), *p)
                }
                _ => {
                    let s = quadratic_matrix(phi, dim)?;
                    let sinv = s.clone().try_inverse()?;
                    let g = match gamma {
                        Some(g) => DMatrix::from_row_slice(dim, dim, g),
                        None => DMatrix::zeros(dim, dim),
                    };
                    let mut q = DMatrix::zeros(2 * dim, 2 * dim);
                    let gt = g.transpose();
                    q.view_mut((0, 0), (dim, dim)).copy_from(&(&s + &gt * &sinv * &g));
                    q.view_mut((0, dim), (dim, dim)).copy_from(&(-(&gt * &sinv)));
                    q.view_mut((dim, 0), (dim, dim)).copy_from(&(-(&sinv * &g)));
                    q.view_mut((dim, dim), (dim, dim)).copy_from(&sinv);
                    let q = (&q + q.transpose()) * 0.5;
                    let e = q.symmetric_eigenvalues();
                    (0.5 * e.min(), 0.5 * e.max(), 2.0)
                }
            };
            match exps {
                None => exps = Some(p),
                Some(e) if e != p => return None,
                _ => {}
            }
            c0 = c0.min(lo);
            c1 = c1.max(hi);
        }
        let p = exps?;
        Some(Est200 {
            c0,
            c1,
            p,
            q: p / (p - 1.0),
            n0: vec![0.0; parts.len()],
            n1: vec![0.0; parts.len()],
        })
    }

    /// Constants implied by the growth record of the field for the
    /// Fitzpatrick-based Lagrangian. `eta0[r]` is the least-norm element of
    /// `beta(x_r, 0)`.
    pub fn for_growth(g: &Growth, eta0: &[Vec<f64>]) -> Est200 {
        let (p, q) = (g.p, g.q());
        let c = g.c1 + g.c2;
        let m = g.m1 + g.m2;
        let a = c.powf(p - 1.0) * 2f64.powf(p - 1.0) / p + 2f64.powf(p) / (4.0 * p);
        let b = c.powf(q - 1.0) * 2f64.powf(q - 1.0) * 2f64.powf(q) / (2.0 * q) + 2f64.powf(2.0 * q - 1.0) / (4.0 * q);
        let c1 = a.max(b);
        let c0 = ((q * b).powf(1.0 - p) / p).min((p * a).powf(1.0 - q) / q);
        let k: Vec<f64> = eta0
            .iter()
            .map(|e| {
                let e = norm(e).powf(q);
                c.powf(q - 1.0) * 2f64.powf(q - 1.0) * e / (2.0 * q) + m / (2.0 * c) + 2f64.powf(2.0 * q - 1.0) * e / (4.0 * q)
            })
            .collect();
        Est200 {
            c0,
            c1,
            p,
            q,
            n0: k.iter().map(|k| k / c0).collect(),
            n1: k.iter().map(|k| k / c1).collect(),
        }
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn quadratic_matrix(phi: &ConvexPotential, dim: usize) -> Option<DMatrix<f64>> {
    match phi {
        ConvexPotential::Quadratic { matrix, dim: d } => Some(DMatrix::from_row_slice(*d, *d, matrix)),
        ConvexPotential::Power { coef, p } if *p == 2.0 => Some(DMatrix::identity(dim, dim) * *coef),
        _ => None,
    }
}

/// How the Lagrangian of each region was built.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LagrangianSource {
    /// `phi(a) + phi*(b - G a)` from the potential of the field.
    Potential,
    /// The averaged splitting of the Fitzpatrick function.
    Fitzpatrick,
    /// Supplied directly.
    Custom,
}

/// How [`OmegaLagrangian::from_field`] chooses a construction.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LagrangianMode {
    /// Potential form when every region has one, Fitzpatrick otherwise.
    #[default]
    Auto,
    Potential,
    Fitzpatrick,
}

/// A selfdual Lagrangian `L(x, a, b)` that is piecewise constant in `x`
/// over the regions of the unit cell.
#[derive(Clone)]
pub struct OmegaLagrangian {
    pub dim: usize,
    pub regions: RegionMap,
    pub integrands: Vec<Arc<dyn ConvexIntegrand>>,
    /// Region tables, when built.
    pub tables: Vec<Option<TabulatedFunction>>,
    /// Selfduality reports of the region tables.
    pub reports: Vec<Option<GapReport>>,
    pub bounds: Option<Est200>,
    pub growth: Option<Growth>,
    pub source: LagrangianSource,
    /// Potentials and skew parts for potential-form Lagrangians.
    pub potentials: Option<Vec<(ConvexPotential, Option<Vec<f64>>)>>,
}

impl std::fmt::Debug for OmegaLagrangian {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OmegaLagrangian")
            .field("dim", &self.dim)
            .field("regions", &self.regions)
            .field("source", &self.source)
            .field("bounds", &self.bounds)
            .finish_non_exhaustive()
    }
}

/// Potential-form Lagrangian `phi_r(a) + phi_r*(b - G_r a)` per region.
/// `conj_radius` is the box used to conjugate tabulated potentials.
pub fn potential_lagrangian(
    regions: RegionMap,
    parts: Vec<(ConvexPotential, Option<Vec<f64>>)>,
    growth: Option<Growth>,
    conj_radius: f64,
) -> Result<OmegaLagrangian> {
    if parts.len() != regions.len() {
        return Err(Error::invalid("one potential per region is required"));
    }
    let dim = regions.dim;
    let mut integrands: Vec<Arc<dyn ConvexIntegrand>> = Vec::with_capacity(parts.len());
    for (phi, gamma) in &parts {
        if let Some(g) = gamma {
            check_skew(g, dim)?;
        }
        integrands.push(Arc::new(PotentialForm::new(phi.clone(), dim, gamma.clone(), conj_radius)?));
    }
    let n = parts.len();
    Ok(OmegaLagrangian {
        dim,
        bounds: Est200::for_potentials(&parts, dim),
        regions,
        integrands,
        tables: vec![None; n],
        reports: vec![None; n],
        growth,
        source: LagrangianSource::Potential,
        potentials: Some(parts),
    })
}

impl OmegaLagrangian {
    /// A Lagrangian from arbitrary selfdual integrands.
    pub fn from_integrands(regions: RegionMap, integrands: Vec<Arc<dyn ConvexIntegrand>>, bounds: Option<Est200>, growth: Option<Growth>) -> Result<Self> {
        if integrands.len() != regions.len() {
            return Err(Error::invalid("one integrand per region is required"));
        }
        let dim = regions.dim;
        if integrands.iter().any(|f| f.arity() != 2 * dim) {
            return Err(Error::invalid("integrands must take (a, b) in R^N x R^N"));
        }
        let n = integrands.len();
        Ok(OmegaLagrangian {
            dim,
            regions,
            integrands,
            tables: vec![None; n],
            reports: vec![None; n],
            bounds,
            growth,
            source: LagrangianSource::Custom,
            potentials: None,
        })
    }

    /// Selfdual Lagrangian of a monotone field.
    pub fn from_field(beta: &MonotoneField, mode: LagrangianMode, opts: &SelfdualizeOptions) -> Result<Self> {
        let parts: Option<Vec<_>> = beta.laws.iter().map(|l| l.potential(beta.dim)).collect();
        match (mode, parts) {
            (LagrangianMode::Auto | LagrangianMode::Potential, Some(parts)) => {
                potential_lagrangian(beta.regions.clone(), parts, Some(beta.growth.clone()), opts.radius)
            }
            (LagrangianMode::Potential, None) => Err(Error::invalid("field has no closed-form potential in some region")),
            _ => selfdualize(beta, opts),
        }
    }

    pub fn len(&self) -> usize {
        self.integrands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.integrands.is_empty()
    }

    /// Region of a point of `R^N`, periodically.
    pub fn region_at(&self, y: &[f64]) -> usize {
        self.regions.locate(y).unwrap_or(0)
    }

    pub fn value(&self, y: &[f64], a: &[f64], b: &[f64]) -> f64 {
        let mut z = a.to_vec();
        z.extend_from_slice(b);
        self.integrands[self.region_at(y)].value(&z)
    }

    /// `sum_r |Q_r| L_r(a, b)`.
    pub fn mean_value(&self, a: &[f64], b: &[f64]) -> f64 {
        let mut z = a.to_vec();
        z.extend_from_slice(b);
        self.regions.fractions().iter().zip(&self.integrands).map(|(f, l)| f * l.value(&z)).sum()
    }

    pub fn x_independent(&self) -> bool {
        self.integrands.len() == 1
    }

    /// `(x, a, b) -> L*(x, b, a)` per region, i.e. the conjugate with the
    /// arguments exchanged back. Requires closed-form conjugates.
    pub fn conjugate_lagrangian(&self) -> Result<OmegaLagrangian> {
        let integrands = self
            .integrands
            .iter()
            .map(|f| f.conjugate().ok_or_else(|| Error::invalid("region integrand has no closed-form conjugate")))
            .collect::<Result<Vec<_>>>()?;
        let mut out = OmegaLagrangian::from_integrands(self.regions.clone(), integrands, None, self.growth.clone())?;
        out.source = self.source;
        Ok(out)
    }

    /// `L + c`.
    pub fn shift_constant(&self, c: f64) -> OmegaLagrangian {
        let n = 2 * self.dim;
        let mut out = self.clone();
        out.integrands = self
            .integrands
            .iter()
            .map(|f| Arc::new(ShiftedIntegrand::new(f.clone(), vec![0.0; n], vec![0.0; n], c)) as Arc<dyn ConvexIntegrand>)
            .collect();
        out.tables = vec![None; self.len()];
        out.potentials = None;
        out
    }

    /// Tabulate every region on the product grid `[g, g]`.
    pub fn tabulate_regions(&self, g: &BoxGrid) -> Result<Vec<TabulatedFunction>> {
        self.integrands
            .iter()
            .map(|f| {
                let shell = TabulatedFunction::new(vec![g.clone(), g.clone()], vec![0.0; g.len() * g.len()])?;
                let values: Vec<f64> = (0..shell.len()).into_par_iter().map(|i| f.value(&shell.node(i))).collect();
                TabulatedFunction::new(vec![g.clone(), g.clone()], values)
            })
            .collect()
    }
}

/// Selfdualize every region of `beta` through its Fitzpatrick function.
/// Each region's table is wrapped as a cubic table integrand.
pub fn selfdualize(beta: &MonotoneField, opts: &SelfdualizeOptions) -> Result<OmegaLagrangian> {
    let results: Vec<_> = (0..beta.laws.len()).into_par_iter().map(|r| selfdualize_region(beta, r, opts)).collect::<Result<_>>()?;
    let eta0: Vec<Vec<f64>> = (0..beta.laws.len()).map(|r| beta.eta0(r)).collect();
    let mut integrands: Vec<Arc<dyn ConvexIntegrand>> = Vec::new();
    let mut tables = Vec::new();
    let mut reports = Vec::new();
    for t in results {
        integrands.push(Arc::new(TableIntegrand::new(t.lagrangian.clone().with_interpolation(Interpolation::Cubic))));
        tables.push(Some(t.lagrangian));
        reports.push(Some(t.gap));
    }
    Ok(OmegaLagrangian {
        dim: beta.dim,
        regions: beta.regions.clone(),
        integrands,
        tables,
        reports,
        bounds: Some(Est200::for_growth(&beta.growth, &eta0)),
        growth: Some(beta.growth.clone()),
        source: LagrangianSource::Fitzpatrick,
        potentials: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convex::{graph_extract, selfdual_gap_check, GapOptions};

    #[test]
    fn two_phase_linear_constants() {
        let parts = vec![
            (ConvexPotential::power(1.0, 2.0).unwrap(), None),
            (ConvexPotential::power(4.0, 2.0).unwrap(), None),
        ];
        let e = Est200::for_potentials(&parts, 1).unwrap();
        assert_eq!((e.c0, e.c1), (0.125, 2.0));
    }

    #[test]
    fn skew_example_and_gap() {
        let regions = RegionMap::whole(2);
        let gamma = vec![0.0, 1.0, -1.0, 0.0];
        let l = potential_lagrangian(regions, vec![(ConvexPotential::power(1.0, 2.0).unwrap(), Some(gamma))], None, 4.0).unwrap();
        let g = BoxGrid::new(2, 4.0, 33).unwrap();
        let t = &l.tabulate_regions(&g).unwrap()[0];
        // node maximizers of the conjugate stay within |z_k| <= 3 on the quarter box
        let opts = GapOptions {
            interior_fraction: 0.25,
            ..GapOptions::with_tol(0.05)
        };
        let r = selfdual_gap_check(t, &opts).unwrap();
        assert!(r.passed(), "{r:?}");
        let img = graph_extract(t, &[1.0, 0.0], 1e-9).unwrap();
        assert_eq!(img.points, vec![vec![1.0, -1.0]]);
        // quadratic bound constants: eigenvalues of [[2I, -G^T], [-G, I]] / 2
        let e = l.bounds.unwrap();
        assert!((e.c0 - (3.0 - 5f64.sqrt()) / 4.0).abs() < 1e-12 && (e.c1 - (3.0 + 5f64.sqrt()) / 4.0).abs() < 1e-12);
    }

    #[test]
    fn cubic_power_graph() {
        let l = potential_lagrangian(RegionMap::whole(1), vec![(ConvexPotential::power(1.0, 3.0).unwrap(), None)], None, 8.0).unwrap();
        let g = BoxGrid::new(1, 8.0, 321).unwrap();
        let t = &l.tabulate_regions(&g).unwrap()[0];
        let (lo, hi) = graph_extract(t, &[2.0], 1e-9).unwrap().interval.unwrap();
        assert_eq!((lo, hi), (4.0, 4.0));
    }

    #[test]
    fn non_skew_gamma_rejected() {
        let r = potential_lagrangian(
            RegionMap::whole(2),
            vec![(ConvexPotential::power(1.0, 2.0).unwrap(), Some(vec![0.0, 1.0, 1.0, 0.0]))],
            None,
            4.0,
        );
        assert!(matches!(r, Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn constant_shift() {
        let l = potential_lagrangian(RegionMap::whole(1), vec![(ConvexPotential::power(2.0, 2.0).unwrap(), None)], None, 4.0).unwrap();
        let s = l.shift_constant(0.75);
        assert!((s.value(&[0.3], &[0.4], &[1.0]) - l.value(&[0.3], &[0.4], &[1.0]) - 0.75).abs() < 1e-15);
        let c = l.conjugate_lagrangian().unwrap();
        // L*(b, a) = L(a, b) stored as (a, b) -> L*(a, b)
        assert!((c.value(&[0.0], &[1.0], &[0.4]) - l.value(&[0.0], &[0.4], &[1.0])).abs() < 1e-12);
    }
}
