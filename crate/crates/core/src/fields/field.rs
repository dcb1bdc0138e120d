use std::path::Path;

use serde::{Deserialize, Serialize};

use super::region::{RegionBox, RegionMap};
use crate::error::{Error, Result};
use crate::integrand::{check_skew, ConvexPotential};

/// Growth and coercivity constants of a monotone field:
/// `<xi, eta> >= max(c1 |xi|^p / p - m1, c2 |eta|^q / q - m2)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Growth {
    pub c1: f64,
    pub c2: f64,
    #[serde(default)]
    pub m1: f64,
    #[serde(default)]
    pub m2: f64,
    pub p: f64,
}

impl Growth {
    pub fn q(&self) -> f64 {
        self.p / (self.p - 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p > 1.0) || !(self.c1 > 0.0) || !(self.c2 > 0.0) || self.m1 < 0.0 || self.m2 < 0.0 {
            return Err(Error::invalid(format!(
                "growth record needs p > 1, c1, c2 > 0 and m1, m2 >= 0, got {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FieldKind {
    #[serde(rename = "linear")]
    Linear,
    #[serde(rename = "power")]
    Power,
    #[serde(rename = "potential_plus_skew")]
    PotentialPlusSkew,
    #[serde(rename = "sampled_graph_1d")]
    SampledGraph1d,
}

/// A scalar coefficient or an `N x N` matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Coefficient {
    Scalar(f64),
    Matrix(Vec<Vec<f64>>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PotentialRecord {
    Power { coef: f64, p: f64 },
    Quadratic { matrix: Vec<Vec<f64>> },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamsRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Coefficient>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<PotentialRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<[f64; 2]>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_interval: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_box: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    pub params: ParamsRecord,
}

/// On-disk form of a field definition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldRecord {
    pub kind: FieldKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    pub regions: Vec<RegionRecord>,
    pub growth: Growth,
}

/// The constitutive law of one region.
#[derive(Clone, Debug, PartialEq)]
pub enum Law {
    /// `beta(xi) = A xi`, row-major `A`.
    Linear { matrix: Vec<f64> },
    /// `beta(xi) = coef |xi|^(p-2) xi`.
    Power { coef: f64, p: f64 },
    /// `beta(xi) = grad phi(xi) + G xi` with `G` skew.
    Potential { phi: ConvexPotential, gamma: Option<Vec<f64>> },
    /// A 1D monotone polyline through the given points; repeated abscissae
    /// give vertical segments. Extended beyond its ends along the end
    /// segments (horizontally after a vertical end segment).
    Polyline { points: Vec<(f64, f64)> },
}

impl Law {
    /// Image of `xi` as a box `[lo, hi]`; single-valued laws return `lo == hi`.
    pub fn image(&self, xi: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = xi.len();
        match self {
            Law::Linear { matrix } => {
                let v: Vec<f64> = (0..n).map(|j| (0..n).map(|k| matrix[j * n + k] * xi[k]).sum()).collect();
                (v.clone(), v)
            }
            Law::Power { coef, p } => {
                let r = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
                let s = if r > 0.0 { coef * r.powf(p - 2.0) } else { 0.0 };
                let v: Vec<f64> = xi.iter().map(|x| s * x).collect();
                (v.clone(), v)
            }
            Law::Potential { phi, gamma } => {
                let mut v = vec![0.0; n];
                phi.gradient(xi, &mut v);
                if let Some(g) = gamma {
                    for j in 0..n {
                        v[j] += (0..n).map(|k| g[j * n + k] * xi[k]).sum::<f64>();
                    }
                }
                (v.clone(), v)
            }
            Law::Polyline { points } => {
                let (lo, hi) = polyline_image(points, xi[0]);
                (vec![lo], vec![hi])
            }
        }
    }

    /// Potential `phi` and skew part `G` with `beta = grad phi + G`, when the
    /// law has one in closed form.
    pub fn potential(&self, dim: usize) -> Option<(ConvexPotential, Option<Vec<f64>>)> {
        match self {
            Law::Linear { matrix } => {
                let n = dim;
                let sym: Vec<f64> = (0..n * n).map(|t| 0.5 * (matrix[t] + matrix[(t % n) * n + t / n])).collect();
                let skew: Vec<f64> = (0..n * n).map(|t| 0.5 * (matrix[t] - matrix[(t % n) * n + t / n])).collect();
                let phi = if n == 1 {
                    ConvexPotential::power(sym[0], 2.0).ok()?
                } else {
                    ConvexPotential::quadratic(sym, n).ok()?
                };
                let gamma = skew.iter().any(|&v| v != 0.0).then_some(skew);
                Some((phi, gamma))
            }
            Law::Power { coef, p } => Some((ConvexPotential::power(*coef, *p).ok()?, None)),
            Law::Potential { phi, gamma } => Some((phi.clone(), gamma.clone())),
            Law::Polyline { .. } => None,
        }
    }

    /// Bound on the local Lipschitz constant of the law on `|xi| <= radius`.
    pub fn lipschitz(&self, dim: usize, radius: f64) -> f64 {
        match self {
            Law::Linear { matrix } => matrix.iter().map(|v| v * v).sum::<f64>().sqrt(),
            Law::Power { coef, p } => {
                if *p >= 2.0 {
                    coef * (p - 1.0) * radius.powf(p - 2.0)
                } else {
                    f64::INFINITY
                }
            }
            Law::Potential { phi, gamma } => {
                let n = dim;
                let mut h = vec![0.0; n * n];
                let mut worst = 0.0f64;
                for s in [-1.0, -0.5, 0.5, 1.0] {
                    let x = vec![s * radius / (n as f64).sqrt(); n];
                    phi.hessian(&x, &mut h);
                    worst = worst.max(h.iter().map(|v| v * v).sum::<f64>().sqrt());
                }
                worst + gamma.as_ref().map_or(0.0, |g| g.iter().map(|v| v * v).sum::<f64>().sqrt())
            }
            Law::Polyline { points } => points
                .windows(2)
                .filter(|w| w[1].0 > w[0].0)
                .map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0))
                .fold(0.0, f64::max),
        }
    }
}

/// `[lo, hi]` image of a monotone polyline at `x`.
fn polyline_image(points: &[(f64, f64)], x: f64) -> (f64, f64) {
    let n = points.len();
    let first = points[0];
    let last = points[n - 1];
    if x < first.0 {
        let (x0, y0) = first;
        let next = points.iter().find(|p| p.0 > x0);
        return match next {
            Some(&(x1, y1)) if points[1].0 > x0 => (y0 + (y1 - y0) / (x1 - x0) * (x - x0), y0 + (y1 - y0) / (x1 - x0) * (x - x0)),
            _ => (y0, y0),
        };
    }
    if x > last.0 {
        let (x1, y1) = last;
        return if points[n - 2].0 < x1 {
            let (x0, y0) = points[n - 2];
            let v = y1 + (y1 - y0) / (x1 - x0) * (x - x1);
            (v, v)
        } else {
            (y1, y1)
        };
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &(px, py) in points {
        if px == x {
            lo = lo.min(py);
            hi = hi.max(py);
        }
    }
    for w in points.windows(2) {
        let ((x0, y0), (x1, y1)) = (w[0], w[1]);
        if x0 < x && x < x1 {
            let v = y0 + (y1 - y0) * (x - x0) / (x1 - x0);
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    (lo, hi)
}

/// A state-dependent maximal monotone field on the unit cell, piecewise
/// constant in `x` over the regions of a [`RegionMap`].
#[derive(Clone, Debug, PartialEq)]
pub struct MonotoneField {
    pub kind: FieldKind,
    pub dim: usize,
    pub regions: RegionMap,
    pub laws: Vec<Law>,
    pub growth: Growth,
}

impl MonotoneField {
    pub fn new(kind: FieldKind, regions: RegionMap, laws: Vec<Law>, growth: Growth) -> Result<Self> {
        growth.validate()?;
        if laws.len() != regions.len() {
            return Err(Error::invalid("one law per region is required"));
        }
        let dim = regions.dim;
        for law in &laws {
            match law {
                Law::Linear { matrix } if matrix.len() != dim * dim => {
                    return Err(Error::invalid("linear coefficient has the wrong size"))
                }
                Law::Power { coef, p } if !(*coef >= 0.0) || !(*p > 1.0) => {
                    return Err(Error::invalid("power law needs coef >= 0 and p > 1"))
                }
                Law::Potential { gamma: Some(g), .. } => check_skew(g, dim)?,
                Law::Polyline { points } => {
                    if dim != 1 {
                        return Err(Error::invalid("sampled graphs are one-dimensional"));
                    }
                    if points.len() < 2 {
                        return Err(Error::invalid("a sampled graph needs at least two points"));
                    }
                    if points.windows(2).any(|w| w[1].0 < w[0].0 || w[1].1 < w[0].1) {
                        return Err(Error::invalid("sampled graph points must be nondecreasing in both coordinates"));
                    }
                }
                _ => {}
            }
        }
        Ok(MonotoneField {
            kind,
            dim,
            regions,
            laws,
            growth,
        })
    }

    /// Two-phase linear field on the half-cells split along the first axis.
    pub fn two_phase_linear(a0: f64, a1: f64, growth: Growth) -> Result<Self> {
        MonotoneField::new(
            FieldKind::Linear,
            RegionMap::halves(1, 0),
            vec![Law::Linear { matrix: vec![a0] }, Law::Linear { matrix: vec![a1] }],
            growth,
        )
    }

    /// `x`-independent field with a single law.
    pub fn uniform(kind: FieldKind, dim: usize, law: Law, growth: Growth) -> Result<Self> {
        MonotoneField::new(kind, RegionMap::whole(dim), vec![law], growth)
    }

    pub fn region_of(&self, x: &[f64]) -> Option<usize> {
        self.regions.locate(x)
    }

    pub fn image(&self, region: usize, xi: &[f64]) -> (Vec<f64>, Vec<f64>) {
        self.laws[region].image(xi)
    }

    /// Sample points `(xi, eta)` of the graph of region `r` with `|xi_k| <= radius`,
    /// consecutive samples at most `h` apart in each coordinate (1D) or on a
    /// lattice of step `h / max(1, Lip)` (2D).
    pub fn sample_graph(&self, r: usize, radius: f64, h: f64) -> Vec<(Vec<f64>, Vec<f64>)> {
        let law = &self.laws[r];
        if self.dim == 1 {
            return sample_graph_1d(law, radius, h);
        }
        let lip = law.lipschitz(self.dim, radius).max(1.0);
        let step = (h / lip).min(h);
        let half = ((radius / step).ceil() as usize).min(120);
        let step = radius / half as f64;
        let m = 2 * half + 1;
        let mut out = Vec::with_capacity(m * m);
        for i in 0..m {
            for j in 0..m {
                let xi = vec![(i as f64 - half as f64) * step, (j as f64 - half as f64) * step];
                let (lo, _) = law.image(&xi);
                out.push((xi, lo));
            }
        }
        out
    }

    /// An element of `beta(x, 0)` of least norm.
    pub fn eta0(&self, r: usize) -> Vec<f64> {
        let zero = vec![0.0; self.dim];
        let (lo, hi) = self.image(r, &zero);
        lo.iter()
            .zip(&hi)
            .map(|(&l, &h)| if l <= 0.0 && 0.0 <= h { 0.0 } else if l > 0.0 { l } else { h })
            .collect()
    }

    pub fn from_record(rec: &FieldRecord) -> Result<Self> {
        let dim = match rec.dim {
            Some(d) => d,
            None => match rec.regions.first() {
                Some(RegionRecord { x_box: Some(b), .. }) => b.len(),
                _ => 1,
            },
        };
        let mut boxes = Vec::new();
        let mut laws = Vec::new();
        for (i, r) in rec.regions.iter().enumerate() {
            let bx = match (&r.x_interval, &r.x_box) {
                (Some([lo, hi]), None) => RegionBox::interval(*lo, *hi),
                (None, Some(b)) => RegionBox {
                    lo: b.iter().map(|v| v[0]).collect(),
                    hi: b.iter().map(|v| v[1]).collect(),
                },
                (None, None) if rec.regions.len() == 1 => RegionBox {
                    lo: vec![0.0; dim],
                    hi: vec![1.0; dim],
                },
                _ => {
                    return Err(Error::config(
                        format!("/regions/{i}"),
                        "exactly one of x_interval and x_box is required",
                    ))
                }
            };
            boxes.push(bx);
            laws.push(law_from_params(rec.kind, dim, &r.params, &rec.growth).map_err(|e| match e {
                Error::InvalidParameter(m) => Error::config(format!("/regions/{i}/params"), m),
                other => other,
            })?);
        }
        let regions = RegionMap::new(dim, boxes).map_err(|e| Error::config("/regions", e.to_string()))?;
        MonotoneField::new(rec.kind, regions, laws, rec.growth.clone())
    }

    pub fn to_record(&self) -> FieldRecord {
        let regions = self
            .regions
            .boxes
            .iter()
            .zip(&self.laws)
            .map(|(b, law)| {
                let (x_interval, x_box) = if self.dim == 1 {
                    (Some([b.lo[0], b.hi[0]]), None)
                } else {
                    (None, Some(b.lo.iter().zip(&b.hi).map(|(l, h)| [*l, *h]).collect()))
                };
                RegionRecord {
                    x_interval,
                    x_box,
                    params: params_of(law, self.dim),
                }
            })
            .collect();
        FieldRecord {
            kind: self.kind,
            dim: Some(self.dim),
            regions,
            growth: self.growth.clone(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let rec: FieldRecord = serde_json::from_str(text)?;
        MonotoneField::from_record(&rec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        MonotoneField::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_record())?)
    }
}

fn matrix_rows(rows: &[Vec<f64>], dim: usize) -> Result<Vec<f64>> {
    if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
        return Err(Error::invalid(format!("expected a {dim}x{dim} matrix")));
    }
    Ok(rows.iter().flatten().copied().collect())
}

fn law_from_params(kind: FieldKind, dim: usize, p: &ParamsRecord, growth: &Growth) -> Result<Law> {
    match kind {
        FieldKind::Linear => {
            let matrix = match &p.a {
                Some(Coefficient::Scalar(a)) => {
                    let mut m = vec![0.0; dim * dim];
                    for k in 0..dim {
                        m[k * dim + k] = *a;
                    }
                    m
                }
                Some(Coefficient::Matrix(rows)) => matrix_rows(rows, dim)?,
                None => return Err(Error::invalid("linear field needs coefficient `a`")),
            };
            Ok(Law::Linear { matrix })
        }
        FieldKind::Power => {
            let coef = match &p.a {
                Some(Coefficient::Scalar(a)) => *a,
                _ => return Err(Error::invalid("power field needs a scalar coefficient `a`")),
            };
            Ok(Law::Power {
                coef,
                p: p.p.unwrap_or(growth.p),
            })
        }
        FieldKind::PotentialPlusSkew => {
            let phi = match &p.phi {
                Some(PotentialRecord::Power { coef, p }) => ConvexPotential::power(*coef, *p)?,
                Some(PotentialRecord::Quadratic { matrix }) => ConvexPotential::quadratic(matrix_rows(matrix, dim)?, dim)?,
                None => return Err(Error::invalid("potential_plus_skew needs `phi`")),
            };
            let gamma = match &p.gamma {
                Some(rows) => Some(matrix_rows(rows, dim)?),
                None => None,
            };
            Ok(Law::Potential { phi, gamma })
        }
        FieldKind::SampledGraph1d => {
            let points = p
                .points
                .as_ref()
                .ok_or_else(|| Error::invalid("sampled_graph_1d needs `points`"))?
                .iter()
                .map(|q| (q[0], q[1]))
                .collect();
            Ok(Law::Polyline { points })
        }
    }
}

fn params_of(law: &Law, dim: usize) -> ParamsRecord {
    let rows = |m: &[f64]| m.chunks(dim).map(|r| r.to_vec()).collect::<Vec<_>>();
    match law {
        Law::Linear { matrix } => {
            let scalar = (0..dim * dim).all(|t| if t / dim == t % dim { matrix[t] == matrix[0] } else { matrix[t] == 0.0 });
            ParamsRecord {
                a: Some(if scalar {
                    Coefficient::Scalar(matrix[0])
                } else {
                    Coefficient::Matrix(rows(matrix))
                }),
                ..Default::default()
            }
        }
        Law::Power { coef, p } => ParamsRecord {
            a: Some(Coefficient::Scalar(*coef)),
            p: Some(*p),
            ..Default::default()
        },
        Law::Potential { phi, gamma } => ParamsRecord {
            phi: match phi {
                ConvexPotential::Power { coef, p } => Some(PotentialRecord::Power { coef: *coef, p: *p }),
                ConvexPotential::Quadratic { matrix, .. } => Some(PotentialRecord::Quadratic { matrix: rows(matrix) }),
                ConvexPotential::Table(_) => None,
            },
            gamma: gamma.as_ref().map(|g| rows(g)),
            ..Default::default()
        },
        Law::Polyline { points } => ParamsRecord {
            points: Some(points.iter().map(|&(x, y)| [x, y]).collect()),
            ..Default::default()
        },
    }
}

/// Walk the graph from `-radius` to `radius` so that consecutive samples
/// differ by at most `h` in both coordinates, including vertical segments.
fn sample_graph_1d(law: &Law, radius: f64, h: f64) -> Vec<(Vec<f64>, Vec<f64>)> {
    let mut out: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    let push_interval = |out: &mut Vec<(Vec<f64>, Vec<f64>)>, x: f64, lo: f64, hi: f64| {
        let k = ((hi - lo) / h).ceil().max(0.0) as usize;
        for i in 0..=k {
            let y = if k == 0 { lo } else { lo + (hi - lo) * i as f64 / k as f64 };
            out.push((vec![x], vec![y]));
        }
    };
    let mut breaks: Vec<f64> = match law {
        Law::Polyline { points } => points.iter().map(|p| p.0).filter(|x| x.abs() < radius).collect(),
        _ => vec![],
    };
    breaks.push(radius);
    breaks.dedup();
    let mut x = -radius;
    let (lo, hi) = law.image(&[x]);
    push_interval(&mut out, x, lo[0], hi[0]);
    let mut prev_hi = hi[0];
    let mut bi = 0;
    while x < radius {
        while bi < breaks.len() && breaks[bi] <= x {
            bi += 1;
        }
        let limit = breaks.get(bi).copied().unwrap_or(radius);
        let mut step = (limit - x).min(h);
        loop {
            let (lo, _) = law.image(&[x + step]);
            if (lo[0] - prev_hi).abs() <= h || step <= 1e-9 * h {
                break;
            }
            step *= 0.5;
        }
        x = if (limit - x - step).abs() < 1e-12 { limit } else { x + step };
        let (lo, hi) = law.image(&[x]);
        if (lo[0] - prev_hi).abs() > h {
            // a jump in the image: bridge it vertically
            push_interval(&mut out, x, prev_hi.min(lo[0]), prev_hi.max(lo[0]));
        }
        push_interval(&mut out, x, lo[0], hi[0]);
        prev_hi = hi[0];
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn growth() -> Growth {
        Growth {
            c1: 1.0,
            c2: 0.25,
            m1: 0.0,
            m2: 0.0,
            p: 2.0,
        }
    }

    #[test]
    fn json_round_trip() {
        let text = r#"{
            "kind": "linear",
            "regions": [
                {"x_interval": [0.0, 0.5], "params": {"a": 1.0}},
                {"x_interval": [0.5, 1.0], "params": {"a": 4.0}}
            ],
            "growth": {"c1": 1.0, "c2": 0.25, "p": 2.0}
        }"#;
        let f = MonotoneField::from_json(text).unwrap();
        assert_eq!(f, MonotoneField::two_phase_linear(1.0, 4.0, growth()).unwrap());
        let again = MonotoneField::from_json(&f.to_json().unwrap()).unwrap();
        assert_eq!(again, f);
        assert_eq!(f.image(1, &[0.5]).0, vec![2.0]);
    }

    #[test]
    fn bad_params_point_at_region() {
        let text = r#"{"kind": "power", "regions": [{"x_interval": [0, 1], "params": {}}],
                       "growth": {"c1": 1, "c2": 1, "p": 3}}"#;
        match MonotoneField::from_json(text) {
            Err(Error::Config { pointer, .. }) => assert_eq!(pointer, "/regions/0/params"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn abs_graph_is_set_valued_at_origin() {
        let law = Law::Polyline {
            points: vec![(-1.0, -1.0), (0.0, -1.0), (0.0, 1.0), (1.0, 1.0)],
        };
        assert_eq!(law.image(&[0.0]), (vec![-1.0], vec![1.0]));
        assert_eq!(law.image(&[3.0]), (vec![1.0], vec![1.0]));
        assert_eq!(law.image(&[-0.5]), (vec![-1.0], vec![-1.0]));
        let f = MonotoneField::uniform(FieldKind::SampledGraph1d, 1, law, growth()).unwrap();
        let s = f.sample_graph(0, 2.0, 0.1);
        for w in s.windows(2) {
            assert!((w[1].0[0] - w[0].0[0]).abs() <= 0.1 + 1e-12);
            assert!((w[1].1[0] - w[0].1[0]).abs() <= 0.1 + 1e-12);
        }
        assert!(s.iter().any(|(x, y)| x[0] == 0.0 && y[0] == 0.0));
        assert_eq!(f.eta0(0), vec![0.0]);
    }

    #[test]
    fn non_monotone_points_rejected() {
        let law = Law::Polyline {
            points: vec![(0.0, 1.0), (1.0, 0.0)],
        };
        assert!(MonotoneField::uniform(FieldKind::SampledGraph1d, 1, law, growth()).is_err());
    }

    #[test]
    fn linear_splits_into_potential_and_skew() {
        let law = Law::Linear {
            matrix: vec![1.0, 1.0, -1.0, 1.0],
        };
        let (phi, gamma) = law.potential(2).unwrap();
        assert_eq!(gamma, Some(vec![0.0, 1.0, -1.0, 0.0]));
        assert_eq!(phi.value(&[1.0, 0.0]), 0.5);
    }
}
