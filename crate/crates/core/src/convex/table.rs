use std::path::Path;

use serde::de::{self, Deserializer, Visitor};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};

use super::grid::{flatten_axes, strides, unravel, Axis, BoxGrid};
use crate::error::{Error, Result};

/// How a table is evaluated between nodes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Interpolation {
    /// Tensor-product linear interpolation; `+inf` outside the box.
    #[default]
    Multilinear,
    /// Linear interpolation of the lower convex hull of the nodes (1D only).
    LowerConvexEnvelope,
    /// Tensor-product Catmull-Rom cubic with quadratic end extrapolation.
    /// Reproduces quadratics exactly and extends polynomially outside the box.
    Cubic,
}

/// Values of a function on a product of [`BoxGrid`]s. `f64::INFINITY` is the
/// `+inf` sentinel; it is ordered above every finite value and saturates under
/// addition.
#[derive(Clone, Debug, PartialEq)]
pub struct TabulatedFunction {
    factors: Vec<BoxGrid>,
    axes: Vec<Axis>,
    shape: Vec<usize>,
    strides: Vec<usize>,
    values: Vec<f64>,
    interpolation: Interpolation,
}

impl TabulatedFunction {
    pub fn new(factors: Vec<BoxGrid>, values: Vec<f64>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::invalid("a table needs at least one grid"));
        }
        for g in &factors {
            g.validate()?;
        }
        let axes = flatten_axes(&factors);
        let shape: Vec<usize> = axes.iter().map(|a| a.n).collect();
        let total: usize = shape.iter().product();
        if values.len() != total {
            return Err(Error::GridMismatch(format!(
                "{} values for {} nodes",
                values.len(),
                total
            )));
        }
        if values.iter().any(|v| v.is_nan() || *v == f64::NEG_INFINITY) {
            return Err(Error::invalid("table values must be finite or +inf"));
        }
        let strides = strides(&shape);
        Ok(TabulatedFunction {
            factors,
            axes,
            shape,
            strides,
            values,
            interpolation: Interpolation::Multilinear,
        })
    }

    /// Tabulate `f` at every node.
    pub fn from_fn(factors: Vec<BoxGrid>, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let axes = flatten_axes(&factors);
        let shape: Vec<usize> = axes.iter().map(|a| a.n).collect();
        let total: usize = shape.iter().product();
        let mut idx = vec![0; shape.len()];
        let mut x = vec![0.0; shape.len()];
        let mut values = Vec::with_capacity(total);
        for flat in 0..total {
            unravel(flat, &shape, &mut idx);
            for (k, a) in axes.iter().enumerate() {
                x[k] = a.coord(idx[k]);
            }
            values.push(f(&x));
        }
        TabulatedFunction::new(factors, values)
    }

    pub fn with_interpolation(mut self, interpolation: Interpolation) -> Self {
        self.interpolation = interpolation;
        self
    }

    pub fn interpolation(&self) -> Interpolation {
        self.interpolation
    }

    pub fn factors(&self) -> &[BoxGrid] {
        &self.factors
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Total number of scalar variables.
    pub fn arity(&self) -> usize {
        self.axes.len()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Largest spacing over all axes.
    pub fn max_spacing(&self) -> f64 {
        self.axes.iter().map(|a| a.spacing).fold(0.0, f64::max)
    }

    pub fn node(&self, flat: usize) -> Vec<f64> {
        let mut idx = vec![0; self.shape.len()];
        unravel(flat, &self.shape, &mut idx);
        idx.iter().zip(&self.axes).map(|(&i, a)| a.coord(i)).collect()
    }

    pub fn node_into(&self, flat: usize, idx: &mut [usize], x: &mut [f64]) {
        unravel(flat, &self.shape, idx);
        for k in 0..idx.len() {
            x[k] = self.axes[k].coord(idx[k]);
        }
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    /// Flat index of the node at `x`, if `x` is (within rounding) a node.
    pub fn node_index_of(&self, x: &[f64]) -> Option<usize> {
        let mut flat = 0;
        for (k, a) in self.axes.iter().enumerate() {
            let s = x[k] / a.spacing + a.center() as f64;
            let r = s.round();
            if (s - r).abs() > 1e-9 || r < 0.0 || r > (a.n - 1) as f64 {
                return None;
            }
            flat += r as usize * self.strides[k];
        }
        Some(flat)
    }

    pub fn same_grid(&self, other: &TabulatedFunction) -> bool {
        self.factors == other.factors
    }

    pub fn has_finite_value(&self) -> bool {
        self.values.iter().any(|v| v.is_finite())
    }

    /// Whether the node lies in the inner box `|x_k| <= fraction R_k`.
    pub fn in_inner_box(&self, idx: &[usize], fraction: f64) -> bool {
        idx.iter().zip(&self.axes).all(|(&i, a)| a.coord(i).abs() <= fraction * a.radius + 1e-12)
    }

    /// Swap the two factors of a two-factor table: `g(b, a) = f(a, b)`.
    pub fn swap_factors(&self) -> Result<TabulatedFunction> {
        if self.factors.len() != 2 {
            return Err(Error::GridMismatch("swap needs exactly two factors".into()));
        }
        let (d0, d1) = (self.factors[0].dim, self.factors[1].dim);
        let new_factors = vec![self.factors[1].clone(), self.factors[0].clone()];
        let new_axes = flatten_axes(&new_factors);
        let new_shape: Vec<usize> = new_axes.iter().map(|a| a.n).collect();
        let mut idx_new = vec![0; new_shape.len()];
        let mut idx_old = vec![0; new_shape.len()];
        let mut values = vec![0.0; self.values.len()];
        for (flat, v) in values.iter_mut().enumerate() {
            unravel(flat, &new_shape, &mut idx_new);
            idx_old[..d0].copy_from_slice(&idx_new[d1..d1 + d0]);
            idx_old[d0..].copy_from_slice(&idx_new[..d1]);
            *v = self.values[self.flat_index(&idx_old)];
        }
        Ok(TabulatedFunction::new(new_factors, values)?.with_interpolation(self.interpolation))
    }

    /// Evaluate with the table's interpolation rule.
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self.interpolation {
            Interpolation::Multilinear => self.eval_multilinear(x),
            Interpolation::LowerConvexEnvelope => self.eval_lower_envelope(x),
            Interpolation::Cubic => self.eval_cubic(x, None, None),
        }
    }

    pub fn eval_multilinear(&self, x: &[f64]) -> f64 {
        let d = self.axes.len();
        let mut base = 0usize;
        let mut frac = [0.0f64; 8];
        let mut cell_stride = [0usize; 8];
        debug_assert!(d <= 8);
        for k in 0..d {
            match self.axes[k].locate(x[k]) {
                Some((i, t)) => {
                    base += i * self.strides[k];
                    frac[k] = t;
                    cell_stride[k] = self.strides[k];
                }
                None => return f64::INFINITY,
            }
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << d) {
            let mut w = 1.0;
            let mut off = base;
            for k in 0..d {
                if corner >> k & 1 == 1 {
                    w *= frac[k];
                    off += cell_stride[k];
                } else {
                    w *= 1.0 - frac[k];
                }
            }
            if w == 0.0 {
                continue;
            }
            let v = self.values[off];
            if v == f64::INFINITY {
                return f64::INFINITY;
            }
            acc += w * v;
        }
        acc
    }

    fn eval_lower_envelope(&self, x: &[f64]) -> f64 {
        if self.axes.len() != 1 {
            return self.eval_multilinear(x);
        }
        let a = self.axes[0];
        let pts: Vec<(f64, f64)> = self
            .values
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_finite())
            .map(|(i, &v)| (a.coord(i), v))
            .collect();
        let hull = lower_hull(&pts);
        let t = x[0];
        if hull.is_empty() || t < hull[0].0 - 1e-12 || t > hull[hull.len() - 1].0 + 1e-12 {
            return f64::INFINITY;
        }
        for w in hull.windows(2) {
            if t <= w[1].0 {
                let s = (t - w[0].0) / (w[1].0 - w[0].0);
                return w[0].1 + s * (w[1].1 - w[0].1);
            }
        }
        hull[hull.len() - 1].1
    }

    /// Cubic evaluation, optionally filling gradient and row-major Hessian.
    pub fn eval_cubic(&self, x: &[f64], grad: Option<&mut [f64]>, hess: Option<&mut [f64]>) -> f64 {
        let d = self.axes.len();
        // per axis: up to 6 (index, w, dw, d2w) entries after end corrections
        let mut stencils: Vec<Vec<(usize, f64, f64, f64)>> = Vec::with_capacity(d);
        for k in 0..d {
            let a = self.axes[k];
            let (i, t) = a.locate_extended(x[k]);
            stencils.push(cubic_stencil(i, t, a.n, a.spacing));
        }
        let want_grad = grad.is_some();
        let want_hess = hess.is_some();
        let mut g = vec![0.0; if want_grad { d } else { 0 }];
        let mut h = vec![0.0; if want_hess { d * d } else { 0 }];
        let mut value = 0.0;
        let mut pos = vec![0usize; d];
        loop {
            let mut off = 0;
            for k in 0..d {
                off += stencils[k][pos[k]].0 * self.strides[k];
            }
            let v = self.values[off];
            if !v.is_finite() {
                return self.eval_multilinear(x);
            }
            let w: f64 = (0..d).map(|k| stencils[k][pos[k]].1).product();
            value += w * v;
            if want_grad {
                for j in 0..d {
                    let mut p = stencils[j][pos[j]].2;
                    for k in 0..d {
                        if k != j {
                            p *= stencils[k][pos[k]].1;
                        }
                    }
                    g[j] += p * v;
                }
            }
            if want_hess {
                for j in 0..d {
                    for l in 0..d {
                        let mut p = 1.0;
                        for k in 0..d {
                            let s = &stencils[k][pos[k]];
                            p *= if k == j && k == l {
                                s.3
                            } else if k == j || k == l {
                                s.2
                            } else {
                                s.1
                            };
                        }
                        h[j * d + l] += p * v;
                    }
                }
            }
            // odometer
            let mut k = d;
            loop {
                if k == 0 {
                    if let Some(out) = grad {
                        out.copy_from_slice(&g);
                    }
                    if let Some(out) = hess {
                        out.copy_from_slice(&h);
                    }
                    return value;
                }
                k -= 1;
                pos[k] += 1;
                if pos[k] < stencils[k].len() {
                    break;
                }
                pos[k] = 0;
            }
        }
    }

    /// Local midpoint-convexity scan: `f(x) <= (f(x-e) + f(x+e))/2 + tol` for
    /// every node and every direction `e` in `{-1,0,1}^d`. Returns the worst
    /// violation (point, amount) if any exceeds `tol`.
    pub fn convexity_violation(&self, tol: f64) -> Option<(Vec<f64>, f64)> {
        let d = self.axes.len();
        let dirs = half_directions(d);
        let mut idx = vec![0usize; d];
        let mut worst: Option<(usize, f64)> = None;
        for flat in 0..self.values.len() {
            let v = self.values[flat];
            if !v.is_finite() {
                continue;
            }
            unravel(flat, &self.shape, &mut idx);
            for e in &dirs {
                let mut ok = true;
                let mut plus = flat as isize;
                let mut minus = flat as isize;
                for k in 0..d {
                    let i = idx[k] as isize + e[k];
                    let j = idx[k] as isize - e[k];
                    if i < 0 || j < 0 || i >= self.shape[k] as isize || j >= self.shape[k] as isize {
                        ok = false;
                        break;
                    }
                    plus += e[k] * self.strides[k] as isize;
                    minus -= e[k] * self.strides[k] as isize;
                }
                if !ok {
                    continue;
                }
                let (fp, fm) = (self.values[plus as usize], self.values[minus as usize]);
                if !fp.is_finite() || !fm.is_finite() {
                    continue;
                }
                let viol = v - 0.5 * (fp + fm);
                if viol > tol && worst.map_or(true, |(_, w)| viol > w) {
                    worst = Some((flat, viol));
                }
            }
        }
        worst.map(|(flat, w)| (self.node(flat), w))
    }

    pub fn is_midpoint_convex(&self, tol: f64) -> bool {
        self.convexity_violation(tol).is_none()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&TableRecord::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let rec: TableRecord = serde_json::from_str(text)?;
        rec.try_into()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

fn half_directions(d: usize) -> Vec<Vec<isize>> {
    let mut out = Vec::new();
    let total = 3usize.pow(d as u32);
    for code in 0..total {
        let mut c = code;
        let mut e = vec![0isize; d];
        for k in 0..d {
            e[k] = (c % 3) as isize - 1;
            c /= 3;
        }
        // keep lexicographically positive directions
        if let Some(first) = e.iter().find(|&&v| v != 0) {
            if *first > 0 {
                out.push(e);
            }
        }
    }
    out
}

/// Lower convex hull of points sorted by abscissa (collinear points dropped).
pub(crate) fn lower_hull(pts: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(pts.len());
    for &p in pts {
        while hull.len() >= 2 {
            let (o, a) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            let cross = (a.0 - o.0) * (p.1 - o.1) - (a.1 - o.1) * (p.0 - o.0);
            if cross <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    hull
}

/// Catmull-Rom weights (value, first and second derivative) for cell `i`
/// with local coordinate `t`, folding virtual end nodes into their quadratic
/// extrapolation `f(-1) = 3 f(0) - 3 f(1) + f(2)`.
fn cubic_stencil(i: usize, t: f64, n: usize, h: f64) -> Vec<(usize, f64, f64, f64)> {
    let (t2, t3) = (t * t, t * t * t);
    let w = [
        0.5 * (-t + 2.0 * t2 - t3),
        0.5 * (2.0 - 5.0 * t2 + 3.0 * t3),
        0.5 * (t + 4.0 * t2 - 3.0 * t3),
        0.5 * (-t2 + t3),
    ];
    let dw = [
        0.5 * (-1.0 + 4.0 * t - 3.0 * t2) / h,
        0.5 * (-10.0 * t + 9.0 * t2) / h,
        0.5 * (1.0 + 8.0 * t - 9.0 * t2) / h,
        0.5 * (-2.0 * t + 3.0 * t2) / h,
    ];
    let h2 = h * h;
    let d2w = [
        0.5 * (4.0 - 6.0 * t) / h2,
        0.5 * (-10.0 + 18.0 * t) / h2,
        0.5 * (8.0 - 18.0 * t) / h2,
        0.5 * (-2.0 + 6.0 * t) / h2,
    ];
    let mut out: Vec<(usize, f64, f64, f64)> = Vec::with_capacity(6);
    let mut push = |idx: usize, s: f64, k: usize| {
        if let Some(e) = out.iter_mut().find(|e| e.0 == idx) {
            e.1 += s * w[k];
            e.2 += s * dw[k];
            e.3 += s * d2w[k];
        } else {
            out.push((idx, s * w[k], s * dw[k], s * d2w[k]));
        }
    };
    for k in 0..4 {
        let j = i as isize - 1 + k as isize;
        if j < 0 {
            push(0, 3.0, k);
            push(1, -3.0, k);
            push(2, 1.0, k);
        } else if j as usize >= n {
            push(n - 1, 3.0, k);
            push(n - 2, -3.0, k);
            push(n - 3, 1.0, k);
        } else {
            push(j as usize, 1.0, k);
        }
    }
    out
}

/// A table value in JSON: a number, or the string `"inf"` for the sentinel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JsonValue(pub f64);

impl Serialize for JsonValue {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0 == f64::INFINITY {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for JsonValue {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = JsonValue;
            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("a number or \"inf\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<JsonValue, E> {
                Ok(JsonValue(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<JsonValue, E> {
                Ok(JsonValue(v as f64))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<JsonValue, E> {
                Ok(JsonValue(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<JsonValue, E> {
                match v {
                    "inf" => Ok(JsonValue(f64::INFINITY)),
                    other => Err(E::custom(format!("unexpected table value {other:?}"))),
                }
            }
        }
        d.deserialize_any(V)
    }
}

/// On-disk form of a table. A single grid is written flat
/// (`{dim, radius, points_per_axis, values}`); products of grids use
/// `factors`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TableRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points_per_axis: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub factors: Option<Vec<BoxGrid>>,
    #[serde(default)]
    pub interpolation: Interpolation,
    pub values: Vec<JsonValue>,
}

impl From<&TabulatedFunction> for TableRecord {
    fn from(t: &TabulatedFunction) -> Self {
        let values = t.values.iter().map(|&v| JsonValue(v)).collect();
        if t.factors.len() == 1 {
            let g = &t.factors[0];
            TableRecord {
                dim: Some(g.dim),
                radius: Some(g.radius),
                points_per_axis: Some(g.points_per_axis),
                factors: None,
                interpolation: t.interpolation,
                values,
            }
        } else {
            TableRecord {
                dim: None,
                radius: None,
                points_per_axis: None,
                factors: Some(t.factors.clone()),
                interpolation: t.interpolation,
                values,
            }
        }
    }
}

impl TryFrom<TableRecord> for TabulatedFunction {
    type Error = Error;

    fn try_from(rec: TableRecord) -> Result<Self> {
        let factors = match (rec.factors, rec.dim, rec.radius, rec.points_per_axis) {
            (Some(f), _, _, _) => f,
            (None, Some(dim), Some(radius), Some(n)) => vec![BoxGrid::new(dim, radius, n)?],
            _ => return Err(Error::invalid("table record needs factors or dim/radius/points_per_axis")),
        };
        let values = rec.values.into_iter().map(|v| v.0).collect();
        Ok(TabulatedFunction::new(factors, values)?.with_interpolation(rec.interpolation))
    }
}

impl Serialize for TabulatedFunction {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        TableRecord::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for TabulatedFunction {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rec = TableRecord::deserialize(d)?;
        rec.try_into().map_err(de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(r: f64, n: usize) -> BoxGrid {
        BoxGrid::new(1, r, n).unwrap()
    }

    #[test]
    fn multilinear_is_exact_on_linear_data() {
        let t = TabulatedFunction::from_fn(vec![grid(2.0, 9), grid(1.0, 5)], |x| 3.0 * x[0] - x[1] + 0.5).unwrap();
        let v = t.eval(&[0.3, -0.7]);
        assert!((v - (0.9 + 0.7 + 0.5)).abs() < 1e-12);
        assert_eq!(t.eval(&[2.5, 0.0]), f64::INFINITY);
    }

    #[test]
    fn cubic_reproduces_quadratics_with_derivatives() {
        let f = |x: &[f64]| 0.8 * x[0] * x[0] + 0.3 * x[0] * x[1] + x[1] * x[1] / 3.2 - x[1];
        let t = TabulatedFunction::from_fn(vec![grid(1.0, 9), grid(1.0, 9)], f)
            .unwrap()
            .with_interpolation(Interpolation::Cubic);
        for p in [[0.13, -0.41], [0.99, 0.99], [-1.0, 0.2], [1.3, -1.2]] {
            let mut g = [0.0; 2];
            let mut h = [0.0; 4];
            let v = t.eval_cubic(&p, Some(&mut g), Some(&mut h));
            assert!((v - f(&p)).abs() < 1e-12, "{v} vs {}", f(&p));
            assert!((g[0] - (1.6 * p[0] + 0.3 * p[1])).abs() < 1e-11);
            assert!((g[1] - (0.3 * p[0] + p[1] / 1.6 - 1.0)).abs() < 1e-11);
            assert!((h[0] - 1.6).abs() < 1e-9 && (h[1] - 0.3).abs() < 1e-9 && (h[3] - 1.0 / 1.6).abs() < 1e-9);
        }
    }

    #[test]
    fn convexity_scan_flags_bilinear() {
        let t = TabulatedFunction::from_fn(vec![grid(1.0, 5), grid(1.0, 5)], |x| x[0] * x[1]).unwrap();
        assert!(!t.is_midpoint_convex(1e-12));
        let q = TabulatedFunction::from_fn(vec![grid(1.0, 5), grid(1.0, 5)], |x| x[0] * x[0] + x[1] * x[1]).unwrap();
        assert!(q.is_midpoint_convex(1e-12));
    }

    #[test]
    fn lower_envelope_interpolates_hull() {
        let t = TabulatedFunction::from_fn(vec![grid(1.0, 5)], |x| if x[0] == 0.0 { 5.0 } else { x[0].abs() })
            .unwrap()
            .with_interpolation(Interpolation::LowerConvexEnvelope);
        assert!((t.eval(&[0.0]) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn json_round_trip_keeps_sentinel() {
        let t = TabulatedFunction::from_fn(vec![grid(1.0, 3)], |x| if x[0] > 0.0 { f64::INFINITY } else { x[0] }).unwrap();
        let s = t.to_json().unwrap();
        assert!(s.contains("\"inf\""));
        assert!(s.contains("\"points_per_axis\":3"));
        let back = TabulatedFunction::from_json(&s).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn swap_factors_transposes() {
        let t = TabulatedFunction::from_fn(vec![grid(1.0, 3), grid(2.0, 5)], |x| x[0] + 10.0 * x[1]).unwrap();
        let s = t.swap_factors().unwrap();
        assert!((s.eval(&[1.5, 0.5]) - (0.5 + 15.0)).abs() < 1e-12);
    }
}
