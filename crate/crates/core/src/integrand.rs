//! Pointwise convex integrands `z -> L(z)` with `z = (a, b)` and the prox
//! maps the splitting solvers need.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::convex::{legendre_transform, BoxGrid, Interpolation, TabulatedFunction};
use crate::error::{Error, Result};

/// A proper convex function of `arity` real variables.
pub trait ConvexIntegrand: Send + Sync {
    fn arity(&self) -> usize;

    fn value(&self, z: &[f64]) -> f64;

    /// A (sub)gradient. The default is a central difference.
    fn gradient(&self, z: &[f64], g: &mut [f64]) {
        let mut w = z.to_vec();
        for k in 0..z.len() {
            let s = 1e-6 * (1.0 + z[k].abs());
            w[k] = z[k] + s;
            let fp = self.value(&w);
            w[k] = z[k] - s;
            let fm = self.value(&w);
            w[k] = z[k];
            g[k] = (fp - fm) / (2.0 * s);
        }
    }

    /// Row-major Hessian. The default differences the gradient.
    fn hessian(&self, z: &[f64], h: &mut [f64]) {
        let n = z.len();
        let mut w = z.to_vec();
        let mut gp = vec![0.0; n];
        let mut gm = vec![0.0; n];
        for k in 0..n {
            let s = 1e-5 * (1.0 + z[k].abs());
            w[k] = z[k] + s;
            self.gradient(&w, &mut gp);
            w[k] = z[k] - s;
            self.gradient(&w, &mut gm);
            w[k] = z[k];
            for j in 0..n {
                h[j * n + k] = (gp[j] - gm[j]) / (2.0 * s);
            }
        }
        for j in 0..n {
            for k in 0..j {
                let m = 0.5 * (h[j * n + k] + h[k * n + j]);
                h[j * n + k] = m;
                h[k * n + j] = m;
            }
        }
    }

    /// `argmin_z L(z) + |z - v|^2 / (2 t)`.
    fn prox(&self, v: &[f64], t: f64, out: &mut [f64]) {
        newton_prox(self, v, t, out);
    }

    /// The convex conjugate, when available in closed form.
    fn conjugate(&self) -> Option<Arc<dyn ConvexIntegrand>> {
        None
    }
}

/// Damped Newton method for the prox objective, started at `v`.
pub fn newton_prox<F: ConvexIntegrand + ?Sized>(f: &F, v: &[f64], t: f64, out: &mut [f64]) {
    let n = v.len();
    let obj = |z: &[f64]| f.value(z) + z.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / (2.0 * t);
    out.copy_from_slice(v);
    let mut g = vec![0.0; n];
    let mut h = vec![0.0; n * n];
    let mut trial = vec![0.0; n];
    let mut fz = obj(out);
    for _ in 0..100 {
        f.gradient(out, &mut g);
        for k in 0..n {
            g[k] += (out[k] - v[k]) / t;
        }
        let gnorm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        let scale = 1.0 + out.iter().map(|x| x.abs()).fold(0.0, f64::max);
        if gnorm * t <= 1e-15 * scale {
            break;
        }
        f.hessian(out, &mut h);
        let mut hm = DMatrix::from_row_slice(n, n, &h);
        for k in 0..n {
            hm[(k, k)] += 1.0 / t;
        }
        let dz = match hm.clone().cholesky() {
            Some(c) => c.solve(&DVector::from_column_slice(&g)),
            None => DVector::from_column_slice(&g) * t,
        };
        let slope: f64 = -dz.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>();
        let mut alpha = 1.0;
        let mut accepted = false;
        while alpha > 1e-12 {
            for k in 0..n {
                trial[k] = out[k] - alpha * dz[k];
            }
            let ft = obj(&trial);
            if ft <= fz + 1e-4 * alpha * slope || ft <= fz {
                accepted = true;
                fz = ft;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            break;
        }
        let step = alpha * dz.amax();
        out.copy_from_slice(&trial);
        if step <= 1e-16 * scale {
            break;
        }
    }
}

/// Convex potentials `phi: R^N -> R` with closed-form conjugates.
#[derive(Clone, Debug, PartialEq)]
pub enum ConvexPotential {
    /// `coef |x|^p / p`.
    Power { coef: f64, p: f64 },
    /// `x^T S x / 2` with `S` symmetric positive definite (row-major, `N x N`).
    Quadratic { matrix: Vec<f64>, dim: usize },
    /// A tabulated potential evaluated by cubic interpolation.
    Table(TabulatedFunction),
}

impl ConvexPotential {
    pub fn power(coef: f64, p: f64) -> Result<Self> {
        if !(coef > 0.0) || !(p > 1.0) {
            return Err(Error::invalid(format!("power potential needs coef > 0 and p > 1, got {coef}, {p}")));
        }
        Ok(ConvexPotential::Power { coef, p })
    }

    pub fn quadratic(matrix: Vec<f64>, dim: usize) -> Result<Self> {
        if matrix.len() != dim * dim {
            return Err(Error::invalid("quadratic potential matrix has the wrong size"));
        }
        let m = DMatrix::from_row_slice(dim, dim, &matrix);
        if (&m - m.transpose()).amax() > 1e-12 || m.clone().cholesky().is_none() {
            return Err(Error::invalid("quadratic potential needs a symmetric positive definite matrix"));
        }
        Ok(ConvexPotential::Quadratic { matrix, dim })
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            ConvexPotential::Power { coef, p } => coef * norm(x).powf(*p) / p,
            ConvexPotential::Quadratic { matrix, dim } => 0.5 * quad(matrix, *dim, x),
            ConvexPotential::Table(t) => t.eval(x),
        }
    }

    pub fn gradient(&self, x: &[f64], g: &mut [f64]) {
        match self {
            ConvexPotential::Power { coef, p } => {
                let r = norm(x);
                let s = if r > 0.0 { coef * r.powf(p - 2.0) } else { 0.0 };
                for k in 0..x.len() {
                    g[k] = s * x[k];
                }
            }
            ConvexPotential::Quadratic { matrix, dim } => {
                for j in 0..*dim {
                    g[j] = (0..*dim).map(|k| matrix[j * dim + k] * x[k]).sum();
                }
            }
            ConvexPotential::Table(t) => {
                t.eval_cubic(x, Some(g), None);
            }
        }
    }

    pub fn hessian(&self, x: &[f64], h: &mut [f64]) {
        let n = x.len();
        match self {
            ConvexPotential::Power { coef, p } => {
                let r = norm(x);
                if r == 0.0 {
                    let d = if *p > 2.0 {
                        0.0
                    } else if *p == 2.0 {
                        *coef
                    } else {
                        1e12
                    };
                    for j in 0..n {
                        for k in 0..n {
                            h[j * n + k] = if j == k { d } else { 0.0 };
                        }
                    }
                    return;
                }
                let a = coef * r.powf(p - 2.0);
                let b = coef * (p - 2.0) * r.powf(p - 4.0);
                for j in 0..n {
                    for k in 0..n {
                        h[j * n + k] = b * x[j] * x[k] + if j == k { a } else { 0.0 };
                    }
                }
            }
            ConvexPotential::Quadratic { matrix, .. } => h.copy_from_slice(matrix),
            ConvexPotential::Table(t) => {
                t.eval_cubic(x, None, Some(h));
            }
        }
    }

    /// `argmin_x phi(x) + |x - v|^2 / (2 t)`.
    pub fn prox(&self, v: &[f64], t: f64, out: &mut [f64]) {
        match self {
            ConvexPotential::Power { coef, p } => {
                let r = norm(v);
                if r == 0.0 {
                    out.iter_mut().for_each(|x| *x = 0.0);
                    return;
                }
                let s = radial_prox(t * coef, *p, r);
                for k in 0..v.len() {
                    out[k] = v[k] * (s / r);
                }
            }
            ConvexPotential::Quadratic { matrix, dim } => {
                let mut m = DMatrix::from_row_slice(*dim, *dim, matrix);
                for k in 0..*dim {
                    m[(k, k)] += 1.0 / t;
                }
                let rhs = DVector::from_iterator(*dim, v.iter().map(|x| x / t));
                let x = m.cholesky().expect("positive definite").solve(&rhs);
                out.copy_from_slice(x.as_slice());
            }
            ConvexPotential::Table(_) => newton_prox(&PotentialIntegrand(self.clone(), v.len()), v, t, out),
        }
    }

    /// `phi*`. Tabulated potentials are conjugated on a box of radius
    /// `table_radius`.
    pub fn conjugate(&self, table_radius: f64) -> Result<ConvexPotential> {
        match self {
            ConvexPotential::Power { coef, p } => {
                let q = p / (p - 1.0);
                Ok(ConvexPotential::Power {
                    coef: coef.powf(1.0 - q),
                    p: q,
                })
            }
            ConvexPotential::Quadratic { matrix, dim } => {
                let m = DMatrix::from_row_slice(*dim, *dim, matrix);
                let inv = m.try_inverse().ok_or_else(|| Error::invalid("singular quadratic potential"))?;
                let inv = (&inv + inv.transpose()) * 0.5;
                Ok(ConvexPotential::Quadratic {
                    matrix: inv.transpose().as_slice().to_vec(),
                    dim: *dim,
                })
            }
            ConvexPotential::Table(t) => {
                let g = &t.factors()[0];
                let out = BoxGrid::new(g.dim, table_radius, g.points_per_axis)?;
                Ok(ConvexPotential::Table(
                    legendre_transform(t, &[out])?.with_interpolation(Interpolation::Cubic),
                ))
            }
        }
    }

    /// Coefficient and exponent when the potential is a pure power.
    pub fn as_power(&self) -> Option<(f64, f64)> {
        match self {
            ConvexPotential::Power { coef, p } => Some((*coef, *p)),
            _ => None,
        }
    }

    /// Extreme eigenvalues when the potential is quadratic.
    pub fn quadratic_spectrum(&self) -> Option<(f64, f64)> {
        match self {
            ConvexPotential::Quadratic { matrix, dim } => {
                let e = DMatrix::from_row_slice(*dim, *dim, matrix).symmetric_eigenvalues();
                Some((e.min(), e.max()))
            }
            ConvexPotential::Power { coef, p } if *p == 2.0 => Some((*coef, *coef)),
            _ => None,
        }
    }
}

/// Scalar prox of `c s^p / p` at `r > 0`: the root of `c s^(p-1) + s = r`
/// in `(0, r)`, by Newton's method safeguarded with bisection.
fn radial_prox(c: f64, p: f64, r: f64) -> f64 {
    if p == 2.0 {
        return r / (1.0 + c);
    }
    let g = |s: f64| c * s.powf(p - 1.0) + s - r;
    let (mut lo, mut hi) = (0.0, r);
    // start from the smaller of the two one-term balances
    let mut s = r.min((r / c).powf(1.0 / (p - 1.0)));
    for _ in 0..200 {
        let gs = g(s);
        if gs == 0.0 {
            return s;
        }
        if gs < 0.0 {
            lo = s;
        } else {
            hi = s;
        }
        let d = c * (p - 1.0) * s.powf(p - 2.0) + 1.0;
        let mut next = s - gs / d;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - s).abs() <= 1e-16 * r {
            return next;
        }
        s = next;
    }
    s
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn quad(m: &[f64], n: usize, x: &[f64]) -> f64 {
    let mut s = 0.0;
    for j in 0..n {
        for k in 0..n {
            s += x[j] * m[j * n + k] * x[k];
        }
    }
    s
}

/// A potential used directly as an integrand.
#[derive(Clone, Debug)]
pub struct PotentialIntegrand(pub ConvexPotential, pub usize);

impl ConvexIntegrand for PotentialIntegrand {
    fn arity(&self) -> usize {
        self.1
    }

    fn value(&self, z: &[f64]) -> f64 {
        self.0.value(z)
    }

    fn gradient(&self, z: &[f64], g: &mut [f64]) {
        self.0.gradient(z, g)
    }

    fn hessian(&self, z: &[f64], h: &mut [f64]) {
        self.0.hessian(z, h)
    }

    fn prox(&self, v: &[f64], t: f64, out: &mut [f64]) {
        self.0.prox(v, t, out)
    }
}

/// Potential-form Lagrangian `L(a, b) = phi(a) + phi*(b - G a)` with `G`
/// skew; with `swapped` set it is `phi*(a - G b) + phi(b)`, the conjugate of
/// the unswapped form. Its selfdual field is `a -> G a + d phi(a)`.
#[derive(Clone, Debug)]
pub struct PotentialForm {
    pub phi: ConvexPotential,
    pub phi_star: ConvexPotential,
    /// Row-major `N x N` skew matrix, `None` for zero.
    pub gamma: Option<Vec<f64>>,
    pub dim: usize,
    pub swapped: bool,
}

impl PotentialForm {
    pub fn new(phi: ConvexPotential, dim: usize, gamma: Option<Vec<f64>>, conj_radius: f64) -> Result<Self> {
        if let Some(g) = &gamma {
            check_skew(g, dim)?;
        }
        let phi_star = phi.conjugate(conj_radius)?;
        Ok(PotentialForm {
            phi,
            phi_star,
            gamma: gamma.filter(|g| g.iter().any(|&v| v != 0.0)),
            dim,
            swapped: false,
        })
    }

    /// Split `z` into the argument of `phi` (`x`) and of `phi*` before the
    /// skew shift (`y`), so that `L = phi(x) + phi*(y - G x)`.
    fn split<'a>(&self, z: &'a [f64]) -> (&'a [f64], &'a [f64]) {
        let (a, b) = z.split_at(self.dim);
        if self.swapped {
            (b, a)
        } else {
            (a, b)
        }
    }

    fn shifted(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let n = self.dim;
        let mut c = y.to_vec();
        if let Some(g) = &self.gamma {
            for j in 0..n {
                c[j] -= (0..n).map(|k| g[j * n + k] * x[k]).sum::<f64>();
            }
        }
        c
    }

    /// Points of the selfdual field `G a + d phi(a)`.
    pub fn field(&self, a: &[f64]) -> Vec<f64> {
        let n = self.dim;
        let mut out = vec![0.0; n];
        self.phi.gradient(a, &mut out);
        if let Some(g) = &self.gamma {
            for j in 0..n {
                out[j] += (0..n).map(|k| g[j * n + k] * a[k]).sum::<f64>();
            }
        }
        out
    }
}

pub(crate) fn check_skew(g: &[f64], n: usize) -> Result<()> {
    if g.len() != n * n {
        return Err(Error::invalid("skew matrix has the wrong size"));
    }
    for j in 0..n {
        for k in 0..n {
            if g[j * n + k] != -g[k * n + j] {
                return Err(Error::invalid("matrix is not skew-symmetric"));
            }
        }
    }
    Ok(())
}

impl ConvexIntegrand for PotentialForm {
    fn arity(&self) -> usize {
        2 * self.dim
    }

    fn value(&self, z: &[f64]) -> f64 {
        let (x, y) = self.split(z);
        let c = self.shifted(x, y);
        self.phi.value(x) + self.phi_star.value(&c)
    }

    fn gradient(&self, z: &[f64], g: &mut [f64]) {
        let n = self.dim;
        let (x, y) = self.split(z);
        let c = self.shifted(x, y);
        let mut gx = vec![0.0; n];
        let mut gc = vec![0.0; n];
        self.phi.gradient(x, &mut gx);
        self.phi_star.gradient(&c, &mut gc);
        if let Some(gm) = &self.gamma {
            // d/dx of phi*(y - G x) = -G^T gc = G gc
            for j in 0..n {
                gx[j] += (0..n).map(|k| gm[j * n + k] * gc[k]).sum::<f64>();
            }
        }
        let (gxs, gys) = if self.swapped { (n, 0) } else { (0, n) };
        g[gxs..gxs + n].copy_from_slice(&gx);
        g[gys..gys + n].copy_from_slice(&gc);
    }

    fn hessian(&self, z: &[f64], h: &mut [f64]) {
        let n = self.dim;
        let (x, y) = self.split(z);
        let c = self.shifted(x, y);
        let mut hx = vec![0.0; n * n];
        let mut hc = vec![0.0; n * n];
        self.phi.hessian(x, &mut hx);
        self.phi_star.hessian(&c, &mut hc);
        let hx = DMatrix::from_row_slice(n, n, &hx);
        let hc = DMatrix::from_row_slice(n, n, &hc);
        let gm = match &self.gamma {
            Some(g) => DMatrix::from_row_slice(n, n, g),
            None => DMatrix::zeros(n, n),
        };
        let hxx = &hx + gm.transpose() * &hc * &gm;
        let hxy = -(gm.transpose() * &hc);
        let (ox, oy) = if self.swapped { (n, 0) } else { (0, n) };
        let m = 2 * n;
        for j in 0..n {
            for k in 0..n {
                h[(ox + j) * m + ox + k] = hxx[(j, k)];
                h[(ox + j) * m + oy + k] = hxy[(j, k)];
                h[(oy + k) * m + ox + j] = hxy[(j, k)];
                h[(oy + j) * m + oy + k] = hc[(j, k)];
            }
        }
    }

    fn prox(&self, v: &[f64], t: f64, out: &mut [f64]) {
        if self.gamma.is_some() {
            return newton_prox(self, v, t, out);
        }
        let n = self.dim;
        let (first, second) = if self.swapped {
            (&self.phi_star, &self.phi)
        } else {
            (&self.phi, &self.phi_star)
        };
        first.prox(&v[..n], t, &mut out[..n]);
        second.prox(&v[n..], t, &mut out[n..]);
    }

    fn conjugate(&self) -> Option<Arc<dyn ConvexIntegrand>> {
        let mut c = self.clone();
        c.swapped = !c.swapped;
        Some(Arc::new(c))
    }
}

/// `L(z) = z^T M z / 2 + c^T z + k` with `M` symmetric positive definite.
#[derive(Clone, Debug)]
pub struct QuadraticForm {
    pub matrix: DMatrix<f64>,
    pub linear: DVector<f64>,
    pub constant: f64,
}

impl QuadraticForm {
    pub fn new(matrix: DMatrix<f64>, linear: DVector<f64>, constant: f64) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() || matrix.nrows() != linear.len() {
            return Err(Error::invalid("quadratic form dimensions disagree"));
        }
        if (&matrix - matrix.transpose()).amax() > 1e-12 * (1.0 + matrix.amax()) || matrix.clone().cholesky().is_none() {
            return Err(Error::invalid("quadratic form needs a symmetric positive definite matrix"));
        }
        Ok(QuadraticForm {
            matrix,
            linear,
            constant,
        })
    }
}

impl ConvexIntegrand for QuadraticForm {
    fn arity(&self) -> usize {
        self.linear.len()
    }

    fn value(&self, z: &[f64]) -> f64 {
        let z = DVector::from_column_slice(z);
        0.5 * z.dot(&(&self.matrix * &z)) + self.linear.dot(&z) + self.constant
    }

    fn gradient(&self, z: &[f64], g: &mut [f64]) {
        let z = DVector::from_column_slice(z);
        let r = &self.matrix * z + &self.linear;
        g.copy_from_slice(r.as_slice());
    }

    fn hessian(&self, _z: &[f64], h: &mut [f64]) {
        let n = self.arity();
        for j in 0..n {
            for k in 0..n {
                h[j * n + k] = self.matrix[(j, k)];
            }
        }
    }

    fn prox(&self, v: &[f64], t: f64, out: &mut [f64]) {
        let n = self.arity();
        let m = &self.matrix + DMatrix::identity(n, n) / t;
        let rhs = DVector::from_column_slice(v) / t - &self.linear;
        let x = m.cholesky().expect("positive definite").solve(&rhs);
        out.copy_from_slice(x.as_slice());
    }

    fn conjugate(&self) -> Option<Arc<dyn ConvexIntegrand>> {
        let inv = self.matrix.clone().try_inverse()?;
        let inv = (&inv + inv.transpose()) * 0.5;
        let lin = -(&inv * &self.linear);
        let k = 0.5 * self.linear.dot(&(&inv * &self.linear)) - self.constant;
        Some(Arc::new(QuadraticForm {
            matrix: inv,
            linear: lin,
            constant: k,
        }))
    }
}

/// A tabulated integrand. Cubic tables use Newton prox steps; multilinear
/// tables use the node search of [`crate::convex::prox`].
#[derive(Clone, Debug)]
pub struct TableIntegrand {
    pub table: TabulatedFunction,
}

impl TableIntegrand {
    pub fn new(table: TabulatedFunction) -> Self {
        TableIntegrand { table }
    }
}

impl ConvexIntegrand for TableIntegrand {
    fn arity(&self) -> usize {
        self.table.arity()
    }

    fn value(&self, z: &[f64]) -> f64 {
        self.table.eval(z)
    }

    fn gradient(&self, z: &[f64], g: &mut [f64]) {
        if self.table.interpolation() == Interpolation::Cubic {
            self.table.eval_cubic(z, Some(g), None);
        } else {
            let mut w = z.to_vec();
            for k in 0..z.len() {
                let s = 0.5 * self.table.axes()[k].spacing;
                w[k] = z[k] + s;
                let fp = self.table.eval(&w);
                w[k] = z[k] - s;
                let fm = self.table.eval(&w);
                w[k] = z[k];
                g[k] = (fp - fm) / (2.0 * s);
            }
        }
    }

    fn hessian(&self, z: &[f64], h: &mut [f64]) {
        if self.table.interpolation() == Interpolation::Cubic {
            self.table.eval_cubic(z, None, Some(h));
        } else {
            h.iter_mut().for_each(|x| *x = 0.0);
        }
    }

    fn prox(&self, v: &[f64], t: f64, out: &mut [f64]) {
        if self.table.interpolation() == Interpolation::Cubic {
            newton_prox(self, v, t, out)
        } else {
            match crate::convex::prox(&self.table, v, t) {
                Ok(p) => out.copy_from_slice(&p),
                Err(_) => out.copy_from_slice(v),
            }
        }
    }
}

/// `z -> inner(z + shift) - <z, tilt> + offset`.
#[derive(Clone)]
pub struct ShiftedIntegrand {
    pub inner: Arc<dyn ConvexIntegrand>,
    pub shift: Vec<f64>,
    pub tilt: Vec<f64>,
    pub offset: f64,
}

impl ShiftedIntegrand {
    pub fn new(inner: Arc<dyn ConvexIntegrand>, shift: Vec<f64>, tilt: Vec<f64>, offset: f64) -> Self {
        ShiftedIntegrand {
            inner,
            shift,
            tilt,
            offset,
        }
    }

    fn moved(&self, z: &[f64]) -> Vec<f64> {
        z.iter().zip(&self.shift).map(|(a, b)| a + b).collect()
    }
}

impl ConvexIntegrand for ShiftedIntegrand {
    fn arity(&self) -> usize {
        self.shift.len()
    }

    fn value(&self, z: &[f64]) -> f64 {
        self.inner.value(&self.moved(z)) - z.iter().zip(&self.tilt).map(|(a, b)| a * b).sum::<f64>() + self.offset
    }

    fn gradient(&self, z: &[f64], g: &mut [f64]) {
        self.inner.gradient(&self.moved(z), g);
        for (gk, t) in g.iter_mut().zip(&self.tilt) {
            *gk -= t;
        }
    }

    fn hessian(&self, z: &[f64], h: &mut [f64]) {
        self.inner.hessian(&self.moved(z), h)
    }

    fn prox(&self, v: &[f64], t: f64, out: &mut [f64]) {
        let w: Vec<f64> = (0..v.len()).map(|k| v[k] + self.shift[k] + t * self.tilt[k]).collect();
        self.inner.prox(&w, t, out);
        for (o, s) in out.iter_mut().zip(&self.shift) {
            *o -= s;
        }
    }

    fn conjugate(&self) -> Option<Arc<dyn ConvexIntegrand>> {
        // (inner(. + s) - <., t> + k)*(y) = inner*(y + t) - <y + t, s> - k
        let inner = self.inner.conjugate()?;
        let shift = self.tilt.clone();
        let tilt = self.shift.clone();
        let offset = -self.offset - self.tilt.iter().zip(&self.shift).map(|(a, b)| a * b).sum::<f64>();
        Some(Arc::new(ShiftedIntegrand::new(inner, shift, tilt, offset)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_prox<F: ConvexIntegrand>(f: &F, v: &[f64], t: f64) {
        let mut p = vec![0.0; v.len()];
        f.prox(v, t, &mut p);
        // optimality: grad L(p) + (p - v)/t = 0
        let mut g = vec![0.0; v.len()];
        f.gradient(&p, &mut g);
        for k in 0..v.len() {
            assert!((g[k] + (p[k] - v[k]) / t).abs() < 1e-7 * (1.0 + v[k].abs() / t), "{k}: {g:?} {p:?} {v:?}");
        }
    }

    #[test]
    fn power_conjugate_and_prox() {
        let phi = ConvexPotential::power(4.0, 3.0).unwrap();
        let star = phi.conjugate(0.0).unwrap();
        // brute-force sup over a fine line
        for y in [0.3, 1.0, 2.5] {
            let sup = (0..200_000)
                .map(|i| -5.0 + 10.0 * i as f64 / 200_000.0)
                .map(|x| x * y - phi.value(&[x]))
                .fold(f64::NEG_INFINITY, f64::max);
            assert!((star.value(&[y]) - sup).abs() < 1e-7);
        }
        for p in [1.5, 2.0, 3.0] {
            let f = PotentialIntegrand(ConvexPotential::power(1.7, p).unwrap(), 1);
            check_prox(&f, &[0.8], 0.3);
            check_prox(&f, &[-2.0], 5.0);
        }
    }

    #[test]
    fn potential_form_is_selfdual_at_sample_points() {
        let phi = ConvexPotential::quadratic(vec![2.0, 0.5, 0.5, 1.0], 2).unwrap();
        let l = PotentialForm::new(phi, 2, Some(vec![0.0, 1.0, -1.0, 0.0]), 0.0).unwrap();
        let star = l.conjugate().unwrap();
        for z in [[0.3, -0.2, 1.0, 0.4], [1.0, 2.0, -0.5, 0.0]] {
            let swapped = [z[2], z[3], z[0], z[1]];
            assert!((star.value(&swapped) - l.value(&z)).abs() < 1e-12);
            assert!(l.value(&z) >= z[0] * z[2] + z[1] * z[3] - 1e-12);
        }
        // on the field graph the gap vanishes
        let a = [1.0, 0.0];
        let b = l.field(&a);
        let phi1 = PotentialForm::new(ConvexPotential::power(1.0, 2.0).unwrap(), 2, Some(vec![0.0, 1.0, -1.0, 0.0]), 0.0).unwrap();
        assert_eq!(phi1.field(&a), vec![1.0, -1.0]);
        let z = [a[0], a[1], b[0], b[1]];
        assert!((l.value(&z) - (a[0] * b[0] + a[1] * b[1])).abs() < 1e-12);
        check_prox(&l, &[0.5, 0.1, -0.3, 0.9], 0.7);
    }

    #[test]
    fn quadratic_form_conjugate() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let q = QuadraticForm::new(m, DVector::from_vec(vec![0.1, -0.2]), 0.5).unwrap();
        let s = q.conjugate().unwrap();
        // Fenchel-Young equality at y = grad q(x)
        let x = [0.4, -1.1];
        let mut y = [0.0; 2];
        q.gradient(&x, &mut y);
        assert!((q.value(&x) + s.value(&y) - (x[0] * y[0] + x[1] * y[1])).abs() < 1e-12);
        check_prox(&q, &[1.0, 2.0], 0.4);
    }

    #[test]
    fn shifted_prox_and_conjugate() {
        let phi = ConvexPotential::power(1.0, 3.0).unwrap();
        let base: Arc<dyn ConvexIntegrand> = Arc::new(PotentialForm::new(phi, 1, None, 0.0).unwrap());
        let s = ShiftedIntegrand::new(base, vec![0.2, -0.4], vec![0.5, 0.1], 0.3);
        check_prox(&s, &[0.7, 0.3], 0.5);
        let c = s.conjugate().unwrap();
        let x = [0.4, 0.9];
        let mut y = [0.0; 2];
        s.gradient(&x, &mut y);
        assert!((s.value(&x) + c.value(&y) - (x[0] * y[0] + x[1] * y[1])).abs() < 1e-9);
    }

    #[test]
    fn cubic_table_prox() {
        let g = BoxGrid::new(1, 3.0, 61).unwrap();
        let t = TabulatedFunction::from_fn(vec![g.clone(), g], |z| 0.8 * z[0] * z[0] + z[1] * z[1] / 3.2)
            .unwrap()
            .with_interpolation(Interpolation::Cubic);
        let f = TableIntegrand::new(t);
        let mut p = [0.0; 2];
        f.prox(&[1.0, 1.0], 1.0, &mut p);
        assert!((p[0] - 1.0 / 2.6).abs() < 1e-12 && (p[1] - 1.0 / (1.0 + 1.0 / 1.6)).abs() < 1e-12);
    }
}
