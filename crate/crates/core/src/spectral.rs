//! Discrete Fourier tools on periodic tensor grids and sine transforms on
//! Dirichlet grids.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::convex::unravel;

/// Forward and inverse FFT plans for an N-D periodic grid, with the symbols
/// of the forward-difference operator.
#[derive(Clone)]
pub struct PeriodicFft {
    pub shape: Vec<usize>,
    pub spacing: f64,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
    /// `d[k][flat] = (exp(i theta_k) - 1) / h` for every mode.
    symbols: Vec<Vec<Complex<f64>>>,
}

impl std::fmt::Debug for PeriodicFft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PeriodicFft").field("shape", &self.shape).field("spacing", &self.spacing).finish()
    }
}

impl PeriodicFft {
    pub fn new(shape: &[usize], spacing: f64) -> Self {
        let mut planner = FftPlanner::new();
        let forward = shape.iter().map(|&n| planner.plan_fft_forward(n)).collect();
        let inverse = shape.iter().map(|&n| planner.plan_fft_inverse(n)).collect();
        let total: usize = shape.iter().product();
        let mut idx = vec![0; shape.len()];
        let mut symbols = vec![vec![Complex::new(0.0, 0.0); total]; shape.len()];
        for flat in 0..total {
            unravel(flat, shape, &mut idx);
            for k in 0..shape.len() {
                let theta = 2.0 * std::f64::consts::PI * idx[k] as f64 / shape[k] as f64;
                symbols[k][flat] = (Complex::from_polar(1.0, theta) - 1.0) / spacing;
            }
        }
        PeriodicFft {
            shape: shape.to_vec(),
            spacing,
            forward,
            inverse,
            symbols,
        }
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    fn apply(&self, data: &mut [Complex<f64>], plans: &[Arc<dyn Fft<f64>>]) {
        let d = self.shape.len();
        let strides = crate::convex::strides(&self.shape);
        for k in 0..d {
            let n = self.shape[k];
            let s = strides[k];
            let outer: usize = self.shape[..k].iter().product();
            let mut line = vec![Complex::new(0.0, 0.0); n];
            for o in 0..outer {
                for i in 0..s {
                    let base = o * n * s + i;
                    for t in 0..n {
                        line[t] = data[base + t * s];
                    }
                    plans[k].process(&mut line);
                    for t in 0..n {
                        data[base + t * s] = line[t];
                    }
                }
            }
        }
    }

    pub fn forward(&self, real: &[f64]) -> Vec<Complex<f64>> {
        let mut c: Vec<Complex<f64>> = real.iter().map(|&v| Complex::new(v, 0.0)).collect();
        self.apply(&mut c, &self.forward);
        c
    }

    /// Inverse transform, normalized, real part.
    pub fn inverse(&self, mut c: Vec<Complex<f64>>) -> Vec<f64> {
        self.apply(&mut c, &self.inverse);
        let scale = 1.0 / self.len() as f64;
        c.iter().map(|v| v.re * scale).collect()
    }

    /// Orthogonal projection of a vector field (component arrays) onto
    /// `{mean + grad phi}` (`gradient = true`) or onto
    /// `{mean + g : div g = 0, g zero-mean}`, with the mean prescribed.
    /// Gradients are forward differences; the divergence is their negative
    /// adjoint.
    pub fn project(&self, comps: &[Vec<f64>], mean: &[f64], gradient: bool) -> Vec<Vec<f64>> {
        let d = self.dim();
        let hats: Vec<Vec<Complex<f64>>> = comps.iter().map(|c| self.forward(c)).collect();
        let total = self.len();
        let mut out = vec![vec![Complex::new(0.0, 0.0); total]; d];
        for flat in 1..total {
            let norm2: f64 = (0..d).map(|k| self.symbols[k][flat].norm_sqr()).sum();
            let dv: Complex<f64> = (0..d).map(|k| self.symbols[k][flat].conj() * hats[k][flat]).sum();
            for k in 0..d {
                let g = self.symbols[k][flat] * dv / norm2;
                out[k][flat] = if gradient { g } else { hats[k][flat] - g };
            }
        }
        for k in 0..d {
            out[k][0] = Complex::new(mean[k] * total as f64, 0.0);
        }
        out.into_iter().map(|c| self.inverse(c)).collect()
    }

    /// Zero-mean potential `phi` with forward-difference gradient equal to
    /// the gradient part of `comps`.
    pub fn potential(&self, comps: &[Vec<f64>]) -> Vec<f64> {
        let d = self.dim();
        let hats: Vec<Vec<Complex<f64>>> = comps.iter().map(|c| self.forward(c)).collect();
        let total = self.len();
        let mut phi = vec![Complex::new(0.0, 0.0); total];
        for flat in 1..total {
            let norm2: f64 = (0..d).map(|k| self.symbols[k][flat].norm_sqr()).sum();
            let dv: Complex<f64> = (0..d).map(|k| self.symbols[k][flat].conj() * hats[k][flat]).sum();
            phi[flat] = dv / norm2;
        }
        self.inverse(phi)
    }

    /// Periodic forward-difference gradient.
    pub fn gradient(&self, phi: &[f64]) -> Vec<Vec<f64>> {
        let strides = crate::convex::strides(&self.shape);
        let mut idx = vec![0; self.dim()];
        (0..self.dim())
            .map(|k| {
                (0..self.len())
                    .map(|flat| {
                        unravel(flat, &self.shape, &mut idx);
                        let next = if idx[k] + 1 == self.shape[k] { flat - (self.shape[k] - 1) * strides[k] } else { flat + strides[k] };
                        (phi[next] - phi[flat]) / self.spacing
                    })
                    .collect()
            })
            .collect()
    }

    /// Periodic divergence, the negative adjoint of [`Self::gradient`].
    pub fn divergence(&self, g: &[Vec<f64>]) -> Vec<f64> {
        let strides = crate::convex::strides(&self.shape);
        let mut idx = vec![0; self.dim()];
        (0..self.len())
            .map(|flat| {
                unravel(flat, &self.shape, &mut idx);
                (0..self.dim())
                    .map(|k| {
                        let prev = if idx[k] == 0 { flat + (self.shape[k] - 1) * strides[k] } else { flat - strides[k] };
                        (g[k][flat] - g[k][prev]) / self.spacing
                    })
                    .sum::<f64>()
            })
            .collect()
    }
}

/// Type-I discrete sine transform `(S v)_k = sum_j v_j sin(pi (j+1)(k+1) / (m+1))`
/// of length `m`, through an FFT of the odd extension.
#[derive(Clone)]
pub struct SineTransform {
    pub m: usize,
    fft: Arc<dyn Fft<f64>>,
}

impl SineTransform {
    pub fn new(m: usize) -> Self {
        let mut planner = FftPlanner::new();
        SineTransform {
            m,
            fft: planner.plan_fft_forward(2 * (m + 1)),
        }
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let n = 2 * (self.m + 1);
        let mut buf = vec![Complex::new(0.0, 0.0); n];
        for j in 0..self.m {
            buf[j + 1] = Complex::new(v[j], 0.0);
            buf[n - 1 - j] = Complex::new(-v[j], 0.0);
        }
        self.fft.process(&mut buf);
        (0..self.m).map(|k| -buf[k + 1].im / 2.0).collect()
    }

    /// Eigenvalues `4 sin^2(pi k / (2(m+1)))`, `k = 1..m`, of the
    /// second-difference matrix `tridiag(-1, 2, -1)`.
    pub fn eigenvalues(&self) -> Vec<f64> {
        (1..=self.m)
            .map(|k| {
                let s = (std::f64::consts::PI * k as f64 / (2.0 * (self.m + 1) as f64)).sin();
                4.0 * s * s
            })
            .collect()
    }

    /// Solve `D x = r` for `D = diag(mult * lambda_k + shift)` in the sine
    /// basis of an `m^dim` grid, applied separably on each axis. `coef` maps
    /// the eigenvalue tuple of a mode to the diagonal entry.
    pub fn solve(&self, dim: usize, rhs: &[f64], coef: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        let m = self.m;
        let shape = vec![m; dim];
        let mut data = rhs.to_vec();
        self.transform_all(&mut data, &shape);
        let lam = self.eigenvalues();
        let mut idx = vec![0; dim];
        let mut ev = vec![0.0; dim];
        for (flat, v) in data.iter_mut().enumerate() {
            unravel(flat, &shape, &mut idx);
            for k in 0..dim {
                ev[k] = lam[idx[k]];
            }
            *v /= coef(&ev);
        }
        self.transform_all(&mut data, &shape);
        // S^2 = (m+1)/2 I on each axis
        let scale = (2.0 / (m + 1) as f64).powi(dim as i32);
        data.iter_mut().for_each(|v| *v *= scale);
        data
    }

    fn transform_all(&self, data: &mut [f64], shape: &[usize]) {
        let strides = crate::convex::strides(shape);
        let m = self.m;
        let mut line = vec![0.0; m];
        for k in 0..shape.len() {
            let s = strides[k];
            let outer: usize = shape[..k].iter().product();
            for o in 0..outer {
                for i in 0..s {
                    let base = o * m * s + i;
                    for t in 0..m {
                        line[t] = data[base + t * s];
                    }
                    let out = self.apply(&line);
                    for t in 0..m {
                        data[base + t * s] = out[t];
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn helmholtz_split_is_orthogonal_and_complete() {
        let fft = PeriodicFft::new(&[8, 6], 0.125);
        let comps: Vec<Vec<f64>> = (0..2).map(|k| (0..48).map(|i| ((i * 7 + k * 13) % 11) as f64 - 4.0).collect()).collect();
        let mean: Vec<f64> = comps.iter().map(|c| c.iter().sum::<f64>() / 48.0).collect();
        let g = fft.project(&comps, &mean, true);
        let s = fft.project(&comps, &[0.0, 0.0], false);
        for k in 0..2 {
            for i in 0..48 {
                assert!((g[k][i] + s[k][i] - comps[k][i]).abs() < 1e-12);
            }
        }
        let div = fft.divergence(&s);
        assert!(div.iter().all(|v| v.abs() < 1e-10));
        // gradient part is the gradient of the recovered potential
        let centred: Vec<Vec<f64>> = g.iter().zip(&mean).map(|(c, m)| c.iter().map(|v| v - m).collect()).collect();
        let phi = fft.potential(&centred);
        let dphi = fft.gradient(&phi);
        for k in 0..2 {
            for i in 0..48 {
                assert!((dphi[k][i] - centred[k][i]).abs() < 1e-10);
            }
        }
        assert!(phi.iter().sum::<f64>().abs() < 1e-10);
    }

    #[test]
    fn sine_transform_matches_definition() {
        let st = SineTransform::new(5);
        let v = [0.3, -1.0, 2.0, 0.5, 0.1];
        let out = st.apply(&v);
        for k in 0..5 {
            let direct: f64 = (0..5).map(|j| v[j] * (std::f64::consts::PI * ((j + 1) * (k + 1)) as f64 / 6.0).sin()).sum();
            assert!((out[k] - direct).abs() < 1e-12);
        }
        // tridiag(-1, 2, -1) x = r
        let x = st.solve(1, &v, |ev| ev[0]);
        for i in 0..5 {
            let l = if i > 0 { x[i - 1] } else { 0.0 };
            let r = if i < 4 { x[i + 1] } else { 0.0 };
            assert!((2.0 * x[i] - l - r - v[i]).abs() < 1e-12);
        }
    }
}
