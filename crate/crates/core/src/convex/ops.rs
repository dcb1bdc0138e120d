use rayon::prelude::*;

use super::table::TabulatedFunction;
use crate::error::{Error, Result};

/// `h(x) = min_y f(y) + g(x - y)` over the nodes of a shared grid.
///
/// On a symmetric grid with an odd node count `x - y` is either a node or
/// outside the box (where `g` is `+inf`), so no interpolation is needed.
pub fn inf_convolution(f: &TabulatedFunction, g: &TabulatedFunction) -> Result<TabulatedFunction> {
    if !f.same_grid(g) {
        return Err(Error::GridMismatch("inf-convolution needs a shared grid".into()));
    }
    let shape = f.shape().to_vec();
    let strides = f.strides().to_vec();
    let d = shape.len();
    let centers: Vec<isize> = shape.iter().map(|&n| ((n - 1) / 2) as isize).collect();
    let finite_f: Vec<(Vec<usize>, f64)> = (0..f.len())
        .filter(|&i| f.values()[i].is_finite())
        .map(|i| {
            let mut idx = vec![0; d];
            super::grid::unravel(i, &shape, &mut idx);
            (idx, f.values()[i])
        })
        .collect();
    let gv = g.values();
    let values: Vec<f64> = (0..f.len())
        .into_par_iter()
        .map(|flat| {
            let mut ix = vec![0; d];
            super::grid::unravel(flat, &shape, &mut ix);
            let mut best = f64::INFINITY;
            'outer: for (iy, fy) in &finite_f {
                let mut off = 0usize;
                for k in 0..d {
                    let j = ix[k] as isize - iy[k] as isize + centers[k];
                    if j < 0 || j >= shape[k] as isize {
                        continue 'outer;
                    }
                    off += j as usize * strides[k];
                }
                let v = fy + gv[off];
                if v < best {
                    best = v;
                }
            }
            best
        })
        .collect();
    Ok(TabulatedFunction::new(f.factors().to_vec(), values)?.with_interpolation(f.interpolation()))
}

/// Regularization
/// `L_l(u, u*) = min_{v, v*} L(v, v*) + |u - v|^2/(2l) + l|v|^2/2 + |u* - v*|^2/(2l) + l|v*|^2/2`
/// over the nodes of `L`'s grid. The penalty is a sum over coordinates, so
/// the minimum is taken one axis at a time.
pub fn moreau_regularize(l: &TabulatedFunction, lambda: f64) -> Result<TabulatedFunction> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::invalid(format!("regularization parameter {lambda} must be positive")));
    }
    let shape = l.shape().to_vec();
    let mut cur = l.values().to_vec();
    for k in 0..shape.len() {
        let ax = l.axes()[k];
        let n = shape[k];
        let xs: Vec<f64> = (0..n).map(|i| ax.coord(i)).collect();
        let kernel: Vec<f64> = (0..n * n)
            .map(|t| {
                let (u, v) = (xs[t / n], xs[t % n]);
                (u - v) * (u - v) / (2.0 * lambda) + lambda * v * v / 2.0
            })
            .collect();
        let outer: usize = shape[..k].iter().product();
        let inner: usize = shape[k + 1..].iter().product();
        let lines: Vec<Vec<f64>> = (0..outer * inner)
            .into_par_iter()
            .map(|line| {
                let base = (line / inner) * n * inner + line % inner;
                (0..n)
                    .map(|iu| {
                        let mut best = f64::INFINITY;
                        for iv in 0..n {
                            let v = cur[base + iv * inner] + kernel[iu * n + iv];
                            if v < best {
                                best = v;
                            }
                        }
                        best
                    })
                    .collect()
            })
            .collect();
        for (line, vals) in lines.into_iter().enumerate() {
            let base = (line / inner) * n * inner + line % inner;
            for (i, v) in vals.into_iter().enumerate() {
                cur[base + i * inner] = v;
            }
        }
    }
    Ok(TabulatedFunction::new(l.factors().to_vec(), cur)?.with_interpolation(l.interpolation()))
}

/// `argmin_y f(y) + |y - x|^2 / (2 step)` over the nodes of `f`, refined by
/// one parabola fit per axis around the best node.
pub fn prox(f: &TabulatedFunction, x: &[f64], step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) {
        return Err(Error::invalid("prox step must be positive"));
    }
    if x.len() != f.arity() {
        return Err(Error::GridMismatch(format!("point of length {} for a {}-variable table", x.len(), f.arity())));
    }
    let d = f.arity();
    let obj = |flat: usize, idx: &mut [usize], y: &mut [f64]| {
        f.node_into(flat, idx, y);
        let q: f64 = y.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
        f.values()[flat] + q / (2.0 * step)
    };
    let mut idx = vec![0; d];
    let mut y = vec![0.0; d];
    let mut best = (usize::MAX, f64::INFINITY);
    for flat in 0..f.len() {
        let v = obj(flat, &mut idx, &mut y);
        if v < best.1 {
            best = (flat, v);
        }
    }
    if best.0 == usize::MAX {
        return Err(Error::DomainEmpty);
    }
    let mut bidx = vec![0; d];
    let mut out = vec![0.0; d];
    f.node_into(best.0, &mut bidx, &mut out);
    for k in 0..d {
        let n = f.shape()[k];
        if bidx[k] == 0 || bidx[k] + 1 >= n {
            continue;
        }
        let s = f.strides()[k];
        let fm = obj(best.0 - s, &mut idx, &mut y);
        let fp = obj(best.0 + s, &mut idx, &mut y);
        let curv = fm - 2.0 * best.1 + fp;
        if fm.is_finite() && fp.is_finite() && curv > 0.0 {
            let h = f.axes()[k].spacing;
            let shift = (0.5 * (fm - fp) / curv).clamp(-0.5, 0.5);
            out[k] += shift * h;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convex::BoxGrid;

    fn g1(r: f64, n: usize) -> BoxGrid {
        BoxGrid::new(1, r, n).unwrap()
    }

    #[test]
    fn indicator_of_origin_is_identity() {
        let grid = vec![g1(2.0, 41)];
        let f = TabulatedFunction::from_fn(grid.clone(), |x| if x[0] == 0.0 { 0.0 } else { f64::INFINITY }).unwrap();
        let g = TabulatedFunction::from_fn(grid, |x| (x[0] - 0.3).abs() + x[0].sin()).unwrap();
        assert_eq!(inf_convolution(&f, &g).unwrap().values(), g.values());
    }

    #[test]
    fn quadratics_halve() {
        let grid = vec![g1(2.0, 81)];
        let f = TabulatedFunction::from_fn(grid, |x| x[0] * x[0]).unwrap();
        let h = inf_convolution(&f, &f).unwrap();
        // brute force over a fine continuum of splittings
        for i in 20..61 {
            let x = h.node(i)[0];
            let oracle = (0..=4000)
                .map(|t| -2.0 + 4.0 * t as f64 / 4000.0)
                .map(|y| y * y + (x - y) * (x - y))
                .fold(f64::INFINITY, f64::min);
            assert!((h.values()[i] - oracle).abs() < 1e-2);
            assert!((h.values()[i] - x * x / 2.0).abs() < 1e-2);
        }
    }

    #[test]
    fn norm_is_idempotent() {
        let f = TabulatedFunction::from_fn(vec![g1(1.0, 21)], |x| x[0].abs()).unwrap();
        let h = inf_convolution(&f, &f).unwrap();
        for (a, b) in h.values().iter().zip(f.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn mismatched_grids_rejected() {
        let f = TabulatedFunction::from_fn(vec![g1(1.0, 21)], |_| 0.0).unwrap();
        let g = TabulatedFunction::from_fn(vec![g1(1.0, 23)], |_| 0.0).unwrap();
        assert!(matches!(inf_convolution(&f, &g), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn regularization_examples() {
        let grids = vec![g1(2.0, 21), g1(2.0, 21)];
        let q = TabulatedFunction::from_fn(grids.clone(), |z| 0.5 * (z[0] * z[0] + z[1] * z[1])).unwrap();
        for lambda in [0.1, 0.01] {
            assert_eq!(moreau_regularize(&q, lambda).unwrap().eval(&[0.0, 0.0]), 0.0);
        }
        let spike = TabulatedFunction::from_fn(grids, |z| if (z[0] - 1.0).abs() < 1e-9 && (z[1] - 1.0).abs() < 1e-9 { 1.0 } else { f64::INFINITY }).unwrap();
        let lambda = 0.25;
        let r = moreau_regularize(&spike, lambda).unwrap();
        // v = (1, 1): 1 + 0 + lambda/2 + 0 + lambda/2
        assert!((r.eval(&[1.0, 1.0]) - (1.0 + lambda)).abs() < 1e-12);
        assert!(r.values().iter().all(|v| v.is_finite()));
        assert!(moreau_regularize(&r, 0.0).is_err());
    }

    #[test]
    fn prox_examples() {
        let grid = vec![g1(4.0, 161)];
        let zero = TabulatedFunction::from_fn(grid.clone(), |_| 0.0).unwrap();
        assert!((prox(&zero, &[0.737], 0.5).unwrap()[0] - 0.737).abs() < 1e-12);
        let abs = TabulatedFunction::from_fn(grid.clone(), |x| x[0].abs()).unwrap();
        assert!((prox(&abs, &[2.0], 1.0).unwrap()[0] - 1.0).abs() < 1e-12);
        let quad = TabulatedFunction::from_fn(grid, |x| 0.5 * x[0] * x[0]).unwrap();
        assert!((prox(&quad, &[1.0], 1.0).unwrap()[0] - 0.5).abs() < 1e-12);
    }
}
