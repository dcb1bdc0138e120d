use rayon::prelude::*;

use super::grid::{flatten_axes, unravel, Axis, BoxGrid};
use super::table::{lower_hull, TabulatedFunction};
use crate::error::{Error, Result};

/// What to do when a conjugate's maximizer sits on the input box boundary.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Boundary {
    /// Return [`Error::BoxTooSmall`].
    Strict,
    /// Accept the boundary value (a lower bound of the true conjugate).
    Lenient,
}

/// Discrete Legendre transform `f*(y) = max_x <x, y> - f(x)` over the nodes
/// of `f`, evaluated on the nodes of `out`. Fails with
/// [`Error::BoxTooSmall`] if any maximizer lies on the input box boundary.
pub fn legendre_transform(f: &TabulatedFunction, out: &[BoxGrid]) -> Result<TabulatedFunction> {
    conjugate(f, out, Boundary::Strict)
}

/// Transform onto a single output grid of the given radius, keeping the node
/// count of the input.
pub fn legendre_transform_radius(f: &TabulatedFunction, radius: f64) -> Result<TabulatedFunction> {
    let out: Vec<BoxGrid> = f
        .factors()
        .iter()
        .map(|g| g.with_radius(radius))
        .collect::<Result<_>>()?;
    legendre_transform(f, &out)
}

/// Output radius that keeps conjugate maximizers inside a box of radius `r`
/// when `f(x) <= c1 (|x|^p + 1)`.
pub fn conjugate_radius(c1: f64, p: f64, r: f64) -> f64 {
    c1 * (r.powf(p - 1.0) + 1.0)
}

/// Discrete Legendre transform with a choice of boundary handling.
///
/// Runs one exact 1D transform per axis (lower hull plus a monotone
/// pointer), negating between axes. The per-axis maximum over a finite node
/// set is attained at a hull vertex, so the result equals the brute-force
/// maximum over all nodes for any input table.
pub fn conjugate(f: &TabulatedFunction, out: &[BoxGrid], boundary: Boundary) -> Result<TabulatedFunction> {
    if !f.has_finite_value() {
        return Err(Error::DomainEmpty);
    }
    for g in out {
        g.validate()?;
    }
    let in_axes = f.axes().to_vec();
    let out_axes = flatten_axes(out);
    if in_axes.len() != out_axes.len() {
        return Err(Error::GridMismatch(format!(
            "conjugate of a {}-variable table onto {} output axes",
            in_axes.len(),
            out_axes.len()
        )));
    }
    let d = in_axes.len();
    let mut shape: Vec<usize> = in_axes.iter().map(|a| a.n).collect();
    let mut cur = f.values().to_vec();
    let mut stage_args: Vec<(Vec<usize>, Vec<u32>)> = Vec::with_capacity(d);
    for k in 0..d {
        let (next, args, next_shape) = transform_axis(&cur, &shape, k, in_axes[k], out_axes[k]);
        cur = next;
        shape = next_shape;
        if k + 1 < d {
            for v in cur.iter_mut() {
                *v = -*v;
            }
        }
        stage_args.push((shape.clone(), args));
    }
    if boundary == Boundary::Strict {
        if let Some(node) = boundary_argmax(&stage_args, &in_axes, &out_axes) {
            return Err(Error::BoxTooSmall { node });
        }
    }
    TabulatedFunction::new(out.to_vec(), cur)
}

/// Conjugate followed by a swap of the two factors: `(a, b) -> L*(b, a)`
/// evaluated on the grid of `l`. The inner transform is lenient.
pub fn swapped_conjugate(l: &TabulatedFunction) -> Result<TabulatedFunction> {
    let f = l.factors();
    if f.len() != 2 {
        return Err(Error::GridMismatch("two-argument table required".into()));
    }
    let star = conjugate(l, &[f[1].clone(), f[0].clone()], Boundary::Lenient)?;
    star.swap_factors()
}

/// Brute-force transform over all node pairs; `O(M * N)`. Used as a
/// reference for the fast transform.
pub fn legendre_transform_brute(f: &TabulatedFunction, out: &[BoxGrid]) -> Result<TabulatedFunction> {
    if !f.has_finite_value() {
        return Err(Error::DomainEmpty);
    }
    let finite: Vec<(Vec<f64>, f64)> = (0..f.len())
        .filter(|&i| f.values()[i].is_finite())
        .map(|i| (f.node(i), f.values()[i]))
        .collect();
    TabulatedFunction::from_fn(out.to_vec(), |y| {
        finite
            .iter()
            .map(|(x, v)| x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() - v)
            .fold(f64::NEG_INFINITY, f64::max)
    })
}

/// Exact 1D transform of every line of `cur` along axis `k`.
fn transform_axis(
    cur: &[f64],
    shape: &[usize],
    k: usize,
    ax_in: Axis,
    ax_out: Axis,
) -> (Vec<f64>, Vec<u32>, Vec<usize>) {
    let outer: usize = shape[..k].iter().product();
    let inner: usize = shape[k + 1..].iter().product();
    let n = shape[k];
    let m = ax_out.n;
    let xs: Vec<f64> = (0..n).map(|i| ax_in.coord(i)).collect();
    let ys: Vec<f64> = (0..m).map(|j| ax_out.coord(j)).collect();
    let lines: Vec<(Vec<f64>, Vec<u32>)> = (0..outer * inner)
        .into_par_iter()
        .map(|line| {
            let (o, i) = (line / inner, line % inner);
            let base = o * n * inner + i;
            let g: Vec<f64> = (0..n).map(|t| cur[base + t * inner]).collect();
            conjugate_1d(&xs, &g, &ys)
        })
        .collect();
    let mut next = vec![0.0; outer * m * inner];
    let mut args = vec![0u32; outer * m * inner];
    for (line, (vals, arg)) in lines.into_iter().enumerate() {
        let (o, i) = (line / inner, line % inner);
        let base = o * m * inner + i;
        for j in 0..m {
            next[base + j * inner] = vals[j];
            args[base + j * inner] = arg[j];
        }
    }
    let mut new_shape = shape.to_vec();
    new_shape[k] = m;
    (next, args, new_shape)
}

/// `g*(y_j) = max_i x_i y_j - g_i` for increasing `xs` and `ys`, with the
/// lowest maximizing index. Lines with no finite value give `-inf`.
pub(crate) fn conjugate_1d(xs: &[f64], g: &[f64], ys: &[f64]) -> (Vec<f64>, Vec<u32>) {
    let idx: Vec<usize> = (0..xs.len()).filter(|&i| g[i].is_finite()).collect();
    if idx.is_empty() {
        return (vec![f64::NEG_INFINITY; ys.len()], vec![0; ys.len()]);
    }
    let pts: Vec<(f64, f64)> = idx.iter().map(|&i| (xs[i], g[i])).collect();
    let hull = lower_hull(&pts);
    // map hull vertices back to node indices (abscissae are unique)
    let mut hull_idx = Vec::with_capacity(hull.len());
    let mut c = 0;
    for &(hx, _) in &hull {
        while pts[c].0 != hx {
            c += 1;
        }
        hull_idx.push(idx[c]);
    }
    let mut vals = Vec::with_capacity(ys.len());
    let mut args = Vec::with_capacity(ys.len());
    let mut p = 0;
    for &y in ys {
        while p + 1 < hull.len() {
            let slope = (hull[p + 1].1 - hull[p].1) / (hull[p + 1].0 - hull[p].0);
            if slope < y {
                p += 1;
            } else {
                break;
            }
        }
        vals.push(hull[p].0 * y - hull[p].1);
        args.push(hull_idx[p] as u32);
    }
    (vals, args)
}

/// Recover the full maximizer at every output node by back-substitution
/// through the per-axis stages and report the first one on the box boundary.
fn boundary_argmax(stages: &[(Vec<usize>, Vec<u32>)], in_axes: &[Axis], out_axes: &[Axis]) -> Option<Vec<f64>> {
    let d = in_axes.len();
    let out_shape: Vec<usize> = out_axes.iter().map(|a| a.n).collect();
    let total: usize = out_shape.iter().product();
    let mut jy = vec![0usize; d];
    let mut ix = vec![0usize; d];
    let mut pos = vec![0usize; d];
    for flat in 0..total {
        unravel(flat, &out_shape, &mut jy);
        for k in (0..d).rev() {
            let (shape, args) = &stages[k];
            // stage k table is indexed by (y_0..y_k, x_{k+1}..x_{d-1})
            for l in 0..d {
                pos[l] = if l <= k { jy[l] } else { ix[l] };
            }
            let mut off = 0;
            for l in 0..d {
                off = off * shape[l] + pos[l];
            }
            ix[k] = args[off] as usize;
        }
        if (0..d).any(|k| ix[k] == 0 || ix[k] == in_axes[k].n - 1) {
            return Some(jy.iter().zip(out_axes).map(|(&j, a)| a.coord(j)).collect());
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g1(r: f64, n: usize) -> BoxGrid {
        BoxGrid::new(1, r, n).unwrap()
    }

    #[test]
    fn quadratic_is_self_conjugate() {
        let f = TabulatedFunction::from_fn(vec![g1(4.0, 257)], |x| 0.5 * x[0] * x[0]).unwrap();
        let s = legendre_transform(&f, &[g1(2.0, 129)]).unwrap();
        for i in 0..s.len() {
            let y = s.node(i)[0];
            assert!((s.values()[i] - 0.5 * y * y).abs() < 1e-3);
        }
    }

    #[test]
    fn cubic_power_conjugate() {
        let f = TabulatedFunction::from_fn(vec![g1(3.0, 601)], |x| x[0].abs().powi(3) / 3.0).unwrap();
        let s = legendre_transform(&f, &[g1(2.0, 41)]).unwrap();
        for i in 0..s.len() {
            let y: f64 = s.node(i)[0];
            let exact = y.abs().powf(1.5) / 1.5;
            assert!((s.values()[i] - exact).abs() < 1e-4, "{y}");
        }
    }

    #[test]
    fn quartic_at_one() {
        let f = TabulatedFunction::from_fn(vec![g1(2.0, 401)], |x| x[0].powi(4) / 4.0).unwrap();
        let s = legendre_transform(&f, &[g1(1.0, 3)]).unwrap();
        // dense reference: max over a 1e5-point refinement of a*1 - a^4/4
        let dense = (0..=100_000)
            .map(|i| -2.0 + 4.0 * i as f64 / 100_000.0)
            .map(|a| a - a.powi(4) / 4.0)
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((s.eval(&[1.0]) - dense).abs() < 1e-2);
        assert!((s.eval(&[1.0]) - 0.75).abs() < 1e-2);
    }

    #[test]
    fn matches_brute_force_on_nonconvex_2d_table() {
        let grids = vec![g1(1.0, 7), g1(2.0, 9)];
        let f = TabulatedFunction::from_fn(grids, |x| {
            (3.0 * x[0]).sin() + x[0] * x[1] + if x[1] > 1.2 { f64::INFINITY } else { 0.0 }
        })
        .unwrap();
        let out = vec![g1(1.5, 11), g1(0.5, 5)];
        let fast = conjugate(&f, &out, Boundary::Lenient).unwrap();
        let brute = legendre_transform_brute(&f, &out).unwrap();
        for (a, b) in fast.values().iter().zip(brute.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_domain_and_small_box() {
        let f = TabulatedFunction::from_fn(vec![g1(1.0, 5)], |_| f64::INFINITY).unwrap();
        assert!(matches!(legendre_transform(&f, &[g1(1.0, 5)]), Err(Error::DomainEmpty)));
        let q = TabulatedFunction::from_fn(vec![g1(1.0, 21)], |x| 0.5 * x[0] * x[0]).unwrap();
        assert!(matches!(legendre_transform(&q, &[g1(3.0, 7)]), Err(Error::BoxTooSmall { .. })));
        assert!(conjugate(&q, &[g1(3.0, 7)], Boundary::Lenient).is_ok());
    }

    #[test]
    fn ties_pick_lowest_index() {
        let xs = [-1.0, 0.0, 1.0];
        let (v, a) = conjugate_1d(&xs, &[1.0, 0.0, 1.0], &[-1.0, 0.0, 1.0]);
        assert_eq!(a, vec![0, 1, 1]);
        assert_eq!(v, vec![0.0, 0.0, 0.0]);
    }
}
