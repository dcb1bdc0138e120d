use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform symmetric box `[-R, R]^dim` with an odd number of nodes per axis,
/// so the origin is always a node.
///
/// Node `k` on an axis sits at `(k - c) * h` with `c = (n - 1) / 2` and
/// `h = 2R / (n - 1)`, which is the centred form of `-R + k h`: the origin
/// and the mirror symmetry are exact in floating point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxGrid {
    pub dim: usize,
    pub radius: f64,
    pub points_per_axis: usize,
}

impl BoxGrid {
    pub fn new(dim: usize, radius: f64, points_per_axis: usize) -> Result<Self> {
        let grid = BoxGrid {
            dim,
            radius,
            points_per_axis,
        };
        grid.validate()?;
        Ok(grid)
    }

    /// Grid with the given spacing, rounded up to the nearest odd node count
    /// covering `[-radius, radius]`.
    pub fn with_spacing(dim: usize, radius: f64, spacing: f64) -> Result<Self> {
        if !(spacing > 0.0) {
            return Err(Error::invalid("spacing must be positive"));
        }
        let half = (radius / spacing).ceil().max(1.0) as usize;
        BoxGrid::new(dim, half as f64 * spacing, 2 * half + 1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::invalid("grid dimension must be positive"));
        }
        if !(self.radius > 0.0) || !self.radius.is_finite() {
            return Err(Error::invalid(format!("radius {} must be positive", self.radius)));
        }
        if self.points_per_axis < 3 || self.points_per_axis % 2 == 0 {
            return Err(Error::invalid(format!(
                "points_per_axis {} must be odd and at least 3",
                self.points_per_axis
            )));
        }
        Ok(())
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.radius / (self.points_per_axis - 1) as f64
    }

    pub fn center_index(&self) -> usize {
        (self.points_per_axis - 1) / 2
    }

    pub fn coord(&self, k: usize) -> f64 {
        (k as f64 - self.center_index() as f64) * self.spacing()
    }

    pub fn axis_nodes(&self) -> Vec<f64> {
        (0..self.points_per_axis).map(|k| self.coord(k)).collect()
    }

    pub fn len(&self) -> usize {
        self.points_per_axis.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Index of the node nearest to `x` on one axis, if `x` is inside the box.
    pub fn nearest_index(&self, x: f64) -> Option<usize> {
        let h = self.spacing();
        let k = (x / h).round() + self.center_index() as f64;
        if k < 0.0 || k > (self.points_per_axis - 1) as f64 || x.abs() > self.radius + 0.5 * h {
            None
        } else {
            Some(k as usize)
        }
    }

    /// Same shape, different radius.
    pub fn with_radius(&self, radius: f64) -> Result<Self> {
        BoxGrid::new(self.dim, radius, self.points_per_axis)
    }
}

/// One axis of a tabulated function after flattening its product of grids.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Axis {
    pub n: usize,
    pub spacing: f64,
    pub radius: f64,
}

impl Axis {
    pub fn coord(&self, k: usize) -> f64 {
        (k as f64 - ((self.n - 1) / 2) as f64) * self.spacing
    }

    pub fn center(&self) -> usize {
        (self.n - 1) / 2
    }

    /// Cell containing `x` and the local coordinate in `[0, 1]`; `None`
    /// outside the axis range.
    pub fn locate(&self, x: f64) -> Option<(usize, f64)> {
        let s = x / self.spacing + self.center() as f64;
        let last = (self.n - 1) as f64;
        if !(s >= -1e-12) || s > last + 1e-12 {
            return None;
        }
        let s = s.clamp(0.0, last);
        let i = (s.floor() as usize).min(self.n - 2);
        Some((i, s - i as f64))
    }

    /// Like [`Axis::locate`], but points outside the range are attached to
    /// the boundary cell with a local coordinate outside `[0, 1]`.
    pub fn locate_extended(&self, x: f64) -> (usize, f64) {
        let s = x / self.spacing + self.center() as f64;
        let i = (s.floor().max(0.0) as usize).min(self.n - 2);
        (i, s - i as f64)
    }
}

/// Flattened axes of a product of grids, in row-major order (first factor
/// outermost).
pub fn flatten_axes(factors: &[BoxGrid]) -> Vec<Axis> {
    factors
        .iter()
        .flat_map(|g| {
            let axis = Axis {
                n: g.points_per_axis,
                spacing: g.spacing(),
                radius: g.radius,
            };
            std::iter::repeat(axis).take(g.dim)
        })
        .collect()
}

/// Row-major strides for a shape.
pub fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for k in (0..shape.len().saturating_sub(1)).rev() {
        s[k] = s[k + 1] * shape[k + 1];
    }
    s
}

/// Decompose a flat index into per-axis indices.
pub fn unravel(mut flat: usize, shape: &[usize], out: &mut [usize]) {
    for k in (0..shape.len()).rev() {
        out[k] = flat % shape[k];
        flat /= shape[k];
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn origin_is_exact_node() {
        let g = BoxGrid::new(1, 4.0, 257).unwrap();
        assert_eq!(g.coord(128), 0.0);
        assert_eq!(g.spacing(), 1.0 / 32.0);
        assert_eq!(g.coord(0), -4.0);
        assert_eq!(g.coord(256), 4.0);
        for k in 0..257 {
            assert_eq!(g.coord(k), -g.coord(256 - k));
        }
    }

    #[test]
    fn rejects_even_or_tiny_grids() {
        assert!(BoxGrid::new(1, 1.0, 4).is_err());
        assert!(BoxGrid::new(1, 1.0, 1).is_err());
        assert!(BoxGrid::new(1, -1.0, 5).is_err());
        assert!(BoxGrid::new(0, 1.0, 5).is_err());
    }

    #[test]
    fn with_spacing_keeps_requested_step() {
        let g = BoxGrid::with_spacing(1, 3.2, 0.05).unwrap();
        assert_eq!(g.points_per_axis, 129);
        assert!((g.spacing() - 0.05).abs() < 1e-15);
        assert_eq!(g.nearest_index(1.6), Some(96));
    }

    #[test]
    fn locate_handles_endpoints() {
        let a = Axis { n: 5, spacing: 0.5, radius: 1.0 };
        assert_eq!(a.locate(-1.0), Some((0, 0.0)));
        assert_eq!(a.locate(1.0), Some((3, 1.0)));
        assert_eq!(a.locate(1.1), None);
        let (i, t) = a.locate(0.25).unwrap();
        assert_eq!(i, 2);
        assert!((t - 0.5).abs() < 1e-15);
    }
}
