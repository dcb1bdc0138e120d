use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An axis-aligned piece of the unit cell, half-open on the upper side.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl RegionBox {
    pub fn interval(lo: f64, hi: f64) -> Self {
        RegionBox { lo: vec![lo], hi: vec![hi] }
    }

    pub fn contains(&self, y: &[f64]) -> bool {
        y.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(&v, (&l, &h))| v >= l && (v < h || (h >= 1.0 && v <= h)))
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(l, h)| h - l).product()
    }
}

/// Partition of the unit cell `[0,1)^N` into boxes. The first box that
/// contains a point wins.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionMap {
    pub dim: usize,
    pub boxes: Vec<RegionBox>,
}

impl RegionMap {
    pub fn new(dim: usize, boxes: Vec<RegionBox>) -> Result<Self> {
        if dim == 0 || dim > 2 {
            return Err(Error::invalid(format!("cell dimension {dim} not in {{1, 2}}")));
        }
        if boxes.is_empty() {
            return Err(Error::invalid("at least one region is required"));
        }
        for b in &boxes {
            if b.lo.len() != dim || b.hi.len() != dim {
                return Err(Error::invalid("region box dimension disagrees with the field"));
            }
            if b.lo.iter().zip(&b.hi).any(|(l, h)| !(l < h) || *l < 0.0 || *h > 1.0) {
                return Err(Error::invalid(format!("region box {:?}..{:?} is not inside the unit cell", b.lo, b.hi)));
            }
        }
        let map = RegionMap { dim, boxes };
        // coverage check on a fine lattice of cell points
        let n: usize = if dim == 1 { 4096 } else { 256 };
        let mut y = vec![0.0; dim];
        for flat in 0..n.pow(dim as u32) {
            let mut f = flat;
            for k in (0..dim).rev() {
                y[k] = ((f % n) as f64 + 0.5) / n as f64;
                f /= n;
            }
            if map.locate(&y).is_none() {
                return Err(Error::invalid(format!("cell point {y:?} is not covered by any region")));
            }
        }
        Ok(map)
    }

    /// A single region covering the whole cell.
    pub fn whole(dim: usize) -> Self {
        RegionMap {
            dim,
            boxes: vec![RegionBox {
                lo: vec![0.0; dim],
                hi: vec![1.0; dim],
            }],
        }
    }

    /// Two halves split at `x_axis = 1/2`.
    pub fn halves(dim: usize, axis: usize) -> Self {
        let mut lo1 = vec![0.0; dim];
        let mut hi0 = vec![1.0; dim];
        hi0[axis] = 0.5;
        lo1[axis] = 0.5;
        RegionMap {
            dim,
            boxes: vec![
                RegionBox {
                    lo: vec![0.0; dim],
                    hi: hi0,
                },
                RegionBox { lo: lo1, hi: vec![1.0; dim] },
            ],
        }
    }

    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    /// Region of a point of `R^N`, reduced modulo the unit cell.
    pub fn locate(&self, y: &[f64]) -> Option<usize> {
        let w: Vec<f64> = y.iter().map(|v| v.rem_euclid(1.0)).collect();
        self.boxes.iter().position(|b| b.contains(&w))
    }

    /// Volume fractions of the regions (boxes are assumed disjoint).
    pub fn fractions(&self) -> Vec<f64> {
        self.boxes.iter().map(RegionBox::volume).collect()
    }

    /// Centre of a region, used as its representative point.
    pub fn centre(&self, r: usize) -> Vec<f64> {
        let b = &self.boxes[r];
        b.lo.iter().zip(&b.hi).map(|(l, h)| 0.5 * (l + h)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn halves_cover_and_wrap() {
        let m = RegionMap::new(1, RegionMap::halves(1, 0).boxes).unwrap();
        assert_eq!(m.locate(&[0.25]), Some(0));
        assert_eq!(m.locate(&[0.5]), Some(1));
        assert_eq!(m.locate(&[1.25]), Some(0));
        assert_eq!(m.locate(&[-0.25]), Some(1));
        assert_eq!(m.fractions(), vec![0.5, 0.5]);
    }

    #[test]
    fn gaps_are_rejected() {
        let boxes = vec![RegionBox::interval(0.0, 0.4), RegionBox::interval(0.5, 1.0)];
        assert!(RegionMap::new(1, boxes).is_err());
    }
}
