use serde::{Deserialize, Serialize};

use crate::convex::unravel;
use crate::error::{Error, Result};
use crate::spectral::PeriodicFft;
use crate::splitting::AffineProjector;

/// Uniform periodic grid on the unit cell `[0,1)^N`. Potentials live on
/// nodes `j h`, fields on the elements `[j h, (j+1) h)` represented by
/// their centres.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellGrid {
    pub dim: usize,
    pub nodes_per_axis: usize,
}

impl CellGrid {
    pub fn new(dim: usize, nodes_per_axis: usize) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(Error::invalid(format!("cell dimension {dim} not in {{1, 2}}")));
        }
        if nodes_per_axis < 8 {
            return Err(Error::invalid(format!("cell grids need at least 8 nodes per axis, got {nodes_per_axis}")));
        }
        Ok(CellGrid { dim, nodes_per_axis })
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.nodes_per_axis as f64
    }

    pub fn shape(&self) -> Vec<usize> {
        vec![self.nodes_per_axis; self.dim]
    }

    pub fn elements(&self) -> usize {
        self.nodes_per_axis.pow(self.dim as u32)
    }

    pub fn centre(&self, e: usize) -> Vec<f64> {
        let mut idx = vec![0; self.dim];
        unravel(e, &self.shape(), &mut idx);
        idx.iter().map(|&i| (i as f64 + 0.5) * self.spacing()).collect()
    }

    pub fn fft(&self) -> PeriodicFft {
        PeriodicFft::new(&self.shape(), self.spacing())
    }
}

/// Which constraint space a block of `N` components lives in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SlotKind {
    /// `mean + grad phi` with `phi` periodic.
    Gradient,
    /// `mean + g` with `g` periodic, divergence-free and zero-mean.
    Solenoidal,
}

/// One `N`-component slot of the element block: its space and prescribed mean.
#[derive(Clone, Debug, PartialEq)]
pub struct Slot {
    pub kind: SlotKind,
    pub mean: Vec<f64>,
}

/// Projection onto the product of the slot spaces, element blocks laid
/// out consecutively.
pub struct CellProjector {
    pub fft: PeriodicFft,
    pub slots: Vec<Slot>,
}

impl CellProjector {
    pub fn new(grid: &CellGrid, slots: Vec<Slot>) -> Self {
        CellProjector { fft: grid.fft(), slots }
    }

    pub fn block(&self) -> usize {
        self.slots.len() * self.fft.dim()
    }

    /// Component arrays of slot `s`.
    pub fn gather(&self, v: &[f64], s: usize) -> Vec<Vec<f64>> {
        let n = self.fft.dim();
        let m = self.block();
        (0..n).map(|k| v.chunks(m).map(|b| b[s * n + k]).collect()).collect()
    }
}

impl AffineProjector for CellProjector {
    fn project(&self, v: &[f64], out: &mut [f64]) {
        let n = self.fft.dim();
        let m = self.block();
        for (s, slot) in self.slots.iter().enumerate() {
            let comps = self.gather(v, s);
            let p = self.fft.project(&comps, &slot.mean, slot.kind == SlotKind::Gradient);
            for (e, b) in out.chunks_mut(m).enumerate() {
                for k in 0..n {
                    b[s * n + k] = p[k][e];
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dimensional_solenoidal_fields_are_constant() {
        let g = CellGrid::new(1, 8).unwrap();
        let proj = CellProjector::new(
            &g,
            vec![
                Slot {
                    kind: SlotKind::Gradient,
                    mean: vec![1.0],
                },
                Slot {
                    kind: SlotKind::Solenoidal,
                    mean: vec![-0.5],
                },
            ],
        );
        let v: Vec<f64> = (0..16).map(|i| (i as f64 * 0.7).sin()).collect();
        let mut out = vec![0.0; 16];
        proj.project(&v, &mut out);
        let a = proj.gather(&out, 0);
        assert!((a[0].iter().sum::<f64>() / 8.0 - 1.0).abs() < 1e-12);
        assert!(proj.gather(&out, 1)[0].iter().all(|b| (b + 0.5).abs() < 1e-12));
        assert!(CellGrid::new(1, 4).is_err());
    }
}
