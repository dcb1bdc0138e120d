//! Periodic cell problems: the homogenized Lagrangian, its dual cell
//! formula, bounds, subdifferential averaging and the homogenized field.

mod grid;
mod hom;
mod solve;

pub use grid::{CellGrid, CellProjector, Slot, SlotKind};
pub use solve::{element_regions, psi_hom, solve_cell, solve_dual_cell, CellOptions, CellSolution, CorrectorPair, PsiSolution};
pub use hom::{beta_hom_extract, cell_mean_value, dual_cell_check, hom_bounds_check, subdiff_average, tabulate_hom, BoundsReport, GraphPoint, HomGraph, HomLagrangian, ResidualSidecar};
