//! Convex analysis on tensor grids: discrete Legendre transforms,
//! inf-convolution, regularization, prox maps and selfduality checks.

mod conjugate;
mod grid;
mod ops;
mod selfdual;
mod table;

pub use conjugate::{
    conjugate, conjugate_radius, legendre_transform, legendre_transform_brute, legendre_transform_radius,
    swapped_conjugate, Boundary,
};
pub use grid::{flatten_axes, strides, unravel, Axis, BoxGrid};
pub use ops::{inf_convolution, moreau_regularize, prox};
pub use selfdual::{default_tol_gap, gap_slice, graph_extract, selfdual_gap_check, GapOptions, GapReport, GraphImage};
pub use table::{Interpolation, JsonValue, TableRecord, TabulatedFunction};
