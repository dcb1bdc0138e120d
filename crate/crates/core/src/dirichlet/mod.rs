//! Dirichlet problems `-div beta(x, grad u) = u*` on `(0,1)^N` through the
//! lifted selfdual Lagrangian and its gap functional.

mod brl;
mod mesh;
mod solve;

pub use mesh::{particular_flux, DirichletMesh, FluxField};
pub use solve::{lifted_value, solve_dirichlet, solve_lifted, LiftedLagrangian, SolveOptions, SolverReport};
pub use brl::{brl_project, brl_project_point, BrlResult};
