//! Monotone fields on the unit cell, their Fitzpatrick functions and the
//! selfdual Lagrangians built from them.

mod field;
mod fitzpatrick;
mod growth;
mod lagrangian;
mod region;
mod selfdualize;

pub use field::{Coefficient, FieldKind, FieldRecord, Growth, Law, MonotoneField, ParamsRecord, PotentialRecord, RegionRecord};
pub use fitzpatrick::{fitzpatrick, fitzpatrick_at, fitzpatrick_from_samples};
pub use growth::{check_eta0, verify_growth, verify_growth_with, GROWTH_SCAN_RADIUS};
pub use lagrangian::{potential_lagrangian, selfdualize, Est200, LagrangianMode, LagrangianSource, OmegaLagrangian};
pub use region::{RegionBox, RegionMap};
pub use selfdualize::{average_splitting, graph_deviation, selfdualize_region, SelfdualTable, SelfdualizeOptions};
