//! Homogenized coefficient of a laminate: the cell problem on the torus
//! against the harmonic mean, and the tabulated homogenized Lagrangian.

use sdhom::cell::{beta_hom_extract, psi_hom, tabulate_hom, CellGrid, CellOptions};
use sdhom::convex::{selfdual_gap_check, BoxGrid, GapOptions};
use sdhom::fields::{potential_lagrangian, RegionMap};
use sdhom::integrand::ConvexPotential;

fn main() -> sdhom::Result<()> {
    let pots = vec![ConvexPotential::power(1.0, 2.0)?, ConvexPotential::power(4.0, 2.0)?];
    let l = potential_lagrangian(RegionMap::halves(1, 0), pots.iter().cloned().map(|p| (p, None)).collect(), None, 8.0)?;
    let opts = CellOptions::default();
    for xi in [0.25, 0.5, 1.0] {
        let s = psi_hom(&l.regions, &pots, &[xi], &CellGrid::new(1, 128)?, &opts)?;
        println!("xi = {xi}: mean flux {:.6}, harmonic mean gives {:.6}", s.mean_flux[0], 1.6 * xi);
    }

    let g = BoxGrid::new(1, 2.0, 33)?;
    let hom = tabulate_hom(&l, &g, &g, &CellGrid::new(1, 64)?, &opts)?;
    let gap = selfdual_gap_check(&hom.table, &GapOptions::default())?;
    println!("homogenized table: gap {:.3e}, h = {}", gap.max_gap, hom.table.max_spacing());
    let graph = beta_hom_extract(&hom, 0.5, 1e-9)?;
    if let Some(p) = graph.at(&[1.0]) {
        println!("beta_hom(1) from the table: {:.6}", p.b[0]);
    }
    Ok(())
}
