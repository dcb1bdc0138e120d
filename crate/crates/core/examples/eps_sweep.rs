//! Convergence of oscillating solutions to the homogenized solution as the
//! period shrinks, with the fitted rates.

use sdhom::cell::{tabulate_hom, CellGrid, CellOptions};
use sdhom::convex::BoxGrid;
use sdhom::dirichlet::SolveOptions;
use sdhom::fields::{potential_lagrangian, RegionMap};
use sdhom::harness::{eps_sweep, EpsSchedule};
use sdhom::integrand::ConvexPotential;

fn main() -> sdhom::Result<()> {
    let parts = vec![(ConvexPotential::power(1.0, 2.0)?, None), (ConvexPotential::power(4.0, 2.0)?, None)];
    let l = potential_lagrangian(RegionMap::halves(1, 0), parts, None, 8.0)?;
    let g = BoxGrid::new(1, 1.0, 33)?;
    let hom = tabulate_hom(&l, &g, &g, &CellGrid::new(1, 64)?, &CellOptions::default())?.lagrangian()?;
    let source = |x: &[f64]| 1.0 + 0.5 * (std::f64::consts::PI * x[0]).sin();
    let r = eps_sweep(&l, &hom, &source, &EpsSchedule::standard(), &SolveOptions::quadratic())?;
    print!("{}", r.to_csv());
    println!("rate err_u {:?}, rate flux {:?}, passed {}", r.rate_u, r.rate_flux, r.passed());
    Ok(())
}
