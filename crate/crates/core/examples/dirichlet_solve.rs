//! Solve `-div beta(x/eps, grad u) = 1` on the unit interval by minimizing
//! the selfdual functional, and report the zero-infimum certificate.

use sdhom::dirichlet::{solve_dirichlet, DirichletMesh, SolveOptions};
use sdhom::fields::{potential_lagrangian, RegionMap};
use sdhom::integrand::ConvexPotential;

fn main() -> sdhom::Result<()> {
    let parts = vec![(ConvexPotential::power(1.0, 2.0)?, None), (ConvexPotential::power(4.0, 2.0)?, None)];
    let l = potential_lagrangian(RegionMap::halves(1, 0), parts, None, 8.0)?;
    let opts = SolveOptions::quadratic();
    for k in [4usize, 16, 64] {
        let mesh = DirichletMesh::new(1, 8 * k - 1)?;
        let src = vec![1.0; mesh.nodes()];
        let r = solve_dirichlet(&l, 1.0 / k as f64, &mesh, &src, &opts)?;
        let u_max = r.u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        println!(
            "1/eps = {k:3}: gap {:+.2e}, energy {:.6}, max u {:.6}, iterations {}",
            r.gap, r.energy, u_max, r.iterations
        );
    }
    println!("homogenized limit: max u = 1/(8 * 1.6) = {:.6}", 1.0 / 12.8);
    Ok(())
}
