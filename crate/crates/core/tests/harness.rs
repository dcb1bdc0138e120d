use sdhom::cell::{solve_cell, tabulate_hom, CellGrid, CellOptions};
use sdhom::convex::BoxGrid;
use sdhom::dirichlet::SolveOptions;
use sdhom::fields::{potential_lagrangian, OmegaLagrangian, RegionMap};
use sdhom::harness::{eps_sweep, liminf_check, recovery_sequence, recovery_torus, CorrectorBank, EpsSchedule, LiminfEntry, SweepReport};
use sdhom::integrand::ConvexPotential;

fn two_phase() -> OmegaLagrangian {
    let parts = vec![(ConvexPotential::power(1.0, 2.0).unwrap(), None), (ConvexPotential::power(4.0, 2.0).unwrap(), None)];
    potential_lagrangian(RegionMap::halves(1, 0), parts, None, 8.0).unwrap()
}

fn uniform(c: f64) -> OmegaLagrangian {
    potential_lagrangian(RegionMap::whole(1), vec![(ConvexPotential::power(c, 2.0).unwrap(), None)], None, 8.0).unwrap()
}

fn sweep(l: &OmegaLagrangian, hom: &OmegaLagrangian) -> SweepReport {
    let one = |_: &[f64]| 1.0;
    eps_sweep(l, hom, &one, &EpsSchedule::standard(), &SolveOptions::quadratic()).unwrap()
}

#[test]
fn constant_coefficients_do_not_oscillate() {
    let l = uniform(1.6);
    let r = sweep(&l, &l);
    for rec in &r.records {
        assert!(rec.err_u <= 1e-9, "{rec:?}");
        assert!(rec.flux_dev_max <= 1e-9, "{rec:?}");
    }
    let csv = r.to_csv();
    assert_eq!(csv.lines().count(), 1 + r.records.len());
}

#[test]
fn torus_recovery_matches_the_homogenized_value() {
    let l = two_phase();
    let grid = CellGrid::new(1, 32).unwrap();
    for (xi, eta) in [(0.5, 0.0), (1.0, -0.4), (-0.3, 0.8)] {
        let sol = solve_cell(&l, &[xi], &[eta], &grid, &CellOptions::default()).unwrap();
        let want = 0.5 * (1.6 * xi * xi + eta * eta / 1.6);
        for k in [1, 4] {
            let v = recovery_torus(&l, &sol, k).unwrap();
            assert!((v - want).abs() <= 1e-3, "({xi}, {eta}) 1/eps {k}: {v} vs {want}");
        }
    }
}

#[test]
fn liminf_and_recovery_along_the_sweep() {
    let l = two_phase();
    let g = BoxGrid::new(1, 1.0, 33).unwrap();
    let hom = tabulate_hom(&l, &g, &g, &CellGrid::new(1, 64).unwrap(), &CellOptions::default()).unwrap().lagrangian().unwrap();
    let s = EpsSchedule::standard();
    let r = sweep(&l, &hom);
    assert!(r.passed());

    let seq: Vec<LiminfEntry> = r
        .solutions
        .iter()
        .zip(&s.inverse)
        .map(|(x, k)| {
            let x = x.as_ref().unwrap();
            LiminfEntry {
                eps: 1.0 / *k as f64,
                mesh: x.mesh.clone(),
                u_eps: x.eps.u.clone(),
                tau_eps: x.eps.f.values.clone(),
                u: x.hom.u.clone(),
                tau: x.hom.f.values.clone(),
            }
        })
        .collect();
    let li = liminf_check(&l, &hom, &seq, None, &|_| 1e-4, 1.0 / 16.0).unwrap();
    assert!(li.passed, "{li:?}");

    let mut margins = Vec::new();
    for (k, sol) in s.inverse.iter().zip(&r.solutions) {
        let sol = sol.as_ref().unwrap();
        let bank = CorrectorBank::for_solution(&l, &sol.mesh, &sol.hom.u, &sol.hom.f.values, CellGrid::new(1, 8).unwrap(), &CellOptions::default()).unwrap();
        let rec = recovery_sequence(&l, &bank, &sol.mesh, &sol.hom.u, &sol.hom.f.values, 1.0 / *k as f64).unwrap();
        margins.push(rec.margin);
    }
    // the cutoff collar is 4 eps, so it only bites from 1/eps = 8 on
    for w in margins[1..].windows(2) {
        assert!(w[1] <= w[0] + 1e-12, "{margins:?}");
    }
}
