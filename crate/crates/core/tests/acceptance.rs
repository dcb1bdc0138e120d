//! Acceptance criteria. Runs as a plain binary so every line is printed in
//! the normal `cargo test` output; exits nonzero if any criterion fails.

use std::f64::consts::PI;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sdhom::cell::{beta_hom_extract, dual_cell_check, hom_bounds_check, psi_hom, solve_cell, subdiff_average, tabulate_hom, CellGrid, CellOptions, HomLagrangian};
use sdhom::checks::run_checks;
use sdhom::convex::{gap_slice, legendre_transform, selfdual_gap_check, BoxGrid, GapOptions};
use sdhom::dirichlet::{brl_project, brl_project_point, solve_dirichlet, DirichletMesh, LiftedLagrangian, SolveOptions};
use sdhom::fields::{graph_deviation, potential_lagrangian, selfdualize_region, FieldKind, Growth, Law, MonotoneField, OmegaLagrangian, RegionMap, SelfdualizeOptions};
use sdhom::harness::{eps_sweep, graph_convergence_check, jensen_bound_test, riemann_lebesgue_test, EpsSchedule, Piece, Source};
use sdhom::integrand::{ConvexPotential, QuadraticForm};

type Outcome = Result<(bool, String), String>;

fn two_phase(p: f64) -> OmegaLagrangian {
    let parts = vec![(ConvexPotential::power(1.0, p).unwrap(), None), (ConvexPotential::power(4.0, p).unwrap(), None)];
    potential_lagrangian(RegionMap::halves(1, 0), parts, None, 8.0).unwrap()
}

/// Shared two-phase quadratic table on 129 x 129 nodes of [-2, 2]^2.
struct Bench {
    l: OmegaLagrangian,
    hom: HomLagrangian,
}

fn e(x: impl std::fmt::Display) -> String {
    x.to_string()
}

fn c1_harmonic_mean() -> Outcome {
    let l = two_phase(2.0);
    let grid = CellGrid::new(1, 256).map_err(e)?;
    let pots = vec![ConvexPotential::power(1.0, 2.0).unwrap(), ConvexPotential::power(4.0, 2.0).unwrap()];
    let s = psi_hom(&l.regions, &pots, &[1.0], &grid, &CellOptions::default()).map_err(e)?;
    let oracle = 1.0 / (0.5 / 1.0 + 0.5 / 4.0);
    let err = (s.mean_flux[0] - oracle).abs();
    Ok((err <= 1e-3, format!("slope {:.6} vs {oracle}, error {err:.2e}", s.mean_flux[0])))
}

fn c2_p_harmonic_mean() -> Outcome {
    let l = two_phase(3.0);
    let oracle = (0.5 * 1.0 + 0.5 * 4f64.powf(-0.5)).powi(-2);
    let pots = vec![ConvexPotential::power(1.0, 3.0).unwrap(), ConvexPotential::power(4.0, 3.0).unwrap()];
    let opts = CellOptions::with_tol(1e-4);
    let psi = psi_hom(&l.regions, &pots, &[1.0], &CellGrid::new(1, 256).map_err(e)?, &opts).map_err(e)?;
    let ga = BoxGrid::new(1, 2.0, 17).map_err(e)?;
    let gb = BoxGrid::new(1, 4.0, 81).map_err(e)?;
    let hom = tabulate_hom(&l, &ga, &gb, &CellGrid::new(1, 64).map_err(e)?, &opts).map_err(e)?;
    let graph = beta_hom_extract(&hom, 0.5, 1e-6).map_err(e)?;
    let table = graph.at(&[1.0]).ok_or("no extracted point at a = 1")?.b[0];
    let (d_psi, d_tab, d_routes) = ((psi.mean_flux[0] - oracle).abs(), (table - oracle).abs(), (psi.mean_flux[0] - table).abs());
    Ok((
        d_psi <= 1e-2 && d_tab <= 1e-2 && d_routes <= 1e-2,
        format!("beta_hom(1): cell {:.5}, table {table:.5}, oracle {oracle:.5}; route gap {d_routes:.2e}", psi.mean_flux[0]),
    ))
}

fn c3_selfduality(b: &Bench) -> Outcome {
    let t = &b.hom.table;
    let h = t.max_spacing();
    let report = selfdual_gap_check(t, &GapOptions::default()).map_err(e)?;
    // independent transform onto the inner half box, where maximizers are interior
    let inner = BoxGrid::new(1, 1.0, 65).map_err(e)?;
    let conj = legendre_transform(t, &[inner.clone(), inner]).map_err(e)?;
    let mut worst = 0.0f64;
    for flat in 0..conj.len() {
        let z = conj.node(flat);
        if let Some(k) = t.node_index_of(&[z[1], z[0]]) {
            worst = worst.max((conj.values()[flat] - t.values()[k]).abs());
        }
    }
    let tol = 1e-6 + h;
    Ok((
        report.max_gap <= tol && worst <= tol,
        format!("gap {:.3e}, independent transform {worst:.3e}, allowed {tol:.3e} (h = {h})", report.max_gap),
    ))
}

fn c4_dual_cell(b: &Bench) -> Outcome {
    let r = dual_cell_check(&b.l, &b.hom, 0.5, &CellOptions::default()).map_err(e)?;
    Ok((r.max_gap <= 1e-3, format!("max discrepancy {:.3e} over {} nodes", r.max_gap, r.nodes_checked)))
}

fn c5_bounds(b: &Bench) -> Outcome {
    let l3 = two_phase(3.0);
    let ga = BoxGrid::new(1, 2.0, 17).map_err(e)?;
    let gb = BoxGrid::new(1, 4.0, 81).map_err(e)?;
    let hom3 = tabulate_hom(&l3, &ga, &gb, &CellGrid::new(1, 64).map_err(e)?, &CellOptions::with_tol(1e-4)).map_err(e)?;
    let r2 = hom_bounds_check(&b.hom, Some(&b.l)).map_err(e)?;
    let r3 = hom_bounds_check(&hom3, Some(&l3)).map_err(e)?;
    Ok((
        r2.passed() && r3.passed(),
        format!(
            "violations: quadratic {} of {}, p = 3 {} of {}",
            r2.violations.len(),
            r2.nodes_checked,
            r3.violations.len(),
            r3.nodes_checked
        ),
    ))
}

fn c6_subdifferential(b: &Bench) -> Outcome {
    let t = &b.hom.table;
    let g = &t.factors()[0];
    let n = g.points_per_axis;
    let c = g.center_index();
    let grid = CellGrid::new(1, 64).map_err(e)?;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        // interior nodes with |a|, |b| <= R/2
        let i = rng.gen_range(c - (n - 1) / 4..=c + (n - 1) / 4);
        let j = rng.gen_range(c - (n - 1) / 4..=c + (n - 1) / 4);
        let (a, bb) = (g.coord(i), g.coord(j));
        let at = |ii: usize, jj: usize| t.values()[ii * n + jj];
        let hs = g.spacing();
        let fd = [(at(i + 1, j) - at(i - 1, j)) / (2.0 * hs), (at(i, j + 1) - at(i, j - 1)) / (2.0 * hs)];
        let sol = solve_cell(&b.l, &[a], &[bb], &grid, &CellOptions::default()).map_err(e)?;
        let avg = subdiff_average(&b.l, &sol, 1e-3).map_err(e)?;
        worst = worst.max((avg[0] - fd[0]).abs()).max((avg[1] - fd[1]).abs());
    }
    Ok((worst <= 1e-3, format!("largest difference {worst:.3e} at 20 nodes")))
}

fn c7_certificate() -> Outcome {
    let uniform = potential_lagrangian(RegionMap::whole(1), vec![(ConvexPotential::power(1.0, 2.0).unwrap(), None)], None, 8.0).map_err(e)?;
    let mesh = DirichletMesh::new(1, 255).map_err(e)?;
    let opts = SolveOptions::quadratic();
    let r = solve_dirichlet(&uniform, 1.0, &mesh, &vec![1.0; 255], &opts).map_err(e)?;
    let err = (0..255).map(|i| {
        let x = mesh.node(i)[0];
        (r.u[i] - x * (1.0 - x) / 2.0).abs()
    });
    let err = err.fold(0.0, f64::max);
    let mut gaps = vec![r.gap];
    let l = two_phase(2.0);
    for k in [4usize, 16, 64] {
        let m = DirichletMesh::new(1, 8 * k - 1).map_err(e)?;
        let s: Vec<f64> = (0..m.nodes()).map(|i| 1.0 + 0.5 * (PI * m.node(i)[0]).sin()).collect();
        gaps.push(solve_dirichlet(&l, 1.0 / k as f64, &m, &s, &opts).map_err(e)?.gap);
    }
    let ok = gaps.iter().all(|g| (-1e-10..=opts.tol_solve).contains(g));
    let lo = gaps.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = gaps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok((ok && err <= 1e-6, format!("gaps in [{lo:.2e}, {hi:.2e}], constant-coefficient error {err:.2e}")))
}

fn hom_lagrangian(l: &OmegaLagrangian, radius: f64, nodes: usize) -> Result<OmegaLagrangian, String> {
    let g = BoxGrid::new(1, radius, nodes).map_err(e)?;
    let hom = tabulate_hom(l, &g, &g, &CellGrid::new(1, 64).map_err(e)?, &CellOptions::default()).map_err(e)?;
    hom.lagrangian().map_err(e)
}

fn c8_sweep() -> Outcome {
    let l = two_phase(2.0);
    let hl = hom_lagrangian(&l, 1.0, 33)?;
    let one = |_: &[f64]| 1.0;
    let r = eps_sweep(&l, &hl, &one, &EpsSchedule::standard(), &SolveOptions::quadratic()).map_err(e)?;
    let want = 1.0 / (8.0 * 1.6);
    let dev = r.records.iter().map(|x| (x.u_hom_max - want).abs()).fold(0.0, f64::max);
    Ok((
        r.passed() && dev <= 1e-4,
        format!(
            "rate err_u {:.4}, rate flux {:.4}, u_hom max deviation {dev:.2e}",
            r.rate_u.unwrap_or(f64::NAN),
            r.rate_flux.unwrap_or(f64::NAN)
        ),
    ))
}

fn c9_brl() -> Outcome {
    let q = QuadraticForm::new(nalgebra::DMatrix::identity(2, 2), nalgebra::DVector::zeros(2), 0.0).map_err(e)?;
    let hand = brl_project_point(&q, &[1.0], &[0.0]).map_err(e)?;
    let exact = hand.u == vec![0.5] && hand.u_star == vec![0.5];
    let l = two_phase(2.0);
    let mesh = DirichletMesh::new(1, 31).map_err(e)?;
    let src = vec![1.0; 31];
    let opts = SolveOptions::default();
    let sol = solve_dirichlet(&l, 0.25, &mesh, &src, &opts).map_err(e)?;
    let lifted = LiftedLagrangian::new(&l, &mesh, 0.25).map_err(e)?;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut bad = 0;
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..20 {
        let (s1, s2): (f64, f64) = (rng.gen_range(0.001..0.05), rng.gen_range(0.01..0.5));
        let u0: Vec<f64> = sol.u.iter().map(|u| u + s1 * rng.gen_range(-1.0..1.0)).collect();
        let us0: Vec<f64> = src.iter().map(|s| s + s2 * rng.gen_range(-1.0..1.0)).collect();
        let r = brl_project(&lifted, &u0, &us0, &opts).map_err(e)?;
        if !r.within_bounds(1e-8) {
            bad += 1;
        }
        worst = worst.max(r.distance - r.eps.max(0.0).sqrt());
    }
    Ok((
        exact && bad == 0,
        format!("hand case ({}, {}), 20 projections with {bad} bound failures, max distance - sqrt(eps) {worst:.3e}", hand.u[0], hand.u_star[0]),
    ))
}

fn c10_graph() -> Outcome {
    let l = two_phase(2.0);
    let hl = hom_lagrangian(&l, 2.0, 65)?;
    let a: Vec<Box<Source>> = (0..10)
        .map(|i| Box::new(move |x: &[f64]| (0.5 + 0.05 * i as f64) * (1.0 + 0.5 * (PI * (i + 1) as f64 * x[0]).sin())) as Box<Source>)
        .collect();
    let b: Vec<Box<Source>> = (0..10)
        .map(|j| Box::new(move |x: &[f64]| 0.5 - 0.3 * (PI * j as f64 * x[0]).cos() + 0.1 * j as f64 * x[0]) as Box<Source>)
        .collect();
    let ar: Vec<&Source> = a.iter().map(|f| f.as_ref()).collect();
    let br: Vec<&Source> = b.iter().map(|f| f.as_ref()).collect();
    let r = graph_convergence_check(&l, &hl, &EpsSchedule::standard(), &ar, &br, &CellOptions::default(), &SolveOptions::quadratic(), 1e-8).map_err(e)?;
    Ok((
        r.passed && r.monotonicity_pairs == 100,
        format!(
            "distance rate {:.3}, {} pairings with {} violations",
            r.distance_rate.unwrap_or(f64::NAN),
            r.monotonicity_pairs,
            r.monotonicity_violations
        ),
    ))
}

fn c11_fitzpatrick() -> Outcome {
    let growth = Growth {
        c1: 1.0,
        c2: 0.25,
        m1: 8.0,
        m2: 0.0,
        p: 2.0,
    };
    let fields = [
        ("identity", MonotoneField::uniform(FieldKind::Linear, 1, Law::Linear { matrix: vec![1.0] }, growth.clone())),
        ("scaled", MonotoneField::uniform(FieldKind::Linear, 1, Law::Linear { matrix: vec![4.0] }, growth.clone())),
        (
            "abs",
            MonotoneField::uniform(
                FieldKind::SampledGraph1d,
                1,
                Law::Polyline {
                    points: vec![(-1.0, -1.0), (0.0, -1.0), (0.0, 1.0), (1.0, 1.0)],
                },
                Growth { m1: 1.0, m2: 1.0, ..growth },
            ),
        ),
    ];
    let opts = SelfdualizeOptions::new(4.0, 65);
    let h = opts.spacing();
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, f) in fields {
        let f = f.map_err(e)?;
        let t = selfdualize_region(&f, 0, &opts).map_err(e)?;
        let dev = graph_deviation(&t.lagrangian, &f, 0, 0.5, 1e-9).map_err(e)?;
        let n = &t.fitzpatrick;
        let fy = (0..n.len())
            .map(|k| {
                let z = n.node(k);
                n.values()[k] - z[0] * z[1]
            })
            .fold(f64::INFINITY, f64::min);
        let (lo, hi) = t.sandwich_margin;
        ok &= dev <= 3.0 * h && fy >= -1e-12 && lo >= -1e-9 && hi >= -1e-9;
        parts.push(format!("{name}: deviation {dev:.3}, min N - ab {fy:.1e}, sandwich ({lo:.1e}, {hi:.1e})"));
    }
    // the image of the absolute value at 0 is the whole segment [-1, 1]
    let abs = MonotoneField::uniform(
        FieldKind::SampledGraph1d,
        1,
        Law::Polyline {
            points: vec![(-1.0, -1.0), (0.0, -1.0), (0.0, 1.0), (1.0, 1.0)],
        },
        Growth {
            c1: 1.0,
            c2: 0.25,
            m1: 1.0,
            m2: 1.0,
            p: 2.0,
        },
    )
    .map_err(e)?;
    let t = selfdualize_region(&abs, 0, &opts).map_err(e)?;
    let (slice, bs) = gap_slice(&t.lagrangian, &[0.0]).map_err(e)?;
    let min = slice.iter().copied().fold(f64::INFINITY, f64::min);
    let zero: Vec<f64> = bs.iter().zip(&slice).filter(|(_, &v)| v <= min + 1e-9).map(|(b, _)| b[0]).collect();
    let span = (zero[0], zero[zero.len() - 1]);
    ok &= (span.0 + 1.0).abs() <= 3.0 * h && (span.1 - 1.0).abs() <= 3.0 * h;
    parts.push(format!("image at 0: [{:.3}, {:.3}]", span.0, span.1));
    Ok((ok, parts.join("; ")))
}

fn c12_lemmas() -> Outcome {
    let indicator = |y: f64| if y.rem_euclid(1.0) < 0.5 { 1.0 } else { 0.0 };
    let rl = riemann_lebesgue_test(&indicator, &|x| x, &[4, 8, 16, 32, 64], 16).map_err(e)?;
    let rate = rl.rate.unwrap_or(f64::NAN);
    // the midpoint rule integrates the linear test function exactly: deviation eps/8
    let exact = rl.rows.iter().all(|r| (r.deviation - r.eps / 8.0).abs() <= 1e-12);
    let l = QuadraticForm::new(nalgebra::DMatrix::identity(2, 2), nalgebra::DVector::zeros(2), 0.0).map_err(e)?;
    let single = jensen_bound_test(&l, &[Piece { measure: 1.0, a: 0.7, b: -0.3 }]).map_err(e)?;
    let split = jensen_bound_test(
        &l,
        &[
            Piece { measure: 0.5, a: 0.7, b: -0.3 },
            Piece { measure: 0.5, a: -0.2, b: 0.9 },
        ],
    )
    .map_err(e)?;
    let ok = (rate - 1.0).abs() <= 0.05 && exact && single.margin.abs() <= 1e-12 && split.margin >= -1e-12;
    Ok((
        ok,
        format!(
            "oscillation rate {rate:.4}; singleton margin {:.1e}; two-piece margin {:.3e}",
            single.margin, split.margin
        ),
    ))
}

fn c13_suites() -> Outcome {
    let r = run_checks(20261016, 200).map_err(e)?;
    let failures: usize = r.suites.iter().map(|s| s.failures).sum();
    let names: Vec<String> = r.suites.iter().map(|s| format!("{} {}", s.name, s.failures)).collect();
    Ok((r.passed(), format!("{failures} failures ({})", names.join(", "))))
}

fn main() {
    let start = Instant::now();
    let l = two_phase(2.0);
    let g = BoxGrid::new(1, 2.0, 129).unwrap();
    let bench = tabulate_hom(&l, &g, &g, &CellGrid::new(1, 128).unwrap(), &CellOptions::default()).map(|hom| Bench { l, hom });
    let with_bench = |f: fn(&Bench) -> Outcome| -> Outcome { bench.as_ref().map_err(|err| err.to_string()).and_then(f) };
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("harmonic-mean oracle", Box::new(c1_harmonic_mean)),
        ("p-harmonic oracle, two routes", Box::new(c2_p_harmonic_mean)),
        ("selfduality of the homogenized table", Box::new(move || with_bench(c3_selfduality))),
        ("dual cell formula", Box::new(move || with_bench(c4_dual_cell))),
        ("two-sided bounds", Box::new(move || with_bench(c5_bounds))),
        ("subdifferential averaging", Box::new(move || with_bench(c6_subdifferential))),
        ("zero-infimum certificate", Box::new(c7_certificate)),
        ("homogenization sweep", Box::new(c8_sweep)),
        ("projection bounds", Box::new(c9_brl)),
        ("graph convergence", Box::new(c10_graph)),
        ("Fitzpatrick reconstruction", Box::new(c11_fitzpatrick)),
        ("oscillation and Jensen lemmas", Box::new(c12_lemmas)),
        ("property suites", Box::new(c13_suites)),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let (status, detail) = match check() {
            Ok((true, d)) => ("PASS", d),
            Ok((false, d)) => ("FAIL", d),
            Err(err) => ("FAIL", format!("error: {err}")),
        };
        if status == "FAIL" {
            failed += 1;
        }
        println!("criterion {:>2} {status} [{name}] {detail} ({:.1} s)", k + 1, t.elapsed().as_secs_f64());
    }
    println!("acceptance: {} of {} criteria pass in {:.1} s", criteria.len() - failed, criteria.len(), start.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
