use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::grid::{CellGrid, CellProjector, Slot, SlotKind};
use crate::error::{Error, Result};
use crate::fields::{OmegaLagrangian, RegionMap};
use crate::integrand::{ConvexIntegrand, ConvexPotential, PotentialIntegrand};
use crate::splitting::{admm, AdmmOptions, AdmmStart, BlockObjective};

/// Stopping rule of the cell solver.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellOptions {
    /// Required KKT residual.
    pub tol: f64,
    pub max_iter: usize,
    pub rho: f64,
}

impl CellOptions {
    pub fn with_tol(tol: f64) -> Self {
        CellOptions {
            tol,
            max_iter: 20_000,
            rho: 1.0,
        }
    }

    /// `1e-6` for quadratic Lagrangians, `1e-4` otherwise.
    pub fn for_lagrangian(l: &OmegaLagrangian) -> Self {
        let quadratic = l.bounds.as_ref().map_or(false, |b| b.p == 2.0);
        Self::with_tol(if quadratic { 1e-6 } else { 1e-4 })
    }

    fn admm(&self) -> AdmmOptions {
        AdmmOptions {
            rho: self.rho,
            max_iter: self.max_iter,
            tol: self.tol,
            adapt_every: 10,
        }
    }
}

impl Default for CellOptions {
    fn default() -> Self {
        Self::with_tol(1e-6)
    }
}

/// Periodic correctors: zero-mean `phi` on the nodes and zero-mean
/// divergence-free `g` on the elements (one array per component).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CorrectorPair {
    pub phi: Vec<f64>,
    pub g: Vec<Vec<f64>>,
}

/// Result of a cell minimization at `(a, b)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CellSolution {
    pub grid: CellGrid,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub value: f64,
    pub corrector: CorrectorPair,
    pub kkt_residual: f64,
    pub iterations: usize,
    /// Element blocks `(a + grad phi, b + g)` of the feasible iterate.
    pub fields: Vec<f64>,
    /// Region index of every element.
    pub regions: Vec<usize>,
    #[serde(skip)]
    pub(crate) warm: Option<AdmmStart>,
}

/// Element-to-region map of a cell grid.
pub fn element_regions(regions: &RegionMap, grid: &CellGrid) -> Vec<usize> {
    (0..grid.elements()).map(|e| regions.locate(&grid.centre(e)).unwrap_or(0)).collect()
}

pub(crate) struct SlotRun {
    pub value: f64,
    pub x: Vec<f64>,
    pub kkt: f64,
    pub iterations: usize,
    pub history: Vec<f64>,
    pub converged: bool,
    pub warm: AdmmStart,
}

/// Minimize the cell average of the region integrands over the product of
/// the slot spaces.
pub(crate) fn solve_slots(
    integrands: &[Arc<dyn ConvexIntegrand>],
    elements: &[usize],
    grid: &CellGrid,
    slots: Vec<Slot>,
    opts: &CellOptions,
    warm: Option<AdmmStart>,
) -> SlotRun {
    let proj = CellProjector::new(grid, slots);
    let n_el = grid.elements();
    let f = BlockObjective::new(
        proj.block(),
        elements.iter().map(|&r| integrands[r].clone()).collect(),
        vec![1.0 / n_el as f64; n_el],
    );
    let r = admm(&f, &proj, &opts.admm(), warm, None);
    SlotRun {
        value: f.value(&r.x),
        kkt: r.kkt_residual(),
        iterations: r.iterations,
        converged: r.converged,
        warm: AdmmStart {
            x: r.x.clone(),
            u: r.u.clone(),
            rho: r.rho,
        },
        history: r.history,
        x: r.x,
    }
}

fn stalled(point: Vec<f64>, run: SlotRun) -> Error {
    Error::SolverStalled {
        point,
        iterations: run.iterations,
        residual: run.kkt,
        history: run.history,
    }
}

/// `L_hom(a, b) = min (1/|Q|) int_Q L(x, a + grad phi, b + g)` over periodic
/// zero-mean `phi` and periodic zero-mean divergence-free `g`.
pub fn solve_cell(l: &OmegaLagrangian, a: &[f64], b: &[f64], grid: &CellGrid, opts: &CellOptions) -> Result<CellSolution> {
    solve_cell_warm(l, a, b, grid, opts, None)
}

pub(crate) fn solve_cell_warm(
    l: &OmegaLagrangian,
    a: &[f64],
    b: &[f64],
    grid: &CellGrid,
    opts: &CellOptions,
    warm: Option<AdmmStart>,
) -> Result<CellSolution> {
    check_dims(l.dim, grid, a, b)?;
    let elements = element_regions(&l.regions, grid);
    let slots = vec![
        Slot {
            kind: SlotKind::Gradient,
            mean: a.to_vec(),
        },
        Slot {
            kind: SlotKind::Solenoidal,
            mean: b.to_vec(),
        },
    ];
    let run = solve_slots(&l.integrands, &elements, grid, slots.clone(), opts, warm);
    if !run.converged {
        let mut point = a.to_vec();
        point.extend_from_slice(b);
        return Err(stalled(point, run));
    }
    let proj = CellProjector::new(grid, slots);
    let ga = proj.gather(&run.x, 0);
    let phi = proj.fft.potential(&ga);
    let g = proj.gather(&run.x, 1).into_iter().zip(b).map(|(c, m)| c.into_iter().map(|v| v - m).collect()).collect();
    Ok(CellSolution {
        grid: *grid,
        a: a.to_vec(),
        b: b.to_vec(),
        value: run.value,
        corrector: CorrectorPair { phi, g },
        kkt_residual: run.kkt,
        iterations: run.iterations,
        fields: run.x,
        regions: elements,
        warm: Some(run.warm),
    })
}

fn check_dims(dim: usize, grid: &CellGrid, a: &[f64], b: &[f64]) -> Result<()> {
    if grid.dim != dim || a.len() != dim || b.len() != dim {
        return Err(Error::GridMismatch(format!(
            "cell grid of dimension {}, Lagrangian of dimension {dim}, point lengths {} and {}",
            grid.dim,
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

/// The conjugate cell problem
/// `min (1/|Q|) int_Q L*(x, a* + g, b* + grad phi)`, which equals
/// `L_hom*(a*, b*)`. `conj` holds the integrands `(p, q) -> L*(x, p, q)`.
pub fn solve_dual_cell(conj: &OmegaLagrangian, a_star: &[f64], b_star: &[f64], grid: &CellGrid, opts: &CellOptions) -> Result<f64> {
    solve_dual_cell_warm(conj, a_star, b_star, grid, opts, None).map(|(v, _)| v)
}

pub(crate) fn solve_dual_cell_warm(
    conj: &OmegaLagrangian,
    a_star: &[f64],
    b_star: &[f64],
    grid: &CellGrid,
    opts: &CellOptions,
    warm: Option<AdmmStart>,
) -> Result<(f64, AdmmStart)> {
    check_dims(conj.dim, grid, a_star, b_star)?;
    let elements = element_regions(&conj.regions, grid);
    let slots = vec![
        Slot {
            kind: SlotKind::Solenoidal,
            mean: a_star.to_vec(),
        },
        Slot {
            kind: SlotKind::Gradient,
            mean: b_star.to_vec(),
        },
    ];
    let run = solve_slots(&conj.integrands, &elements, grid, slots, opts, warm);
    if !run.converged {
        let mut point = a_star.to_vec();
        point.extend_from_slice(b_star);
        return Err(stalled(point, run));
    }
    Ok((run.value, run.warm))
}

/// Minimizer of the potential cell problem.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PsiSolution {
    pub a: Vec<f64>,
    /// `psi_hom(a)`.
    pub value: f64,
    /// Zero-mean periodic corrector.
    pub phi: Vec<f64>,
    /// Cell average of `grad phi_x(a + grad corrector)`, an element of
    /// `d psi_hom(a)`.
    pub mean_flux: Vec<f64>,
    pub kkt_residual: f64,
    pub iterations: usize,
}

/// `psi_hom(a) = min (1/|Q|) int_Q phi(x, a + grad u)` over periodic `u`.
pub fn psi_hom(regions: &RegionMap, potentials: &[ConvexPotential], a: &[f64], grid: &CellGrid, opts: &CellOptions) -> Result<PsiSolution> {
    if potentials.len() != regions.len() {
        return Err(Error::invalid("one potential per region is required"));
    }
    check_dims(regions.dim, grid, a, a)?;
    let dim = regions.dim;
    let integrands: Vec<Arc<dyn ConvexIntegrand>> =
        potentials.iter().map(|p| Arc::new(PotentialIntegrand(p.clone(), dim)) as Arc<dyn ConvexIntegrand>).collect();
    let elements = element_regions(regions, grid);
    let slots = vec![Slot {
        kind: SlotKind::Gradient,
        mean: a.to_vec(),
    }];
    let run = solve_slots(&integrands, &elements, grid, slots.clone(), opts, None);
    if !run.converged {
        return Err(stalled(a.to_vec(), run));
    }
    let proj = CellProjector::new(grid, slots);
    let phi = proj.fft.potential(&proj.gather(&run.x, 0));
    let mut flux = vec![0.0; dim];
    let mut g = vec![0.0; dim];
    for (z, &r) in run.x.chunks(dim).zip(&elements) {
        potentials[r].gradient(z, &mut g);
        flux.iter_mut().zip(&g).for_each(|(f, v)| *f += v);
    }
    let n_el = grid.elements() as f64;
    flux.iter_mut().for_each(|f| *f /= n_el);
    Ok(PsiSolution {
        a: a.to_vec(),
        value: run.value,
        phi,
        mean_flux: flux,
        kkt_residual: run.kkt,
        iterations: run.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::potential_lagrangian;

    fn two_phase(p: f64) -> (RegionMap, Vec<ConvexPotential>) {
        (RegionMap::halves(1, 0), vec![ConvexPotential::power(1.0, p).unwrap(), ConvexPotential::power(4.0, p).unwrap()])
    }

    fn lagrangian(p: f64) -> OmegaLagrangian {
        let (r, phis) = two_phase(p);
        potential_lagrangian(r, phis.into_iter().map(|f| (f, None)).collect(), None, 8.0).unwrap()
    }

    #[test]
    fn harmonic_mean_energy() {
        let l = lagrangian(2.0);
        let grid = CellGrid::new(1, 256).unwrap();
        let s = solve_cell(&l, &[1.0], &[0.0], &grid, &CellOptions::default()).unwrap();
        // a(x)(1 + phi') = 1.6, energy 1.6 / 2
        assert!((s.value - 0.8).abs() < 1e-4, "{}", s.value);
        let on = solve_cell(&l, &[1.0], &[1.6], &grid, &CellOptions::default()).unwrap();
        assert!((on.value - 1.6).abs() < 1e-4, "{}", on.value);
        assert!(s.corrector.phi.iter().sum::<f64>().abs() < 1e-9);
        assert!(s.kkt_residual <= 1e-6);
    }

    #[test]
    fn constant_coefficient_has_no_corrector() {
        let l = potential_lagrangian(RegionMap::whole(2), vec![(ConvexPotential::power(1.0, 2.0).unwrap(), None)], None, 8.0).unwrap();
        let grid = CellGrid::new(2, 8).unwrap();
        let s = solve_cell(&l, &[0.3, -1.0], &[0.5, 0.25], &grid, &CellOptions::default()).unwrap();
        assert!((s.value - l.mean_value(&[0.3, -1.0], &[0.5, 0.25])).abs() < 1e-10);
    }

    #[test]
    fn psi_two_phase() {
        let grid = CellGrid::new(1, 64).unwrap();
        let (r, phis) = two_phase(2.0);
        let s = psi_hom(&r, &phis, &[1.0], &grid, &CellOptions::default()).unwrap();
        assert!((s.value - 0.8).abs() < 1e-4 && (s.mean_flux[0] - 1.6).abs() < 1e-4, "{s:?}");
        let (r, phis) = two_phase(3.0);
        let s = psi_hom(&r, &phis, &[1.0], &grid, &CellOptions::with_tol(1e-4)).unwrap();
        // p-harmonic mean (mean a^(-1/2))^(-2) = 16/9, psi = a_hom / 3
        assert!((s.value - 16.0 / 27.0).abs() < 1e-3, "{}", s.value);
        assert!((s.mean_flux[0] - 16.0 / 9.0).abs() < 1e-2, "{:?}", s.mean_flux);
    }

    #[test]
    fn dual_cell_two_phase() {
        let l = lagrangian(2.0);
        let c = l.conjugate_lagrangian().unwrap();
        let grid = CellGrid::new(1, 64).unwrap();
        // L_hom(a, b) = 0.8 a^2 + b^2 / 3.2 and L_hom* = p^2 / 3.2 + 0.8 q^2
        let v = solve_dual_cell(&c, &[1.6], &[1.0], &grid, &CellOptions::default()).unwrap();
        assert!((v - 1.6).abs() < 1e-4, "{v}");
    }
}
