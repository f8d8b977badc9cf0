//! Nonlinear Poisson equation by damped Newton on a finite-volume mesh.

use super::fermi::{fd_half, fd_minus_half};
use super::materials::MaterialTable;
use super::mesh::{discretize_with, Mesh, Segment};
use super::{BandError, BandSolution, Result, SolverOptions, StackProblem, Statistics};
use crate::constants::{thermal_voltage, ELEMENTARY_CHARGE};
use crate::numerics::solve_tridiagonal;

/// Largest potential change applied in one Newton step, V.
const MAX_STEP: f64 = 1.0;
const MAX_HALVINGS: usize = 40;
/// Exponent clamp of the frozen-density update.
const MAX_EXPONENT: f64 = 50.0;

/// How the electron density responds to the potential.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Carriers<'a> {
    /// Local band statistics.
    Classical(Statistics),
    /// A given nodal density, rescaled by exp((φ − φ_ref)/V_t).
    Frozen {
        density: &'a [f64],
        reference: &'a [f64],
    },
}

#[derive(Debug, Clone)]
pub(crate) struct NewtonOutcome {
    pub phi: Vec<f64>,
    pub iterations: usize,
    pub update: f64,
    pub converged: bool,
    pub history: Vec<f64>,
}

/// Potential at the surface node that puts E_c − E_F at the barrier height.
pub(crate) fn surface_potential(mesh: &Mesh, barrier: f64) -> f64 {
    mesh.segments[0].band_offset - barrier
}

fn band_density(seg: &Segment, phi: f64, vt: f64, stats: Statistics) -> (f64, f64) {
    let eta = (phi - seg.band_offset) / vt;
    match stats {
        Statistics::FermiDirac => (
            seg.band_density * fd_half(eta),
            seg.band_density * fd_minus_half(eta) / vt,
        ),
        Statistics::Boltzmann => {
            let n = seg.band_density * eta.min(MAX_EXPONENT * 10.0).exp();
            (n, n / vt)
        }
    }
}

fn frozen(density: &[f64], reference: &[f64], i: usize, phi: f64, vt: f64) -> (f64, f64) {
    let n = density[i] * ((phi - reference[i]) / vt).clamp(-MAX_EXPONENT, MAX_EXPONENT).exp();
    (n, n / vt)
}

/// Electron density per node (cell average), m⁻³, and its φ-derivative
/// integrated over the cell, m⁻²·V⁻¹.
fn cell_charge(mesh: &Mesh, phi: &[f64], carriers: Carriers<'_>, i: usize) -> (f64, f64, f64) {
    let vt = thermal_voltage(mesh.temperature);
    let mut electrons = 0.0;
    let mut donors = 0.0;
    let mut slope = 0.0;
    let mut halves = [None, None];
    if i > 0 {
        halves[0] = Some(i - 1);
    }
    if i + 1 < mesh.len() {
        halves[1] = Some(i);
    }
    for s in halves.into_iter().flatten() {
        let seg = &mesh.segments[s];
        let w = 0.5 * mesh.spacing(s);
        let (n, dn) = match carriers {
            Carriers::Classical(stats) => band_density(seg, phi[i], vt, stats),
            Carriers::Frozen { density, reference } => frozen(density, reference, i, phi[i], vt),
        };
        electrons += w * n;
        slope += w * dn;
        donors += w * seg.net_doping;
    }
    (electrons, donors, slope)
}

pub(crate) fn node_density(mesh: &Mesh, phi: &[f64], carriers: Carriers<'_>) -> Vec<f64> {
    (0..mesh.len())
        .map(|i| cell_charge(mesh, phi, carriers, i).0 / mesh.volume(i))
        .collect()
}

struct Linearized {
    residual: Vec<f64>,
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
}

/// Residual of nodes 1..N (node 0 is fixed), C/m², with its tridiagonal
/// Jacobian.
fn linearize(mesh: &Mesh, phi: &[f64], carriers: Carriers<'_>) -> Linearized {
    let n = mesh.len();
    let m = n - 1;
    let mut out = Linearized {
        residual: vec![0.0; m],
        lower: vec![0.0; m],
        diag: vec![0.0; m],
        upper: vec![0.0; m],
    };
    for i in 1..n {
        let k = i - 1;
        let mut r = 0.0;
        let mut d = 0.0;
        let gl = mesh.segments[i - 1].permittivity / mesh.spacing(i - 1);
        r -= gl * (phi[i] - phi[i - 1]);
        d -= gl;
        if k > 0 {
            out.lower[k] = gl;
        }
        if i + 1 < n {
            let gr = mesh.segments[i].permittivity / mesh.spacing(i);
            r += gr * (phi[i + 1] - phi[i]);
            d -= gr;
            out.upper[k] = gr;
        }
        let (electrons, donors, slope) = cell_charge(mesh, phi, carriers, i);
        r += ELEMENTARY_CHARGE * (donors - electrons) + mesh.sheet_charge[i];
        d -= ELEMENTARY_CHARGE * slope;
        out.residual[k] = r;
        out.diag[k] = d;
    }
    out
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, x| a.max(x.abs()))
}

fn residual_norm(mesh: &Mesh, phi: &[f64], carriers: Carriers<'_>) -> f64 {
    max_abs(&linearize(mesh, phi, carriers).residual)
}

pub(crate) fn newton(
    mesh: &Mesh,
    carriers: Carriers<'_>,
    mut phi: Vec<f64>,
    opts: &SolverOptions,
) -> Result<NewtonOutcome> {
    let mut history = Vec::new();
    let mut update = f64::INFINITY;
    for iteration in 1..=opts.max_iterations {
        let lin = linearize(mesh, &phi, carriers);
        let norm = max_abs(&lin.residual);
        if !norm.is_finite() {
            return Err(BandError::NonFiniteResidual { iteration });
        }
        let rhs: Vec<f64> = lin.residual.iter().map(|r| -r).collect();
        let step = solve_tridiagonal(&lin.lower, &lin.diag, &lin.upper, &rhs)
            .map_err(|_| BandError::NonFiniteResidual { iteration })?;
        update = max_abs(&step);
        if !update.is_finite() {
            return Err(BandError::NonFiniteResidual { iteration });
        }
        let mut scale = if update > MAX_STEP { MAX_STEP / update } else { 1.0 };
        let mut trial = phi.clone();
        let mut accepted_norm = norm;
        for _ in 0..MAX_HALVINGS {
            for (t, (p, s)) in trial[1..].iter_mut().zip(phi[1..].iter().zip(&step)) {
                *t = p + scale * s;
            }
            let trial_norm = residual_norm(mesh, &trial, carriers);
            if trial_norm.is_finite() && (trial_norm < norm || update < opts.tolerance) {
                accepted_norm = trial_norm;
                break;
            }
            scale *= 0.5;
        }
        phi = trial;
        history.push(accepted_norm);
        if update < opts.tolerance {
            return Ok(NewtonOutcome {
                phi,
                iterations: iteration,
                update,
                converged: true,
                history,
            });
        }
    }
    Ok(NewtonOutcome {
        phi,
        iterations: opts.max_iterations,
        update,
        converged: false,
        history,
    })
}

pub(crate) fn assemble_solution(
    mesh: &Mesh,
    outcome: NewtonOutcome,
    density: Vec<f64>,
) -> BandSolution {
    let phi = outcome.phi;
    let ec = (0..mesh.len())
        .map(|i| mesh.node_segment(i).band_offset - phi[i])
        .collect();
    let sheet: f64 = density
        .iter()
        .enumerate()
        .map(|(i, n)| n * mesh.volume(i))
        .sum();
    BandSolution {
        z: mesh.z.iter().map(|z| z * 1e9).collect(),
        ec,
        potential: phi,
        electron_density: density.iter().map(|n| n * 1e-6).collect(),
        sheet_density: sheet * 1e-4,
        bound_energies: Vec::new(),
        wavefunctions: Vec::new(),
        converged: outcome.converged,
        iterations: outcome.iterations,
        residual: outcome.update,
        residual_history: outcome.history,
    }
}

pub(crate) fn classical(mesh: &Mesh, problem: &StackProblem, opts: &SolverOptions) -> Result<BandSolution> {
    let phi0 = surface_potential(mesh, problem.surface_barrier);
    let carriers = Carriers::Classical(problem.statistics);
    let outcome = newton(mesh, carriers, vec![phi0; mesh.len()], opts)?;
    let density = node_density(mesh, &outcome.phi, carriers);
    Ok(assemble_solution(mesh, outcome, density))
}

/// Classical equilibrium solve with the material table from
/// [`MaterialTable::load`] and default options.
pub fn solve_poisson_equilibrium(problem: &StackProblem) -> Result<BandSolution> {
    solve_poisson_equilibrium_with(problem, &MaterialTable::load()?, &SolverOptions::default())
}

pub fn solve_poisson_equilibrium_with(
    problem: &StackProblem,
    table: &MaterialTable,
    opts: &SolverOptions,
) -> Result<BandSolution> {
    let mesh = discretize_with(problem, table)?;
    classical(&mesh, problem, opts)
}
