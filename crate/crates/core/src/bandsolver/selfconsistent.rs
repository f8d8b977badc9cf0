//! Coupled Schrödinger–Poisson solve and design sweeps.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::materials::MaterialTable;
use super::mesh::{discretize_with, Mesh};
use super::poisson::{self, assemble_solution, newton, node_density, Carriers};
use super::schrodinger::{Eigenpairs, Hamiltonian};
use super::{BandError, BandSolution, Result, SolverOptions, StackProblem};
use crate::constants::{BOLTZMANN, ELECTRON_MASS, ELEMENTARY_CHARGE, HBAR};

/// Subbands are kept up to this many kT above the Fermi level.
const STATE_WINDOW_KT: f64 = 10.0;

fn node_band_edge(mesh: &Mesh, phi: &[f64]) -> Vec<f64> {
    (0..mesh.len())
        .map(|i| mesh.cell_average(i, |s| s.band_offset) - phi[i])
        .collect()
}

fn hamiltonian(mesh: &Mesh, phi: &[f64]) -> Result<Hamiltonian> {
    let z_nm: Vec<f64> = mesh.z.iter().map(|z| z * 1e9).collect();
    let mass: Vec<f64> = mesh.segments.iter().map(|s| s.mass).collect();
    Hamiltonian::new(&node_band_edge(mesh, phi), &z_nm, &mass)
}

/// Electron density from occupied subbands (2D Fermi–Dirac), m⁻³.
fn subband_density(mesh: &Mesh, states: &Eigenpairs) -> Vec<f64> {
    let kt = BOLTZMANN * mesh.temperature;
    let kt_ev = kt / ELEMENTARY_CHARGE;
    let mut n = vec![0.0; mesh.len()];
    for (e, psi) in states.energies.iter().zip(&states.states) {
        let x = -e / kt_ev;
        let occupancy = if x > 30.0 { x } else { x.exp().ln_1p() };
        for (i, ni) in n.iter_mut().enumerate() {
            let mass = mesh.cell_average(i, |s| s.mass) * ELECTRON_MASS;
            let dos = mass * kt / (std::f64::consts::PI * HBAR * HBAR);
            // ψ² is per nm.
            *ni += psi[i] * psi[i] * 1e9 * dos * occupancy;
        }
    }
    n
}

fn sheet(mesh: &Mesh, n: &[f64]) -> f64 {
    n.iter().enumerate().map(|(i, v)| v * mesh.volume(i)).sum()
}

pub(crate) fn quantum(mesh: &Mesh, problem: &StackProblem, opts: &SolverOptions) -> Result<BandSolution> {
    let start = poisson::classical(mesh, problem, opts)?;
    let mut phi = start.potential.clone();
    let mut density: Vec<f64> = start.electron_density.iter().map(|n| n * 1e6).collect();
    let kt_ev = BOLTZMANN * mesh.temperature / ELEMENTARY_CHARGE;

    let h = hamiltonian(mesh, &phi)?;
    let states = h
        .count_below(STATE_WINDOW_KT * kt_ev)
        .clamp(1, opts.max_states.max(1));

    let mut previous_sheet = sheet(mesh, &density);
    let mut last = None;
    let mut history = Vec::new();
    for outer in 1..=opts.max_outer_iterations {
        let eig = hamiltonian(mesh, &phi)?.lowest(states)?;
        let target = subband_density(mesh, &eig);
        let mixed: Vec<f64> = density
            .iter()
            .zip(&target)
            .map(|(old, new)| old + opts.mixing * (new - old))
            .collect();
        let carriers = Carriers::Frozen {
            density: &mixed,
            reference: &phi,
        };
        let outcome = newton(mesh, carriers, phi.clone(), opts)?;
        if !outcome.converged {
            let mut s = assemble_solution(mesh, outcome, node_density(mesh, &phi, carriers));
            s.iterations = outer;
            s.converged = false;
            return Ok(s);
        }
        density = node_density(mesh, &outcome.phi, carriers);
        phi = outcome.phi.clone();
        let ns = sheet(mesh, &density);
        let change = (ns - previous_sheet).abs() / previous_sheet.abs().max(f64::MIN_POSITIVE);
        history.push(change);
        previous_sheet = ns;
        let done = change < opts.sheet_tolerance;
        last = Some((outcome, eig, outer));
        if done {
            break;
        }
    }
    let (outcome, _, outer) = last.ok_or_else(|| {
        BandError::InvalidProblem("at least one outer iteration is required".into())
    })?;
    let converged = history.last().is_some_and(|c| *c < opts.sheet_tolerance);
    let residual = history.last().copied().unwrap_or(f64::INFINITY);
    // States of the final potential.
    let eig = hamiltonian(mesh, &phi)?.lowest(states)?;
    let mut s = assemble_solution(mesh, outcome, density);
    s.bound_energies = eig.energies;
    s.wavefunctions = eig.states;
    s.converged = converged;
    s.iterations = outer;
    s.residual = residual;
    s.residual_history = history;
    Ok(s)
}

/// Equilibrium solve with the material table from [`MaterialTable::load`]
/// and default options. `quantum` couples the Schrödinger equation;
/// otherwise the result is the classical Poisson solution.
pub fn solve_self_consistent(problem: &StackProblem, quantum: bool) -> Result<BandSolution> {
    solve_self_consistent_with(problem, quantum, &MaterialTable::load()?, &SolverOptions::default())
}

pub fn solve_self_consistent_with(
    problem: &StackProblem,
    quantum: bool,
    table: &MaterialTable,
    opts: &SolverOptions,
) -> Result<BandSolution> {
    let mesh = discretize_with(problem, table)?;
    if quantum {
        self::quantum(&mesh, problem, opts)
    } else {
        poisson::classical(&mesh, problem, opts)
    }
}

/// Parameter varied by [`sweep_design`]; it applies to the barrier, the first
/// layer that is not GaN (or the first layer if all are).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepAxis {
    /// nm.
    BarrierThickness,
    AlFraction,
    /// Donor doping, cm⁻³.
    Doping,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: f64,
    /// cm⁻²; absent when the point failed.
    pub sheet_density: Option<f64>,
    pub converged: bool,
    pub error: Option<String>,
}

fn barrier_layer(problem: &StackProblem) -> usize {
    problem
        .layers
        .iter()
        .position(|l| l.material != "GaN")
        .unwrap_or(0)
}

/// Varies one barrier parameter and reports the sheet density at each value,
/// in input order. Points that fail carry the error instead of a density.
pub fn sweep_design(
    problem: &StackProblem,
    axis: SweepAxis,
    values: &[f64],
    quantum: bool,
    table: &MaterialTable,
    opts: &SolverOptions,
) -> Result<Vec<SweepPoint>> {
    if values.len() < 2 {
        return Err(BandError::InvalidProblem("a sweep needs at least two values".into()));
    }
    let target = barrier_layer(problem);
    Ok(values
        .par_iter()
        .map(|&value| {
            let mut p = problem.clone();
            let layer = &mut p.layers[target];
            match axis {
                SweepAxis::BarrierThickness => layer.thickness = value,
                SweepAxis::AlFraction => layer.al_fraction = value,
                SweepAxis::Doping => layer.donor_doping = value,
            }
            match solve_self_consistent_with(&p, quantum, table, opts) {
                Ok(s) => SweepPoint {
                    value,
                    sheet_density: Some(s.sheet_density),
                    converged: s.converged,
                    error: (!s.converged).then(|| {
                        BandError::NotConverged {
                            iterations: s.iterations,
                            residual: s.residual,
                        }
                        .to_string()
                    }),
                },
                Err(e) => SweepPoint {
                    value,
                    sheet_density: None,
                    converged: false,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect())
}
