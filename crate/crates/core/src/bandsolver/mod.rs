//! One-dimensional equilibrium band solver for nitride heterostructures.
//!
//! Nonlinear Poisson with polarization sheet charges at layer interfaces,
//! optionally coupled to the effective-mass Schrödinger equation. The Fermi
//! level is the energy zero; z runs from the surface (gate side) into the
//! substrate.

pub mod fermi;
pub mod io;
pub mod materials;
pub mod mesh;
pub mod poisson;
pub mod schrodinger;
pub mod selfconsistent;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use materials::{MaterialParams, MaterialTable, MATERIALS_ENV};
pub use mesh::{discretize, discretize_with, Mesh};
pub use poisson::{solve_poisson_equilibrium, solve_poisson_equilibrium_with};
pub use schrodinger::{solve_schrodinger, Eigenpairs};
pub use selfconsistent::{
    solve_self_consistent, solve_self_consistent_with, sweep_design, SweepAxis, SweepPoint,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BandError {
    #[error("invalid stack: {0}")]
    InvalidProblem(String),
    #[error("grid step {step_nm} nm is too coarse for the {thickness_nm} nm layer {layer} (need at most a quarter of it)")]
    GridTooCoarse {
        layer: usize,
        thickness_nm: f64,
        step_nm: f64,
    },
    #[error("unknown material {0}")]
    UnknownMaterial(String),
    #[error("material table: {0}")]
    MaterialTable(String),
    #[error("not converged after {iterations} iterations (last update {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("residual became non-finite at iteration {iteration}")]
    NonFiniteResidual { iteration: usize },
    #[error("eigen solver failure: {0}")]
    EigSolverFailure(String),
    #[error("i/o: {0}")]
    Io(String),
}

impl BandError {
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Self::NotConverged { .. } | Self::NonFiniteResidual { .. } | Self::EigSolverFailure(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, BandError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Statistics {
    #[default]
    #[serde(rename = "fermi")]
    FermiDirac,
    #[serde(rename = "boltzmann")]
    Boltzmann,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub material: String,
    #[serde(rename = "thickness_nm")]
    pub thickness: f64,
    #[serde(rename = "x", default)]
    pub al_fraction: f64,
    /// cm⁻³.
    #[serde(rename = "nd_cm3", default)]
    pub donor_doping: f64,
    /// cm⁻³.
    #[serde(rename = "na_cm3", default)]
    pub acceptor_doping: f64,
}

impl LayerSpec {
    pub fn gan(thickness: f64) -> Self {
        Self {
            material: "GaN".into(),
            thickness,
            al_fraction: 0.0,
            donor_doping: 0.0,
            acceptor_doping: 0.0,
        }
    }

    pub fn algan(thickness: f64, al_fraction: f64) -> Self {
        Self {
            material: "AlGaN".into(),
            al_fraction,
            ..Self::gan(thickness)
        }
    }

    pub fn with_donors(mut self, nd_cm3: f64) -> Self {
        self.donor_doping = nd_cm3;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackProblem {
    /// Surface first.
    pub layers: Vec<LayerSpec>,
    /// E_c − E_F at z = 0, eV.
    #[serde(rename = "surface_barrier_eV")]
    pub surface_barrier: f64,
    #[serde(rename = "temperature_K")]
    pub temperature: f64,
    #[serde(rename = "grid_step_nm")]
    pub grid_step: f64,
    #[serde(default)]
    pub statistics: Statistics,
}

impl StackProblem {
    /// 25 nm Al0.25Ga0.75N on 500 nm GaN, 1 eV surface barrier, 300 K.
    pub fn default_stack() -> Self {
        Self {
            layers: vec![LayerSpec::algan(25.0, 0.25), LayerSpec::gan(500.0)],
            surface_barrier: 1.0,
            temperature: 300.0,
            grid_step: 0.5,
            statistics: Statistics::FermiDirac,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(BandError::InvalidProblem(m));
        if self.layers.is_empty() {
            return bad("no layers".into());
        }
        if !(self.temperature > 0.0) || !self.surface_barrier.is_finite() {
            return bad("temperature must be positive and the barrier finite".into());
        }
        if !(self.grid_step > 0.0) {
            return bad("grid step must be positive".into());
        }
        for (i, l) in self.layers.iter().enumerate() {
            if !(l.thickness > 0.0) {
                return bad(format!("layer {i}: thickness must be positive"));
            }
            if !(0.0..=1.0).contains(&l.al_fraction) {
                return bad(format!("layer {i}: Al fraction outside [0, 1]"));
            }
            if l.material == "GaN" && l.al_fraction != 0.0 {
                return bad(format!("layer {i}: GaN with non-zero Al fraction"));
            }
            if !(l.donor_doping >= 0.0) || !(l.acceptor_doping >= 0.0) {
                return bad(format!("layer {i}: doping must be non-negative"));
            }
            if self.grid_step > l.thickness / 4.0 {
                return Err(BandError::GridTooCoarse {
                    layer: i,
                    thickness_nm: l.thickness,
                    step_nm: self.grid_step,
                });
            }
        }
        Ok(())
    }
}

/// Iteration limits and tolerances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Newton stops when the largest potential update falls below this, V.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Density under-relaxation of the Schrödinger–Poisson loop.
    pub mixing: f64,
    /// Relative sheet-density change that ends the coupled loop.
    pub sheet_tolerance: f64,
    pub max_outer_iterations: usize,
    /// Upper bound on the number of subbands kept.
    pub max_states: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_iterations: 200,
            mixing: 0.3,
            sheet_tolerance: 1e-6,
            max_outer_iterations: 300,
            max_states: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandSolution {
    pub z: Vec<f64>,
    /// Conduction-band edge, eV. Interface nodes carry the value of the layer
    /// below the interface.
    pub ec: Vec<f64>,
    /// Electrostatic potential, V.
    pub potential: Vec<f64>,
    /// Control-volume averaged electron density, cm⁻³.
    pub electron_density: Vec<f64>,
    /// cm⁻².
    pub sheet_density: f64,
    /// Subband energies, eV (empty for classical solves).
    pub bound_energies: Vec<f64>,
    /// Subband wavefunctions on the grid, nm^-1/2 (empty for classical solves).
    pub wavefunctions: Vec<Vec<f64>>,
    pub converged: bool,
    pub iterations: usize,
    /// Largest potential update of the last iteration, V.
    pub residual: f64,
    /// Residual norm after every accepted Newton step of the final solve.
    pub residual_history: Vec<f64>,
}

impl BandSolution {
    /// `Ok` when converged, otherwise the [`BandError::NotConverged`] this
    /// best iterate stands for.
    pub fn require_converged(&self) -> Result<&Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(BandError::NotConverged {
                iterations: self.iterations,
                residual: self.residual,
            })
        }
    }
}
