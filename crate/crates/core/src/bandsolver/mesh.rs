//! Layer stack to finite-volume mesh.

use super::fermi::effective_dos;
use super::materials::MaterialTable;
use super::{BandError, Result, StackProblem};
use crate::constants::VACUUM_PERMITTIVITY;

/// Uniform material between two neighbouring nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub layer: usize,
    /// Absolute permittivity, F/m.
    pub permittivity: f64,
    /// Relative effective mass.
    pub mass: f64,
    /// Conduction-band offset relative to GaN, eV.
    pub band_offset: f64,
    /// Net ionized doping N_D − N_A, m⁻³.
    pub net_doping: f64,
    /// Effective density of states, m⁻³.
    pub band_density: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    /// Node positions, m. Layer boundaries fall exactly on nodes.
    pub z: Vec<f64>,
    /// `segments[i]` spans `z[i]..z[i + 1]`.
    pub segments: Vec<Segment>,
    /// Fixed polarization sheet charge at each node, C/m².
    pub sheet_charge: Vec<f64>,
    /// Node indices of internal layer boundaries.
    pub interfaces: Vec<usize>,
    pub temperature: f64,
}

impl Mesh {
    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    pub fn spacing(&self, seg: usize) -> f64 {
        self.z[seg + 1] - self.z[seg]
    }

    /// Control-volume width of node `i`, m.
    pub fn volume(&self, i: usize) -> f64 {
        let left = if i > 0 { self.spacing(i - 1) } else { 0.0 };
        let right = if i + 1 < self.len() { self.spacing(i) } else { 0.0 };
        0.5 * (left + right)
    }

    /// The segment whose material defines the band edge reported at node `i`:
    /// the one below it, or the last one at the back contact.
    pub fn node_segment(&self, i: usize) -> &Segment {
        &self.segments[i.min(self.segments.len() - 1)]
    }

    /// Volume-weighted average of a per-segment quantity over node `i`'s cell.
    pub fn cell_average(&self, i: usize, f: impl Fn(&Segment) -> f64) -> f64 {
        let mut acc = 0.0;
        let mut w = 0.0;
        if i > 0 {
            let h = self.spacing(i - 1);
            acc += h * f(&self.segments[i - 1]);
            w += h;
        }
        if i + 1 < self.len() {
            let h = self.spacing(i);
            acc += h * f(&self.segments[i]);
            w += h;
        }
        acc / w
    }
}

/// Discretizes with the material table from [`MaterialTable::load`].
pub fn discretize(problem: &StackProblem) -> Result<Mesh> {
    discretize_with(problem, &MaterialTable::load()?)
}

pub fn discretize_with(problem: &StackProblem, table: &MaterialTable) -> Result<Mesh> {
    problem.validate()?;
    let mut z = vec![0.0];
    let mut segments = Vec::new();
    let mut interfaces = Vec::new();
    let mut polarization = Vec::new();
    let mut top_nm = 0.0;
    for (k, layer) in problem.layers.iter().enumerate() {
        let m = table.resolve(&layer.material, layer.al_fraction)?;
        let cells = (layer.thickness / problem.grid_step - 1e-9).ceil().max(1.0) as usize;
        let h = layer.thickness / cells as f64;
        let seg = Segment {
            layer: k,
            permittivity: m.relative_permittivity * VACUUM_PERMITTIVITY,
            mass: m.effective_mass,
            band_offset: m.band_offset,
            net_doping: (layer.donor_doping - layer.acceptor_doping) * 1e6,
            band_density: effective_dos(m.effective_mass, problem.temperature),
        };
        if k > 0 {
            interfaces.push(z.len() - 1);
        }
        for c in 1..=cells {
            let pos = if c == cells {
                top_nm + layer.thickness
            } else {
                top_nm + c as f64 * h
            };
            z.push(pos * 1e-9);
            segments.push(seg);
        }
        top_nm += layer.thickness;
        polarization.push(m.polarization);
    }
    if z.len() < 3 {
        return Err(BandError::InvalidProblem("fewer than three nodes".into()));
    }
    // Bound charge from the polarization step along +z: σ = P(above) − P(below).
    let mut sheet_charge = vec![0.0; z.len()];
    for (k, &node) in interfaces.iter().enumerate() {
        sheet_charge[node] = polarization[k] - polarization[k + 1];
    }
    Ok(Mesh {
        z,
        segments,
        sheet_charge,
        interfaces,
        temperature: problem.temperature,
    })
}
