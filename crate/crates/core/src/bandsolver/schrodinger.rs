//! Effective-mass Schrödinger equation with hard walls at both ends.
//!
//! Finite differences with the BenDaniel–Duke kinetic term, symmetrized by the
//! control-volume widths so the eigenproblem is a symmetric tridiagonal one.
//! Eigenvalues come from Sturm-sequence bisection, eigenvectors from inverse
//! iteration.

use super::{BandError, Result};

/// ħ²/(2 m₀) in eV·nm².
pub const HBAR2_OVER_2M0: f64 = 0.038_099_821;

#[derive(Debug, Clone, PartialEq)]
pub struct Eigenpairs {
    /// Ascending, eV.
    pub energies: Vec<f64>,
    /// One full-grid wavefunction per energy, zero at both walls and
    /// normalized to Σ ψ² Δz = 1 with control-volume widths in nm.
    pub states: Vec<Vec<f64>>,
}

/// Symmetric tridiagonal operator on the interior nodes.
pub(crate) struct Hamiltonian {
    diag: Vec<f64>,
    off: Vec<f64>,
    /// sqrt of interior control-volume widths, nm^1/2.
    sqrt_volume: Vec<f64>,
}

impl Hamiltonian {
    /// `ec` per node (eV), `z` in nm, `segment_mass[i]` between nodes i and i+1.
    pub(crate) fn new(ec: &[f64], z: &[f64], segment_mass: &[f64]) -> Result<Self> {
        let n = z.len();
        if n < 3 || ec.len() != n || segment_mass.len() != n - 1 {
            return Err(BandError::InvalidProblem(
                "Schrödinger grid needs at least three nodes and matching profiles".into(),
            ));
        }
        let mut coupling = Vec::with_capacity(n - 1);
        for i in 0..n - 1 {
            let h = z[i + 1] - z[i];
            if !(h > 0.0) || !(segment_mass[i] > 0.0) {
                return Err(BandError::InvalidProblem(
                    "grid must increase and masses be positive".into(),
                ));
            }
            coupling.push(HBAR2_OVER_2M0 / (segment_mass[i] * h));
        }
        let interior = n - 2;
        let mut diag = Vec::with_capacity(interior);
        let mut sqrt_volume = Vec::with_capacity(interior);
        for i in 1..n - 1 {
            let v = 0.5 * (z[i + 1] - z[i - 1]);
            sqrt_volume.push(v.sqrt());
            diag.push((coupling[i - 1] + coupling[i]) / v + ec[i]);
        }
        let off = (1..n - 2)
            .map(|i| -coupling[i] / (sqrt_volume[i - 1] * sqrt_volume[i]))
            .collect();
        Ok(Self {
            diag,
            off,
            sqrt_volume,
        })
    }

    fn dim(&self) -> usize {
        self.diag.len()
    }

    /// Number of eigenvalues strictly below `x`.
    pub(crate) fn count_below(&self, x: f64) -> usize {
        let mut count = 0;
        let mut q = 1.0;
        for i in 0..self.dim() {
            let e2 = if i > 0 { self.off[i - 1] * self.off[i - 1] } else { 0.0 };
            q = self.diag[i] - x - if i > 0 { e2 / q } else { 0.0 };
            if q == 0.0 {
                q = -f64::EPSILON * (self.diag[i].abs() + x.abs()).max(f64::MIN_POSITIVE);
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    fn bounds(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..self.dim() {
            let r = if i > 0 { self.off[i - 1].abs() } else { 0.0 }
                + if i < self.off.len() { self.off[i].abs() } else { 0.0 };
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    fn eigenvalue(&self, index: usize, lo: f64, hi: f64) -> f64 {
        let (mut lo, mut hi) = (lo, hi);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) > index {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Inverse iteration at a shift just off `lambda`.
    fn eigenvector(&self, lambda: f64, scale: f64) -> Result<Vec<f64>> {
        let n = self.dim();
        let shift = lambda + 64.0 * f64::EPSILON * scale;
        let mut x: Vec<f64> = (0..n).map(|i| 1.0 + 0.37 * ((i as f64) * 1.618).sin()).collect();
        let tiny = 1e-300_f64.max(f64::EPSILON * scale * 1e-6);
        for _ in 0..4 {
            // Thomas algorithm on (A - shift I) with a pivot guard.
            let mut c = vec![0.0; n];
            let mut d = vec![0.0; n];
            let mut denom = self.diag[0] - shift;
            if denom.abs() < tiny {
                denom = tiny;
            }
            c[0] = if n > 1 { self.off[0] / denom } else { 0.0 };
            d[0] = x[0] / denom;
            for i in 1..n {
                denom = self.diag[i] - shift - self.off[i - 1] * c[i - 1];
                if denom.abs() < tiny {
                    denom = tiny.copysign(denom);
                }
                c[i] = if i + 1 < n { self.off[i] / denom } else { 0.0 };
                d[i] = (x[i] - self.off[i - 1] * d[i - 1]) / denom;
            }
            let mut y = vec![0.0; n];
            y[n - 1] = d[n - 1];
            for i in (0..n - 1).rev() {
                y[i] = d[i] - c[i] * y[i + 1];
            }
            let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            if !norm.is_finite() || norm == 0.0 {
                return Err(BandError::EigSolverFailure(format!(
                    "inverse iteration diverged at E = {lambda}"
                )));
            }
            x = y.into_iter().map(|v| v / norm).collect();
        }
        Ok(x)
    }

    /// The lowest `k` eigenpairs.
    pub(crate) fn lowest(&self, k: usize) -> Result<Eigenpairs> {
        let n = self.dim();
        if k == 0 || k > n {
            return Err(BandError::EigSolverFailure(format!(
                "requested {k} states from a {n}-node interior"
            )));
        }
        let (lo, hi) = self.bounds();
        let scale = (hi - lo).abs().max(1.0);
        let mut energies = Vec::with_capacity(k);
        let mut states = Vec::with_capacity(k);
        for j in 0..k {
            let e = self.eigenvalue(j, lo, hi);
            if !e.is_finite() {
                return Err(BandError::EigSolverFailure(format!("state {j} not finite")));
            }
            let y = self.eigenvector(e, scale)?;
            let mut psi = Vec::with_capacity(n + 2);
            psi.push(0.0);
            psi.extend(y.iter().zip(&self.sqrt_volume).map(|(v, s)| v / s));
            psi.push(0.0);
            let peak = psi.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
            if let Some(first) = psi.iter().find(|v| v.abs() > 0.01 * peak) {
                if *first < 0.0 {
                    psi.iter_mut().for_each(|v| *v = -*v);
                }
            }
            energies.push(e);
            states.push(psi);
        }
        Ok(Eigenpairs { energies, states })
    }
}

/// Lowest `k` bound states of a conduction-band profile.
///
/// `ec` in eV and `mass` (relative) are given per node, `z` in nm. The wave
/// function vanishes at the first and last node.
pub fn solve_schrodinger(ec: &[f64], z: &[f64], mass: &[f64], k: usize) -> Result<Eigenpairs> {
    if mass.len() != z.len() {
        return Err(BandError::InvalidProblem("mass profile length differs from grid".into()));
    }
    let segment_mass: Vec<f64> = mass.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    Hamiltonian::new(ec, z, &segment_mass)?.lowest(k)
}
