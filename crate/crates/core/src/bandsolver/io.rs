//! Stack files in, band profiles and summaries out.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use super::{BandError, BandSolution, Result, StackProblem};

impl StackProblem {
    pub fn from_json(text: &str) -> Result<Self> {
        let p: Self = serde_json::from_str(text).map_err(|e| BandError::InvalidProblem(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BandError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("stack serializes");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandSummary {
    pub ns_cm2: f64,
    pub converged: bool,
    pub iterations: usize,
    #[serde(rename = "bound_energies_eV")]
    pub bound_energies: Vec<f64>,
}

impl BandSolution {
    pub fn summary(&self) -> BandSummary {
        BandSummary {
            ns_cm2: self.sheet_density,
            converged: self.converged,
            iterations: self.iterations,
            bound_energies: self.bound_energies.clone(),
        }
    }

    /// `z_nm,ec_eV,n_cm3` rows, shortest round-trip number format.
    pub fn write_profile_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| BandError::Io(e.to_string());
        w.write_record(["z_nm", "ec_eV", "n_cm3"]).map_err(io)?;
        for i in 0..self.z.len() {
            w.write_record([
                format!("{:?}", self.z[i]),
                format!("{:?}", self.ec[i]),
                format!("{:?}", self.electron_density[i]),
            ])
            .map_err(io)?;
        }
        w.flush().map_err(|e| BandError::Io(e.to_string()))
    }

    pub fn summary_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.summary()).expect("summary serializes");
        s.push('\n');
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bandsolver::Statistics;

    #[test]
    fn stack_round_trip() {
        let text = r#"{
            "surface_barrier_eV": 0.9,
            "temperature_K": 300,
            "grid_step_nm": 0.5,
            "layers": [
                {"material": "AlGaN", "thickness_nm": 20, "x": 0.3},
                {"material": "GaN", "thickness_nm": 300, "nd_cm3": 1e15}
            ]
        }"#;
        let p = StackProblem::from_json(text).unwrap();
        assert_eq!(p.statistics, Statistics::FermiDirac);
        assert_eq!(p.layers[1].donor_doping, 1e15);
        assert_eq!(StackProblem::from_json(&p.to_json()).unwrap(), p);
        assert!(StackProblem::from_json(r#"{"surface_barrier_eV":1,"temperature_K":300,"grid_step_nm":0.5,"layers":[]}"#).is_err());
    }

    #[test]
    fn profile_csv_layout() {
        let s = BandSolution {
            z: vec![0.0, 0.5],
            ec: vec![1.0, 0.9],
            potential: vec![0.0, 0.1],
            electron_density: vec![0.0, 1e18],
            sheet_density: 1.0,
            bound_energies: vec![-0.1],
            wavefunctions: vec![],
            converged: true,
            iterations: 3,
            residual: 0.0,
            residual_history: vec![],
        };
        let mut buf = Vec::new();
        s.write_profile_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "z_nm,ec_eV,n_cm3\n0.0,1.0,0.0\n0.5,0.9,1e18\n");
        let v: serde_json::Value = serde_json::from_str(&s.summary_json()).unwrap();
        assert_eq!(v["bound_energies_eV"][0], -0.1);
        assert_eq!(v["converged"], true);
    }
}
