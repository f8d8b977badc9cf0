//! Material parameter table.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::BandError;

/// Environment variable naming a material table that replaces the built-in one.
pub const MATERIALS_ENV: &str = "HEMTKIT_MATERIALS";

const DEFAULT_TABLE: &str = include_str!("../../data/materials.json");

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialParams {
    #[serde(rename = "bandgap_eV")]
    pub bandgap: f64,
    /// Conduction-band edge above that of GaN, eV.
    #[serde(rename = "conduction_band_offset_vs_GaN_eV")]
    pub band_offset: f64,
    pub relative_permittivity: f64,
    /// In units of the free-electron mass.
    #[serde(rename = "electron_effective_mass")]
    pub effective_mass: f64,
    /// Lumped polarization along +z (surface towards substrate), C/m².
    #[serde(rename = "net_polarization_C_m2")]
    pub polarization: f64,
}

impl MaterialParams {
    fn validate(&self, id: &str) -> Result<(), BandError> {
        let ok = self.bandgap > 0.0
            && self.relative_permittivity > 1.0
            && self.effective_mass > 0.0
            && self.band_offset.is_finite()
            && self.polarization.is_finite();
        if ok {
            Ok(())
        } else {
            Err(BandError::MaterialTable(format!("invalid parameters for {id}")))
        }
    }

    fn lerp(a: &Self, b: &Self, x: f64) -> Self {
        let l = |p: f64, q: f64| p + x * (q - p);
        Self {
            bandgap: l(a.bandgap, b.bandgap),
            band_offset: l(a.band_offset, b.band_offset),
            relative_permittivity: l(a.relative_permittivity, b.relative_permittivity),
            effective_mass: l(a.effective_mass, b.effective_mass),
            polarization: l(a.polarization, b.polarization),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaterialTable {
    materials: BTreeMap<String, MaterialParams>,
}

impl MaterialTable {
    /// The table shipped with the crate.
    pub fn builtin() -> Self {
        Self::from_json(DEFAULT_TABLE).expect("bundled material table is valid")
    }

    /// The table named by `HEMTKIT_MATERIALS`, or the built-in one.
    pub fn load() -> Result<Self, BandError> {
        match std::env::var_os(MATERIALS_ENV) {
            Some(path) => Self::from_path(Path::new(&path)),
            None => Ok(Self::builtin()),
        }
    }

    pub fn from_path(path: &Path) -> Result<Self, BandError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BandError::MaterialTable(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Parses a JSON object keyed by material id. Keys starting with `_` are
    /// comments.
    pub fn from_json(text: &str) -> Result<Self, BandError> {
        let raw: BTreeMap<String, serde_json::Value> =
            serde_json::from_str(text).map_err(|e| BandError::MaterialTable(e.to_string()))?;
        let mut materials = BTreeMap::new();
        for (id, value) in raw {
            if id.starts_with('_') {
                continue;
            }
            let p: MaterialParams = serde_json::from_value(value)
                .map_err(|e| BandError::MaterialTable(format!("{id}: {e}")))?;
            p.validate(&id)?;
            materials.insert(id, p);
        }
        for required in ["GaN", "AlN"] {
            if !materials.contains_key(required) {
                return Err(BandError::MaterialTable(format!("missing {required}")));
            }
        }
        Ok(Self { materials })
    }

    pub fn get(&self, id: &str) -> Option<&MaterialParams> {
        self.materials.get(id)
    }

    /// Parameters of a layer: `AlGaN` interpolates between GaN and AlN at Al
    /// fraction `x`; any other id is looked up directly.
    pub fn resolve(&self, material: &str, x: f64) -> Result<MaterialParams, BandError> {
        if material == "AlGaN" {
            return Ok(MaterialParams::lerp(&self.materials["GaN"], &self.materials["AlN"], x));
        }
        self.materials
            .get(material)
            .copied()
            .ok_or_else(|| BandError::UnknownMaterial(material.to_owned()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn algan_interpolates_linearly() {
        let t = MaterialTable::builtin();
        let gan = t.resolve("GaN", 0.0).unwrap();
        assert_eq!(gan.bandgap, 3.4);
        assert_eq!(gan.relative_permittivity, 8.9);
        assert_eq!(gan.effective_mass, 0.2);
        let a = t.resolve("AlGaN", 0.25).unwrap();
        assert!((a.bandgap - 4.1).abs() < 1e-12);
        assert!((a.band_offset - 0.63 * (a.bandgap - gan.bandgap)).abs() < 1e-12);
        assert!(a.polarization > gan.polarization);
        assert_eq!(t.resolve("AlGaN", 0.0).unwrap(), gan);
        assert!(matches!(t.resolve("InN", 0.0), Err(BandError::UnknownMaterial(_))));
    }

    #[test]
    fn table_rejects_bad_entries() {
        assert!(MaterialTable::from_json("{}").is_err());
        let bad = DEFAULT_TABLE.replace("\"relative_permittivity\": 8.9", "\"relative_permittivity\": 0.5");
        assert!(MaterialTable::from_json(&bad).is_err());
    }
}
