//! Sweep data model and CSV ingestion.
//!
//! Sweep files are long-format CSV tables: one row per sample, with the swept
//! voltage in the first column, the held voltage in the second and the
//! response last. Rows are grouped by the held voltage into curves.
//!
//! | kind     | header                |
//! |----------|-----------------------|
//! | transfer | `vgs_V,vds_V,id_A`    |
//! | output   | `vds_V,vgs_V,id_A`    |
//! | cv       | `vgs_V,c_F`           |
//!
//! Everything is stored in SI units (V, A, F).

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::interp_linear;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeasurementError {
    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
    #[error("malformed CSV: {0}")]
    Csv(String),
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("non-numeric cell in column `{column}` at data row {row}")]
    NonNumericCell { row: usize, column: String },
    #[error("sweep file contains no data rows")]
    EmptyFamily,
    #[error("file layout does not match kind `{expected}` (found header `{found}`)")]
    InconsistentKind { expected: String, found: String },
    #[error("invalid curve: {0}")]
    InvalidCurve(String),
    #[error("curves have disjoint voltage ranges")]
    NoOverlap,
    #[error("invalid geometry: width {width_um} um, length {length_um} um")]
    InvalidGeometry { width_um: f64, length_um: f64 },
    #[error("invalid metadata: {0}")]
    Metadata(String),
}

pub type Result<T> = std::result::Result<T, MeasurementError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CurveKind {
    Transfer,
    Output,
    Cv,
}

impl CurveKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CurveKind::Transfer => "transfer",
            CurveKind::Output => "output",
            CurveKind::Cv => "cv",
        }
    }

    /// Column names in file order: swept, held (if any), response.
    pub fn columns(self) -> &'static [&'static str] {
        match self {
            CurveKind::Transfer => &["vgs_V", "vds_V", "id_A"],
            CurveKind::Output => &["vds_V", "vgs_V", "id_A"],
            CurveKind::Cv => &["vgs_V", "c_F"],
        }
    }

    pub fn family_variable(self) -> FamilyVariable {
        match self {
            CurveKind::Transfer | CurveKind::Cv => FamilyVariable::FixedVds,
            CurveKind::Output => FamilyVariable::FixedVgs,
        }
    }
}

impl std::fmt::Display for CurveKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One measured curve: swept voltage grid, response samples and the held bias.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepCurve {
    x: Vec<f64>,
    y: Vec<f64>,
    fixed_bias: f64,
    kind: CurveKind,
    temperature: f64,
}

impl SweepCurve {
    pub const DEFAULT_TEMPERATURE: f64 = 300.0;

    pub fn new(x: Vec<f64>, y: Vec<f64>, fixed_bias: f64, kind: CurveKind) -> Result<Self> {
        Self::with_temperature(x, y, fixed_bias, kind, Self::DEFAULT_TEMPERATURE)
    }

    pub fn with_temperature(
        x: Vec<f64>,
        y: Vec<f64>,
        fixed_bias: f64,
        kind: CurveKind,
        temperature: f64,
    ) -> Result<Self> {
        if x.len() != y.len() {
            return Err(MeasurementError::InvalidCurve(format!(
                "{} abscissae but {} samples",
                x.len(),
                y.len()
            )));
        }
        if x.len() < 3 {
            return Err(MeasurementError::InvalidCurve(format!(
                "need at least 3 samples, got {}",
                x.len()
            )));
        }
        if x.iter().chain(&y).any(|v| !v.is_finite()) || !fixed_bias.is_finite() {
            return Err(MeasurementError::InvalidCurve("non-finite value".into()));
        }
        if let Some(i) = x.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(MeasurementError::InvalidCurve(format!(
                "abscissae not strictly increasing at index {}",
                i + 1
            )));
        }
        if kind == CurveKind::Cv {
            if let Some(i) = y.iter().position(|&c| c < 0.0) {
                return Err(MeasurementError::InvalidCurve(format!(
                    "negative capacitance at index {i}"
                )));
            }
        }
        if !(temperature > 0.0) {
            return Err(MeasurementError::InvalidCurve(format!(
                "temperature {temperature} K"
            )));
        }
        Ok(Self {
            x,
            y,
            fixed_bias,
            kind,
            temperature,
        })
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn fixed_bias(&self) -> f64 {
        self.fixed_bias
    }

    pub fn kind(&self) -> CurveKind {
        self.kind
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Same curve with every response sample transformed.
    pub fn map_y(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::with_temperature(
            self.x.clone(),
            self.y.iter().map(|&v| f(v)).collect(),
            self.fixed_bias,
            self.kind,
            self.temperature,
        )
    }

    /// Same curve with the swept axis shifted by `delta` volts.
    pub fn shift_x(&self, delta: f64) -> Result<Self> {
        Self::with_temperature(
            self.x.iter().map(|&v| v + delta).collect(),
            self.y.clone(),
            self.fixed_bias,
            self.kind,
            self.temperature,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FamilyVariable {
    FixedVds,
    FixedVgs,
}

/// Curves of one kind on a shared grid, ordered by ascending held bias.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepFamily {
    curves: Vec<SweepCurve>,
    family_variable: FamilyVariable,
    provenance: String,
    resampled: bool,
}

impl SweepFamily {
    /// Builds a family, resampling onto a common grid when the curves'
    /// grids differ.
    pub fn new(mut curves: Vec<SweepCurve>, provenance: impl Into<String>) -> Result<Self> {
        let first = curves.first().ok_or(MeasurementError::EmptyFamily)?;
        let kind = first.kind;
        if let Some(c) = curves.iter().find(|c| c.kind != kind) {
            return Err(MeasurementError::InconsistentKind {
                expected: kind.to_string(),
                found: c.kind.to_string(),
            });
        }
        curves.sort_by(|a, b| a.fixed_bias.total_cmp(&b.fixed_bias));
        if curves.windows(2).any(|w| w[0].fixed_bias == w[1].fixed_bias) {
            return Err(MeasurementError::InvalidCurve(
                "two curves share the same held bias".into(),
            ));
        }
        let family = Self {
            curves,
            family_variable: kind.family_variable(),
            provenance: provenance.into(),
            resampled: false,
        };
        if family.shares_grid() {
            Ok(family)
        } else {
            resample_to_common_grid(&family)
        }
    }

    fn shares_grid(&self) -> bool {
        let x0 = &self.curves[0].x;
        self.curves.iter().all(|c| &c.x == x0)
    }

    pub fn curves(&self) -> &[SweepCurve] {
        &self.curves
    }

    pub fn kind(&self) -> CurveKind {
        self.curves[0].kind
    }

    pub fn family_variable(&self) -> FamilyVariable {
        self.family_variable
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    /// True when ingestion had to interpolate curves onto a common grid.
    pub fn resampled(&self) -> bool {
        self.resampled
    }

    pub fn fixed_biases(&self) -> Vec<f64> {
        self.curves.iter().map(|c| c.fixed_bias).collect()
    }

    /// Curve whose held bias is closest to `bias`.
    pub fn nearest(&self, bias: f64) -> &SweepCurve {
        self.curves
            .iter()
            .min_by(|a, b| {
                (a.fixed_bias - bias)
                    .abs()
                    .total_cmp(&(b.fixed_bias - bias).abs())
            })
            .expect("family is never empty")
    }

    pub fn map_curves(&self, f: impl Fn(&SweepCurve) -> Result<SweepCurve>) -> Result<Self> {
        let curves = self.curves.iter().map(f).collect::<Result<Vec<_>>>()?;
        let mut fam = Self::new(curves, self.provenance.clone())?;
        fam.resampled |= self.resampled;
        Ok(fam)
    }
}

/// Gate geometry in micrometres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviceGeometry {
    width_um: f64,
    length_um: f64,
}

impl DeviceGeometry {
    pub fn new(width_um: f64, length_um: f64) -> Result<Self> {
        if !(width_um > 0.0 && length_um > 0.0) || !width_um.is_finite() || !length_um.is_finite()
        {
            return Err(MeasurementError::InvalidGeometry {
                width_um,
                length_um,
            });
        }
        Ok(Self {
            width_um,
            length_um,
        })
    }

    pub fn width_um(&self) -> f64 {
        self.width_um
    }

    pub fn length_um(&self) -> f64 {
        self.length_um
    }

    pub fn aspect_ratio(&self) -> f64 {
        self.width_um / self.length_um
    }

    /// Gate area W·L in cm².
    pub fn gate_area_cm2(&self) -> f64 {
        self.width_um * self.length_um * 1e-8
    }
}

/// JSON sidecar describing a sweep file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub device_id: String,
    pub kind: CurveKind,
    pub w_um: f64,
    pub l_um: f64,
    #[serde(rename = "temperature_K", default = "default_temperature")]
    pub temperature_k: f64,
    #[serde(rename = "frequency_Hz", default, skip_serializing_if = "Option::is_none")]
    pub frequency_hz: Option<f64>,
    /// Free-form notes, e.g. values that are assumptions rather than data.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub assumptions: BTreeMap<String, String>,
}

fn default_temperature() -> f64 {
    SweepCurve::DEFAULT_TEMPERATURE
}

impl Metadata {
    pub fn geometry(&self) -> Result<DeviceGeometry> {
        DeviceGeometry::new(self.w_um, self.l_um)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let meta: Metadata =
            serde_json::from_str(text).map_err(|e| MeasurementError::Metadata(e.to_string()))?;
        meta.geometry()?;
        if !(meta.temperature_k > 0.0) {
            return Err(MeasurementError::Metadata(format!(
                "temperature_K must be positive, got {}",
                meta.temperature_k
            )));
        }
        Ok(meta)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metadata serializes") + "\n"
    }
}

fn io_err(path: &Path, e: std::io::Error) -> MeasurementError {
    MeasurementError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

/// Reads and validates a sweep file described by `meta`.
pub fn ingest_sweep_file(path: &Path, meta: &Metadata) -> Result<SweepFamily> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    ingest_sweep_reader(file, meta, path.display().to_string())
}

pub fn ingest_sweep_reader<R: Read>(
    reader: R,
    meta: &Metadata,
    provenance: impl Into<String>,
) -> Result<SweepFamily> {
    let kind = meta.kind;
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .has_headers(true)
        .from_reader(reader);
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| MeasurementError::Csv(e.to_string()))?
        .iter()
        .map(str::to_owned)
        .collect();

    let wanted = kind.columns();
    let mut idx = Vec::with_capacity(wanted.len());
    for name in wanted {
        match headers.iter().position(|h| h == name) {
            Some(i) => idx.push(i),
            None => {
                if detect_kind(&headers).is_some_and(|k| k != kind) {
                    return Err(MeasurementError::InconsistentKind {
                        expected: kind.to_string(),
                        found: headers.join(","),
                    });
                }
                return Err(MeasurementError::MissingColumn((*name).to_owned()));
            }
        }
    }
    // Transfer and output files share column names; the swept column leads.
    if headers.first().map(String::as_str) != Some(wanted[0]) {
        return Err(MeasurementError::InconsistentKind {
            expected: kind.to_string(),
            found: headers.join(","),
        });
    }

    let mut groups: BTreeMap<u64, (f64, Vec<(f64, f64)>)> = BTreeMap::new();
    let mut rows = 0usize;
    for (r, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| MeasurementError::Csv(e.to_string()))?;
        let row = r + 1;
        let cell = |col: usize| -> Result<f64> {
            let name = &headers[col];
            record
                .get(col)
                .and_then(|s| s.parse::<f64>().ok())
                .filter(|v| v.is_finite())
                .ok_or_else(|| MeasurementError::NonNumericCell {
                    row,
                    column: name.clone(),
                })
        };
        let swept = cell(idx[0])?;
        let (held, resp) = if kind == CurveKind::Cv {
            (0.0, cell(idx[1])?)
        } else {
            (cell(idx[1])?, cell(idx[2])?)
        };
        // Normalize -0.0 so it groups with 0.0.
        let held = if held == 0.0 { 0.0 } else { held };
        groups
            .entry(order_key(held))
            .or_insert_with(|| (held, Vec::new()))
            .1
            .push((swept, resp));
        rows += 1;
    }
    if rows == 0 {
        return Err(MeasurementError::EmptyFamily);
    }

    let mut curves = Vec::with_capacity(groups.len());
    for (_, (held, mut pts)) in groups {
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (x, y) = collapse_duplicates(&pts);
        curves.push(SweepCurve::with_temperature(
            x,
            y,
            held,
            kind,
            meta.temperature_k,
        )?);
    }
    SweepFamily::new(curves, provenance)
}

fn detect_kind(headers: &[String]) -> Option<CurveKind> {
    [CurveKind::Transfer, CurveKind::Output, CurveKind::Cv]
        .into_iter()
        .find(|k| {
            let cols = k.columns();
            cols.iter().all(|c| headers.iter().any(|h| h == c))
                && headers.first().map(String::as_str) == Some(cols[0])
        })
}

/// Total-order key for f64 so a BTreeMap iterates in ascending value order.
fn order_key(v: f64) -> u64 {
    let bits = v.to_bits();
    if bits >> 63 == 1 {
        !bits
    } else {
        bits | (1 << 63)
    }
}

/// Averages the responses of samples sharing an abscissa. Input is sorted.
fn collapse_duplicates(pts: &[(f64, f64)]) -> (Vec<f64>, Vec<f64>) {
    let mut x = Vec::with_capacity(pts.len());
    let mut y = Vec::with_capacity(pts.len());
    let mut i = 0;
    while i < pts.len() {
        let mut j = i + 1;
        let mut sum = pts[i].1;
        while j < pts.len() && pts[j].0 == pts[i].0 {
            sum += pts[j].1;
            j += 1;
        }
        x.push(pts[i].0);
        y.push(sum / (j - i) as f64);
        i = j;
    }
    (x, y)
}

/// Interpolates every curve onto the union of abscissae restricted to the
/// interval all curves cover.
pub fn resample_to_common_grid(family: &SweepFamily) -> Result<SweepFamily> {
    let lo = family
        .curves
        .iter()
        .map(|c| c.x[0])
        .fold(f64::NEG_INFINITY, f64::max);
    let hi = family
        .curves
        .iter()
        .map(|c| *c.x.last().unwrap())
        .fold(f64::INFINITY, f64::min);
    if !(lo < hi) {
        return Err(MeasurementError::NoOverlap);
    }
    let mut grid: Vec<f64> = family
        .curves
        .iter()
        .flat_map(|c| c.x.iter().copied())
        .filter(|&v| v >= lo && v <= hi)
        .collect();
    grid.push(lo);
    grid.push(hi);
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    let curves = family
        .curves
        .iter()
        .map(|c| {
            let y = grid.iter().map(|&g| interp_linear(&c.x, &c.y, g)).collect();
            SweepCurve::with_temperature(grid.clone(), y, c.fixed_bias, c.kind, c.temperature)
        })
        .collect::<Result<Vec<_>>>()?;
    let changed = family.curves.iter().any(|c| c.x != grid);
    Ok(SweepFamily {
        curves,
        family_variable: family.family_variable,
        provenance: family.provenance.clone(),
        resampled: family.resampled || changed,
    })
}

/// Writes a family in the long-format layout read by [`ingest_sweep_reader`].
/// Values use the shortest representation that parses back to the same f64.
pub fn write_sweep<W: Write>(family: &SweepFamily, mut out: W) -> std::io::Result<()> {
    let kind = family.kind();
    writeln!(out, "{}", kind.columns().join(","))?;
    for c in &family.curves {
        for (x, y) in c.x.iter().zip(&c.y) {
            if kind == CurveKind::Cv {
                writeln!(out, "{x:?},{y:?}")?;
            } else {
                writeln!(out, "{x:?},{:?},{y:?}", c.fixed_bias)?;
            }
        }
    }
    Ok(())
}

pub fn write_sweep_file(family: &SweepFamily, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_sweep(family, &mut buf).expect("writing to memory");
    std::fs::write(path, buf).map_err(|e| io_err(path, e))
}
