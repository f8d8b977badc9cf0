//! Extraction report document.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

/// Units a report entry may carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Unit {
    #[serde(rename = "V")]
    Volt,
    #[serde(rename = "A")]
    Ampere,
    #[serde(rename = "mA")]
    Milliampere,
    #[serde(rename = "S")]
    Siemens,
    #[serde(rename = "mS")]
    Millisiemens,
    #[serde(rename = "mV/decade")]
    MillivoltPerDecade,
    #[serde(rename = "mV/V")]
    MillivoltPerVolt,
    #[serde(rename = "ohm·um")]
    OhmMicron,
    #[serde(rename = "C/cm^2")]
    CoulombPerCm2,
    #[serde(rename = "cm^2/(V·s)")]
    Mobility,
    #[serde(rename = "dimensionless")]
    Dimensionless,
}

impl Unit {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Volt => "V",
            Self::Ampere => "A",
            Self::Milliampere => "mA",
            Self::Siemens => "S",
            Self::Millisiemens => "mS",
            Self::MillivoltPerDecade => "mV/decade",
            Self::MillivoltPerVolt => "mV/V",
            Self::OhmMicron => "ohm·um",
            Self::CoulombPerCm2 => "C/cm^2",
            Self::Mobility => "cm^2/(V·s)",
            Self::Dimensionless => "dimensionless",
        }
    }
}

/// One extracted quantity. A failed extraction keeps its slot with no value
/// and the failure message in `error`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEntry {
    pub name: String,
    pub value: Option<f64>,
    pub unit: Unit,
    pub method: String,
    pub conditions: BTreeMap<String, f64>,
    pub diagnostics: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ReportEntry {
    pub fn new(name: &str, value: f64, unit: Unit, method: &str) -> Self {
        Self {
            name: name.to_owned(),
            value: Some(value),
            unit,
            method: method.to_owned(),
            conditions: BTreeMap::new(),
            diagnostics: BTreeMap::new(),
            error: None,
        }
    }

    pub fn failed(name: &str, unit: Unit, method: &str, error: impl ToString) -> Self {
        Self {
            value: None,
            error: Some(error.to_string()),
            ..Self::new(name, 0.0, unit, method)
        }
    }

    pub fn condition(mut self, key: &str, volts: f64) -> Self {
        self.conditions.insert(key.to_owned(), volts);
        self
    }

    pub fn diagnostic(mut self, key: &str, value: f64) -> Self {
        self.diagnostics.insert(key.to_owned(), value);
        self
    }

    fn key_cmp(&self, other: &Self) -> Ordering {
        self.name.cmp(&other.name).then_with(|| {
            let a = self.conditions.iter();
            let b = other.conditions.iter();
            for ((ka, va), (kb, vb)) in a.zip(b) {
                let o = ka.cmp(kb).then_with(|| va.total_cmp(vb));
                if o != Ordering::Equal {
                    return o;
                }
            }
            self.conditions.len().cmp(&other.conditions.len())
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EntryError {
    #[error("duplicate entry {name} with conditions {conditions:?}")]
    Duplicate {
        name: String,
        conditions: BTreeMap<String, f64>,
    },
    #[error("malformed report: {0}")]
    Malformed(String),
}

/// Report for one device; entries stay sorted by name then conditions.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExtractionReport {
    pub device_id: String,
    entries: Vec<ReportEntry>,
    /// Optional free-form run stamp, absent unless requested.
    pub stamp: Option<String>,
}

/// Rounds to nine significant digits.
pub fn round_sig9(v: f64) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return v;
    }
    format!("{v:.8e}").parse().expect("formatted float parses")
}

fn number(v: f64) -> Value {
    if v.is_finite() {
        json!(round_sig9(v))
    } else {
        Value::Null
    }
}

fn number_map(m: &BTreeMap<String, f64>) -> Value {
    Value::Object(m.iter().map(|(k, v)| (k.clone(), number(*v))).collect())
}

impl ExtractionReport {
    pub fn new(device_id: &str) -> Self {
        Self {
            device_id: device_id.to_owned(),
            ..Self::default()
        }
    }

    pub fn entries(&self) -> &[ReportEntry] {
        &self.entries
    }

    pub fn push(&mut self, entry: ReportEntry) -> Result<(), EntryError> {
        match self.entries.binary_search_by(|e| e.key_cmp(&entry)) {
            Ok(_) => Err(EntryError::Duplicate {
                name: entry.name,
                conditions: entry.conditions,
            }),
            Err(at) => {
                self.entries.insert(at, entry);
                Ok(())
            }
        }
    }

    /// Adds every entry of `other` whose key is not present yet; returns the
    /// number of entries skipped.
    pub fn merge(&mut self, other: ExtractionReport) -> usize {
        other
            .entries
            .into_iter()
            .filter(|e| self.push(e.clone()).is_err())
            .count()
    }

    /// First entry with this name whose conditions contain every given pair.
    pub fn find(&self, name: &str, conditions: &[(&str, f64)]) -> Option<&ReportEntry> {
        self.entries.iter().find(|e| {
            e.name == name
                && conditions
                    .iter()
                    .all(|(k, v)| e.conditions.get(*k).is_some_and(|c| (c - v).abs() < 1e-9))
        })
    }

    pub fn failures(&self) -> impl Iterator<Item = &ReportEntry> {
        self.entries.iter().filter(|e| e.error.is_some())
    }

    pub fn to_value(&self) -> Value {
        let entries: Vec<Value> = self
            .entries
            .iter()
            .map(|e| {
                let mut m = Map::new();
                m.insert("name".into(), json!(e.name));
                m.insert("value".into(), e.value.map_or(Value::Null, number));
                m.insert("unit".into(), json!(e.unit));
                m.insert("method".into(), json!(e.method));
                m.insert("conditions".into(), number_map(&e.conditions));
                m.insert("diagnostics".into(), number_map(&e.diagnostics));
                if let Some(err) = &e.error {
                    m.insert("error".into(), json!(err));
                }
                Value::Object(m)
            })
            .collect();
        let mut doc = Map::new();
        doc.insert("device_id".into(), json!(self.device_id));
        if let Some(stamp) = &self.stamp {
            doc.insert("stamp".into(), json!(stamp));
        }
        doc.insert("entries".into(), Value::Array(entries));
        Value::Object(doc)
    }

    /// Pretty JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_value()).expect("report serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self, EntryError> {
        #[derive(Deserialize)]
        struct Doc {
            device_id: String,
            #[serde(default)]
            stamp: Option<String>,
            entries: Vec<RawEntry>,
        }
        #[derive(Deserialize)]
        struct RawEntry {
            name: String,
            value: Option<f64>,
            unit: Unit,
            method: String,
            conditions: BTreeMap<String, Option<f64>>,
            diagnostics: BTreeMap<String, Option<f64>>,
            #[serde(default)]
            error: Option<String>,
        }
        let doc: Doc =
            serde_json::from_str(text).map_err(|e| EntryError::Malformed(e.to_string()))?;
        let mut report = ExtractionReport {
            device_id: doc.device_id,
            entries: Vec::new(),
            stamp: doc.stamp,
        };
        let finite = |m: BTreeMap<String, Option<f64>>| {
            m.into_iter()
                .map(|(k, v)| (k, v.unwrap_or(f64::INFINITY)))
                .collect()
        };
        for e in doc.entries {
            report.push(ReportEntry {
                name: e.name,
                value: e.value,
                unit: e.unit,
                method: e.method,
                conditions: finite(e.conditions),
                diagnostics: finite(e.diagnostics),
                error: e.error,
            })?;
        }
        Ok(report)
    }
}
