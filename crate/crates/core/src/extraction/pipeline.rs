//! Whole-family analyses producing report entries.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::report::{ExtractionReport, ReportEntry, Unit};
use super::*;
use crate::measurement::{ingest_sweep_file, Metadata, MeasurementError};

/// Operating region of a transfer family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Region {
    Linear,
    Saturation,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PipelineOptions {
    pub smoothing: SmoothingSpec,
    pub dibl: DiblMethod,
}

fn require(kind: CurveKind, family: &SweepFamily) -> Result<()> {
    if family.kind() == kind {
        Ok(())
    } else {
        Err(ExtractionError::WrongKind {
            expected: kind,
            found: family.kind(),
        })
    }
}

fn push(report: &mut ExtractionReport, entry: ReportEntry) {
    report
        .push(entry)
        .expect("pipeline entries have distinct keys");
}

/// g_m, SS, ON/OFF and (linear region) threshold for every curve, plus DIBL
/// between the lowest and highest drain bias.
pub fn transfer_report(
    family: &SweepFamily,
    region: Region,
    opts: &PipelineOptions,
    device_id: &str,
) -> Result<ExtractionReport> {
    require(CurveKind::Transfer, family)?;
    let spec = opts.smoothing;
    let mut report = ExtractionReport::new(device_id);
    for curve in family.curves() {
        let vds = curve.fixed_bias();

        const GM: &str = "smoothed-derivative-max";
        push(
            &mut report,
            match extract_gm(curve, spec) {
                Ok(g) => ReportEntry::new("gm_peak", g.peak * 1e3, Unit::Millisiemens, GM)
                    .diagnostic("vgs_at_peak", g.vgs_at_peak),
                Err(e) => ReportEntry::failed("gm_peak", Unit::Millisiemens, GM, e),
            }
            .condition("vds", vds),
        );

        const SS: &str = "min-reciprocal-log-slope";
        push(
            &mut report,
            match extract_ss(curve, spec) {
                Ok(s) => ReportEntry::new("ss", s.ss, Unit::MillivoltPerDecade, SS)
                    .diagnostic("vgs_at_min", s.vgs_at_min)
                    .diagnostic("window_start", s.window.0)
                    .diagnostic("window_end", s.window.1)
                    .diagnostic("window_samples", s.samples as f64),
                Err(e) => ReportEntry::failed("ss", Unit::MillivoltPerDecade, SS, e),
            }
            .condition("vds", vds),
        );

        if region == Region::Linear {
            const LIN: &str = "lin-extrap-maxgm";
            push(
                &mut report,
                match extract_vth_transfer(curve, spec) {
                    Ok(v) => ReportEntry::new("vth", v.vth, Unit::Volt, LIN)
                        .diagnostic("intercept", v.intercept)
                        .diagnostic("drain_correction", v.correction)
                        .diagnostic("vgs_at_peak_gm", v.vgs_at_peak),
                    Err(e) => ReportEntry::failed("vth", Unit::Volt, LIN, e),
                }
                .condition("vds", vds),
            );
        }

        const ENDS: &str = "sweep-endpoints";
        let (x, y) = (curve.x(), curve.y());
        let (v_off, v_on) = (x[0], x[x.len() - 1]);
        push(
            &mut report,
            ReportEntry::new("i_on", y[y.len() - 1] * 1e3, Unit::Milliampere, ENDS)
                .condition("vds", vds)
                .condition("vgs", v_on),
        );
        push(
            &mut report,
            ReportEntry::new("i_off", y[0] * 1e3, Unit::Milliampere, ENDS)
                .condition("vds", vds)
                .condition("vgs", v_off),
        );
        push(
            &mut report,
            match extract_on_off(curve) {
                Ok(o) => ReportEntry::new("on_off_ratio", o.ratio, Unit::Dimensionless, ENDS),
                Err(e) => ReportEntry::failed("on_off_ratio", Unit::Dimensionless, ENDS, e),
            }
            .condition("vds", vds)
            .condition("vgs_on", v_on)
            .condition("vgs_off", v_off),
        );
    }

    let curves = family.curves();
    if curves.len() >= 2 {
        let (low, high) = (&curves[0], &curves[curves.len() - 1]);
        let method = opts.dibl.id();
        push(
            &mut report,
            match extract_dibl_with(low, high, spec, opts.dibl) {
                Ok(d) => ReportEntry::new("dibl", d.dibl, Unit::MillivoltPerVolt, method)
                    .diagnostic("vth_low", d.vth_low)
                    .diagnostic("vth_high", d.vth_high),
                Err(e) => ReportEntry::failed("dibl", Unit::MillivoltPerVolt, method, e),
            }
            .condition("vds_low", low.fixed_bias())
            .condition("vds_high", high.fixed_bias()),
        );
    }
    Ok(report)
}

/// DIBL between the two curves of `family` nearest to the requested biases.
pub fn dibl_report(
    family: &SweepFamily,
    low: f64,
    high: f64,
    opts: &PipelineOptions,
    device_id: &str,
) -> Result<ExtractionReport> {
    require(CurveKind::Transfer, family)?;
    let (lo, hi) = (family.nearest(low), family.nearest(high));
    let d = extract_dibl_with(lo, hi, opts.smoothing, opts.dibl)?;
    let mut report = ExtractionReport::new(device_id);
    push(
        &mut report,
        ReportEntry::new("dibl", d.dibl, Unit::MillivoltPerVolt, opts.dibl.id())
            .condition("vds_low", d.vds_low)
            .condition("vds_high", d.vds_high)
            .diagnostic("vth_low", d.vth_low)
            .diagnostic("vth_high", d.vth_high),
    );
    Ok(report)
}

/// On-resistance and knee voltage of the highest-V_GS output curve.
pub fn output_report(
    family: &SweepFamily,
    geometry: &DeviceGeometry,
    opts: &PipelineOptions,
    device_id: &str,
) -> Result<ExtractionReport> {
    require(CurveKind::Output, family)?;
    let mut report = ExtractionReport::new(device_id);
    let top = family.curves().last().ok_or(ExtractionError::NoCurves)?;
    let vgs = top.fixed_bias();

    const LIN: &str = "linfit-ohmic";
    push(
        &mut report,
        match extract_ron(family, geometry) {
            Ok(r) => ReportEntry::new("ron", r.ron_ohm_um, Unit::OhmMicron, LIN)
                .diagnostic("ron_ohm", r.ron_ohm)
                .diagnostic("intercept_A", r.intercept)
                .diagnostic("max_fitted_current_A", r.max_fitted_current)
                .diagnostic("rms_residual_A", r.rms_residual)
                .diagnostic("fit_samples", r.samples as f64)
                .diagnostic("non_ohmic", if r.non_ohmic { 1.0 } else { 0.0 }),
            Err(e) => ReportEntry::failed("ron", Unit::OhmMicron, LIN, e),
        }
        .condition("vgs", vgs),
    );

    const KNEE: &str = "knee-10pct-slope";
    push(
        &mut report,
        match extract_vsat(top, opts.smoothing) {
            Ok(k) => ReportEntry::new("vsat", k.vsat, Unit::Volt, KNEE)
                .diagnostic("initial_slope_S", k.initial_slope)
                .diagnostic("threshold_slope_S", k.threshold),
            Err(e) => ReportEntry::failed("vsat", Unit::Volt, KNEE, e),
        }
        .condition("vgs", vgs),
    );
    Ok(report)
}

/// C–V threshold and integrated channel charge.
pub fn cv_report(
    family: &SweepFamily,
    geometry: &DeviceGeometry,
    opts: &PipelineOptions,
    device_id: &str,
) -> Result<ExtractionReport> {
    require(CurveKind::Cv, family)?;
    let curve = family.curves().first().ok_or(ExtractionError::NoCurves)?;
    let mut report = ExtractionReport::new(device_id);

    const CV: &str = "cv-max-slope";
    push(
        &mut report,
        match extract_vth_cv(curve, opts.smoothing) {
            Ok(c) => ReportEntry::new("vth", c.vth, Unit::Volt, CV)
                .diagnostic("max_slope_F_per_V", c.max_slope)
                .diagnostic("c_min_F", c.c_min)
                .diagnostic("c_max_F", c.c_max),
            Err(e) => ReportEntry::failed("vth", Unit::Volt, CV, e),
        },
    );

    let q = integrate_charge_over_gate(curve, geometry)?;
    let v_top = q.vgs[q.vgs.len() - 1];
    push(
        &mut report,
        ReportEntry::new("charge", q.max(), Unit::CoulombPerCm2, "cv-integral")
            .condition("vgs", v_top)
            .diagnostic("gate_area_cm2", geometry.gate_area_cm2()),
    );
    Ok(report)
}

/// Charge curve from a C–V sweep, sampled on the transfer family's grid.
pub fn charge_on_transfer_grid(
    transfer: &SweepFamily,
    cv: &SweepFamily,
    geometry: &DeviceGeometry,
) -> Result<ChargeCurve> {
    require(CurveKind::Transfer, transfer)?;
    require(CurveKind::Cv, cv)?;
    let cv_curve = cv.curves().first().ok_or(ExtractionError::NoCurves)?;
    let grid = transfer.curves().first().ok_or(ExtractionError::NoCurves)?.x();
    integrate_charge_over_gate(cv_curve, geometry)?.resample_onto(grid)
}

/// Peak field-effect mobility per drain bias.
pub fn mobility_report(
    transfer: &SweepFamily,
    cv: &SweepFamily,
    geometry: &DeviceGeometry,
    device_id: &str,
) -> Result<ExtractionReport> {
    let charge = charge_on_transfer_grid(transfer, cv, geometry)?;
    let mut report = ExtractionReport::new(device_id);
    const MU: &str = "current-over-charge";
    for curve in transfer.curves() {
        push(
            &mut report,
            match extract_mobility(curve, &charge, geometry) {
                Ok(m) => ReportEntry::new("mobility_peak", m.peak, Unit::Mobility, MU)
                    .diagnostic("vgs_at_peak", m.vgs_at_peak)
                    .diagnostic("guarded_points", m.guarded as f64),
                Err(e) => ReportEntry::failed("mobility_peak", Unit::Mobility, MU, e),
            }
            .condition("vds", curve.fixed_bias()),
        );
    }
    Ok(report)
}

/// Sweep families of one device, as laid out by the fixture generator.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceData {
    pub device_id: String,
    pub geometry: DeviceGeometry,
    pub linear: Option<SweepFamily>,
    pub saturation: Option<SweepFamily>,
    pub output: Option<SweepFamily>,
    pub cv: Option<SweepFamily>,
}

/// File stems looked up by [`load_device_dir`].
pub const DEVICE_FILES: [&str; 4] = ["transfer_linear", "transfer_saturation", "output", "cv"];

/// Reads `<stem>.csv` with its `<stem>.meta.json` for every stem present in
/// `dir`. All metadata must agree on device id and geometry.
pub fn load_device_dir(dir: &Path) -> std::result::Result<DeviceData, MeasurementError> {
    let mut found: Vec<Option<(Metadata, SweepFamily)>> = Vec::new();
    for stem in DEVICE_FILES {
        let csv = dir.join(format!("{stem}.csv"));
        let meta = dir.join(format!("{stem}.meta.json"));
        if !csv.exists() {
            found.push(None);
            continue;
        }
        let meta = Metadata::from_path(&meta)?;
        let family = ingest_sweep_file(&csv, &meta)?;
        found.push(Some((meta, family)));
    }
    let first = found
        .iter()
        .flatten()
        .next()
        .ok_or(MeasurementError::EmptyFamily)?
        .0
        .clone();
    for (meta, _) in found.iter().flatten() {
        if meta.device_id != first.device_id || meta.w_um != first.w_um || meta.l_um != first.l_um
        {
            return Err(MeasurementError::Metadata(format!(
                "files in {} describe different devices",
                dir.display()
            )));
        }
    }
    let mut it = found.into_iter().map(|f| f.map(|(_, fam)| fam));
    Ok(DeviceData {
        device_id: first.device_id.clone(),
        geometry: first.geometry()?,
        linear: it.next().flatten(),
        saturation: it.next().flatten(),
        output: it.next().flatten(),
        cv: it.next().flatten(),
    })
}

/// Every analysis the available data supports, merged into one report.
/// Saturation curves at a drain bias already covered by the linear family
/// are not repeated.
pub fn device_report(data: &DeviceData, opts: &PipelineOptions) -> Result<ExtractionReport> {
    let id = data.device_id.as_str();
    let g = &data.geometry;
    let (transfer, rest) = rayon::join(
        || -> Result<Vec<ExtractionReport>> {
            let mut out = Vec::new();
            if let Some(f) = &data.linear {
                out.push(transfer_report(f, Region::Linear, opts, id)?);
            }
            if let Some(f) = &data.saturation {
                out.push(transfer_report(f, Region::Saturation, opts, id)?);
            }
            Ok(out)
        },
        || -> Result<Vec<ExtractionReport>> {
            let mut out = Vec::new();
            if let Some(f) = &data.output {
                out.push(output_report(f, g, opts, id)?);
            }
            if let Some(cv) = &data.cv {
                out.push(cv_report(cv, g, opts, id)?);
                if let Some(f) = &data.linear {
                    out.push(mobility_report(f, cv, g, id)?);
                }
            }
            Ok(out)
        },
    );
    let mut report = ExtractionReport::new(id);
    for part in transfer?.into_iter().chain(rest?) {
        report.merge(part);
    }
    Ok(report)
}
