//! Fixtures and comparison helpers shared by the integration targets.
#![allow(dead_code)]

use std::sync::OnceLock;

use hemtkit::extraction::pipeline::{device_report, DeviceData, PipelineOptions};
use hemtkit::extraction::{ExtractionReport, ReportEntry};
use hemtkit::measurement::{CurveKind, SweepCurve, SweepFamily};
use hemtkit::synth::*;

pub const T: f64 = 300.0;

pub fn closure_device(vth: f64, mu0: f64, eta: f64) -> CompactModelParams {
    CompactModelParams {
        vth,
        mu0,
        cg: 3.0e-7,
        width: 10.0,
        length: 1.0,
        ss_factor: eta,
        vdsat: 1.0,
        knee_order: 2,
        r_series: 0.5,
        i_floor: 0.0,
        dibl_coeff: 0.005,
        noise_amplitude: 0.0,
        seed: 0,
    }
}

pub fn closure_plan(vth: f64) -> SweepPlan {
    let mut plan = SweepPlan::uniform(
        VoltageGrid::new(vth - 1.5, 0.01, vth + 3.0),
        vec![0.01, 0.05, 0.1],
        vec![0.1, 1.0],
    );
    plan.output_vgs = vec![vth + 1.0, vth + 2.0, vth + 3.0];
    plan
}

pub fn data_of(fx: &Fixture) -> DeviceData {
    DeviceData {
        device_id: "synthetic".into(),
        geometry: fx.geometry(),
        linear: fx.linear.clone(),
        saturation: fx.saturation.clone(),
        output: Some(fx.output.clone()),
        cv: Some(fx.cv.clone()),
    }
}

pub fn value(r: &ExtractionReport, name: &str, cond: &[(&str, f64)]) -> f64 {
    r.find(name, cond)
        .unwrap_or_else(|| panic!("{name} {cond:?} missing"))
        .value
        .unwrap_or_else(|| panic!("{name} {cond:?} failed"))
}

pub fn cv_vth(r: &ExtractionReport) -> f64 {
    r.entries()
        .iter()
        .find(|e| e.name == "vth" && e.method == "cv-max-slope")
        .and_then(|e| e.value)
        .expect("cv threshold")
}

pub struct Closure {
    pub vth: f64,
    pub ss: f64,
    pub mu: f64,
    pub r_total: f64,
    pub dibl: f64,
    pub endpoints_exact: bool,
    pub cv_vs_transfer: f64,
}

/// Relative (absolute for vth) recovery errors of one closure device.
pub fn closure_errors(vth: f64, mu0: f64, eta: f64) -> Closure {
    let p = closure_device(vth, mu0, eta);
    let plan = closure_plan(vth);
    let fx = synthesize(&p, &plan).unwrap();
    let r = device_report(&data_of(&fx), &PipelineOptions::default()).unwrap();

    let top = *plan.output_vgs.last().unwrap();
    let ron_ohm = r.find("ron", &[("vgs", top)]).unwrap().diagnostics["ron_ohm"];
    let lin = fx.linear.as_ref().unwrap().curves()[0].clone();
    let (x, y) = (lin.x(), lin.y());
    let ends = value(&r, "i_on", &[("vds", 0.01)]) == y[y.len() - 1] * 1e3
        && value(&r, "i_off", &[("vds", 0.01)]) == y[0] * 1e3
        && y[0] == model_current(&p, x[0], 0.01, T)
        && y[y.len() - 1] == model_current(&p, x[x.len() - 1], 0.01, T);
    let vt = value(&r, "vth", &[("vds", 0.01)]);
    Closure {
        vth: (vt - vth).abs(),
        ss: (value(&r, "ss", &[("vds", 0.01)]) / p.ideal_ss_mv_per_decade(T) - 1.0).abs(),
        mu: (value(&r, "mobility_peak", &[("vds", 0.01)]) / mu0 - 1.0).abs(),
        r_total: (ron_ohm / p.r_total(top, T) - 1.0).abs(),
        dibl: (value(&r, "dibl", &[("vds_low", 0.01), ("vds_high", 0.1)]) / (p.dibl_coeff * 1e3) - 1.0)
            .abs(),
        endpoints_exact: ends,
        cv_vs_transfer: (cv_vth(&r) - vt).abs(),
    }
}

pub const GRID_VTH: [f64; 3] = [-2.5, -1.5, -0.5];
pub const GRID_MU0: [f64; 3] = [800.0, 1200.0, 1600.0];
pub const GRID_ETA: [f64; 3] = [1.1, 1.34, 1.6];

pub fn reference_fixture() -> &'static Fixture {
    static FX: OnceLock<Fixture> = OnceLock::new();
    FX.get_or_init(|| synthesize(&CompactModelParams::reference_device(), &SweepPlan::reference()).unwrap())
}

pub fn reference_report() -> &'static ExtractionReport {
    static R: OnceLock<ExtractionReport> = OnceLock::new();
    R.get_or_init(|| device_report(&data_of(reference_fixture()), &PipelineOptions::default()).unwrap())
}

pub fn map_family(
    f: &Option<SweepFamily>,
    g: impl Fn(&SweepCurve) -> SweepCurve,
) -> Option<SweepFamily> {
    f.as_ref().map(|f| f.map_curves(|c| Ok(g(c))).unwrap())
}

pub fn scale_currents(data: &DeviceData, alpha: f64) -> DeviceData {
    let s = |c: &SweepCurve| c.map_y(|v| v * alpha).unwrap();
    DeviceData {
        linear: map_family(&data.linear, s),
        saturation: map_family(&data.saturation, s),
        output: map_family(&data.output, s),
        ..data.clone()
    }
}

pub fn shift_gate(data: &DeviceData, delta: f64) -> DeviceData {
    let sx = |c: &SweepCurve| c.shift_x(delta).unwrap();
    let sb = |c: &SweepCurve| {
        SweepCurve::with_temperature(
            c.x().to_vec(),
            c.y().to_vec(),
            c.fixed_bias() + delta,
            CurveKind::Output,
            c.temperature(),
        )
        .unwrap()
    };
    DeviceData {
        linear: map_family(&data.linear, sx),
        saturation: map_family(&data.saturation, sx),
        output: map_family(&data.output, sb),
        cv: map_family(&data.cv, sx),
        ..data.clone()
    }
}

pub fn close(a: f64, b: f64, scale: f64) -> bool {
    (a - b).abs() <= 1e-12 * (a.abs().max(b.abs()) + scale)
}

/// Magnitude that rounding in an entry's inputs is relative to. DIBL is a
/// difference of two thresholds, so it inherits their size over the drain step.
pub fn input_scale(e: &ReportEntry) -> f64 {
    match e.name.as_str() {
        "dibl" => {
            let d = &e.diagnostics;
            1e3 * (d["vth_low"].abs() + d["vth_high"].abs())
                / (e.conditions["vds_high"] - e.conditions["vds_low"])
        }
        "vth" | "vsat" => 1.0,
        _ => 0.0,
    }
}

pub fn paired<'a>(
    a: &'a ExtractionReport,
    b: &'a ExtractionReport,
) -> impl Iterator<Item = (&'a ReportEntry, &'a ReportEntry)> {
    assert_eq!(a.entries().len(), b.entries().len());
    a.entries().iter().zip(b.entries()).inspect(|(x, y)| {
        assert_eq!(x.name, y.name);
        assert_eq!(x.method, y.method);
        assert_eq!(x.value.is_some(), y.value.is_some(), "{}", x.name);
    })
}

