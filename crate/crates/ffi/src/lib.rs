//! C ABI over `hemtkit`.
//!
//! Objects cross the boundary as opaque handles released with their `_free`
//! function. Every fallible call returns an [`HkStatus`]; on failure the
//! message is kept per thread and read with [`hk_last_error_message`].
//! Strings returned to the caller are released with [`hk_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use hemtkit::bandsolver::{
    solve_self_consistent_with, BandError, BandSolution, MaterialTable, SolverOptions, StackProblem,
};
use hemtkit::extraction::pipeline::{
    device_report, load_device_dir, transfer_report, PipelineOptions, Region,
};
use hemtkit::extraction::report::ExtractionReport;
use hemtkit::measurement::{ingest_sweep_file, Metadata};
use hemtkit::synth::{generate_fixture, model_current, CompactModelParams, SweepPlan};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HkStatus {
    Ok = 0,
    /// Null pointer, bad UTF-8 or an out-of-range argument.
    InvalidArgument = 1,
    /// File could not be read or written.
    Io = 2,
    /// Input parsed but is not a valid problem or data set.
    InvalidInput = 3,
    /// A numerical step failed.
    Numerical = 4,
    /// Iteration limit reached; the handle still holds the best iterate.
    NotConverged = 5,
    /// Requested item does not exist.
    NotFound = 6,
    /// Internal panic caught at the boundary.
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HkRegion {
    Linear = 0,
    Saturation = 1,
}

/// Opaque extraction report.
pub struct HkReport {
    inner: ExtractionReport,
}

/// Opaque band-diagram solution.
pub struct HkBandSolution {
    inner: BandSolution,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(status: HkStatus, msg: impl Into<String>) -> HkStatus {
    set_error(msg);
    status
}

/// Runs `f`, mapping panics to [`HkStatus::Panic`].
fn guard(f: impl FnOnce() -> HkStatus) -> HkStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(HkStatus::Panic, msg)
        }
    }
}

/// # Safety
/// `s` is null or a valid NUL-terminated string.
unsafe fn str_arg<'a>(s: *const c_char, what: &str) -> Result<&'a str, HkStatus> {
    if s.is_null() {
        return Err(fail(HkStatus::InvalidArgument, format!("{what} is null")));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| fail(HkStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

fn band_status(e: &BandError) -> HkStatus {
    match e {
        BandError::Io(_) => HkStatus::Io,
        BandError::NotConverged { .. } => HkStatus::NotConverged,
        e if e.is_numerical() => HkStatus::Numerical,
        _ => HkStatus::InvalidInput,
    }
}

macro_rules! try_ffi {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(status) => return status,
        }
    };
}

/// Message of the last failed call on this thread, or null. Release with
/// [`hk_string_free`].
#[no_mangle]
pub extern "C" fn hk_last_error_message() -> *mut c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null_mut(), |m| m.clone().into_raw()))
}

/// # Safety
/// `s` is null or was returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hk_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Library version, static storage.
#[no_mangle]
pub extern "C" fn hk_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Every extraction the fixture directory supports.
///
/// # Safety
/// `dir` is a valid string; `out` is a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hk_extract_device_dir(dir: *const c_char, out: *mut *mut HkReport) -> HkStatus {
    guard(|| {
        let dir = try_ffi!(str_arg(dir, "dir"));
        if out.is_null() {
            return fail(HkStatus::InvalidArgument, "out is null");
        }
        let data = match load_device_dir(Path::new(dir)) {
            Ok(d) => d,
            Err(e) => return fail(HkStatus::InvalidInput, e.to_string()),
        };
        match device_report(&data, &PipelineOptions::default()) {
            Ok(r) => {
                *out = Box::into_raw(Box::new(HkReport { inner: r }));
                HkStatus::Ok
            }
            Err(e) => fail(if e.is_numerical() { HkStatus::Numerical } else { HkStatus::InvalidInput }, e.to_string()),
        }
    })
}

/// Transfer-family extraction with default smoothing. `region` is an
/// [`HkRegion`] value.
///
/// # Safety
/// `csv` and `meta` are valid strings; `out` is a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hk_extract_transfer(
    csv: *const c_char,
    meta: *const c_char,
    region: c_int,
    out: *mut *mut HkReport,
) -> HkStatus {
    guard(|| {
        let csv = try_ffi!(str_arg(csv, "csv"));
        let meta = try_ffi!(str_arg(meta, "meta"));
        if out.is_null() {
            return fail(HkStatus::InvalidArgument, "out is null");
        }
        let meta = match Metadata::from_path(Path::new(meta)) {
            Ok(m) => m,
            Err(e) => return fail(HkStatus::Io, e.to_string()),
        };
        let family = match ingest_sweep_file(Path::new(csv), &meta) {
            Ok(f) => f,
            Err(e) => return fail(HkStatus::InvalidInput, e.to_string()),
        };
        let region = match region {
            r if r == HkRegion::Linear as c_int => Region::Linear,
            r if r == HkRegion::Saturation as c_int => Region::Saturation,
            r => return fail(HkStatus::InvalidArgument, format!("unknown region {r}")),
        };
        match transfer_report(&family, region, &PipelineOptions::default(), &meta.device_id) {
            Ok(r) => {
                *out = Box::into_raw(Box::new(HkReport { inner: r }));
                HkStatus::Ok
            }
            Err(e) => fail(if e.is_numerical() { HkStatus::Numerical } else { HkStatus::InvalidInput }, e.to_string()),
        }
    })
}

/// Number of entries, including failed ones.
///
/// # Safety
/// `report` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hk_report_entry_count(report: *const HkReport) -> usize {
    report.as_ref().map_or(0, |r| r.inner.entries().len())
}

/// Value of the first entry called `name`, optionally restricted to entries
/// whose condition `cond_key` equals `cond_value`. Pass a null `cond_key` to
/// match any conditions.
///
/// # Safety
/// `report` is a live handle, `name` a valid string, `cond_key` null or a
/// valid string, `value` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hk_report_value(
    report: *const HkReport,
    name: *const c_char,
    cond_key: *const c_char,
    cond_value: f64,
    value: *mut f64,
) -> HkStatus {
    guard(|| {
        let Some(report) = report.as_ref() else {
            return fail(HkStatus::InvalidArgument, "report is null");
        };
        let name = try_ffi!(str_arg(name, "name"));
        if value.is_null() {
            return fail(HkStatus::InvalidArgument, "value is null");
        }
        let key = if cond_key.is_null() { None } else { Some(try_ffi!(str_arg(cond_key, "cond_key"))) };
        let conds: Vec<(&str, f64)> = key.map(|k| (k, cond_value)).into_iter().collect();
        match report.inner.find(name, &conds) {
            Some(e) => match (e.value, &e.error) {
                (Some(v), _) => {
                    *value = v;
                    HkStatus::Ok
                }
                (None, err) => fail(HkStatus::Numerical, err.clone().unwrap_or_default()),
            },
            None => fail(HkStatus::NotFound, format!("no entry {name}")),
        }
    })
}

/// Report as JSON. Release with [`hk_string_free`]; null if `report` is null.
///
/// # Safety
/// `report` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hk_report_to_json(report: *const HkReport) -> *mut c_char {
    report.as_ref().map_or(ptr::null_mut(), |r| {
        CString::new(r.inner.to_json()).map_or(ptr::null_mut(), CString::into_raw)
    })
}

/// # Safety
/// `report` is null or a live handle, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn hk_report_free(report: *mut HkReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Drain current of the compact model, A. `params_json` is a ground-truth
/// parameter document; null selects the built-in reference device.
///
/// # Safety
/// `params_json` is null or a valid string; `out` is a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hk_model_current(
    params_json: *const c_char,
    vgs: f64,
    vds: f64,
    temperature_k: f64,
    out: *mut f64,
) -> HkStatus {
    guard(|| {
        if out.is_null() {
            return fail(HkStatus::InvalidArgument, "out is null");
        }
        let p = try_ffi!(params(params_json));
        if !(vds >= 0.0) || !(temperature_k > 0.0) {
            return fail(HkStatus::InvalidArgument, "need vds >= 0 and temperature > 0");
        }
        *out = model_current(&p, vgs, vds, temperature_k);
        HkStatus::Ok
    })
}

unsafe fn params(json: *const c_char) -> Result<CompactModelParams, HkStatus> {
    let p = if json.is_null() {
        CompactModelParams::reference_device()
    } else {
        let text = str_arg(json, "params_json")?;
        serde_json::from_str(text).map_err(|e| fail(HkStatus::InvalidInput, e.to_string()))?
    };
    p.validate().map_err(|e| fail(HkStatus::InvalidInput, e.to_string()))?;
    Ok(p)
}

/// Writes a fixture with the reference bias plan into `dir`.
///
/// # Safety
/// `params_json` is null or a valid string; `dir` and `device_id` are valid
/// strings.
#[no_mangle]
pub unsafe extern "C" fn hk_generate_fixture(
    params_json: *const c_char,
    dir: *const c_char,
    device_id: *const c_char,
) -> HkStatus {
    guard(|| {
        let p = try_ffi!(params(params_json));
        let dir = try_ffi!(str_arg(dir, "dir"));
        let id = try_ffi!(str_arg(device_id, "device_id"));
        match generate_fixture(&p, &SweepPlan::reference(), Path::new(dir), id) {
            Ok(_) => HkStatus::Ok,
            Err(e) => fail(HkStatus::Io, e.to_string()),
        }
    })
}

/// Solves a stack given as JSON. On [`HkStatus::NotConverged`] `out` still
/// receives the best iterate.
///
/// # Safety
/// `stack_json` is a valid string; `out` is a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hk_band_solve(
    stack_json: *const c_char,
    quantum: c_int,
    out: *mut *mut HkBandSolution,
) -> HkStatus {
    guard(|| {
        let text = try_ffi!(str_arg(stack_json, "stack_json"));
        if out.is_null() {
            return fail(HkStatus::InvalidArgument, "out is null");
        }
        let solved = StackProblem::from_json(text).and_then(|p| {
            let table = MaterialTable::load()?;
            solve_self_consistent_with(&p, quantum != 0, &table, &SolverOptions::default())
        });
        match solved {
            Ok(s) => {
                let status = match s.require_converged() {
                    Ok(_) => HkStatus::Ok,
                    Err(e) => fail(HkStatus::NotConverged, e.to_string()),
                };
                *out = Box::into_raw(Box::new(HkBandSolution { inner: s }));
                status
            }
            Err(e) => fail(band_status(&e), e.to_string()),
        }
    })
}

/// Number of grid nodes, 0 for a null handle.
///
/// # Safety
/// `s` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hk_band_len(s: *const HkBandSolution) -> usize {
    s.as_ref().map_or(0, |s| s.inner.z.len())
}

/// Sheet density, cm⁻²; NaN for a null handle.
///
/// # Safety
/// `s` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hk_band_sheet_density(s: *const HkBandSolution) -> f64 {
    s.as_ref().map_or(f64::NAN, |s| s.inner.sheet_density)
}

/// Number of bound states, 0 for classical solves.
///
/// # Safety
/// `s` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hk_band_state_count(s: *const HkBandSolution) -> usize {
    s.as_ref().map_or(0, |s| s.inner.bound_energies.len())
}

/// Copies z (nm), E_c (eV) and n (cm⁻³) into caller buffers of `len`
/// elements each, which must equal [`hk_band_len`]. Any buffer may be null.
/// `energies` receives up to `energies_len` subband energies (eV).
///
/// # Safety
/// `s` is a live handle; non-null buffers hold at least the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn hk_band_copy(
    s: *const HkBandSolution,
    z: *mut f64,
    ec: *mut f64,
    n: *mut f64,
    len: usize,
    energies: *mut f64,
    energies_len: usize,
) -> HkStatus {
    guard(|| {
        let Some(s) = s.as_ref() else {
            return fail(HkStatus::InvalidArgument, "solution is null");
        };
        let s = &s.inner;
        if len != s.z.len() {
            return fail(HkStatus::InvalidArgument, format!("expected {} nodes, got {len}", s.z.len()));
        }
        for (dst, src) in [(z, &s.z), (ec, &s.ec), (n, &s.electron_density)] {
            if !dst.is_null() {
                ptr::copy_nonoverlapping(src.as_ptr(), dst, len);
            }
        }
        if !energies.is_null() {
            let k = energies_len.min(s.bound_energies.len());
            ptr::copy_nonoverlapping(s.bound_energies.as_ptr(), energies, k);
        }
        HkStatus::Ok
    })
}

/// # Safety
/// `s` is null or a live handle, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn hk_band_free(s: *mut HkBandSolution) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}
