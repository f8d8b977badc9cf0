use std::ffi::{CStr, CString};
use std::ptr;

use hemtkit::bandsolver::{solve_self_consistent_with, MaterialTable, SolverOptions, StackProblem};
use hemtkit::synth::{model_current, CompactModelParams};
use hemtkit_ffi::*;

fn cstr(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    let p = hk_last_error_message();
    assert!(!p.is_null());
    let s = unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_owned();
    unsafe { hk_string_free(p) };
    s
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(hk_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn model_current_matches_the_library() {
    let mut out = 0.0;
    let s = unsafe { hk_model_current(ptr::null(), 0.0, 0.05, 300.0, &mut out) };
    assert_eq!(s, HkStatus::Ok);
    assert_eq!(out, model_current(&CompactModelParams::reference_device(), 0.0, 0.05, 300.0));

    let bad = cstr("{\"vth\": 1}");
    let s = unsafe { hk_model_current(bad.as_ptr(), 0.0, 0.05, 300.0, &mut out) };
    assert_eq!(s, HkStatus::InvalidInput);
    assert!(last_error().contains("missing field"));

    let s = unsafe { hk_model_current(ptr::null(), 0.0, -1.0, 300.0, &mut out) };
    assert_eq!(s, HkStatus::InvalidArgument);
}

#[test]
fn fixture_round_trip_through_handles() {
    let dir = tempfile::tempdir().unwrap();
    let d = cstr(dir.path().to_str().unwrap());
    let id = cstr("ffi-device");
    assert_eq!(unsafe { hk_generate_fixture(ptr::null(), d.as_ptr(), id.as_ptr()) }, HkStatus::Ok);

    let mut report: *mut HkReport = ptr::null_mut();
    assert_eq!(unsafe { hk_extract_device_dir(d.as_ptr(), &mut report) }, HkStatus::Ok);
    assert!(unsafe { hk_report_entry_count(report) } > 10);

    let mut gm = 0.0;
    let name = cstr("gm_peak");
    let key = cstr("vds");
    let s = unsafe { hk_report_value(report, name.as_ptr(), key.as_ptr(), 0.1, &mut gm) };
    assert_eq!(s, HkStatus::Ok);
    assert!((gm - 0.18).abs() < 0.18 * 0.05, "{gm}");

    let missing = cstr("no_such_entry");
    let s = unsafe { hk_report_value(report, missing.as_ptr(), ptr::null(), 0.0, &mut gm) };
    assert_eq!(s, HkStatus::NotFound);

    let json = unsafe { hk_report_to_json(report) };
    let text = unsafe { CStr::from_ptr(json) }.to_str().unwrap().to_owned();
    unsafe { hk_string_free(json) };
    assert!(text.contains("\"device_id\": \"ffi-device\""));
    unsafe { hk_report_free(report) };

    let csv = cstr(dir.path().join("transfer_linear.csv").to_str().unwrap());
    let meta = cstr(dir.path().join("transfer_linear.meta.json").to_str().unwrap());
    let mut r2: *mut HkReport = ptr::null_mut();
    assert_eq!(
        unsafe { hk_extract_transfer(csv.as_ptr(), meta.as_ptr(), HkRegion::Linear as i32, &mut r2) },
        HkStatus::Ok
    );
    unsafe { hk_report_free(r2) };
    assert_eq!(
        unsafe { hk_extract_transfer(csv.as_ptr(), meta.as_ptr(), 9, &mut r2) },
        HkStatus::InvalidArgument
    );
}

#[test]
fn null_and_missing_inputs_are_reported() {
    let mut report: *mut HkReport = ptr::null_mut();
    assert_eq!(unsafe { hk_extract_device_dir(ptr::null(), &mut report) }, HkStatus::InvalidArgument);
    assert!(last_error().contains("null"));
    let d = cstr("/nonexistent/hemtkit");
    assert_eq!(unsafe { hk_extract_device_dir(d.as_ptr(), &mut report) }, HkStatus::InvalidInput);
    assert!(report.is_null());
    unsafe {
        hk_report_free(ptr::null_mut());
        hk_band_free(ptr::null_mut());
        hk_string_free(ptr::null_mut());
    }
    assert_eq!(unsafe { hk_report_entry_count(ptr::null()) }, 0);
    assert!(unsafe { hk_band_sheet_density(ptr::null()) }.is_nan());
}

#[test]
fn band_solve_matches_the_library() {
    let mut p = StackProblem::default_stack();
    p.layers[1].thickness = 200.0;
    let json = cstr(&p.to_json());
    let mut sol: *mut HkBandSolution = ptr::null_mut();
    assert_eq!(unsafe { hk_band_solve(json.as_ptr(), 0, &mut sol) }, HkStatus::Ok);
    let direct = solve_self_consistent_with(&p, false, &MaterialTable::builtin(), &SolverOptions::default()).unwrap();
    let n = unsafe { hk_band_len(sol) };
    assert_eq!(n, direct.z.len());
    assert_eq!(unsafe { hk_band_sheet_density(sol) }, direct.sheet_density);
    assert_eq!(unsafe { hk_band_state_count(sol) }, 0);
    let (mut z, mut ec) = (vec![0.0; n], vec![0.0; n]);
    let s = unsafe { hk_band_copy(sol, z.as_mut_ptr(), ec.as_mut_ptr(), ptr::null_mut(), n, ptr::null_mut(), 0) };
    assert_eq!(s, HkStatus::Ok);
    assert_eq!(z, direct.z);
    assert_eq!(ec, direct.ec);
    let s = unsafe { hk_band_copy(sol, z.as_mut_ptr(), ptr::null_mut(), ptr::null_mut(), n - 1, ptr::null_mut(), 0) };
    assert_eq!(s, HkStatus::InvalidArgument);
    unsafe { hk_band_free(sol) };

    let mut coarse = p.clone();
    coarse.grid_step = 20.0;
    let json = cstr(&coarse.to_json());
    assert_eq!(unsafe { hk_band_solve(json.as_ptr(), 0, &mut sol) }, HkStatus::InvalidInput);
    assert!(last_error().contains("too coarse"));
}

#[test]
fn header_declares_the_api_and_compiles() {
    let header = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("include/hemtkit.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for sym in [
        "hk_last_error_message",
        "hk_string_free",
        "hk_extract_device_dir",
        "hk_extract_transfer",
        "hk_report_value",
        "hk_report_free",
        "hk_model_current",
        "hk_generate_fixture",
        "hk_band_solve",
        "hk_band_copy",
        "hk_band_free",
        "typedef struct HkReport HkReport",
        "HK_STATUS_NOT_CONVERGED = 5",
    ] {
        assert!(text.contains(sym), "{sym} missing from header");
    }
    // Syntax-check the header with the system C compiler when there is one.
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"hemtkit.h\"\nint main(void) { HkReport *r = 0; hk_report_free(r); return HK_STATUS_OK; }\n",
    )
    .unwrap();
    match std::process::Command::new("cc")
        .arg("-fsyntax-only")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(header.parent().unwrap())
        .arg(&src)
        .output()
    {
        Ok(o) => assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr)),
        Err(_) => eprintln!("no C compiler; header compile check skipped"),
    }
}
