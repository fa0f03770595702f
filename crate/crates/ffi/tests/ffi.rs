use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::ptr;

use thinlayer_ffi::*;

fn last_error() -> String {
    let n = unsafe { tl_last_error_message(ptr::null_mut(), 0) };
    let mut buf = vec![0 as std::ffi::c_char; n + 1];
    unsafe { tl_last_error_message(buf.as_mut_ptr(), buf.len()) };
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

#[test]
fn plane_stress_through_the_c_abi() {
    let (lambda, mu) = (2.0, 1.0);
    let mut cell = ptr::null_mut();
    let st = unsafe { tl_cell_new(2, 4, TlHoleKind::None, ptr::null(), ptr::null(), lambda, mu, 1.0, &mut cell) };
    assert_eq!(st, TlStatus::Ok);
    let (mut removed, mut measure) = (7usize, 0.0);
    assert_eq!(unsafe { tl_cell_stats(cell, &mut removed, &mut measure) }, TlStatus::Ok);
    assert_eq!(removed, 0);
    assert!((measure - 1.0).abs() < 1e-14);

    let mut coeffs = ptr::null_mut();
    assert_eq!(unsafe { tl_cell_coefficients(cell, TlNormalization::VolumeNormalized, &mut coeffs) }, TlStatus::Ok);
    let (mut rows, mut cols) = (0, 0);
    assert_eq!(unsafe { tl_coefficients_matrix(coeffs, TlTensor::AStar, ptr::null_mut(), 0, &mut rows, &mut cols) }, TlStatus::BufferTooSmall);
    assert_eq!((rows, cols), (1, 1));
    let mut a = [0.0; 1];
    assert_eq!(unsafe { tl_coefficients_matrix(coeffs, TlTensor::AStar, a.as_mut_ptr(), 1, &mut rows, &mut cols) }, TlStatus::Ok);
    // one in-plane direction: the plane-stress modulus 4μ(λ+μ)/(λ+2μ)
    let expected = 4.0 * mu * (lambda + mu) / (lambda + 2.0 * mu);
    assert!((a[0] - expected).abs() < 1e-8 * expected, "{} vs {expected}", a[0]);
    let mut rho = 0.0;
    assert_eq!(unsafe { tl_coefficients_rho_bar(coeffs, &mut rho) }, TlStatus::Ok);
    assert!((rho - 1.0).abs() < 1e-14);
    unsafe {
        tl_coefficients_free(coeffs);
        tl_cell_free(cell);
    }
}

#[test]
fn errors_are_reported_with_messages() {
    let mut cell = ptr::null_mut();
    let st = unsafe { tl_cell_new(4, 4, TlHoleKind::None, ptr::null(), ptr::null(), 2.0, 1.0, 1.0, &mut cell) };
    assert_eq!(st, TlStatus::InvalidArgument);
    assert!(cell.is_null());
    assert!(last_error().contains("dimension"));

    let st = unsafe { tl_cell_new(2, 4, TlHoleKind::Box, ptr::null(), ptr::null(), 2.0, 1.0, 1.0, &mut cell) };
    assert_eq!(st, TlStatus::NullPointer);

    let center = [0.0, 0.5];
    let half = [0.5, 0.2];
    let st = unsafe { tl_cell_new(2, 4, TlHoleKind::Box, center.as_ptr(), half.as_ptr(), 2.0, 1.0, 1.0, &mut cell) };
    assert_eq!(st, TlStatus::InvalidArgument);
    assert!(last_error().contains("geometry"));

    let json = CString::new(r#"{"unknown": 1}"#).unwrap();
    let mut report = ptr::null_mut();
    assert_eq!(unsafe { tl_run_config_json(json.as_ptr(), ptr::null(), &mut report) }, TlStatus::Config);
    assert!(report.is_null());
    assert!(last_error().contains("unknown"));

    let mut removed = 0;
    let mut m = 0.0;
    assert_eq!(unsafe { tl_cell_stats(ptr::null(), &mut removed, &mut m) }, TlStatus::NullPointer);
    unsafe { tl_cell_free(ptr::null_mut()) };
}

#[test]
fn run_config_writes_the_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(configs().join("membrane_ladder.json").to_str().unwrap()).unwrap();
    let out = CString::new(dir.path().to_str().unwrap()).unwrap();
    let mut report = ptr::null_mut();
    assert_eq!(unsafe { tl_run_config(path.as_ptr(), out.as_ptr(), &mut report) }, TlStatus::Ok, "{}", last_error());
    let (mut total, mut failed) = (0, 0);
    assert_eq!(unsafe { tl_report_invariants(report, &mut total, &mut failed) }, TlStatus::Ok);
    assert!(total > 0);
    assert_eq!(failed, 0);
    let mut rows = 0;
    let mut errs = [0.0; 3];
    assert_eq!(unsafe { tl_report_ladder(report, errs.as_mut_ptr(), 3, &mut rows) }, TlStatus::Ok);
    assert_eq!(rows, 3);
    assert!(errs[0] > errs[1] && errs[1] > errs[2]);
    assert!(dir.path().join("ladder.csv").exists());
    unsafe { tl_report_free(report) };
}

#[test]
fn header_declares_the_api_and_compiles() {
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let header = std::fs::read_to_string(include.join("thinlayer.h")).unwrap();
    for f in ["tl_version", "tl_last_error_message", "tl_cell_new", "tl_cell_coefficients", "tl_coefficients_matrix", "tl_run_config", "tl_report_free"] {
        assert!(header.contains(&format!("{f}(")), "{f}");
    }
    assert_eq!(unsafe { CStr::from_ptr(tl_version()) }.to_str().unwrap(), env!("CARGO_PKG_VERSION"));

    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("probe.c");
    std::fs::write(
        &src,
        "#include \"thinlayer.h\"\nint main(void) {\n  TlCell *c = 0;\n  TlStatus s = tl_cell_new(2, 4, TL_HOLE_KIND_NONE, 0, 0, 2.0, 1.0, 1.0, &c);\n  tl_cell_free(c);\n  return s == TL_STATUS_OK ? 0 : 1;\n}\n",
    )
    .unwrap();
    let status = std::process::Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(&include)
        .arg(&src)
        .status()
        .expect("C compiler available");
    assert!(status.success());
}
