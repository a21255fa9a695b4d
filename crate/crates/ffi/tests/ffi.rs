use std::ffi::CStr;
use std::ptr;

use weakkam_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(wk_last_error()).to_string_lossy().into_owned() }
}

fn grid(values: &[f64]) -> *mut WkGrid {
    let mut g = ptr::null_mut();
    assert_eq!(unsafe { wk_grid_new(values.as_ptr(), values.len(), &mut g) }, WkStatus::Ok);
    g
}

fn values(g: *const WkGrid) -> Vec<f64> {
    let n = unsafe { wk_grid_len(g) };
    let mut buf = vec![0.0; n];
    assert_eq!(unsafe { wk_grid_values(g, buf.as_mut_ptr(), n) }, WkStatus::Ok);
    buf
}

#[test]
fn evaluation_and_legendre() {
    let h = wk_hamiltonian_pendulum(0.3, 1.0);
    let mut v = 0.0;
    assert_eq!(unsafe { wk_hamiltonian_eval(h, 0.5, 0.2, &mut v) }, WkStatus::Ok);
    assert!((v - (0.5 * 0.25 - 1.0)).abs() < 1e-12);
    let (mut l, mut p) = (0.0, 0.0);
    assert_eq!(unsafe { wk_hamiltonian_legendre(h, 0.5, 0.7, &mut l, &mut p) }, WkStatus::Ok);
    assert!((p - 0.4).abs() < 1e-6);
    // L(x, v) = ½v² − shift·v + sin²(πx)
    assert!((l - (0.5 * 0.49 - 0.3 * 0.7 + 1.0)).abs() < 1e-8);
    unsafe { wk_hamiltonian_destroy(h) };
}

#[test]
fn null_pointers_are_reported() {
    let mut v = 0.0;
    assert_eq!(unsafe { wk_hamiltonian_eval(ptr::null(), 0.0, 0.0, &mut v) }, WkStatus::NullPointer);
    assert!(last_error().contains("null"));
    assert_eq!(unsafe { wk_grid_len(ptr::null()) }, 0);
    unsafe {
        wk_grid_destroy(ptr::null_mut());
        wk_hamiltonian_destroy(ptr::null_mut());
    }
}

#[test]
fn critical_value_of_free_particle() {
    let h = unsafe { wk_hamiltonian_mechanical(ptr::null(), 0) };
    let (mut alpha, mut it) = (1.0, ptr::null_mut());
    assert_eq!(unsafe { wk_critical_value(h, 64, 0.01, 100, &mut alpha, &mut it) }, WkStatus::Ok);
    assert!(alpha.abs() < 1e-12);
    assert_eq!(unsafe { wk_grid_len(it) }, 64);
    assert_eq!(unsafe { wk_critical_value(h, 64, 0.01, 10, &mut alpha, ptr::null_mut()) }, WkStatus::InvalidArgument);
    unsafe {
        wk_grid_destroy(it);
        wk_hamiltonian_destroy(h);
    }
}

#[test]
fn evolve_report_and_regularize() {
    let h = unsafe { wk_hamiltonian_mechanical(ptr::null(), 0) };
    let n = 128;
    let tent: Vec<f64> = (0..n).map(|i| (i as f64 / n as f64 - 0.5).abs()).collect();
    let u = grid(&tent);

    let mut report = WkSubSolutionReport::default();
    assert_eq!(unsafe { wk_subsolution_report(h, u, 0.6, 0.016, &mut report) }, WkStatus::Ok);
    assert!(report.pass);
    assert_eq!(unsafe { wk_subsolution_report(h, u, 0.0, 0.01, &mut report) }, WkStatus::Ok);
    assert!(!report.pass);

    let mut v = ptr::null_mut();
    assert_eq!(unsafe { wk_evolve(h, u, 0.1, 0.01, 0.6, 1, &mut v) }, WkStatus::Ok);
    assert!(values(v).iter().zip(&tent).all(|(a, b)| a <= &(b + 1e-12)));
    assert_eq!(unsafe { wk_evolve(h, u, 0.1, 0.01, 0.6, 7, &mut v) }, WkStatus::InvalidArgument);

    let (mut w, mut summary) = (ptr::null_mut(), WkRegularization::default());
    assert_eq!(unsafe { wk_lasry_lions(h, u, 0.1, 0.05, 0.6, &mut w, &mut summary) }, WkStatus::Ok);
    assert!(summary.pass && summary.k_plus.is_finite());
    assert_eq!(unsafe { wk_lasry_lions(h, u, 0.1, 0.05, 0.0, &mut w, &mut summary) }, WkStatus::Precondition);
    assert!(last_error().contains("not a sub-solution"));
    unsafe {
        wk_grid_destroy(u);
        wk_grid_destroy(v);
        wk_grid_destroy(w);
        wk_hamiltonian_destroy(h);
    }
}

#[test]
fn aubry_of_mechanical_system_sits_at_the_maximum() {
    // V = −sin²(πx), maximal at x = 0
    let coeffs = [-0.5, 0.5];
    let h = unsafe { wk_hamiltonian_mechanical(coeffs.as_ptr(), coeffs.len()) };
    let n = 128;
    let mut flags = vec![0u8; n];
    let mut count = 0;
    assert_eq!(unsafe { wk_aubry(h, 0.0, n, 8, 3, 0.0, flags.as_mut_ptr(), &mut count) }, WkStatus::Ok);
    assert!(count > 0);
    for (i, &f) in flags.iter().enumerate() {
        if f == 1 {
            let x = i as f64 / n as f64;
            assert!(x.min(1.0 - x) < 0.1, "flagged x = {x}");
        }
    }
    assert_eq!(unsafe { wk_aubry(h, 0.0, n, 2, 3, 0.0, flags.as_mut_ptr(), &mut count) }, WkStatus::InvalidArgument);
    unsafe { wk_hamiltonian_destroy(h) };
}

#[test]
fn header_is_generated() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/weakkam.h")).unwrap();
    for name in ["wk_hamiltonian_pendulum", "wk_critical_value", "wk_lasry_lions", "wk_aubry", "WK_STATUS_PRECONDITION", "typedef struct WkGrid WkGrid"] {
        assert!(header.contains(name), "{name} missing from header");
    }
}
