use std::ffi::CStr;
use std::ptr;

use qpsim_ffi::*;

const H: f64 = std::f64::consts::FRAC_1_SQRT_2;

fn last_error() -> String {
    let p = qpsim_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn hong_ou_mandel_through_handles() {
    let s = qpsim_state_vacuum(2);
    assert!(!s.is_null());
    unsafe {
        assert_eq!(qpsim_state_add_photon(s, 0), QpsimStatus::Ok);
        assert_eq!(qpsim_state_add_photon(s, 1), QpsimStatus::Ok);
        let re = [H, H, H, -H];
        let im = [0.0; 4];
        let map = [0usize, 1];
        assert_eq!(qpsim_state_apply_unitary(s, re.as_ptr(), im.as_ptr(), 2, map.as_ptr()), QpsimStatus::Ok);
        let mut p = f64::NAN;
        assert_eq!(qpsim_state_probability(s, [1u32, 1].as_ptr(), 2, &mut p), QpsimStatus::Ok);
        assert!(p.abs() < 1e-12, "coincidence {p}");
        assert_eq!(qpsim_state_probability(s, [2u32, 0].as_ptr(), 2, &mut p), QpsimStatus::Ok);
        assert!((p - 0.5).abs() < 1e-12);
        let mut n = 0.0;
        assert_eq!(qpsim_state_norm_sqr(s, &mut n), QpsimStatus::Ok);
        assert!((n - 1.0).abs() < 1e-12);

        let eta = [0.5, 0.5];
        assert_eq!(qpsim_state_click_probability(s, [0usize].as_ptr(), 1, [1usize].as_ptr(), 1, eta.as_ptr(), &mut p), QpsimStatus::Ok);
        // Both photons on one detector: 0.5 × (1 − 0.5²).
        assert!((p - 0.375).abs() < 1e-12, "{p}");

        assert_eq!(qpsim_state_post_select(s, [0usize].as_ptr(), 1, [1usize].as_ptr(), 1, &mut p), QpsimStatus::Ok);
        assert!((p - 0.5).abs() < 1e-12);
        assert_eq!(qpsim_state_post_select(s, [1usize].as_ptr(), 1, ptr::null(), 0, &mut p), QpsimStatus::Numeric);
        assert_eq!(p, 0.0);
        qpsim_state_free(s);
    }
}

#[test]
fn failures_report_status_and_message() {
    unsafe {
        assert!(qpsim_state_vacuum(0).is_null());
        assert_eq!(qpsim_state_add_photon(ptr::null_mut(), 0), QpsimStatus::NullPointer);
        assert!(last_error().contains("null"));
        let s = qpsim_state_vacuum(2);
        assert_eq!(qpsim_state_add_photon(s, 5), QpsimStatus::InvalidArgument);
        let re = [1.0, 1.0, 1.0, 1.0];
        let im = [0.0; 4];
        let map = [0usize, 1];
        assert_eq!(qpsim_state_apply_unitary(s, re.as_ptr(), im.as_ptr(), 2, map.as_ptr()), QpsimStatus::InvalidArgument);
        assert!(!last_error().is_empty());
        let dup = [0usize, 0];
        let eye = [1.0, 0.0, 0.0, 1.0];
        assert_eq!(qpsim_state_apply_unitary(s, eye.as_ptr(), im.as_ptr(), 2, dup.as_ptr()), QpsimStatus::InvalidArgument);
        assert_eq!(qpsim_state_norm_sqr(s, ptr::null_mut()), QpsimStatus::NullPointer);
        assert_eq!(qpsim_state_probability(s, [0u32].as_ptr(), 1, &mut 0.0), QpsimStatus::InvalidArgument);
        qpsim_state_free(s);
        qpsim_state_free(ptr::null_mut());
    }
}

#[test]
fn physics_helpers() {
    let mut v = 0.0;
    unsafe {
        assert_eq!(qpsim_ring_fsr_ghz(27.68, 4.31, &mut v), QpsimStatus::Ok);
        assert!((v / 400.0 - 1.0).abs() < 0.01, "{v}");
        assert_eq!(qpsim_amzi_fsr_ghz(217.372, 4.31, &mut v), QpsimStatus::Ok);
        assert!((v / 320.0 - 1.0).abs() < 0.01, "{v}");
        assert_eq!(qpsim_heralding_efficiency(0.974, 0.9829, &mut v), QpsimStatus::Ok);
        assert!((v - 0.4977).abs() < 5e-4);
        assert_eq!(qpsim_heralding_efficiency(1.5, 0.9, &mut v), QpsimStatus::InvalidArgument);
        assert_eq!(qpsim_witness_value(0.683), 0.5 - 0.683);

        let mut z = [0.0; 8];
        z[0] = 0.5;
        z[7] = 0.5;
        let x: Vec<f64> = (0..8u32).map(|b| if b.count_ones() % 2 == 0 { 0.25 } else { 0.0 }).collect();
        assert_eq!(qpsim_gme_concurrence_bound(3, z.as_ptr(), x.as_ptr(), &mut v), QpsimStatus::Ok);
        assert!((v - 1.0).abs() < 1e-9, "{v}");
        assert_eq!(qpsim_gme_concurrence_bound(2, z.as_ptr(), x.as_ptr(), &mut v), QpsimStatus::InvalidArgument);

        let (mut f, mut p) = (0.0, 0.0);
        for minus in [0, 1] {
            assert_eq!(qpsim_teleport_ideal(1.0, 0.3, minus, &mut f, &mut p), QpsimStatus::Ok);
            assert!((f - 1.0).abs() < 1e-9 && (p - 0.125).abs() < 1e-9, "{f} {p}");
        }
        assert_eq!(qpsim_teleport_ideal(f64::NAN, 0.0, 0, &mut f, &mut p), QpsimStatus::InvalidArgument);
    }
    let ver = unsafe { CStr::from_ptr(qpsim_version()) }.to_str().unwrap();
    assert_eq!(ver, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/qpsim.h")).unwrap();
    for name in [
        "qpsim_last_error",
        "qpsim_version",
        "qpsim_state_vacuum",
        "qpsim_state_free",
        "qpsim_state_add_photon",
        "qpsim_state_apply_unitary",
        "qpsim_state_norm_sqr",
        "qpsim_state_probability",
        "qpsim_state_post_select",
        "qpsim_state_click_probability",
        "qpsim_ring_fsr_ghz",
        "qpsim_amzi_fsr_ghz",
        "qpsim_heralding_efficiency",
        "qpsim_witness_value",
        "qpsim_gme_concurrence_bound",
        "qpsim_teleport_ideal",
    ] {
        assert!(header.contains(&format!("{name}(")), "{name} missing from header");
    }
    assert!(header.contains("typedef struct QpsimState QpsimState;"));
    assert!(header.contains("QPSIM_STATUS_OK = 0"));
}
