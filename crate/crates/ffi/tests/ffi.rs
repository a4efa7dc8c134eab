use std::ffi::{CStr, CString};
use std::ptr;

use timerev_ffi::*;

fn model(json: &str) -> *mut TrModel {
    let j = CString::new(json).unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { tr_model_from_json(j.as_ptr(), &mut m) }, TrStatus::Ok);
    assert!(!m.is_null());
    m
}

fn last_error() -> String {
    let p = tr_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

const SHIFTED_OU: &str = r#"{"type": "ou", "dim": 1, "init": {"mean": [1.0], "cov": [[0.5]]}}"#;

#[test]
fn reversed_drift_of_shifted_ou() {
    let m = model(SHIFTED_OU);
    let mut r = ptr::null_mut();
    assert_eq!(unsafe { tr_reversal_new(m, 1.0, &mut r) }, TrStatus::Ok);
    let x = [0.0];
    let mut out = [0.0];
    let mut flags = 7u32;
    assert_eq!(unsafe { tr_reversed_drift(r, 0.0, x.as_ptr(), 1, out.as_mut_ptr(), &mut flags) }, TrStatus::Ok);
    assert!((out[0] - 2.0 * (-1f64).exp()).abs() < 1e-9);
    assert_eq!(flags, 0);
    let s = unsafe { tr_reversed_drift(r, 0.0, x.as_ptr(), 2, out.as_mut_ptr(), ptr::null_mut()) };
    assert_eq!(s, TrStatus::Parameter);
    assert!(last_error().contains("dimension"));
    unsafe {
        tr_reversal_free(r);
        tr_model_free(m);
    }
}

#[test]
fn simulate_copy_flip_and_round_trip() {
    let m = model(SHIFTED_OU);
    let mut e = ptr::null_mut();
    assert_eq!(unsafe { tr_simulate(m, 1.0, 10, 50, 3, &mut e) }, TrStatus::Ok);
    let (mut dim, mut n, mut steps, mut h) = (0usize, 0usize, 0usize, 0.0);
    assert_eq!(unsafe { tr_ensemble_shape(e, &mut dim, &mut n, &mut steps, &mut h) }, TrStatus::Ok);
    assert_eq!((dim, n, steps, h), (1, 50, 10, 1.0));
    let mut buf = vec![0.0; 50 * 11];
    assert_eq!(unsafe { tr_ensemble_copy(e, buf.as_mut_ptr(), 10) }, TrStatus::BufferTooSmall);
    assert_eq!(unsafe { tr_ensemble_copy(e, buf.as_mut_ptr(), buf.len()) }, TrStatus::Ok);

    let mut f = ptr::null_mut();
    assert_eq!(unsafe { tr_ensemble_flip(e, &mut f) }, TrStatus::Ok);
    let mut fbuf = vec![0.0; buf.len()];
    assert_eq!(unsafe { tr_ensemble_copy(f, fbuf.as_mut_ptr(), fbuf.len()) }, TrStatus::Ok);
    for p in 0..50 {
        for i in 0..=10 {
            assert_eq!(fbuf[p * 11 + i], buf[p * 11 + 10 - i]);
        }
    }

    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("e.bin").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { tr_ensemble_write(e, path.as_ptr()) }, TrStatus::Ok);
    let mut back = ptr::null_mut();
    assert_eq!(unsafe { tr_ensemble_read(path.as_ptr(), &mut back) }, TrStatus::Ok);
    let mut bbuf = vec![0.0; buf.len()];
    assert_eq!(unsafe { tr_ensemble_copy(back, bbuf.as_mut_ptr(), bbuf.len()) }, TrStatus::Ok);
    assert_eq!(bbuf, buf);
    unsafe {
        tr_ensemble_free(back);
        tr_ensemble_free(f);
        tr_ensemble_free(e);
        tr_model_free(m);
    }
}

#[test]
fn entropy_report_and_walk_entropy() {
    let m = model(SHIFTED_OU);
    let mut e = ptr::null_mut();
    assert_eq!(unsafe { tr_simulate(m, 1.0, 400, 20, 1, &mut e) }, TrStatus::Ok);
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { tr_entropy_report_json(m, e, &mut s) }, TrStatus::Ok);
    let json: serde_json::Value = serde_json::from_str(unsafe { CStr::from_ptr(s) }.to_str().unwrap()).unwrap();
    let rel = json["relative_to_initial"]["value"].as_f64().unwrap();
    assert!(rel.abs() < 1e-5, "{rel}");
    unsafe {
        tr_string_free(s);
        tr_ensemble_free(e);
        tr_model_free(m);
    }

    let w = model(r#"{"type": "cycle", "n": 4, "rate_cw": 2.0, "rate_ccw": 1.0}"#);
    let mut h = 0.0;
    assert_eq!(unsafe { tr_rw_relative_entropy(w, 1.0, 10, &mut h) }, TrStatus::Ok);
    assert!((h + 1.0).abs() < 1e-9);
    let mut e = ptr::null_mut();
    assert_eq!(unsafe { tr_simulate(w, 1.0, 10, 5, 0, &mut e) }, TrStatus::WrongModelKind);
    unsafe { tr_model_free(w) };
}

#[test]
fn errors_are_reported() {
    let bad = CString::new(r#"{"type": "ou", "dim": 0}"#).unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { tr_model_from_json(bad.as_ptr(), &mut m) }, TrStatus::Parameter);
    assert!(m.is_null());
    assert!(!last_error().is_empty());
    let junk = CString::new("{").unwrap();
    assert_eq!(unsafe { tr_model_from_json(junk.as_ptr(), &mut m) }, TrStatus::Format);
    assert_eq!(unsafe { tr_model_from_json(ptr::null(), &mut m) }, TrStatus::NullPointer);
    let mut d = 0usize;
    assert_eq!(unsafe { tr_model_dim(ptr::null(), &mut d) }, TrStatus::NullPointer);
    assert_eq!(tr_h(0.0), 1.0);
    assert_eq!(tr_h(1.0), 0.0);
    assert!(tr_h(-1.0).is_infinite());
    let v = unsafe { CStr::from_ptr(tr_version()) }.to_str().unwrap();
    assert!(!v.is_empty());
}

#[test]
fn descriptor_round_trips_through_json() {
    let m = model(r#"{"type": "bm", "dim": 2}"#);
    let mut d = 0usize;
    assert_eq!(unsafe { tr_model_dim(m, &mut d) }, TrStatus::Ok);
    assert_eq!(d, 2);
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { tr_model_to_json(m, &mut s) }, TrStatus::Ok);
    let text = unsafe { CStr::from_ptr(s) }.to_str().unwrap().to_string();
    assert!(text.contains("\"bm\""));
    unsafe {
        tr_string_free(s);
        tr_model_free(m);
    }
}

#[test]
fn header_declares_every_entry_point() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/timerev.h")).unwrap();
    for f in [
        "tr_last_error", "tr_version", "tr_string_free", "tr_h", "tr_model_from_json", "tr_model_free",
        "tr_model_dim", "tr_model_to_json", "tr_simulate", "tr_ensemble_free", "tr_ensemble_shape",
        "tr_ensemble_copy", "tr_ensemble_flip", "tr_ensemble_write", "tr_ensemble_read", "tr_reversal_new",
        "tr_reversal_free", "tr_reversed_drift", "tr_rw_relative_entropy", "tr_entropy_report_json",
        "tr_run_config",
    ] {
        assert!(header.contains(&format!("{f}(")), "{f} missing from header");
    }
    assert!(header.contains("TR_STATUS_BUFFER_TOO_SMALL"));
}
