//! Exercises every exported symbol through the C ABI: status codes, out
//! pointers, handle lifecycle, and the JSON train runner.

use std::ffi::{c_char, CStr, CString};
use std::ptr;

use sparsagg_ffi::*;

#[test]
fn version_and_prime_are_exposed() {
    let version = unsafe { CStr::from_ptr(sparsagg_version()) };
    let text = version.to_str().unwrap();
    assert!(text.contains('.'), "unexpected version {text:?}");
    assert_eq!(sparsagg_field_prime(), (1u64 << 61) - 1);
}

#[test]
fn accountant_epsilon_matches_library_values() {
    let (mut eps, mut alpha, mut tau) = (0.0f64, 0u64, 0.0f64);
    let status = unsafe {
        sparsagg_accountant_epsilon(0.1, 0.8, 0.01, 90, &mut eps, &mut alpha, &mut tau)
    };
    assert_eq!(status, SparsaggStatus::Ok);
    assert!((eps - 18.799279386).abs() < 1e-6);
    assert_eq!(alpha, 2);
    assert!((tau - 0.157712324444581).abs() < 1e-12);
}

#[test]
fn accountant_sigma_matches_the_closed_form() {
    let mut sigma_sq = 0.0f64;
    let status =
        unsafe { sparsagg_accountant_sigma_sq(1.0, 0.01, 0.1, 10, &mut sigma_sq) };
    assert_eq!(status, SparsaggStatus::Ok);
    assert!((sigma_sq - 7.14723826038333).abs() < 1e-12);
}

#[test]
fn accountant_rejects_bad_arguments_and_null_pointers() {
    let (mut eps, mut alpha, mut tau) = (0.0f64, 0u64, 0.0f64);
    let status = unsafe {
        sparsagg_accountant_epsilon(0.0, 0.8, 0.01, 90, &mut eps, &mut alpha, &mut tau)
    };
    assert_eq!(status, SparsaggStatus::InvalidArgument);
    let status = unsafe {
        sparsagg_accountant_epsilon(0.1, 0.8, 0.01, 90, ptr::null_mut(), &mut alpha, &mut tau)
    };
    assert_eq!(status, SparsaggStatus::NullArgument);
    let status = unsafe { sparsagg_accountant_sigma_sq(1.0, 0.01, 0.1, 10, ptr::null_mut()) };
    assert_eq!(status, SparsaggStatus::NullArgument);
    let mut sigma_sq = 0.0f64;
    let status = unsafe { sparsagg_accountant_sigma_sq(100.0, 0.01, 0.1, 10, &mut sigma_sq) };
    assert_eq!(status, SparsaggStatus::InvalidArgument);
}

#[test]
fn ks_helpers_match_hand_values() {
    let mut crit = 0.0f64;
    let status = unsafe { sparsagg_ks_critical(0.05, 10_000, &mut crit) };
    assert_eq!(status, SparsaggStatus::Ok);
    assert!((crit - 0.0192064558264).abs() < 1e-10);

    let a = [1i64, 1, 2, 4];
    let b = [1i64, 3, 3, 5];
    let mut stat = 0.0f64;
    let status =
        unsafe { sparsagg_ks_statistic(a.as_ptr(), a.len(), b.as_ptr(), b.len(), &mut stat) };
    assert_eq!(status, SparsaggStatus::Ok);
    assert!((stat - 0.5).abs() < 1e-12);

    let status = unsafe { sparsagg_ks_critical(2.0, 10, &mut crit) };
    assert_eq!(status, SparsaggStatus::InvalidArgument);
    let status = unsafe { sparsagg_ks_statistic(a.as_ptr(), 0, b.as_ptr(), b.len(), &mut stat) };
    assert_eq!(status, SparsaggStatus::InvalidArgument);
    let status =
        unsafe { sparsagg_ks_statistic(ptr::null(), 4, b.as_ptr(), b.len(), &mut stat) };
    assert_eq!(status, SparsaggStatus::NullArgument);
}

#[test]
fn sampler_lifecycle_is_deterministic_and_calibrated() {
    let draw = |seed: u64, n: usize| -> Vec<i64> {
        let mut handle: *mut SparsaggSampler = ptr::null_mut();
        let status = unsafe { sparsagg_sampler_new(2.5, seed, &mut handle) };
        assert_eq!(status, SparsaggStatus::Ok);
        let mut out = vec![0i64; n];
        let status = unsafe { sparsagg_sampler_draw(handle, out.as_mut_ptr(), n) };
        assert_eq!(status, SparsaggStatus::Ok);
        unsafe { sparsagg_sampler_free(handle) };
        out
    };
    let a = draw(11, 100_000);
    let b = draw(11, 100_000);
    assert_eq!(a, b);
    let c = draw(12, 100_000);
    assert_ne!(a, c);

    let n = a.len() as f64;
    let mean = a.iter().map(|&v| v as f64).sum::<f64>() / n;
    let var = a.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / n;
    assert!(mean.abs() < 0.05, "mean {mean}");
    assert!((var - 6.25).abs() < 0.4, "variance {var}");

    let mut handle: *mut SparsaggSampler = ptr::null_mut();
    let status = unsafe { sparsagg_sampler_new(-1.0, 0, &mut handle) };
    assert_eq!(status, SparsaggStatus::InvalidArgument);
    assert!(handle.is_null());
    unsafe { sparsagg_sampler_free(ptr::null_mut()) };
}

#[test]
fn train_runner_round_trips_json() {
    let config = CString::new(
        r#"{"n":3,"dim":6,"rounds":2,"eta_l":0.1,"clip":1.0,"k":6,"mode":"semi_honest","seed":5}"#,
    )
    .unwrap();
    let mut out: *mut c_char = ptr::null_mut();
    let status = unsafe { sparsagg_train_json(config.as_ptr(), &mut out) };
    assert_eq!(status, SparsaggStatus::Ok);
    let text = unsafe { CStr::from_ptr(out) }.to_str().unwrap().to_owned();
    unsafe { sparsagg_string_free(out) };
    let report: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(report["w"].as_array().unwrap().len(), 6);
    assert_eq!(report["metrics"].as_array().unwrap().len(), 2);
    assert!(report["abort"].is_null());
}

#[test]
fn train_runner_surfaces_aborts_and_bad_input() {
    let config = CString::new(
        r#"{"n":2,"dim":4,"rounds":3,"eta_l":0.1,"clip":1.0,"k":4,"mode":"malicious",
            "adversary":{"kind":"share_tamper","party":1},"seed":5}"#,
    )
    .unwrap();
    let mut out: *mut c_char = ptr::null_mut();
    let status = unsafe { sparsagg_train_json(config.as_ptr(), &mut out) };
    assert_eq!(status, SparsaggStatus::Abort);
    let text = unsafe { CStr::from_ptr(out) }.to_str().unwrap().to_owned();
    unsafe { sparsagg_string_free(out) };
    let report: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(report["abort"], "mac");
    assert_eq!(report["metrics"].as_array().unwrap().len(), 1);

    let bad = CString::new("{not json").unwrap();
    let status = unsafe { sparsagg_train_json(bad.as_ptr(), &mut out) };
    assert_eq!(status, SparsaggStatus::InvalidJson);

    let invalid = CString::new(
        r#"{"n":0,"dim":4,"rounds":1,"eta_l":0.1,"clip":1.0,"k":4,"mode":"semi_honest"}"#,
    )
    .unwrap();
    let status = unsafe { sparsagg_train_json(invalid.as_ptr(), &mut out) };
    assert_eq!(status, SparsaggStatus::InvalidArgument);

    let not_utf8 = CString::new([0x7bu8, 0xff, 0x7d].as_slice()).unwrap();
    let status = unsafe { sparsagg_train_json(not_utf8.as_ptr(), &mut out) };
    assert_eq!(status, SparsaggStatus::InvalidUtf8);

    let status = unsafe { sparsagg_train_json(ptr::null(), &mut out) };
    assert_eq!(status, SparsaggStatus::NullArgument);
    unsafe { sparsagg_string_free(ptr::null_mut()) };
}
