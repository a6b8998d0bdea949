use std::ffi::{CStr, CString};
use std::ptr;

use mrwlab_ffi::*;

fn zoo(name: &str, params: Option<&str>) -> *mut MrwModel {
    let name = CString::new(name).unwrap();
    let params = params.map(|p| CString::new(p).unwrap());
    let mut model = ptr::null_mut();
    let status = unsafe {
        mrw_model_from_zoo(
            name.as_ptr(),
            params.as_ref().map_or(ptr::null(), |p| p.as_ptr()),
            &mut model,
        )
    };
    assert_eq!(status, MrwStatus::Ok, "{}", last_error());
    model
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(mrw_last_error_message()) }
        .to_string_lossy()
        .into_owned()
}

#[test]
fn two_cycle_through_the_abi() {
    let model = zoo("two_cycle", None);
    unsafe {
        let mut n = 0usize;
        assert_eq!(mrw_model_num_states(model, &mut n), MrwStatus::Ok);
        assert_eq!(n, 2);
        let mut pi = [0.0; 2];
        assert_eq!(mrw_model_stationary(model, pi.as_mut_ptr(), 2), MrwStatus::Ok);
        assert_eq!(pi, [0.5, 0.5]);
        let mut mu = 0.0;
        assert_eq!(mrw_model_drift(model, &mut mu), MrwStatus::Ok);
        assert!((mu - 0.5).abs() < 1e-15);
        let (mut ladder, mut c) = ([0.0; 2], 0.0);
        assert_eq!(
            mrw_ladder_stationary(model, ladder.as_mut_ptr(), 2, &mut c),
            MrwStatus::Ok
        );
        assert!((c - 0.5).abs() < 1e-12);
        assert!(ladder[0].abs() < 1e-12 && (ladder[1] - 1.0).abs() < 1e-12);
        let mut residual = 1.0;
        assert_eq!(mrw_factorization_residual(model, &mut residual), MrwStatus::Ok);
        assert!(residual.abs() < 1e-12);
        mrw_model_free(model);
    }
}

#[test]
fn model_from_json() {
    let json = CString::new(
        r#"{"states": ["x"], "transitions": [{"from": 0, "to": 0, "prob": 1,
            "increment": {"support": [-1, 1], "weights": [0.4, 0.6]}}], "lattice_span": 1}"#,
    )
    .unwrap();
    let mut model = ptr::null_mut();
    unsafe {
        assert_eq!(mrw_model_from_json(json.as_ptr(), &mut model), MrwStatus::Ok);
        let (mut ladder, mut c) = ([0.0; 1], 0.0);
        assert_eq!(
            mrw_ladder_stationary(model, ladder.as_mut_ptr(), 1, &mut c),
            MrwStatus::Ok
        );
        assert!((c - 0.2).abs() < 1e-9);
        mrw_model_free(model);
    }
}

#[test]
fn errors_map_to_status_codes() {
    unsafe {
        let mut model = ptr::null_mut();
        let bad = CString::new(r#"{"states": ["a"], "transitions": [], "lattice_span": 1}"#).unwrap();
        assert_eq!(mrw_model_from_json(bad.as_ptr(), &mut model), MrwStatus::ConfigError);
        assert!(model.is_null());
        assert!(!last_error().is_empty());

        let name = CString::new("no_such_model").unwrap();
        assert_eq!(
            mrw_model_from_zoo(name.as_ptr(), ptr::null(), &mut model),
            MrwStatus::ConfigError
        );
        assert!(last_error().contains("no_such_model"), "{}", last_error());

        assert_eq!(mrw_model_from_json(ptr::null(), &mut model), MrwStatus::NullPointer);
        assert_eq!(mrw_model_drift(ptr::null(), ptr::null_mut()), MrwStatus::NullPointer);

        let r2 = zoo("remark2", None);
        let mut out = [0.0; 2];
        assert_eq!(
            mrw_ladder_stationary(r2, out.as_mut_ptr(), 2, ptr::null_mut()),
            MrwStatus::NonConvergence
        );
        mrw_model_free(r2);

        let walk = zoo("simple_rw", Some(r#"{"p": 0.7}"#));
        assert_eq!(
            mrw_ladder_stationary(walk, out.as_mut_ptr(), 0, ptr::null_mut()),
            MrwStatus::BufferTooSmall
        );
        mrw_model_free(walk);
        mrw_model_free(ptr::null_mut());
        mrw_string_free(ptr::null_mut());
    }
}

const SMALL_BUDGET: &str = r#"{"mc": {"occupation_replicates": 10, "occupation_epochs": 100,
    "sigma0_replicates": 2000, "n_back": 100, "hit_replicates": 10, "hit_horizon": 2000}}"#;

#[test]
fn verify_report_is_json_and_deterministic() {
    let model = zoo("random_lattice", Some(r#"{"seed": 5, "drift_target": 0.4}"#));
    let cfg = CString::new(SMALL_BUDGET).unwrap();
    let mut texts = Vec::new();
    for _ in 0..2 {
        let mut out = ptr::null_mut();
        let status = unsafe { mrw_verify_json(model, cfg.as_ptr(), 17, &mut out) };
        assert_eq!(status, MrwStatus::Ok, "{}", last_error());
        texts.push(unsafe { CStr::from_ptr(out) }.to_string_lossy().into_owned());
        unsafe { mrw_string_free(out) };
    }
    assert_eq!(texts[0], texts[1]);
    let v: serde_json::Value = serde_json::from_str(&texts[0]).unwrap();
    assert_eq!(v["pass"], true);
    assert_eq!(v["seed"], 17);
    unsafe { mrw_model_free(model) };
}

#[test]
fn verify_flags_injected_perturbation() {
    let model = zoo("two_cycle", None);
    let cfg = CString::new(r#"{"inject_perturbation": 0.01, "mc": {"sigma0_replicates": 100}}"#).unwrap();
    let mut out = ptr::null_mut();
    let status = unsafe { mrw_verify_json(model, cfg.as_ptr(), 1, &mut out) };
    assert_eq!(status, MrwStatus::IdentityFailure);
    assert!(!out.is_null());
    assert!(last_error().contains("wiener_hopf"));
    unsafe {
        mrw_string_free(out);
        mrw_model_free(model);
    }
}

#[test]
fn version_is_nonempty() {
    let v = unsafe { CStr::from_ptr(mrw_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}
