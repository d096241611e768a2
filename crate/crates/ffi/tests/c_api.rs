use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use newton_infer::inference::{coverage_simulation, exact_solver, plugin_sandwich_lowdim};
use newton_infer::model::{generate_sparse_highdim, LossModel};
use newton_infer::presets::{preset, Method, PresetName};
use newton_infer::rng::{derive_seed, tag};
use newton_infer_ffi::*;

fn last_error() -> String {
    let p = ni_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn preset_dataset(name: &str, seed: u64) -> *mut NiDataset {
    let name = CString::new(name).unwrap();
    let mut d = ptr::null_mut();
    assert_eq!(unsafe { ni_dataset_from_preset(name.as_ptr(), seed, &mut d) }, NiStatus::Ok);
    d
}

#[test]
fn oracle_inference_matches_the_library() {
    let d = preset_dataset("lin1", 5);
    let (n, p) = unsafe { (ni_dataset_n(d), ni_dataset_p(d)) };
    assert_eq!((n, p), (100, 10));

    let cfg = CString::new(r#"{"method": "oracle"}"#).unwrap();
    let mut r = ptr::null_mut();
    assert_eq!(unsafe { ni_infer(d, cfg.as_ptr(), &mut r) }, NiStatus::Ok);
    assert_eq!(unsafe { ni_result_p(r) }, 10);

    let data = preset(PresetName::Lin1).data.generate(derive_seed(5, 0, tag::DATA)).unwrap();
    let theta = exact_solver(LossModel::SquaredLinear, &data, &[0.0; 10]).unwrap();
    let cov = plugin_sandwich_lowdim(LossModel::SquaredLinear, &data, &theta).unwrap();

    let mut est = vec![0.0; 10];
    assert_eq!(unsafe { ni_result_estimate(r, est.as_mut_ptr(), 10) }, NiStatus::Ok);
    assert_eq!(est, theta);
    let mut flat = vec![0.0; 100];
    assert_eq!(unsafe { ni_result_covariance(r, flat.as_mut_ptr(), 100) }, NiStatus::Ok);
    assert_eq!(flat[3 * 10 + 7], cov.matrix[(3, 7)]);
    let (mut lo, mut hi) = (vec![0.0; 10], vec![0.0; 10]);
    assert_eq!(unsafe { ni_result_intervals(r, lo.as_mut_ptr(), hi.as_mut_ptr(), 10) }, NiStatus::Ok);
    let mut pv = vec![0.0; 10];
    assert_eq!(unsafe { ni_result_pvalues(r, pv.as_mut_ptr(), 10) }, NiStatus::Ok);
    for j in 0..10 {
        assert!(lo[j] < est[j] && est[j] < hi[j]);
        assert!((0.0..=1.0).contains(&pv[j]));
        // an interval excluding zero means a p-value below 5%
        assert_eq!(lo[j] > 0.0 || hi[j] < 0.0, pv[j] < 0.05);
    }
    unsafe {
        ni_result_free(r);
        ni_dataset_free(d);
    }
}

#[test]
fn caller_data_and_stochastic_method() {
    let (n, p) = (60usize, 3usize);
    let x: Vec<f64> = (0..n * p).map(|k| ((k * 37 % 101) as f64 / 50.0) - 1.0).collect();
    let y: Vec<f64> = (0..n).map(|i| x[i * p] - 0.5 * x[i * p + 2] + 0.1 * ((i % 7) as f64 - 3.0)).collect();
    let mut d = ptr::null_mut();
    assert_eq!(unsafe { ni_dataset_new(x.as_ptr(), y.as_ptr(), n, p, &mut d) }, NiStatus::Ok);
    let cfg = CString::new(r#"{"newton": {"outer_iterations": 30, "inner_iterations": 50}, "seed": 2}"#).unwrap();
    let mut r = ptr::null_mut();
    assert_eq!(unsafe { ni_infer(d, cfg.as_ptr(), &mut r) }, NiStatus::Ok, "{}", last_error());
    let mut est = vec![0.0; p];
    assert_eq!(unsafe { ni_result_estimate(r, est.as_mut_ptr(), p) }, NiStatus::Ok);
    assert!((est[0] - 1.0).abs() < 0.2 && (est[2] + 0.5).abs() < 0.2, "{est:?}");
    unsafe {
        ni_result_free(r);
        ni_dataset_free(d);
    }
}

#[test]
fn highdim_results_have_pvalues_but_no_matrix() {
    let (data, _) = generate_sparse_highdim(40, 30, 0, 0.0, 0.7, 3).unwrap();
    let mut d = ptr::null_mut();
    assert_eq!(
        unsafe { ni_dataset_new(data.x().as_ptr(), data.y().as_ptr(), 40, 30, &mut d) },
        NiStatus::Ok
    );
    let cfg = CString::new(r#"{"preset": "highdim-null", "highdim": {"outer_iterations": 20}}"#).unwrap();
    let mut r = ptr::null_mut();
    assert_eq!(unsafe { ni_infer(d, cfg.as_ptr(), &mut r) }, NiStatus::Ok, "{}", last_error());
    let mut pv = vec![0.0; 30];
    assert_eq!(unsafe { ni_result_pvalues(r, pv.as_mut_ptr(), 30) }, NiStatus::Ok);
    assert!(pv.iter().all(|v| (0.0..=1.0).contains(v)));
    let mut flat = vec![0.0; 900];
    assert_eq!(unsafe { ni_result_covariance(r, flat.as_mut_ptr(), 900) }, NiStatus::Unavailable);
    assert!(last_error().contains("variances"));
    unsafe {
        ni_result_free(r);
        ni_dataset_free(d);
    }
}

#[test]
fn errors_are_reported() {
    let mut d = ptr::null_mut();
    assert_eq!(
        unsafe { ni_dataset_new(ptr::null(), ptr::null(), 1, 1, &mut d) },
        NiStatus::NullPointer
    );
    assert!(last_error().contains("`x`"));

    let bad = CString::new("lin9").unwrap();
    assert_eq!(unsafe { ni_dataset_from_preset(bad.as_ptr(), 0, &mut d) }, NiStatus::Config);
    assert!(last_error().contains("lin9"));

    let nan = [f64::NAN];
    assert_eq!(unsafe { ni_dataset_new(nan.as_ptr(), nan.as_ptr(), 1, 1, &mut d) }, NiStatus::Numeric);
    assert!(last_error().contains("non-finite"));

    let d = preset_dataset("lin1", 0);
    let mut r = ptr::null_mut();
    for (json, status) in [
        (r#"{"newton": {"tau_0": 1}}"#, NiStatus::Config),
        (r#"{"newton": {"d_o": 0.4}}"#, NiStatus::Config),
        ("not json", NiStatus::Config),
    ] {
        let cfg = CString::new(json).unwrap();
        assert_eq!(unsafe { ni_infer(d, cfg.as_ptr(), &mut r) }, status, "{json}");
        assert!(r.is_null());
    }
    assert!(last_error().contains("expected"));

    let cfg = CString::new(r#"{"method": "oracle"}"#).unwrap();
    assert_eq!(unsafe { ni_infer(d, cfg.as_ptr(), &mut r) }, NiStatus::Ok);
    let mut short = vec![0.0; 3];
    assert_eq!(unsafe { ni_result_estimate(r, short.as_mut_ptr(), 3) }, NiStatus::BufferSize);
    assert_eq!(unsafe { ni_result_estimate(ptr::null(), short.as_mut_ptr(), 3) }, NiStatus::NullPointer);
    assert_eq!(unsafe { ni_result_p(ptr::null()) }, 0);
    unsafe {
        ni_result_free(r);
        ni_dataset_free(d);
        ni_dataset_free(ptr::null_mut());
        ni_result_free(ptr::null_mut());
    }
}

#[test]
fn coverage_matches_the_library() {
    let cfg = CString::new(r#"{"method": "oracle", "n_sims": 20}"#).unwrap();
    let (mut c, mut l, mut f) = (0.0, 0.0, 0usize);
    assert_eq!(unsafe { ni_coverage(cfg.as_ptr(), 4, 2, &mut c, &mut l, &mut f) }, NiStatus::Ok);
    let r = coverage_simulation(&preset(PresetName::Lin1), 20, 4, Method::Oracle).unwrap();
    assert_eq!((c, l, f), (r.coverage, r.avg_length, r.failures));
    assert_eq!(
        unsafe { ni_coverage(cfg.as_ptr(), 4, 1, ptr::null_mut(), &mut l, &mut f) },
        NiStatus::NullPointer
    );
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(ni_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

fn target_dir() -> PathBuf {
    // target/<profile>/deps/<test binary>
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

const C_PROGRAM: &str = r#"
#include <stdio.h>
#include "newton_infer.h"

int main(void) {
    NiDataset *d = NULL;
    NiResult *r = NULL;
    double est[10], lo[10], hi[10];
    if (ni_dataset_from_preset("lin1", 5, &d) != NI_STATUS_OK) return 10;
    if (ni_infer(d, "{\"method\": \"oracle\"}", &r) != NI_STATUS_OK) return 11;
    if (ni_result_estimate(r, est, 10) != NI_STATUS_OK) return 12;
    if (ni_result_intervals(r, lo, hi, 10) != NI_STATUS_OK) return 13;
    if (ni_result_estimate(r, est, 9) != NI_STATUS_BUFFER_SIZE) return 14;
    if (ni_last_error() == NULL) return 15;
    for (int j = 0; j < 10; j++) printf("%.17g %.17g %.17g\n", est[j], lo[j], hi[j]);
    ni_result_free(r);
    ni_dataset_free(d);
    return 0;
}
"#;

#[test]
fn header_compiles_and_links_from_c() {
    let header_dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include");
    assert!(header_dir.join("newton_infer.h").exists());
    let lib_dir = target_dir();
    assert!(
        lib_dir.join("libnewton_infer_ffi.so").exists(),
        "shared library missing in {}",
        lib_dir.display()
    );
    let work = tempfile::tempdir().unwrap();
    let src = work.path().join("smoke.c");
    std::fs::write(&src, C_PROGRAM).unwrap();
    let exe = work.path().join("smoke");
    let status = Command::new("cc")
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(&header_dir)
        .arg(&src)
        .arg("-L")
        .arg(&lib_dir)
        .arg("-lnewton_infer_ffi")
        .arg("-o")
        .arg(&exe)
        .status()
        .expect("C compiler available");
    assert!(status.success());
    let out = Command::new(&exe).env("LD_LIBRARY_PATH", &lib_dir).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let text = String::from_utf8(out.stdout).unwrap();
    let data = preset(PresetName::Lin1).data.generate(derive_seed(5, 0, tag::DATA)).unwrap();
    let theta = exact_solver(LossModel::SquaredLinear, &data, &[0.0; 10]).unwrap();
    for (j, line) in text.lines().enumerate() {
        let v: Vec<f64> = line.split(' ').map(|s| s.parse().unwrap()).collect();
        assert_eq!(v[0], theta[j]);
        assert!(v[1] < v[0] && v[0] < v[2]);
    }
    assert_eq!(text.lines().count(), 10);
}
