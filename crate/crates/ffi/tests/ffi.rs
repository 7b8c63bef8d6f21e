use mipt_shadows_ffi::*;
use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

fn last_error() -> String {
    let p = ms_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(ms_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn spec_lifecycle_and_moments() {
    unsafe {
        let mut spec = ptr::null_mut();
        assert_eq!(ms_spec_new(3, 6, 0.3, MsGateEnsemble::Clifford, MsPrescramble::GlobalClifford, &mut spec), MsStatus::Ok);
        assert!(!spec.is_null());
        assert!(ms_last_error().is_null());

        let mut hash = [0 as std::ffi::c_char; 65];
        assert_eq!(ms_spec_hash(spec, hash.as_mut_ptr()), MsStatus::Ok);
        assert_eq!(CStr::from_ptr(hash.as_ptr()).to_bytes().len(), 64);

        let mut a = MsMoments::default();
        let mut b = MsMoments::default();
        assert_eq!(ms_moments(spec, MsEngine::Stabilizer, 200, 7, &mut a), MsStatus::Ok);
        assert_eq!(ms_moments(spec, MsEngine::Dense, 200, 7, &mut b), MsStatus::Ok);
        assert!(a.purity > 1.0 / 8.0 && a.purity <= 1.0);
        assert!((a.purity - b.purity).abs() < 1e-10);

        let mut norms = MsShadowNorms::default();
        assert_eq!(ms_shadow_norms(spec, MsEngine::Dense, 50, 7, &mut norms), MsStatus::Ok);
        assert!(norms.harmonic > 0.0 && norms.harmonic <= norms.geometric + 1e-9);
        ms_spec_free(spec);
    }
}

#[test]
fn errors_map_to_status_codes() {
    unsafe {
        let mut spec = ptr::null_mut();
        assert_eq!(ms_spec_new(3, 6, 1.5, MsGateEnsemble::Haar, MsPrescramble::None, &mut spec), MsStatus::Config);
        assert!(spec.is_null());
        assert!(last_error().contains("measurement rate"));

        assert_eq!(ms_spec_new(3, 6, 0.5, MsGateEnsemble::Haar, MsPrescramble::None, ptr::null_mut()), MsStatus::NullPointer);
        assert_eq!(ms_moments(ptr::null(), MsEngine::Dense, 1, 0, ptr::null_mut()), MsStatus::NullPointer);

        assert_eq!(ms_spec_new(20, 6, 0.5, MsGateEnsemble::Haar, MsPrescramble::None, &mut spec), MsStatus::Ok);
        let mut m = MsMoments::default();
        assert_eq!(ms_moments(spec, MsEngine::Dense, 1, 0, &mut m), MsStatus::Resource);
        ms_spec_free(spec);

        let bad = CString::new("{\"experiment\": \"purify\", \"bogus\": 1}").unwrap();
        let mut cfg = ptr::null_mut();
        assert_eq!(ms_config_from_json(bad.as_ptr(), &mut cfg), MsStatus::Config);
        assert!(cfg.is_null());

        let mut w = [0.0; 3];
        assert_eq!(ms_weingarten3(1, w.as_mut_ptr()), MsStatus::Numerical);
        ms_spec_free(ptr::null_mut());
        ms_config_free(ptr::null_mut());
    }
}

#[test]
fn scalar_functions() {
    unsafe {
        let mut w = [0.0; 3];
        assert_eq!(ms_weingarten3(4, w.as_mut_ptr()), MsStatus::Ok);
        assert!((w[0] - 14.0 / 720.0).abs() < 1e-15 && (w[1] + 4.0 / 720.0).abs() < 1e-15 && (w[2] - 2.0 / 720.0).abs() < 1e-15);
        let mut q = 0.0;
        assert_eq!(ms_subentropy([0.5, 0.5].as_ptr(), 2, &mut q), MsStatus::Ok);
        assert!((q - (std::f64::consts::LN_2 - 0.5)).abs() < 1e-9);
        assert_eq!(ms_subentropy([0.5, 0.6].as_ptr(), 2, &mut q), MsStatus::Numerical);
    }
}

#[test]
fn config_run_writes_outputs() {
    let out = std::env::temp_dir().join(format!("mipt-ffi-{}", std::process::id()));
    let json = format!(
        r#"{{"experiment":"purify","n_qubits":[4],"p_grid":[0.3],"depth":4,"gate_ensemble":"clifford2q","prescramble":"none","n_traj":20,"output":{:?},"master_seed":3}}"#,
        out
    );
    let json = CString::new(json).unwrap();
    unsafe {
        let mut cfg = ptr::null_mut();
        let st = ms_config_from_json(json.as_ptr(), &mut cfg);
        assert_eq!(st, MsStatus::Ok, "{}", last_error());
        assert_eq!(ms_config_run(cfg), MsStatus::Ok);
        ms_config_free(cfg);
    }
    assert!(out.join("purify.csv").exists());
    assert!(out.join("manifest.json").exists());
    let _ = std::fs::remove_dir_all(out);
}

#[test]
fn c_program_links_against_static_library() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let test_exe = std::env::current_exe().unwrap();
    // target/<profile>/deps/<test> -> target/<profile>
    let profile_dir = test_exe.parent().unwrap().parent().unwrap();
    let lib = profile_dir.join("libmipt_shadows_ffi.a");
    if Command::new("cc").arg("--version").output().is_err() || !lib.exists() {
        eprintln!("skipping: no C compiler or static library");
        return;
    }
    let dir = std::env::temp_dir().join(format!("mipt-ffi-c-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let src = dir.join("smoke.c");
    std::fs::write(
        &src,
        r#"#include <stdio.h>
#include "mipt_shadows.h"
int main(void) {
    double w[3];
    if (ms_weingarten3(4, w) != MS_STATUS_OK) return 1;
    MsSpec *spec = NULL;
    if (ms_spec_new(3, 3, 2.0, MS_GATE_ENSEMBLE_HAAR, MS_PRESCRAMBLE_NONE, &spec) != MS_STATUS_CONFIG) return 2;
    if (ms_last_error() == NULL) return 3;
    if (ms_spec_new(3, 3, 0.5, MS_GATE_ENSEMBLE_HAAR, MS_PRESCRAMBLE_NONE, &spec) != MS_STATUS_OK) return 4;
    MsMoments m;
    if (ms_moments(spec, MS_ENGINE_DENSE, 20, 1, &m) != MS_STATUS_OK) return 5;
    ms_spec_free(spec);
    printf("%.6f %.6f\n", w[0] * 720.0, m.purity);
    return 0;
}
"#,
    )
    .unwrap();
    let exe = dir.join("smoke");
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("14.000000 "), "{text}");
    let _ = std::fs::remove_dir_all(dir);
}
