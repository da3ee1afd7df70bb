use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use disclosure_ffi::*;

const INSTANCE_A: &str = r#"{
    "technology": {
        "f0": {"kind": "piecewise", "points": [[0,0],[1,1],[2,0]]},
        "f1": {"kind": "piecewise", "points": [[0,0.6],[0.3,1.2],[0.8,1.4],[1.8,0.6]]}
    },
    "r": 1.0
}"#;

const INSTANCE_B: &str = r#"{
    "f0": {"kind": "quadratic", "coeffs": [0, 2, -1], "domain": [0, 2]},
    "f1": {"kind": "quadratic", "coeffs": [0.715, 2.1, -1.5], "domain": [0, 1.2]}
}"#;

const ATOMS: &str = r#"{"atoms": [[0.5,0.25],[1,0.25],[1.5,0.25],[2.5,0.25]]}"#;

fn cstr(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    let p = dsc_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn pair(json: &str) -> *mut DscPair {
    let mut p = ptr::null_mut();
    let s = unsafe { dsc_pair_from_json(cstr(json).as_ptr(), &mut p) };
    assert_eq!(s, DscStatus::Ok, "{}", last_error());
    p
}

fn dist(json: &str) -> *mut DscDist {
    let mut d = ptr::null_mut();
    let s = unsafe { dsc_dist_from_json(cstr(json).as_ptr(), &mut d) };
    assert_eq!(s, DscStatus::Ok, "{}", last_error());
    d
}

#[test]
fn constants_of_instance_a() {
    let p = pair(INSTANCE_A);
    let mut c = DscConstants::default();
    assert_eq!(unsafe { dsc_pair_constants(p, &mut c) }, DscStatus::Ok);
    assert_eq!((c.u0, c.u1, c.u_star), (1.0, 0.8, 0.3));
    assert!((c.alpha - 1.0).abs() < 1e-12);
    assert!(c.affine_gap.abs() < 1e-12);
    assert!((c.t_underline - 3.5f64.ln()).abs() < 1e-12);
    unsafe { dsc_pair_free(p) };
}

#[test]
fn deadline_matches_its_payoff() {
    let p = pair(INSTANCE_A);
    let d = dist(ATOMS);
    assert_eq!(unsafe { dsc_dist_len(d) }, 4);
    let mut out = DscDeadline::default();
    assert_eq!(unsafe { dsc_optimize_deadline(p, d, 1e-9, &mut out) }, DscStatus::Ok);
    assert!(out.foc_satisfied && !out.anomaly);
    assert!(out.t_star >= out.t_underline);
    let mut pi = 0.0;
    assert_eq!(unsafe { dsc_deadline_payoff(p, d, out.t_star, &mut pi) }, DscStatus::Ok);
    assert!((pi - out.pi).abs() < 1e-12);
    let mut never = 0.0;
    assert_eq!(unsafe { dsc_deadline_payoff(p, d, f64::INFINITY, &mut never) }, DscStatus::Ok);
    assert!(never <= pi + 1e-12);
    unsafe {
        dsc_dist_free(d);
        dsc_pair_free(p);
    }
}

#[test]
fn euler_fills_buffers() {
    let p = pair(INSTANCE_B);
    let d = dist(ATOMS);
    let mut out = DscEuler::default();
    let mut levels = [0.0; 4];
    let mut rewards = [0.0; 4];
    let s = unsafe { dsc_solve_euler(p, d, &mut out, levels.as_mut_ptr(), rewards.as_mut_ptr(), 4) };
    assert_eq!(s, DscStatus::Ok, "{}", last_error());
    assert!(out.residual_max < 1e-8);
    assert!(out.roots >= 1);
    assert!(levels.iter().all(|&u| (0.1..=1.0 + 1e-12).contains(&u)));
    assert!(rewards.windows(2).all(|w| w[1] <= w[0] + 1e-12));

    let mut short = [0.0; 3];
    let s = unsafe { dsc_solve_euler(p, d, &mut out, short.as_mut_ptr(), ptr::null_mut(), 3) };
    assert_eq!(s, DscStatus::BufferSize);
    unsafe {
        dsc_dist_free(d);
        dsc_pair_free(p);
    }
}

#[test]
fn euler_rejects_kinked_pair() {
    let p = pair(INSTANCE_A);
    let d = dist(ATOMS);
    let mut out = DscEuler::default();
    let s = unsafe { dsc_solve_euler(p, d, &mut out, ptr::null_mut(), ptr::null_mut(), 0) };
    assert_eq!(s, DscStatus::Model);
    assert!(!last_error().is_empty());
    unsafe {
        dsc_dist_free(d);
        dsc_pair_free(p);
    }
}

#[test]
fn error_codes() {
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { dsc_pair_from_json(ptr::null(), &mut p) }, DscStatus::NullPointer);
    assert_eq!(unsafe { dsc_pair_from_json(cstr("{").as_ptr(), &mut p) }, DscStatus::Config);
    assert!(p.is_null());
    let bad = [0xffu8, 0];
    assert_eq!(
        unsafe { dsc_pair_from_json(bad.as_ptr().cast(), &mut p) },
        DscStatus::InvalidUtf8
    );
    let mut d = ptr::null_mut();
    let s = unsafe { dsc_dist_from_json(cstr(r#"{"atoms": [[1, -0.5]]}"#).as_ptr(), &mut d) };
    assert_eq!(s, DscStatus::Config);
    assert_eq!(unsafe { dsc_dist_len(ptr::null()) }, 0);
    let mut c = DscConstants::default();
    assert_eq!(unsafe { dsc_pair_constants(ptr::null(), &mut c) }, DscStatus::NullPointer);
    unsafe {
        dsc_pair_free(ptr::null_mut());
        dsc_dist_free(ptr::null_mut());
        dsc_string_free(ptr::null_mut());
    }
}

#[test]
fn success_clears_last_error() {
    let mut p = ptr::null_mut();
    unsafe { dsc_pair_from_json(cstr("[]").as_ptr(), &mut p) };
    assert!(!dsc_last_error().is_null());
    let p = pair(INSTANCE_A);
    assert!(dsc_last_error().is_null());
    unsafe { dsc_pair_free(p) };
}

#[test]
fn run_config_returns_report() {
    let cfg = format!(
        r#"{{"command": "solve-deadline", {}, "distribution": {ATOMS}}}"#,
        INSTANCE_A.trim().trim_start_matches('{').trim_end_matches('}')
    );
    let mut report = ptr::null_mut();
    let s = unsafe { dsc_run_config(cstr(&cfg).as_ptr(), &mut report) };
    assert_eq!(s, DscStatus::Ok, "{}", last_error());
    let text = unsafe { CStr::from_ptr(report) }.to_str().unwrap().to_owned();
    unsafe { dsc_string_free(report) };
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["status"], "ok");
    assert!(v["t_star"].as_f64().unwrap() >= 3.5f64.ln());

    let mut report = ptr::null_mut();
    let s = unsafe { dsc_run_config(cstr(r#"{"command": "dance"}"#).as_ptr(), &mut report) };
    assert_eq!(s, DscStatus::Config);
    assert!(report.is_null());
}

#[test]
fn version_is_static() {
    let v = unsafe { CStr::from_ptr(dsc_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_compiles_as_c() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let header = dir.join("include/disclosure.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for f in ["dsc_pair_from_json", "dsc_optimize_deadline", "dsc_solve_euler", "dsc_last_error", "DSC_STATUS_OK"] {
        assert!(text.contains(f), "{f} missing from header");
    }
    let src = tempfile::Builder::new().suffix(".c").tempfile().unwrap();
    std::fs::write(
        src.path(),
        "#include \"disclosure.h\"\nint main(void) { DscConstants c; (void)c; return DSC_STATUS_OK; }\n",
    )
    .unwrap();
    let status = match Command::new("cc")
        .arg("-fsyntax-only")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(dir.join("include"))
        .arg(src.path())
        .status()
    {
        Ok(s) => s,
        Err(_) => {
            eprintln!("no C compiler; header syntax not checked");
            return;
        }
    };
    assert!(status.success());
}
