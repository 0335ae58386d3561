use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use weavecheck_ffi::*;

fn example(dim: usize) -> *mut WcProblem {
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { wc_problem_example(dim, &mut p) }, WcStatus::Ok);
    assert!(!p.is_null());
    p
}

fn last_error() -> String {
    let e = wc_last_error();
    assert!(!e.is_null());
    unsafe { CStr::from_ptr(e) }.to_string_lossy().into_owned()
}

#[test]
fn example_bounds_through_the_abi() {
    let p = example(12);
    assert_eq!(unsafe { wc_problem_dim(p) }, 12);
    assert_eq!(unsafe { wc_problem_members(p) }, 9);

    let mut b = WcBounds::default();
    assert_eq!(unsafe { wc_check(p, false, &mut b) }, WcStatus::Ok);
    assert!((b.lower - 1.0).abs() < 1e-9 && (b.upper - 2.0).abs() < 1e-12);
    assert!(b.is_frame);

    let mut w = WcWeaveResult::default();
    assert_eq!(unsafe { wc_weave_exhaustive(p, &mut w) }, WcStatus::Ok);
    assert!(w.woven);
    assert_eq!(w.subsets_evaluated, 512);
    assert!((w.lower - 1.0).abs() < 1e-9);

    assert_eq!(unsafe { wc_weave_sampled(p, 16, 3, &mut w) }, WcStatus::Ok);
    assert!(w.subsets_evaluated <= 18);

    let digest = unsafe { wc_problem_digest(p) };
    assert_eq!(unsafe { CStr::from_ptr(digest) }.to_bytes().len(), 64);
    unsafe { wc_string_free(digest) };
    unsafe { wc_problem_free(p) };
}

#[test]
fn theorem_reports_are_json() {
    let p = example(8);
    let mut json = ptr::null_mut();
    assert_eq!(
        unsafe { wc_theorem_report(p, WcTheorem::Perturbation, 0.0, &mut json) },
        WcStatus::Ok
    );
    let text = unsafe { CStr::from_ptr(json) }.to_str().unwrap().to_owned();
    unsafe { wc_string_free(json) };
    let value: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(value["theorem"], "perturbation");
    assert_eq!(value["hypotheses_hold"], true);

    assert_eq!(
        unsafe { wc_theorem_report(p, WcTheorem::Characterization, 1.0, &mut json) },
        WcStatus::Ok
    );
    unsafe { wc_string_free(json) };
    assert_eq!(
        unsafe { wc_theorem_report(p, WcTheorem::Characterization, 1.5, &mut json) },
        WcStatus::Negative
    );
    unsafe { wc_string_free(json) };
    unsafe { wc_problem_free(p) };
}

#[test]
fn errors_map_to_status_codes() {
    let mut p = ptr::null_mut();
    let truncated = CString::new("{\"ambient_dim\": 2,").unwrap();
    assert_eq!(
        unsafe { wc_problem_from_json(truncated.as_ptr(), ptr::null(), &mut p) },
        WcStatus::ParseError
    );
    assert!(p.is_null());
    assert!(last_error().contains("malformed"));

    let skew = CString::new(
        r#"{"ambient_dim":2,
            "controls":{"C":{"rows":2,"cols":2,"entries":[[1,0],[1,0],[0,0],[1,0]]},
                        "Cprime":{"rows":2,"cols":2,"entries":[[1,0],[0,0],[0,0],[1,0]]}},
            "k_operator":{"rows":2,"cols":2,"entries":[[1,0],[0,0],[0,0],[1,0]]},
            "lambda":[{"rows":1,"cols":2,"entries":[[1,0],[0,0]]}]}"#,
    )
    .unwrap();
    assert_eq!(
        unsafe { wc_problem_from_json(skew.as_ptr(), ptr::null(), &mut p) },
        WcStatus::ValidationError
    );
    assert!(last_error().contains("controls"));

    assert_eq!(unsafe { wc_problem_example(5, &mut p) }, WcStatus::InvalidArgument);
    assert_eq!(
        unsafe { wc_problem_from_json(ptr::null(), ptr::null(), &mut p) },
        WcStatus::NullPointer
    );
    let mut b = WcBounds::default();
    assert_eq!(unsafe { wc_check(ptr::null(), false, &mut b) }, WcStatus::NullPointer);

    let bad_tol = WcTolerances {
        psd_tol: -1.0,
        ..wc_tolerances_default()
    };
    assert_eq!(
        unsafe { wc_problem_from_json(truncated.as_ptr(), &bad_tol, &mut p) },
        WcStatus::InvalidArgument
    );

    // Success clears the message.
    let q = example(6);
    assert!(wc_last_error().is_null());
    unsafe { wc_problem_free(q) };
    unsafe { wc_problem_free(ptr::null_mut()) };
}

#[test]
fn cap_is_reported() {
    let p = example(24);
    let mut w = WcWeaveResult::default();
    assert_eq!(unsafe { wc_weave_exhaustive(p, &mut w) }, WcStatus::CapExceeded);
    assert_eq!(unsafe { wc_weave_sampled(p, 32, 1, &mut w) }, WcStatus::Ok);
    unsafe { wc_problem_free(p) };
}

#[test]
fn problem_files_load() {
    let dir = std::env::temp_dir().join(format!("wc-ffi-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("example.json");
    let (w, exp) = weavecheck::corpus::worked_example(7).unwrap();
    let file = weavecheck::io::ProblemFile::from_weave(&w).with_expansion(&exp);
    std::fs::write(&path, file.to_json()).unwrap();

    let c_path = CString::new(path.to_str().unwrap()).unwrap();
    let mut p = ptr::null_mut();
    assert_eq!(
        unsafe { wc_problem_from_file(c_path.as_ptr(), ptr::null(), &mut p) },
        WcStatus::Ok
    );
    assert_eq!(unsafe { wc_problem_members(p) }, 4);
    unsafe { wc_problem_free(p) };

    let missing = CString::new(dir.join("missing.json").to_str().unwrap()).unwrap();
    assert_eq!(
        unsafe { wc_problem_from_file(missing.as_ptr(), ptr::null(), &mut p) },
        WcStatus::ParseError
    );
    std::fs::remove_dir_all(dir).unwrap();
}

fn target_dir() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    exe.parent().and_then(Path::parent).unwrap().to_path_buf()
}

#[test]
fn c_program_links_against_the_header() {
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    let lib = target_dir().join("libweavecheck_ffi.a");
    assert!(lib.exists(), "missing {}", lib.display());
    let out = std::env::temp_dir().join(format!("wc-smoke-{}", std::process::id()));
    let status = Command::new("cc")
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(manifest.join("tests").join("smoke.c"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&out)
        .status()
        .expect("a C compiler on PATH");
    assert!(status.success());
    let run = Command::new(&out).output().unwrap();
    let _ = std::fs::remove_file(&out);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    assert!(String::from_utf8_lossy(&run.stdout).starts_with("ffi smoke ok"));
}
