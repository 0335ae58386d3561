//! C ABI over `weavecheck`.
//!
//! Problems are opaque handles created from JSON text, a file, or the worked
//! example, and released with `wc_problem_free`. Every entry point returns a
//! `WcStatus`; on failure the message is available from `wc_last_error`
//! until the next call on the same thread. Strings returned by the library
//! are freed with `wc_string_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use weavecheck::bounds::optimal_bounds;
use weavecheck::corpus::worked_example;
use weavecheck::io::{parse_problem, IoError, Problem, ProblemFile};
use weavecheck::theorems::{
    check_atomic_equivalence, check_bessel_sum, check_characterization, check_cross_synthesis,
    check_perturbation_scalars, check_positive_gap, AtomicDirection, AtomicSystem, GapMode, TheoremReport,
};
use weavecheck::weaving::{universal_bounds_exhaustive, universal_bounds_sampled};
use weavecheck::{FrameError, Tolerances, WeavingCertificate};

/// Status codes; the first five match the command-line exit codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WcStatus {
    /// The verdict was computed and is affirmative.
    Ok = 0,
    /// The verdict was computed and is negative.
    Negative = 1,
    /// Malformed input.
    ParseError = 2,
    /// Well-formed input that violates an invariant.
    ValidationError = 3,
    /// Exhaustive enumeration refused: too many members.
    CapExceeded = 4,
    /// A required pointer argument was null.
    NullPointer = 5,
    /// An argument is out of range or not valid UTF-8.
    InvalidArgument = 6,
    /// An internal panic was caught at the boundary.
    Panic = 7,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WcTheorem {
    BesselSum = 0,
    Characterization = 1,
    Perturbation = 2,
    CrossSynthesis = 3,
    AtomicForward = 4,
    AtomicBackward = 5,
    PositiveGap = 6,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WcTolerances {
    pub psd_tol: f64,
    pub bisect_tol: f64,
    pub commute_tol: f64,
}

/// Optimal bounds of a single family.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct WcBounds {
    /// Positive infinity when `K = 0`.
    pub lower: f64,
    pub upper: f64,
    pub is_frame: bool,
}

/// Universal bounds of a weaving.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct WcWeaveResult {
    pub lower: f64,
    pub upper: f64,
    pub woven: bool,
    /// Bit `j` set when member `j + 1` is taken from lambda.
    pub worst_subset_mask: u64,
    pub subsets_evaluated: u64,
}

/// Opaque validated problem.
pub struct WcProblem {
    problem: Problem,
    tol: Tolerances,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let text = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

struct Failure(WcStatus, String);

impl From<FrameError> for Failure {
    fn from(e: FrameError) -> Self {
        let status = match e {
            FrameError::CapExceeded { .. } => WcStatus::CapExceeded,
            FrameError::InvalidParameter(_) | FrameError::InvalidTolerance { .. } => WcStatus::InvalidArgument,
            _ => WcStatus::ValidationError,
        };
        Failure(status, e.to_string())
    }
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        let status = if e.exit_code() == 3 {
            WcStatus::ValidationError
        } else {
            WcStatus::ParseError
        };
        Failure(status, e.to_string())
    }
}

fn null(name: &str) -> Failure {
    Failure(WcStatus::NullPointer, format!("`{name}` is null"))
}

/// Runs `body`, records any failure, and converts panics to `WcStatus::Panic`.
fn guard(body: impl FnOnce() -> Result<WcStatus, Failure>) -> WcStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(status)) => status,
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic");
            WcStatus::Panic
        }
    }
}

fn tolerances(tol: *const WcTolerances) -> Result<Tolerances, Failure> {
    // SAFETY: the caller passes null or a pointer to a valid `WcTolerances`.
    match unsafe { tol.as_ref() } {
        None => Ok(Tolerances::default()),
        Some(t) => Ok(Tolerances::new(t.psd_tol, t.bisect_tol, t.commute_tol)?),
    }
}

fn text<'a>(s: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if s.is_null() {
        return Err(null(name));
    }
    // SAFETY: non-null and, per the contract, NUL-terminated.
    unsafe { CStr::from_ptr(s) }
        .to_str()
        .map_err(|_| Failure(WcStatus::InvalidArgument, format!("`{name}` is not valid UTF-8")))
}

fn problem<'a>(p: *const WcProblem) -> Result<&'a WcProblem, Failure> {
    // SAFETY: the caller passes null or a handle obtained from this library.
    unsafe { p.as_ref() }.ok_or_else(|| null("problem"))
}

fn store(out: *mut *mut WcProblem, problem: Problem, tol: Tolerances) -> WcStatus {
    // SAFETY: `out` was checked for null by the caller of `store`.
    unsafe { *out = Box::into_raw(Box::new(WcProblem { problem, tol })) };
    WcStatus::Ok
}

fn write<T>(out: *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    // SAFETY: non-null and, per the contract, valid for writes.
    unsafe { out.write(value) };
    Ok(())
}

/// Default tolerances.
#[no_mangle]
pub extern "C" fn wc_tolerances_default() -> WcTolerances {
    let t = Tolerances::default();
    WcTolerances {
        psd_tol: t.psd_tol,
        bisect_tol: t.bisect_tol,
        commute_tol: t.commute_tol,
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn wc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failure on this thread, or null. Valid until the next call.
#[no_mangle]
pub extern "C" fn wc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Parses a problem from JSON text. `tol` may be null for defaults.
///
/// # Safety
/// `json` must be a NUL-terminated string; `tol` null or valid; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn wc_problem_from_json(
    json: *const c_char,
    tol: *const WcTolerances,
    out: *mut *mut WcProblem,
) -> WcStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let tol = tolerances(tol)?;
        let file: ProblemFile = serde_json::from_str(text(json, "json")?).map_err(IoError::from)?;
        Ok(store(out, file.validate(&tol)?, tol))
    })
}

/// Reads and parses a problem file. `tol` may be null for defaults.
///
/// # Safety
/// `path` must be a NUL-terminated string; `tol` null or valid; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn wc_problem_from_file(
    path: *const c_char,
    tol: *const WcTolerances,
    out: *mut *mut WcProblem,
) -> WcStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let tol = tolerances(tol)?;
        let problem = parse_problem(Path::new(text(path, "path")?), &tol)?;
        Ok(store(out, problem, tol))
    })
}

/// The worked example truncated to dimension `dim` (at least 6).
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn wc_problem_example(dim: usize, out: *mut *mut WcProblem) -> WcStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let tol = Tolerances::default();
        let (w, exp) = worked_example(dim)?;
        let file = ProblemFile::from_weave(&w).with_expansion(&exp);
        Ok(store(out, file.validate(&tol)?, tol))
    })
}

/// Releases a problem; null is ignored.
///
/// # Safety
/// `p` must be null or a handle from this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn wc_problem_free(p: *mut WcProblem) {
    if !p.is_null() {
        // SAFETY: per the contract the handle came from `Box::into_raw`.
        drop(unsafe { Box::from_raw(p) });
    }
}

/// Ambient dimension `n`, or 0 for a null handle.
///
/// # Safety
/// `p` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn wc_problem_dim(p: *const WcProblem) -> usize {
    // SAFETY: per the contract.
    unsafe { p.as_ref() }.map_or(0, |p| p.problem.lambda.ambient_dim())
}

/// Member count `m`, or 0 for a null handle.
///
/// # Safety
/// `p` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn wc_problem_members(p: *const WcProblem) -> usize {
    // SAFETY: per the contract.
    unsafe { p.as_ref() }.map_or(0, |p| p.problem.lambda.member_count())
}

/// SHA-256 digest of the problem as a NUL-terminated hex string; free with `wc_string_free`.
///
/// # Safety
/// `p` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn wc_problem_digest(p: *const WcProblem) -> *mut c_char {
    // SAFETY: per the contract.
    match unsafe { p.as_ref() } {
        Some(p) => CString::new(p.problem.digest.clone()).map_or(ptr::null_mut(), CString::into_raw),
        None => ptr::null_mut(),
    }
}

/// Optimal bounds of the lambda family, or of omega when `omega_side` is set.
///
/// Returns `Ok` for a frame and `Negative` otherwise.
///
/// # Safety
/// `p` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn wc_check(p: *const WcProblem, omega_side: bool, out: *mut WcBounds) -> WcStatus {
    guard(|| {
        let p = problem(p)?;
        let inst = p.problem.instance(omega_side, &p.tol)?;
        let cert = optimal_bounds(&inst, &p.tol)?;
        write(
            out,
            WcBounds {
                lower: cert.lower,
                upper: cert.upper,
                is_frame: cert.is_frame,
            },
        )?;
        Ok(if cert.is_frame { WcStatus::Ok } else { WcStatus::Negative })
    })
}

fn weave_result(cert: &WeavingCertificate) -> WcWeaveResult {
    WcWeaveResult {
        lower: cert.certificate.lower,
        upper: cert.certificate.upper,
        woven: cert.woven,
        worst_subset_mask: cert.certificate.worst_subset.map_or(0, |s| s.bits()),
        subsets_evaluated: cert.subsets_evaluated as u64,
    }
}

/// Universal bounds over every subset. Returns `Ok` when woven, `Negative` otherwise.
///
/// # Safety
/// `p` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn wc_weave_exhaustive(p: *const WcProblem, out: *mut WcWeaveResult) -> WcStatus {
    guard(|| {
        let p = problem(p)?;
        let cert = universal_bounds_exhaustive(&p.problem.weave()?, &p.tol)?;
        write(out, weave_result(&cert))?;
        Ok(if cert.woven { WcStatus::Ok } else { WcStatus::Negative })
    })
}

/// Universal bounds over `trials` seeded random subsets plus the two trivial ones.
///
/// # Safety
/// `p` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn wc_weave_sampled(
    p: *const WcProblem,
    trials: usize,
    seed: u64,
    out: *mut WcWeaveResult,
) -> WcStatus {
    guard(|| {
        let p = problem(p)?;
        let cert = universal_bounds_sampled(&p.problem.weave()?, trials, seed, &p.tol)?;
        write(out, weave_result(&cert))?;
        Ok(if cert.woven { WcStatus::Ok } else { WcStatus::Negative })
    })
}

fn run_theorem(p: &WcProblem, theorem: WcTheorem, a_candidate: f64) -> Result<TheoremReport, Failure> {
    let w = p.problem.weave()?;
    let tol = &p.tol;
    let atoms = || -> Result<AtomicSystem, Failure> {
        Ok(match &p.problem.atoms {
            Some(a) => a.clone(),
            None => AtomicSystem::orthonormal(&w, tol)?,
        })
    };
    Ok(match theorem {
        WcTheorem::BesselSum => check_bessel_sum(&w, tol)?,
        WcTheorem::Characterization => check_characterization(&w, a_candidate, tol)?,
        WcTheorem::Perturbation => {
            let exp = p.problem.expansion.as_ref().ok_or_else(|| {
                Failure(WcStatus::InvalidArgument, "the problem has no scalar expansion".into())
            })?;
            check_perturbation_scalars(&w, exp, p.problem.stated, tol)?
        }
        WcTheorem::CrossSynthesis => check_cross_synthesis(&w, tol)?,
        WcTheorem::AtomicForward => check_atomic_equivalence(&w, &atoms()?, AtomicDirection::Forward, tol)?,
        WcTheorem::AtomicBackward => check_atomic_equivalence(&w, &atoms()?, AtomicDirection::Backward, tol)?,
        WcTheorem::PositiveGap => check_positive_gap(&w, GapMode::PerIndex, tol)?,
    })
}

/// Runs a theorem checker and writes its JSON report to `*out_json` (free with `wc_string_free`).
///
/// `a_candidate` is used only by the characterization. Returns `Ok` when the
/// hypotheses hold and the oracle does not contradict the claim, `Negative`
/// otherwise.
///
/// # Safety
/// `p` must be a live handle and `out_json` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn wc_theorem_report(
    p: *const WcProblem,
    theorem: WcTheorem,
    a_candidate: f64,
    out_json: *mut *mut c_char,
) -> WcStatus {
    guard(|| {
        let p = problem(p)?;
        if out_json.is_null() {
            return Err(null("out_json"));
        }
        let report = run_theorem(p, theorem, a_candidate)?;
        let json = serde_json::to_string(&report).expect("reports serialize");
        let affirmative = report.hypotheses_hold && report.oracle_agrees != Some(false);
        write(out_json, CString::new(json).expect("JSON has no NUL").into_raw())?;
        Ok(if affirmative { WcStatus::Ok } else { WcStatus::Negative })
    })
}

/// Releases a string returned by this library; null is ignored.
///
/// # Safety
/// `s` must be null or a string from this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn wc_string_free(s: *mut c_char) {
    if !s.is_null() {
        // SAFETY: per the contract the string came from `CString::into_raw`.
        drop(unsafe { CString::from_raw(s) });
    }
}
