#ifndef WEAVECHECK_H
#define WEAVECHECK_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

// Status codes; the first five match the command-line exit codes.
typedef enum WcStatus {
  // The verdict was computed and is affirmative.
  WC_STATUS_OK = 0,
  // The verdict was computed and is negative.
  WC_STATUS_NEGATIVE = 1,
  // Malformed input.
  WC_STATUS_PARSE_ERROR = 2,
  // Well-formed input that violates an invariant.
  WC_STATUS_VALIDATION_ERROR = 3,
  // Exhaustive enumeration refused: too many members.
  WC_STATUS_CAP_EXCEEDED = 4,
  // A required pointer argument was null.
  WC_STATUS_NULL_POINTER = 5,
  // An argument is out of range or not valid UTF-8.
  WC_STATUS_INVALID_ARGUMENT = 6,
  // An internal panic was caught at the boundary.
  WC_STATUS_PANIC = 7,
} WcStatus;

typedef enum WcTheorem {
  WC_THEOREM_BESSEL_SUM = 0,
  WC_THEOREM_CHARACTERIZATION = 1,
  WC_THEOREM_PERTURBATION = 2,
  WC_THEOREM_CROSS_SYNTHESIS = 3,
  WC_THEOREM_ATOMIC_FORWARD = 4,
  WC_THEOREM_ATOMIC_BACKWARD = 5,
  WC_THEOREM_POSITIVE_GAP = 6,
} WcTheorem;

// Opaque validated problem.
typedef struct WcProblem WcProblem;

typedef struct WcTolerances {
  double psd_tol;
  double bisect_tol;
  double commute_tol;
} WcTolerances;

// Optimal bounds of a single family.
typedef struct WcBounds {
  // Positive infinity when `K = 0`.
  double lower;
  double upper;
  bool is_frame;
} WcBounds;

// Universal bounds of a weaving.
typedef struct WcWeaveResult {
  double lower;
  double upper;
  bool woven;
  // Bit `j` set when member `j + 1` is taken from lambda.
  uint64_t worst_subset_mask;
  uint64_t subsets_evaluated;
} WcWeaveResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Default tolerances.
struct WcTolerances wc_tolerances_default(void);

// Library version as a static NUL-terminated string.
const char *wc_version(void);

// Message of the last failure on this thread, or null. Valid until the next call.
const char *wc_last_error(void);

// Parses a problem from JSON text. `tol` may be null for defaults.
//
// # Safety
// `json` must be a NUL-terminated string; `tol` null or valid; `out` valid for writes.
enum WcStatus wc_problem_from_json(const char *json,
                                   const struct WcTolerances *tol,
                                   struct WcProblem **out);

// Reads and parses a problem file. `tol` may be null for defaults.
//
// # Safety
// `path` must be a NUL-terminated string; `tol` null or valid; `out` valid for writes.
enum WcStatus wc_problem_from_file(const char *path,
                                   const struct WcTolerances *tol,
                                   struct WcProblem **out);

// The worked example truncated to dimension `dim` (at least 6).
//
// # Safety
// `out` must be valid for writes.
enum WcStatus wc_problem_example(uintptr_t dim, struct WcProblem **out);

// Releases a problem; null is ignored.
//
// # Safety
// `p` must be null or a handle from this library that has not been freed.
void wc_problem_free(struct WcProblem *p);

// Ambient dimension `n`, or 0 for a null handle.
//
// # Safety
// `p` must be null or a live handle.
uintptr_t wc_problem_dim(const struct WcProblem *p);

// Member count `m`, or 0 for a null handle.
//
// # Safety
// `p` must be null or a live handle.
uintptr_t wc_problem_members(const struct WcProblem *p);

// SHA-256 digest of the problem as a NUL-terminated hex string; free with `wc_string_free`.
//
// # Safety
// `p` must be null or a live handle.
char *wc_problem_digest(const struct WcProblem *p);

// Optimal bounds of the lambda family, or of omega when `omega_side` is set.
//
// Returns `Ok` for a frame and `Negative` otherwise.
//
// # Safety
// `p` must be a live handle and `out` valid for writes.
enum WcStatus wc_check(const struct WcProblem *p, bool omega_side, struct WcBounds *out);

// Universal bounds over every subset. Returns `Ok` when woven, `Negative` otherwise.
//
// # Safety
// `p` must be a live handle and `out` valid for writes.
enum WcStatus wc_weave_exhaustive(const struct WcProblem *p, struct WcWeaveResult *out);

// Universal bounds over `trials` seeded random subsets plus the two trivial ones.
//
// # Safety
// `p` must be a live handle and `out` valid for writes.
enum WcStatus wc_weave_sampled(const struct WcProblem *p,
                               uintptr_t trials,
                               uint64_t seed,
                               struct WcWeaveResult *out);

// Runs a theorem checker and writes its JSON report to `*out_json` (free with `wc_string_free`).
//
// `a_candidate` is used only by the characterization. Returns `Ok` when the
// hypotheses hold and the oracle does not contradict the claim, `Negative`
// otherwise.
//
// # Safety
// `p` must be a live handle and `out_json` valid for writes.
enum WcStatus wc_theorem_report(const struct WcProblem *p,
                                enum WcTheorem theorem,
                                double a_candidate,
                                char **out_json);

// Releases a string returned by this library; null is ignored.
//
// # Safety
// `s` must be null or a string from this library that has not been freed.
void wc_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WEAVECHECK_H */
