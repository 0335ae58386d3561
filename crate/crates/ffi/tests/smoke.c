#include <math.h>
#include <stdio.h>
#include <string.h>

#include "weavecheck.h"

static const char *SWAP =
    "{\"ambient_dim\":2,"
    "\"controls\":{\"C\":{\"rows\":2,\"cols\":2,\"entries\":[[1,0],[0,0],[0,0],[1,0]]},"
    "\"Cprime\":{\"rows\":2,\"cols\":2,\"entries\":[[1,0],[0,0],[0,0],[1,0]]}},"
    "\"k_operator\":{\"rows\":2,\"cols\":2,\"entries\":[[1,0],[0,0],[0,0],[1,0]]},"
    "\"lambda\":[{\"rows\":1,\"cols\":2,\"entries\":[[1,0],[0,0]]},{\"rows\":1,\"cols\":2,\"entries\":[[0,0],[1,0]]}],"
    "\"omega\":[{\"rows\":1,\"cols\":2,\"entries\":[[0,0],[1,0]]},{\"rows\":1,\"cols\":2,\"entries\":[[1,0],[0,0]]}]}";

#define EXPECT(cond)                                           \
    do {                                                       \
        if (!(cond)) {                                         \
            fprintf(stderr, "line %d: %s\n", __LINE__, #cond); \
            return 1;                                          \
        }                                                      \
    } while (0)

int main(void) {
    WcProblem *example = NULL;
    EXPECT(wc_problem_example(12, &example) == WC_STATUS_OK);
    EXPECT(wc_problem_members(example) == 9);

    WcBounds bounds;
    EXPECT(wc_check(example, false, &bounds) == WC_STATUS_OK);
    EXPECT(fabs(bounds.lower - 1.0) < 1e-9 && fabs(bounds.upper - 2.0) < 1e-9);

    WcWeaveResult weave;
    EXPECT(wc_weave_exhaustive(example, &weave) == WC_STATUS_OK);
    EXPECT(weave.woven && weave.subsets_evaluated == 512);

    char *report = NULL;
    EXPECT(wc_theorem_report(example, WC_THEOREM_PERTURBATION, 0.0, &report) == WC_STATUS_OK);
    EXPECT(strstr(report, "\"hypotheses_hold\":true") != NULL);
    wc_string_free(report);
    wc_problem_free(example);

    WcProblem *swap = NULL;
    EXPECT(wc_problem_from_json(SWAP, NULL, &swap) == WC_STATUS_OK);
    EXPECT(wc_weave_exhaustive(swap, &weave) == WC_STATUS_NEGATIVE);
    EXPECT(weave.worst_subset_mask == 1);
    wc_problem_free(swap);

    WcProblem *bad = NULL;
    EXPECT(wc_problem_from_json("{\"ambient_dim\":", NULL, &bad) == WC_STATUS_PARSE_ERROR);
    EXPECT(bad == NULL && wc_last_error() != NULL);
    EXPECT(wc_problem_example(3, &bad) == WC_STATUS_INVALID_ARGUMENT);

    printf("ffi smoke ok (%s)\n", wc_version());
    return 0;
}
