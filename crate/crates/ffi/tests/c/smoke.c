#include <math.h>
#include <stdio.h>
#include <stdlib.h>

#include "kbflow.h"

static int fail(const char *what) {
    char buf[256];
    kb_last_error_message(buf, sizeof buf);
    fprintf(stderr, "%s: %s\n", what, buf);
    return 1;
}

int main(void) {
    /* scalar model a = 0, r = s = 1: ARE solution 1 */
    double one = 1.0, zero = 0.0;
    KbModel *m = NULL;
    if (kb_model_new(1, 1, &zero, &one, &one, &one, &zero, &one, &m) != KB_STATUS_OK) return fail("model");
    double p = 0.0;
    if (kb_are_solve(m, 1e-12, &p) != KB_STATUS_OK) return fail("are");
    if (fabs(p - 1.0) > 1e-10) return fail("are value");
    double q = 3.0, out = 0.0;
    if (kb_flow(m, &q, 10.0, 1e-3, &out) != KB_STATUS_OK) return fail("flow");
    if (fabs(out - 1.0) > 1e-6) return fail("flow value");
    kb_model_free(m);

    double m1[2] = {0.0, 0.0}, m2[2] = {1.0, 0.0};
    double id[4] = {1.0, 0.0, 0.0, 1.0};
    double w2 = 0.0;
    if (kb_w2_gaussian(2, m1, id, m2, id, &w2) != KB_STATUS_OK) return fail("w2");
    if (fabs(w2 - 1.0) > 1e-12) return fail("w2 value");

    double bad[4] = {1.0, 2.0, 0.0, 1.0};
    if (kb_w2_gaussian(2, m1, bad, m2, id, &w2) != KB_STATUS_INVALID_ARGUMENT) return fail("asymmetric accepted");
    if (kb_last_error_message(NULL, 0) == 0) return fail("no message");

    KbScheme *s = NULL;
    if (kb_scheme_cycle(6, &s) != KB_STATUS_OK) return fail("scheme");
    if (kb_scheme_points(s) != 6) return fail("points");
    kb_scheme_free(s);

    printf("ok %s\n", kb_version());
    return 0;
}
