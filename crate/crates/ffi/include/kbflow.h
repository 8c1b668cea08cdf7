#ifndef KBFLOW_H
#define KBFLOW_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum KbStatus {
  KB_STATUS_OK = 0,
  KB_STATUS_NULL_POINTER = 1,
  KB_STATUS_INVALID_ARGUMENT = 2,
  KB_STATUS_NUMERICAL = 3,
  KB_STATUS_UNKNOWN_SUITE = 4,
  KB_STATUS_PANIC = 5,
} KbStatus;

// Filter model `(A, R, C, Sigma, x0, P0)`.
typedef struct KbModel KbModel;

// Validated association scheme.
typedef struct KbScheme KbScheme;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copy the calling thread's last error message into `buf` (nul-terminated,
// truncated to `len`). Returns the full message length without the nul, or
// 0 when no error is recorded.
size_t kb_last_error_message(char *buf, size_t len);

// Library version as a static nul-terminated string.
const char *kb_version(void);

// Build a model of state dimension `n` and observation dimension `m`.
// `a`, `r`, `p0` are `n x n`, `c` is `m x n`, `sigma` is `m x m`, `x0` has
// length `n`.
enum KbStatus kb_model_new(size_t n,
                           size_t m,
                           const double *a,
                           const double *r,
                           const double *c,
                           const double *sigma,
                           const double *x0,
                           const double *p0,
                           struct KbModel **out);

// Release a model; null is ignored.
void kb_model_free(struct KbModel *model);

size_t kb_model_dim(const struct KbModel *model);

// Nominal Riccati flow `phi_t(Q0)` by RK4 with step `step`; writes `n x n`
// doubles to `out`.
enum KbStatus kb_flow(const struct KbModel *model,
                      const double *q0,
                      double t,
                      double step,
                      double *out);

// Flow with gain regularized by the inflation map `Q + eps T`.
enum KbStatus kb_flow_inflation(const struct KbModel *model,
                                double epsilon,
                                const double *t_mat,
                                const double *q0,
                                double t,
                                double step,
                                double *out);

// Stabilizing solution of the algebraic Riccati equation to residual
// `tol |R|_F`.
enum KbStatus kb_are_solve(const struct KbModel *model, double tol, double *out);

// Wasserstein-2 distance between `N(m1, Q1)` and `N(m2, Q2)`.
enum KbStatus kb_w2_gaussian(size_t n,
                             const double *m1,
                             const double *q1,
                             const double *m2,
                             const double *q2,
                             double *out);

// Relative entropy `KL(N(m1, Q1) | N(m2, Q2))`.
enum KbStatus kb_kl_gaussian(size_t n,
                             const double *m1,
                             const double *q1,
                             const double *m2,
                             const double *q2,
                             double *out);

// Both sides of `|log det(I - A)| <= 3/2 sqrt(n) |A|_2`; `ok` receives 1
// when the inequality holds.
enum KbStatus kb_logdet_bound_check(size_t n,
                                    const double *a,
                                    double *lhs,
                                    double *rhs,
                                    int32_t *ok);

// Distance scheme of the `r`-cycle.
enum KbStatus kb_scheme_cycle(size_t r, struct KbScheme **out);

// Two disjoint triangles on six points.
enum KbStatus kb_scheme_two_triangles(struct KbScheme **out);

// Scheme from an `r x r` row-major class matrix with integer labels.
enum KbStatus kb_scheme_from_class_matrix(size_t r, const uint32_t *classes, struct KbScheme **out);

void kb_scheme_free(struct KbScheme *scheme);

size_t kb_scheme_points(const struct KbScheme *scheme);

size_t kb_scheme_idempotent_count(const struct KbScheme *scheme);

// Closed-form Riccati solution at time `t` for `A`, `R`, `S`, `P0` in the
// scheme's algebra (all `r x r`).
enum KbStatus kb_scheme_closed_form(const struct KbScheme *scheme,
                                    const double *a,
                                    const double *r,
                                    const double *s,
                                    const double *p0,
                                    double t,
                                    double *out);

// Run a verification suite and return its JSON report in `*out_json`
// (release with [`kb_string_free`]). `*passed` receives 1 when the suite
// passed.
enum KbStatus kb_verify(const char *suite, uint64_t seed, char **out_json, int32_t *passed);

// Release a string returned by this library; null is ignored.
void kb_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* KBFLOW_H */
