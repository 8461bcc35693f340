#ifndef QCONTROL_H
#define QCONTROL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes. The nonzero values match the CLI exit codes where the two
// overlap.
typedef enum QcStatus {
  QC_STATUS_OK = 0,
  // Null pointer or out-of-range argument.
  QC_STATUS_INVALID_ARGUMENT = 1,
  // Input violates a precondition of the library.
  QC_STATUS_INVALID_INPUT = 2,
  QC_STATUS_NO_CONVERGENCE = 3,
  QC_STATUS_BLOWUP = 4,
  QC_STATUS_IO = 5,
  // The library panicked; the handle arguments are left untouched.
  QC_STATUS_PANIC = 6,
} QcStatus;

// Complex field sampled on a grid.
typedef struct QcField QcField;

// Grid on the periodic box `[-L, L)^d`.
typedef struct QcGrid QcGrid;

// Result of a linear null-control solve.
typedef struct QcHumSolution QcHumSolution;

// Summary numbers of a [`QcHumSolution`].
typedef struct QcHumStats {
  size_t cg_iterations;
  double cg_residual;
  double smallest_ritz;
  double terminal_residual;
  double relative_terminal_residual;
  size_t control_frames;
} QcHumStats;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread; empty if none. The
// pointer stays valid until the next failing call on the same thread.
const char *qc_last_error(void);

// Library version as a static NUL-terminated string.
const char *qc_version(void);

// # Safety
// `out` must be a valid pointer to writable storage for one handle.
enum QcStatus qc_grid_new(size_t dim, size_t n, double half_side, struct QcGrid **out);

// # Safety
// `grid` must be null or a handle from [`qc_grid_new`] not yet freed.
void qc_grid_free(struct QcGrid *grid);

// Number of grid points `n^d`; 0 for a null handle.
//
// # Safety
// `grid` must be null or a live handle.
size_t qc_grid_len(const struct QcGrid *grid);

// Builds a field from `len` real and imaginary parts in row-major order.
//
// # Safety
// `re` and `im` must point to `len` readable doubles; `out` must be
// writable.
enum QcStatus qc_field_from_values(const struct QcGrid *grid,
                                   const double *re,
                                   const double *im,
                                   size_t len,
                                   struct QcField **out);

// Gaussian `amplitude * exp(-|x - center|² / (2 width²))`; `center` holds
// `dim` coordinates.
//
// # Safety
// `center` must point to `dim` readable doubles; `out` must be writable.
enum QcStatus qc_field_gaussian(const struct QcGrid *grid,
                                const double *center,
                                double width,
                                double amplitude,
                                struct QcField **out);

// # Safety
// `field` must be null or a live handle.
void qc_field_free(struct QcField *field);

// Copies the samples into `re` and `im`, which must hold exactly the
// field's length.
//
// # Safety
// `re` and `im` must point to `len` writable doubles.
enum QcStatus qc_field_values(const struct QcField *field, double *re, double *im, size_t len);

// `||f||_{H^s}` with weight `(1 + |k|²)^s`.
//
// # Safety
// `out` must be writable.
enum QcStatus qc_field_sobolev_norm(const struct QcField *field, double s, double *out);

// Free Schrödinger flow `e^{itΔ} f` into a new handle.
//
// # Safety
// `out` must be writable.
enum QcStatus qc_free_flow(const struct QcField *field, double t, struct QcField **out);

// Linear null control of `u0` with control radius `radius` over `[0, horizon]`
// in `nt` steps.
//
// # Safety
// `out` must be writable.
enum QcStatus qc_hum_solve(const struct QcField *u0,
                           double radius,
                           double horizon,
                           size_t nt,
                           double tol,
                           size_t max_iter,
                           struct QcHumSolution **out);

// # Safety
// `out` must be writable.
enum QcStatus qc_hum_solution_stats(const struct QcHumSolution *sol, struct QcHumStats *out);

// Copies the minimizer (the adjoint datum) into a new field handle.
//
// # Safety
// `out` must be writable.
enum QcStatus qc_hum_solution_minimizer(const struct QcHumSolution *sol, struct QcField **out);

// Copies control frame `m` (0 ≤ m ≤ nt) into a new field handle.
//
// # Safety
// `out` must be writable.
enum QcStatus qc_hum_solution_control_frame(const struct QcHumSolution *sol,
                                            size_t m,
                                            struct QcField **out);

// # Safety
// `sol` must be null or a live handle.
void qc_hum_solution_free(struct QcHumSolution *sol);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QCONTROL_H */
