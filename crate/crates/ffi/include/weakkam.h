/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef WEAKKAM_H
#define WEAKKAM_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum WkStatus {
  WK_STATUS_OK = 0,
  WK_STATUS_NULL_POINTER = 1,
  WK_STATUS_INVALID_ARGUMENT = 2,
  /**
   * An input violates a mathematical precondition (e.g. not a sub-solution).
   */
  WK_STATUS_PRECONDITION = 3,
  /**
   * The grid cannot certify the result.
   */
  WK_STATUS_RESOLUTION = 4,
  /**
   * Non-finite evaluation, Legendre search or integrator failure.
   */
  WK_STATUS_NUMERICAL = 5,
  /**
   * Too few ensemble members survived.
   */
  WK_STATUS_ENSEMBLE = 6,
  WK_STATUS_PANIC = 7,
} WkStatus;

/**
 * Opaque periodic grid function.
 */
typedef struct WkGrid WkGrid;

/**
 * Opaque Hamiltonian.
 */
typedef struct WkHamiltonian WkHamiltonian;

typedef struct WkSubSolutionReport {
  double max_residual;
  size_t worst_node;
  double action_violation;
  bool pass;
} WkSubSolutionReport;

typedef struct WkRegularization {
  double k_plus;
  double k_minus;
  double sup_dist_to_input;
  double max_residual;
  bool stable;
  bool pass;
} WkRegularization;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread. Valid until the next call
 * into the library from the same thread.
 */
const char *wk_last_error(void);

/**
 * `½(p + shift)² − amplitude·sin²(πx)`.
 */
struct WkHamiltonian *wk_hamiltonian_pendulum(double shift, double amplitude);

/**
 * `½p² + V(x)` with `V` given as `mean, a1, b1, a2, b2, ...`.
 *
 * # Safety
 * `coeffs` must point to `len` readable doubles, or be null with `len == 0`.
 */
struct WkHamiltonian *wk_hamiltonian_mechanical(const double *coeffs, size_t len);

/**
 * # Safety
 * `h` must come from a `wk_hamiltonian_*` constructor and not be used afterwards.
 */
void wk_hamiltonian_destroy(struct WkHamiltonian *h);

/**
 * # Safety
 * `h` must be a live handle; `value` must be writable.
 */
enum WkStatus wk_hamiltonian_eval(const struct WkHamiltonian *h, double x, double p, double *value);

/**
 * `L(x, v)` and the maximizing momentum.
 *
 * # Safety
 * `h` must be a live handle; both outputs must be writable.
 */
enum WkStatus wk_hamiltonian_legendre(const struct WkHamiltonian *h,
                                      double x,
                                      double v,
                                      double *value,
                                      double *momentum);

/**
 * Copies `n` values into a new grid function on `x_i = i/n`.
 *
 * # Safety
 * `values` must point to `n` readable doubles; `grid` must be writable.
 */
enum WkStatus wk_grid_new(const double *values, size_t n, struct WkGrid **grid);

/**
 * # Safety
 * `g` must come from this library and not be used afterwards.
 */
void wk_grid_destroy(struct WkGrid *g);

/**
 * Number of nodes, or zero for a null handle.
 *
 * # Safety
 * `g` must be null or a live handle.
 */
size_t wk_grid_len(const struct WkGrid *g);

/**
 * Copies the node values into `values`, which holds `len` doubles.
 *
 * # Safety
 * `g` must be a live handle and `values` must have room for `len` doubles.
 */
enum WkStatus wk_grid_values(const struct WkGrid *g, double *values, size_t len);

/**
 * Critical value estimate; `iterate` (may be null) receives the last
 * iterate as a new handle.
 *
 * # Safety
 * `h` must be a live handle; `alpha` must be writable; `iterate` null or writable.
 */
enum WkStatus wk_critical_value(const struct WkHamiltonian *h,
                                size_t n,
                                double step,
                                size_t iterations,
                                double *alpha,
                                struct WkGrid **iterate);

/**
 * `T_t u` (direction 0) or `T̆_t u` (direction 1) at level `c`, `t` a
 * multiple of `step`.
 *
 * # Safety
 * `h`, `u` must be live handles; `result` must be writable.
 */
enum WkStatus wk_evolve(const struct WkHamiltonian *h,
                        const struct WkGrid *u,
                        double t,
                        double step,
                        double c,
                        int32_t dir,
                        struct WkGrid **result);

/**
 * # Safety
 * `h`, `u` must be live handles; `report` must be writable.
 */
enum WkStatus wk_subsolution_report(const struct WkHamiltonian *h,
                                    const struct WkGrid *u,
                                    double c,
                                    double tolerance,
                                    struct WkSubSolutionReport *report);

/**
 * `w = T_s T̆_t u` at level `c`.
 *
 * # Safety
 * `h`, `u` must be live handles; `w` and `summary` must be writable.
 */
enum WkStatus wk_lasry_lions(const struct WkHamiltonian *h,
                             const struct WkGrid *u,
                             double t,
                             double s,
                             double c,
                             struct WkGrid **w,
                             struct WkRegularization *summary);

/**
 * Flags the projected Aubry set at level `alpha` on an `n`-node grid:
 * `flags[i]` is 1 for flagged nodes. `epsilon <= 0` selects the default.
 *
 * # Safety
 * `h` must be a live handle; `flags` must have room for `n` bytes and
 * `count` must be writable.
 */
enum WkStatus wk_aubry(const struct WkHamiltonian *h,
                       double alpha,
                       size_t n,
                       size_t members,
                       uint64_t seed,
                       double epsilon,
                       uint8_t *flags,
                       size_t *count);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WEAKKAM_H */
