#ifndef CDSPEC_H
#define CDSPEC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CdspecStatus {
  CDSPEC_STATUS_OK = 0,
  CDSPEC_STATUS_NULL_POINTER = 1,
  CDSPEC_STATUS_PARAMETER = 2,
  CDSPEC_STATUS_EPSILON_SEARCH_FAILED = 3,
  CDSPEC_STATUS_BUDGET_EXCEEDED = 4,
  CDSPEC_STATUS_SINGULAR = 5,
  CDSPEC_STATUS_NOT_A_FRAME = 6,
  CDSPEC_STATUS_DIMENSION_MISMATCH = 7,
  CDSPEC_STATUS_PANIC = 8,
  CDSPEC_STATUS_OTHER = 9,
} CdspecStatus;

// Gabor system on a periodic grid.
typedef struct CdspecGabor CdspecGabor;

// Convolution-dominated matrix on a truncated integer lattice.
typedef struct CdspecMatrix CdspecMatrix;

// Weyl symbol sampled on the symbol grid of a function grid.
typedef struct CdspecSymbol CdspecSymbol;

typedef struct CdspecComplex {
  double re;
  double im;
} CdspecComplex;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, empty after a success.
// Valid until the next `cdspec_*` call on the same thread.
const char *cdspec_last_error(void);

// Library version, static storage.
const char *cdspec_version(void);

// `I + coupling·T` on `Z^dim ∩ B(0, radius)` with `T(k) = e^{−decay|k|}`.
//
// # Safety
// `out` must be a valid pointer.
enum CdspecStatus cdspec_matrix_toeplitz_exp(size_t dim,
                                             double radius,
                                             double coupling,
                                             double decay,
                                             struct CdspecMatrix **out_m);

// Matrix with row-major `entries` (`n·n` values) on the same lattice as
// `cdspec_matrix_toeplitz_exp` would use for `dim` and `radius`.
//
// # Safety
// `entries` must point to `len` values.
enum CdspecStatus cdspec_matrix_from_entries(size_t dim,
                                             double radius,
                                             const struct CdspecComplex *entries,
                                             size_t len,
                                             struct CdspecMatrix **out_m);

// # Safety
// `m` must come from this library and not be used afterwards.
void cdspec_matrix_free(struct CdspecMatrix *m);

// Number of lattice points (rows and columns).
//
// # Safety
// `m` must be a valid handle or null.
size_t cdspec_matrix_size(const struct CdspecMatrix *m);

// `y = A x`; both buffers hold `n` values.
//
// # Safety
// Buffers must hold `n` values.
enum CdspecStatus cdspec_matrix_apply(const struct CdspecMatrix *m,
                                      const struct CdspecComplex *x,
                                      struct CdspecComplex *y,
                                      size_t n);

// Schur-test upper bound for `‖A‖_{p→p}`.
//
// # Safety
// Pointers must be valid.
enum CdspecStatus cdspec_matrix_schur_bound(const struct CdspecMatrix *m, double p, double *out_v);

// Lower bound `C0` with `‖Ac‖_p >= C0‖c‖_p` (exact for p = 2).
//
// # Safety
// Pointers must be valid.
enum CdspecStatus cdspec_matrix_lower_bound(const struct CdspecMatrix *m,
                                            double p,
                                            size_t starts,
                                            uint64_t seed,
                                            double *out_v);

// Transfers a lower bound `c0` at `p` to exponent `q`. Writes the certified
// constant and the chosen ε.
//
// # Safety
// Pointers must be valid; `out_eps` may be null.
enum CdspecStatus cdspec_stability_transfer(const struct CdspecMatrix *m,
                                            double p,
                                            double c0,
                                            double q,
                                            double threshold,
                                            double eps_floor,
                                            double *out_constant,
                                            double *out_eps);

// Neumann envelope of `A^{-1}`; writes the amalgam quasi-norm of
// `H̃^{1/p0}` sampled at `step` and the number of interior violations.
//
// # Safety
// Pointers must be valid; `out_violations` may be null.
enum CdspecStatus cdspec_inverse_envelope(const struct CdspecMatrix *m,
                                          double p,
                                          double p0,
                                          double c0,
                                          double step,
                                          double *out_amalgam,
                                          size_t *out_violations);

// Gabor system with the unit Gaussian window on the grid of step `step`
// and radius `radius`; lattice `αZ × βZ`.
//
// # Safety
// `out_g` must be valid.
enum CdspecStatus cdspec_gabor_gaussian(double step,
                                        double radius,
                                        double alpha,
                                        double beta,
                                        struct CdspecGabor **out_g);

// Gabor system with a caller-supplied window of `len` grid samples.
//
// # Safety
// `window` must hold `len` values.
enum CdspecStatus cdspec_gabor_new(double step,
                                   double radius,
                                   const struct CdspecComplex *window,
                                   size_t len,
                                   double alpha,
                                   double beta,
                                   struct CdspecGabor **out_g);

// Canonical tight system `S^{-1/2}g` of `g`.
//
// # Safety
// Pointers must be valid.
enum CdspecStatus cdspec_gabor_tight(const struct CdspecGabor *g, struct CdspecGabor **out_g);

// # Safety
// `g` must come from this library and not be used afterwards.
void cdspec_gabor_free(struct CdspecGabor *g);

// Grid samples per function.
//
// # Safety
// `g` must be a valid handle or null.
size_t cdspec_gabor_grid_len(const struct CdspecGabor *g);

// Number of atoms.
//
// # Safety
// `g` must be a valid handle or null.
size_t cdspec_gabor_len(const struct CdspecGabor *g);

// Optimal frame bounds.
//
// # Safety
// Pointers must be valid.
enum CdspecStatus cdspec_gabor_frame_bounds(const struct CdspecGabor *g,
                                            double *lower,
                                            double *upper);

// Coefficients `⟨f, π(λ)g⟩`; `f` has `grid_len` values, `c` has `len`.
//
// # Safety
// Buffers must have the stated lengths.
enum CdspecStatus cdspec_gabor_analysis(const struct CdspecGabor *g,
                                        const struct CdspecComplex *f,
                                        size_t f_len,
                                        struct CdspecComplex *c,
                                        size_t c_len);

// `Σ c_λ π(λ)g`; inverse buffer shapes of [`cdspec_gabor_analysis`].
//
// # Safety
// Buffers must have the stated lengths.
enum CdspecStatus cdspec_gabor_synthesis(const struct CdspecGabor *g,
                                         const struct CdspecComplex *c,
                                         size_t c_len,
                                         struct CdspecComplex *f,
                                         size_t f_len);

// Canonical dual window, `grid_len` values.
//
// # Safety
// `out_w` must hold `len` values.
enum CdspecStatus cdspec_gabor_dual_window(const struct CdspecGabor *g,
                                           struct CdspecComplex *out_w,
                                           size_t len);

// Symbol grid size for functions on the grid `(step, radius)`:
// `nx` positions by `nxi` frequencies, row-major by position.
//
// # Safety
// Pointers must be valid.
enum CdspecStatus cdspec_symbol_shape(double step, double radius, size_t *nx, size_t *nxi);

// Symbol from `nx·nxi` row-major samples.
//
// # Safety
// `values` must hold `len` values.
enum CdspecStatus cdspec_symbol_new(double step,
                                    double radius,
                                    const struct CdspecComplex *values,
                                    size_t len,
                                    struct CdspecSymbol **out_s);

// # Safety
// `s` must come from this library and not be used afterwards.
void cdspec_symbol_free(struct CdspecSymbol *s);

// Copies the samples out; `len` must be `nx·nxi`.
//
// # Safety
// `dst` must hold `len` values.
enum CdspecStatus cdspec_symbol_values(const struct CdspecSymbol *s,
                                       struct CdspecComplex *dst,
                                       size_t len);

// `a^w f` for `f` with `len` grid samples, written to `dst`.
//
// # Safety
// Buffers must hold `len` values.
enum CdspecStatus cdspec_symbol_apply(const struct CdspecSymbol *s,
                                      const struct CdspecComplex *f,
                                      struct CdspecComplex *dst,
                                      size_t len);

// Symbol `b` of `(a^w)^{-1}` through the tight frame `frame`. Optional
// outputs: condition number of the Gabor matrix and the round-trip error.
//
// # Safety
// `a`, `frame` and `out_b` must be valid; the others may be null.
enum CdspecStatus cdspec_invert_weyl(const struct CdspecSymbol *a,
                                     const struct CdspecGabor *frame,
                                     double p,
                                     struct CdspecSymbol **out_b,
                                     double *out_condition,
                                     double *out_roundtrip);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CDSPEC_H */
