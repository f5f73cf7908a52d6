#ifndef FRACEXP_H
#define FRACEXP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum FxStatus {
  FX_STATUS_OK = 0,
  FX_STATUS_DOMAIN = 1,
  FX_STATUS_NUMERICAL = 2,
  FX_STATUS_RESOURCE = 3,
  FX_STATUS_SYNTAX = 4,
  FX_STATUS_INVALID_ARGUMENT = 5,
  FX_STATUS_NULL_POINTER = 6,
  FX_STATUS_INTERNAL = 7,
} FxStatus;

/**
 * A parsed expression in `x`.
 */
typedef struct FxExpr FxExpr;

/**
 * An exact fBm sampler on a fixed uniform grid.
 */
typedef struct FxSampler FxSampler;

/**
 * A list of expansion terms `coefficient · h^exponent`.
 */
typedef struct FxTermList FxTermList;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's last error message into `buf` (NUL
 * terminated, truncated to `len − 1` bytes) and returns the full message
 * length in bytes. Pass a null `buf` to query the length.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes.
 */
size_t fx_last_error_message(char *buf, size_t len);

/**
 * Parses `text` into a new expression stored in `*out`.
 *
 * # Safety
 * `text` must be a NUL-terminated string and `out` a valid pointer.
 */
enum FxStatus fx_expr_parse(const char *text, struct FxExpr **out);

/**
 * # Safety
 * `expr` must come from [`fx_expr_parse`] and `out` must be valid.
 */
enum FxStatus fx_expr_eval(const struct FxExpr *expr, double x, double *out);

/**
 * # Safety
 * `expr` must be null or come from [`fx_expr_parse`], and is not used again.
 */
void fx_expr_free(struct FxExpr *expr);

/**
 * Analytic `c_I`; `word` is a string of '0' (dt) and '1' (dB), innermost
 * integral first.
 *
 * # Safety
 * `word` must be a NUL-terminated string and `out` a valid pointer.
 */
enum FxStatus fx_coeff_analytic(const char *word, double hurst, double tol, double *out);

/**
 * Monte Carlo `c_I` with its standard error.
 *
 * # Safety
 * `word` must be a NUL-terminated string; `value` and `stderr_out` valid.
 */
enum FxStatus fx_coeff_mc(const char *word,
                          double hurst,
                          size_t n_paths,
                          size_t n_steps,
                          uint64_t seed,
                          double *value,
                          double *stderr_out);

/**
 * Expansion of `E[f(X_h)] − f(x)` for `dX = b(X) dt + dB` up to
 * `h^{2pH+q}`, default settings.
 *
 * # Safety
 * `f` and `b` must come from [`fx_expr_parse`]; `out` must be valid.
 */
enum FxStatus fx_expand_p0(const struct FxExpr *f,
                           const struct FxExpr *b,
                           double x,
                           double hurst,
                           uint32_t p,
                           uint32_t q,
                           struct FxTermList **out);

/**
 * Driftless expansion of `E[f(B_{t+h}) − f(B_t) | B_t = beta]`.
 *
 * # Safety
 * `f` must come from [`fx_expr_parse`]; `out` must be valid.
 */
enum FxStatus fx_cond_expand_driftless(const struct FxExpr *f,
                                       double t,
                                       double beta,
                                       double hurst,
                                       uint32_t p,
                                       uint32_t q,
                                       struct FxTermList **out);

/**
 * Number of terms; 0 for a null list.
 *
 * # Safety
 * `list` must be null or a live term list.
 */
size_t fx_terms_len(const struct FxTermList *list);

/**
 * Reads term `index` (sorted by exponent).
 *
 * # Safety
 * `list` must be a live term list; the out-pointers must be valid.
 */
enum FxStatus fx_terms_get(const struct FxTermList *list,
                           size_t index,
                           uint32_t *m,
                           uint32_t *n,
                           double *exponent,
                           double *coefficient);

/**
 * `Σ coefficient · h^exponent`.
 *
 * # Safety
 * `list` must be a live term list and `out` valid.
 */
enum FxStatus fx_terms_evaluate(const struct FxTermList *list, double h, double *out);

/**
 * # Safety
 * `list` must be null or a live term list, and is not used again.
 */
void fx_terms_free(struct FxTermList *list);

/**
 * # Safety
 * `out` must be valid.
 */
enum FxStatus fx_sigma_h_sq(double hurst, double tol, double *out);

/**
 * # Safety
 * `out` must be valid.
 */
enum FxStatus fx_r_fn(double x, double hurst, double tol, double *out);

/**
 * Variance of the conditional increment `E[B_{t+h} − B_t | F_t]`.
 *
 * # Safety
 * `out` must be valid.
 */
enum FxStatus fx_var_zh(double t, double h, double hurst, double tol, double *out);

/**
 * Monte Carlo `E[f(X_h)] − f(x0)`; nonzero `control_variates` enables the
 * regression correction.
 *
 * # Safety
 * `f` and `b` must come from [`fx_expr_parse`]; out-pointers must be valid.
 */
enum FxStatus fx_mc_p0(const struct FxExpr *f,
                       const struct FxExpr *b,
                       double x0,
                       double hurst,
                       double h,
                       size_t n_paths,
                       size_t n_steps,
                       uint64_t seed,
                       int32_t control_variates,
                       double *value,
                       double *stderr_out);

/**
 * Sampler on `n_steps + 1` equally spaced points of `[0, horizon]`.
 *
 * # Safety
 * `out` must be valid.
 */
enum FxStatus fx_sampler_new(double horizon, size_t n_steps, double hurst, struct FxSampler **out);

/**
 * Number of grid points (`n_steps + 1`).
 *
 * # Safety
 * `sampler` must be null or live.
 */
size_t fx_sampler_len(const struct FxSampler *sampler);

/**
 * Writes path `index` of stream `seed` into `values`, which must hold
 * exactly [`fx_sampler_len`] doubles. The same `(seed, index)` always gives
 * the same path.
 *
 * # Safety
 * `sampler` must be live and `values` valid for `len` doubles.
 */
enum FxStatus fx_sampler_sample(const struct FxSampler *sampler,
                                uint64_t seed,
                                uint64_t index,
                                double *values,
                                size_t len);

/**
 * # Safety
 * `sampler` must be null or live, and is not used again.
 */
void fx_sampler_free(struct FxSampler *sampler);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FRACEXP_H */
