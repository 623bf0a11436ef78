#ifndef SPARSAGG_H
#define SPARSAGG_H

/* Generated by cbindgen from crates/ffi; regenerate with: cargo build -p sparsagg-ffi --features generate-header */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum SparsaggStatus {
  /**
   * Success.
   */
  SPARSAGG_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  SPARSAGG_STATUS_NULL_ARGUMENT = 1,
  /**
   * An argument failed validation.
   */
  SPARSAGG_STATUS_INVALID_ARGUMENT = 2,
  /**
   * A string argument was not valid UTF-8.
   */
  SPARSAGG_STATUS_INVALID_UTF8 = 3,
  /**
   * A JSON payload failed to parse or serialize.
   */
  SPARSAGG_STATUS_INVALID_JSON = 4,
  /**
   * The protocol aborted; details are in the returned report.
   */
  SPARSAGG_STATUS_ABORT = 5,
  /**
   * An internal panic was caught at the boundary.
   */
  SPARSAGG_STATUS_INTERNAL = 6,
} SparsaggStatus;

/**
 * An exact discrete Gaussian sampler with its own deterministic stream.
 */
typedef struct SparsaggSampler SparsaggSampler;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string; do not free.
 */
const char *sparsagg_version(void);

/**
 * The field modulus 2^61 - 1.
 */
uint64_t sparsagg_field_prime(void);

/**
 * Optimized (ε, δ)-DP budget after `rounds` subsampled rounds at noise
 * multiplier `sigma` and sampling rate `q`. Writes the budget, the
 * optimizing order, and the per-round divergence at that order.
 *
 * # Safety
 * `out_epsilon`, `out_alpha`, and `out_tau` must be valid for writes.
 */
enum SparsaggStatus sparsagg_accountant_epsilon(double q,
                                                double sigma,
                                                double delta,
                                                uint32_t rounds,
                                                double *out_epsilon,
                                                uint64_t *out_alpha,
                                                double *out_tau);

/**
 * Noise variance σ² meeting a target (ε, δ) budget over `rounds` rounds
 * at sampling rate `q`.
 *
 * # Safety
 * `out_sigma_sq` must be valid for writes.
 */
enum SparsaggStatus sparsagg_accountant_sigma_sq(double epsilon,
                                                 double delta,
                                                 double q,
                                                 uint32_t rounds,
                                                 double *out_sigma_sq);

/**
 * Two-sample KS rejection threshold at significance `alpha` for two
 * samples of size `d`.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum SparsaggStatus sparsagg_ks_critical(double alpha, size_t d, double *out);

/**
 * Two-sample KS statistic between integer samples `a` and `b`.
 *
 * # Safety
 * `a` must point to `a_len` readable i64 values, `b` to `b_len`, and
 * `out` must be valid for writes.
 */
enum SparsaggStatus sparsagg_ks_statistic(const int64_t *a,
                                          size_t a_len,
                                          const int64_t *b,
                                          size_t b_len,
                                          double *out);

/**
 * Creates a sampler for N_Z(0, std²) seeded deterministically.
 *
 * # Safety
 * `out` must be valid for writes. The handle must be released with
 * `sparsagg_sampler_free`.
 */
enum SparsaggStatus sparsagg_sampler_new(double std, uint64_t seed, struct SparsaggSampler **out);

/**
 * Draws `n` samples into `out`.
 *
 * # Safety
 * `sampler` must be a live handle from `sparsagg_sampler_new` and `out`
 * must be valid for `n` i64 writes.
 */
enum SparsaggStatus sparsagg_sampler_draw(struct SparsaggSampler *sampler, int64_t *out, size_t n);

/**
 * Releases a sampler handle; null is a no-op.
 *
 * # Safety
 * `sampler` must be null or a live handle from `sparsagg_sampler_new`,
 * and must not be used afterwards.
 */
void sparsagg_sampler_free(struct SparsaggSampler *sampler);

/**
 * Runs federated training from a JSON config (the CLI `train` schema) and
 * returns a JSON report `{"w": [...], "metrics": [...], "abort": ...}`.
 *
 * # Safety
 * `config_json` must be a NUL-terminated string and `out_json` valid for
 * writes. The returned string is released with `sparsagg_string_free`.
 */
enum SparsaggStatus sparsagg_train_json(const char *config_json, char **out_json);

/**
 * Releases a string returned by this library; null is a no-op.
 *
 * # Safety
 * `s` must be null or a string returned by this library, and must not be
 * used afterwards.
 */
void sparsagg_string_free(char *s);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* SPARSAGG_H */
