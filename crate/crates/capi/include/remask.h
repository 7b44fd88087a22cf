/* C interface for the remask sparse-mask refinement library. */

#ifndef REMASK_H
#define REMASK_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum remask_granularity {
  REMASK_GRANULARITY_PER_ROW = 0,
  REMASK_GRANULARITY_PER_LAYER = 1,
} remask_granularity;

typedef enum remask_grow_criterion {
  REMASK_GROW_DSNOT = 0,
  REMASK_GROW_WANDA_LIKE = 1,
} remask_grow_criterion;

typedef enum remask_method {
  REMASK_METHOD_MAGNITUDE = 0,
  REMASK_METHOD_WANDA = 1,
} remask_method;

typedef enum remask_metric {
  REMASK_METRIC_ABS_MEAN = 0,
  REMASK_METRIC_L2 = 1,
} remask_metric;

typedef enum remask_prune_criterion {
  REMASK_PRUNE_DSNOT = 0,
  REMASK_PRUNE_WANDA_UNSIGNED = 1,
  REMASK_PRUNE_EXPECTED_CHANGE = 2,
} remask_prune_criterion;

/**
 * Result of every fallible call. Non-zero values describe the failure
 * class; remask_last_error_message() carries the detail text.
 */
typedef enum remask_status {
  REMASK_OK = 0,
  /**
   * Null pointer, bad flag value, or an invalid configuration.
   */
  REMASK_INVALID_ARGUMENT = 1,
  /**
   * Buffer length or matrix shape disagreement.
   */
  REMASK_DIMENSION_MISMATCH = 2,
  /**
   * Non-finite numeric input.
   */
  REMASK_NONFINITE = 3,
  /**
   * Mask bytes outside {0,1} or a block-pattern violation.
   */
  REMASK_BAD_MASK = 4,
  /**
   * Request exceeds a supported size limit.
   */
  REMASK_UNSUPPORTED = 5,
  /**
   * Internal invariant failure (a bug in this library).
   */
  REMASK_INTERNAL = 6,
} remask_status;

/**
 * One weight matrix with its calibration activations and cached channel
 * statistics. Create, use, destroy.
 */
typedef struct remask_problem remask_problem;

/**
 * Refinement parameters. pattern_n/pattern_m of 0/0 mean an
 * unstructured mask; otherwise swaps stay within aligned m-blocks and
 * the incoming mask must already satisfy the pattern.
 */
typedef struct remask_refine_config {
  uint32_t max_cycles;
  double threshold;
  enum remask_metric metric;
  enum remask_grow_criterion grow;
  enum remask_prune_criterion prune;
  double variance_floor;
  uint32_t pattern_n;
  uint32_t pattern_m;
} remask_refine_config;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *remask_last_error_message(void);

/**
 * Builds a problem from row-major weights (c_out x c_in) and channel-major
 * activations (c_in x tokens). Buffers are copied.
 *
 * # Safety
 * weights must point to c_out*c_in floats and activations to
 * c_in*tokens floats; out must be a valid destination.
 */
enum remask_status remask_problem_create(const float *weights,
                                         size_t c_out,
                                         size_t c_in,
                                         const float *activations,
                                         size_t tokens,
                                         struct remask_problem **out);

/**
 * Builds a problem from the deterministic synthetic generator.
 *
 * # Safety
 * out must be a valid destination.
 */
enum remask_status remask_problem_generate(size_t c_out,
                                           size_t c_in,
                                           size_t tokens,
                                           double outlier_fraction,
                                           double outlier_scale,
                                           uint64_t seed,
                                           struct remask_problem **out);

/**
 * Releases a problem handle. Null is a no-op.
 *
 * # Safety
 * problem must be a handle from a create/generate call, not yet destroyed.
 */
void remask_problem_destroy(struct remask_problem *problem);

/**
 * # Safety
 * problem must be a live handle or null.
 */
size_t remask_problem_rows(const struct remask_problem *problem);

/**
 * # Safety
 * problem must be a live handle or null.
 */
size_t remask_problem_cols(const struct remask_problem *problem);

/**
 * # Safety
 * problem must be a live handle or null.
 */
size_t remask_problem_tokens(const struct remask_problem *problem);

/**
 * Copies the per-channel calibration statistics into caller arrays of
 * length len (= column count). Any destination may be null to skip it.
 *
 * # Safety
 * Non-null destinations must hold len floats.
 */
enum remask_status remask_problem_channel_stats(const struct remask_problem *problem,
                                                float *mean,
                                                float *variance,
                                                float *l2norm,
                                                size_t len);

/**
 * One-shot pruning at the given ratio; writes 0/1 bytes row-major into
 * mask_out (length rows*cols).
 *
 * # Safety
 * mask_out must hold mask_len bytes; problem must be a live handle.
 */
enum remask_status remask_prune_ratio(const struct remask_problem *problem,
                                      double ratio,
                                      enum remask_method method,
                                      enum remask_granularity granularity,
                                      uint8_t *mask_out,
                                      size_t mask_len);

/**
 * One-shot pruning keeping exactly n weights per aligned block of m
 * columns; writes 0/1 bytes row-major into mask_out.
 *
 * # Safety
 * mask_out must hold mask_len bytes; problem must be a live handle.
 */
enum remask_status remask_prune_nm(const struct remask_problem *problem,
                                   uint32_t n,
                                   uint32_t m,
                                   enum remask_method method,
                                   uint8_t *mask_out,
                                   size_t mask_len);

/**
 * Fills out with the default refinement parameters (50 cycles,
 * threshold 0.1, abs-mean metric, signed criteria, unstructured).
 *
 * # Safety
 * out must be a valid destination.
 */
void remask_refine_config_default(struct remask_refine_config *out);

/**
 * Refines the caller's mask in place. mask holds rows*cols bytes in
 * {0,1} and must satisfy the configured pattern on entry. On success the
 * optional outputs receive the total swap count and the layer l2 error
 * as maintained incrementally by the refinement loop.
 *
 * # Safety
 * mask must hold mask_len writable bytes; problem must be a live handle;
 * non-null out pointers must be valid destinations.
 */
enum remask_status remask_refine(const struct remask_problem *problem,
                                 const struct remask_refine_config *config,
                                 uint8_t *mask,
                                 size_t mask_len,
                                 uint64_t *total_swaps_out,
                                 double *final_error_l2_out);

/**
 * Recomputes the layer l2 reconstruction error under the given mask from
 * scratch (the independent verification path).
 *
 * # Safety
 * mask must hold mask_len bytes; problem must be a live handle; out must
 * be a valid destination.
 */
enum remask_status remask_layer_error(const struct remask_problem *problem,
                                      const uint8_t *mask,
                                      size_t mask_len,
                                      double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* REMASK_H */
