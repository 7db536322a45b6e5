#ifndef MVTDA_H
#define MVTDA_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes. Zero is success.
 */
typedef enum MvStatus {
  MV_STATUS_OK = 0,
  MV_STATUS_NULL_POINTER = 1,
  MV_STATUS_INVALID_INPUT = 2,
  MV_STATUS_IO = 3,
  MV_STATUS_PARSE = 4,
  MV_STATUS_OUT_OF_RANGE = 5,
  MV_STATUS_NUMERICAL = 6,
  MV_STATUS_STRUCTURAL = 7,
  MV_STATUS_PANIC = 8,
} MvStatus;

typedef enum MvSetOp {
  MV_SET_OP_UNION = 0,
  MV_SET_OP_INTERSECTION = 1,
} MvSetOp;

typedef struct MvDiagram MvDiagram;

/**
 * An image or image stack (row-major, last axis slowest).
 */
typedef struct MvStack MvStack;

typedef struct MvTestResult MvTestResult;

typedef struct MvZigzag MvZigzag;

/**
 * One diagram point. Essential classes have `death` at the filtration floor.
 */
typedef struct MvPoint {
  size_t dim;
  double birth;
  double death;
  bool essential;
} MvPoint;

/**
 * Test settings. `smooth = false` tests the raw stack.
 */
typedef struct MvTestOptions {
  size_t permutations;
  size_t dim;
  double alpha;
  uint64_t seed;
  bool smooth;
  uint8_t smooth_degree;
  double smooth_span;
  bool pvalue_add_one;
} MvTestOptions;

/**
 * Summary of a test. `theta` is meaningful only when `has_theta`.
 */
typedef struct MvTestSummary {
  double rho_obs;
  double p_value;
  bool reject;
  bool has_theta;
  double theta;
} MvTestSummary;

/**
 * An interval over the interleaved slice/link sequence (1-based, inclusive).
 */
typedef struct MvInterval {
  size_t dim;
  size_t birth_index;
  size_t death_index;
  double birth_time;
  double death_time;
} MvInterval;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * The message for the last failed call on this thread, or NULL. Valid
 * until the next call into this library on the same thread.
 */
const char *mvtda_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *mvtda_version(void);

/**
 * Builds a stack from `ndim` extents and `len` values (row-major, time
 * slowest). `time_spacing` is the seconds between frames.
 *
 * # Safety
 * `dims` must point to `ndim` readable values and `values` to `len`.
 */
enum MvStatus mvtda_stack_new(const size_t *dims,
                              size_t ndim,
                              const double *values,
                              size_t len,
                              double time_spacing,
                              struct MvStack **out);

/**
 * Loads a stack from a manifest, CSV frame or dims-header text file.
 *
 * # Safety
 * `path` must be a NUL-terminated UTF-8 string.
 */
enum MvStatus mvtda_stack_load(const char *path, struct MvStack **out);

/**
 * Number of values in the stack; 0 for NULL.
 *
 * # Safety
 * `stack` must be NULL or a live handle.
 */
size_t mvtda_stack_len(const struct MvStack *stack);

/**
 * Number of axes; 0 for NULL.
 *
 * # Safety
 * `stack` must be NULL or a live handle.
 */
size_t mvtda_stack_ndim(const struct MvStack *stack);

/**
 * Copies up to `cap` values into `buf`; returns how many the stack holds.
 *
 * # Safety
 * `stack` must be NULL or a live handle; `buf` must have room for `cap`.
 */
size_t mvtda_stack_values(const struct MvStack *stack, double *buf, size_t cap);

/**
 * Local polynomial smoothing of each frame.
 *
 * # Safety
 * `stack` must be a live handle.
 */
enum MvStatus mvtda_stack_smooth(const struct MvStack *stack,
                                 uint8_t degree,
                                 double span,
                                 struct MvStack **out);

/**
 * # Safety
 * `stack` must be NULL or a handle not yet freed.
 */
void mvtda_stack_free(struct MvStack *stack);

/**
 * Upper-level-set persistence of the stack in dimensions `0..=max_dim`.
 *
 * # Safety
 * `stack` must be a live handle.
 */
enum MvStatus mvtda_persistence(const struct MvStack *stack,
                                size_t max_dim,
                                struct MvDiagram **out);

/**
 * # Safety
 * `diagram` must be NULL or a live handle.
 */
size_t mvtda_diagram_len(const struct MvDiagram *diagram);

/**
 * # Safety
 * `diagram` must be a live handle and `point` writable.
 */
enum MvStatus mvtda_diagram_get(const struct MvDiagram *diagram,
                                size_t index,
                                struct MvPoint *point);

/**
 * # Safety
 * `diagram` must be NULL or a handle not yet freed.
 */
void mvtda_diagram_free(struct MvDiagram *diagram);

/**
 * The library defaults.
 */
struct MvTestOptions mvtda_test_options_default(void);

/**
 * # Safety
 * `stack` must be a live handle and `options` readable.
 */
enum MvStatus mvtda_max_test(const struct MvStack *stack,
                             const struct MvTestOptions *options,
                             struct MvTestResult **out);

/**
 * # Safety
 * `result` must be a live handle and `summary` writable.
 */
enum MvStatus mvtda_test_summary(const struct MvTestResult *result, struct MvTestSummary *summary);

/**
 * Copies up to `cap` null maxima into `buf`; returns how many there are.
 *
 * # Safety
 * `result` must be NULL or a live handle; `buf` must have room for `cap`.
 */
size_t mvtda_test_nulls(const struct MvTestResult *result, double *buf, size_t cap);

/**
 * # Safety
 * `result` must be NULL or a handle not yet freed.
 */
void mvtda_test_free(struct MvTestResult *result);

/**
 * Thresholds each frame of a 2D+time stack at `theta` and computes the
 * zigzag intervals of the resulting slice complexes (H0 and H1).
 *
 * # Safety
 * `stack` must be a live handle.
 */
enum MvStatus mvtda_zigzag(const struct MvStack *stack,
                           double theta,
                           enum MvSetOp set_op,
                           struct MvZigzag **out);

/**
 * # Safety
 * `zigzag` must be NULL or a live handle.
 */
size_t mvtda_zigzag_len(const struct MvZigzag *zigzag);

/**
 * # Safety
 * `zigzag` must be a live handle and `interval` writable.
 */
enum MvStatus mvtda_zigzag_get(const struct MvZigzag *zigzag,
                               size_t index,
                               struct MvInterval *interval);

/**
 * # Safety
 * `zigzag` must be NULL or a handle not yet freed.
 */
void mvtda_zigzag_free(struct MvZigzag *zigzag);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MVTDA_H */
