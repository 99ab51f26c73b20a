#ifndef NOCTRACK_H
#define NOCTRACK_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum NtStatus {
  NT_STATUS_OK = 0,
  NT_STATUS_NULL_POINTER = 1,
  NT_STATUS_INVALID_ARGUMENT = 2,
  NT_STATUS_DIMENSION_MISMATCH = 3,
  NT_STATUS_DEGENERATE = 4,
  NT_STATUS_FRAME_ORDER = 5,
  NT_STATUS_FORMAT = 6,
  NT_STATUS_INVALID_STATE = 7,
  NT_STATUS_PANIC = 8,
} NtStatus;

typedef enum NtSymmetry {
  NT_SYMMETRY_NONE = 0,
  NT_SYMMETRY_TWO_FOLD = 1,
  NT_SYMMETRY_FOUR_FOLD = 2,
  NT_SYMMETRY_CYLINDRICAL = 3,
} NtSymmetry;

/**
 * Opaque tracker handle.
 */
typedef struct NtTracker NtTracker;

/**
 * `p ↦ scale · rotation · p + translation`.
 */
typedef struct NtSimilarity {
  double scale;
  double rotation[9];
  double translation[3];
} NtSimilarity;

/**
 * Axis-aligned box by center and full side lengths.
 */
typedef struct NtBox {
  double center[3];
  double extents[3];
} NtBox;

typedef struct NtTrackerParams {
  double association_iou;
  double rescue_iou;
  float binarize_threshold;
  float running_mean_weight;
  bool class_gated;
  bool rescue;
} NtTrackerParams;

/**
 * One detection pushed into a tracker. `canonical` is either null or
 * 64³ occupancy probabilities in row-major `(x, y, z)` order; `pose` may
 * be null.
 */
typedef struct NtDetection {
  struct NtBox bbox;
  uint32_t class_id;
  double confidence;
  const float *canonical;
  const struct NtSimilarity *pose;
} NtDetection;

typedef struct NtMota {
  double mota;
  uint64_t gt;
  uint64_t misses;
  uint64_t false_positives;
  uint64_t mismatches;
} NtMota;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. The pointer
 * stays valid until the next library call on the same thread.
 */
const char *nt_last_error_message(void);

/**
 * Releases a string returned by the library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void nt_string_free(char *s);

/**
 * Least-squares similarity transform mapping `canonical[i]` onto
 * `frame[i]`; both arrays hold `n` xyz triples.
 *
 * # Safety
 * Pointers must be valid for `3 * n` doubles; `out` must be writable.
 */
enum NtStatus nt_umeyama(const double *canonical,
                         const double *frame,
                         size_t n,
                         struct NtSimilarity *out);

/**
 * # Safety
 * All pointers must be valid.
 */
enum NtStatus nt_box_iou(const struct NtBox *a, const struct NtBox *b, double *out);

/**
 * IoU of two `nx·ny·nz` occupancy grids given as bytes (nonzero =
 * occupied), row-major `(x, y, z)`.
 *
 * # Safety
 * `a` and `b` must be valid for `nx * ny * nz` bytes.
 */
enum NtStatus nt_volumetric_iou(const uint8_t *a,
                                const uint8_t *b,
                                size_t nx,
                                size_t ny,
                                size_t nz,
                                double *out);

/**
 * Minimum-cost assignment of a `rows × cols` cost matrix. `row_to_col`
 * receives one column per row, or -1 when the row is unassigned.
 *
 * # Safety
 * `cost` must hold `rows * cols` doubles, `row_to_col` room for `rows`
 * entries; `total` may be null.
 */
enum NtStatus nt_hungarian(const double *cost,
                           size_t rows,
                           size_t cols,
                           int64_t *row_to_col,
                           double *total);

/**
 * Symmetry-aware angle between two rotations, degrees.
 *
 * # Safety
 * `pred` and `target` must hold 9 doubles; `out` must be writable.
 */
enum NtStatus nt_rotation_error(const double *pred,
                                const double *target,
                                enum NtSymmetry symmetry,
                                double *out);

/**
 * Default tracker parameters.
 */
struct NtTrackerParams nt_tracker_params_default(void);

/**
 * Creates a tracker; `params` may be null for defaults.
 *
 * # Safety
 * `out` must be writable; `params` null or valid.
 */
enum NtStatus nt_tracker_new(const struct NtTrackerParams *params, struct NtTracker **out);

/**
 * Feeds one frame of detections. Frame indices must strictly increase.
 *
 * # Safety
 * `tracker` must be a live handle; `detections` valid for `n` entries
 * (may be null when `n == 0`), each with valid optional pointers.
 */
enum NtStatus nt_tracker_push_frame(struct NtTracker *tracker,
                                    size_t frame,
                                    const struct NtDetection *detections,
                                    size_t n);

/**
 * Runs the rescue pass and freezes the tracker. `tracklet_count` may be
 * null.
 *
 * # Safety
 * `tracker` must be a live handle.
 */
enum NtStatus nt_tracker_finish(struct NtTracker *tracker, size_t *tracklet_count);

/**
 * Tracklet dump of a finished tracker as JSON. Release `out` with
 * [`nt_string_free`].
 *
 * # Safety
 * `tracker` must be a live handle, `sequence` a NUL-terminated string and
 * `out` writable.
 */
enum NtStatus nt_tracker_dump_json(const struct NtTracker *tracker,
                                   const char *sequence,
                                   size_t frame_count,
                                   char **out);

/**
 * Destroys a tracker. Null is ignored.
 *
 * # Safety
 * `tracker` must come from [`nt_tracker_new`] and not have been freed.
 */
void nt_tracker_free(struct NtTracker *tracker);

/**
 * CLEAR-MOT MOTA of a tracklet dump against a ground-truth dump, both
 * JSON, with the given center-distance gate in meters.
 *
 * # Safety
 * Strings must be NUL-terminated; `out` writable.
 */
enum NtStatus nt_mota_from_json(const char *tracks_json,
                                const char *gt_json,
                                double gate,
                                struct NtMota *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NOCTRACK_H */
