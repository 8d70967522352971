#ifndef GAPWELD_H
#define GAPWELD_H

/* Generated by cbindgen from the gapweld-ffi crate; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes. `Ok` is zero; other values match the CLI exit-code split
 * between validation problems and I/O problems.
 */
typedef enum GwStatus {
  GW_STATUS_OK = 0,
  /**
   * Invalid argument, range, or malformed file contents.
   */
  GW_STATUS_INVALID_ARGUMENT = 1,
  /**
   * Filesystem-level failure.
   */
  GW_STATUS_IO_ERROR = 2,
  /**
   * A required pointer was NULL.
   */
  GW_STATUS_NULL_POINTER = 3,
  /**
   * An internal panic was caught at the boundary.
   */
  GW_STATUS_PANIC = 4,
} GwStatus;

/**
 * Opaque gap instance (gapped volume + provenance + truth pairs).
 */
typedef struct GwGapInstance GwGapInstance;

/**
 * Opaque scorer parameters.
 */
typedef struct GwScorerParams GwScorerParams;

/**
 * Opaque dense label volume.
 */
typedef struct GwVolume GwVolume;

/**
 * Synthetic-volume generation settings; mirrors the library config.
 */
typedef struct GwSynthConfig {
  size_t dims[3];
  double resolution_nm[3];
  size_t n_tubes;
  double radius_vox_min;
  double radius_vox_max;
  double max_angle_deg;
  double wobble;
  uint64_t seed;
} GwSynthConfig;

/**
 * Settings shared by the evaluation entry points.
 */
typedef struct GwEvalConfig {
  size_t cs;
  size_t np;
  size_t group_size;
  uint64_t seed;
  /**
   * Normalization scale in nm; must match the scale used in training
   * when scoring with the native network.
   */
  double norm_scale_nm;
  bool include_background;
  bool include_gap;
  /**
   * Parallelism across gap positions; 1 is sequential and bit-identical
   * to parallel runs.
   */
  size_t jobs;
} GwEvalConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread. Never NULL; empty
 * before the first failure. The pointer is invalidated by the next failing
 * call on the same thread.
 */
const char *gw_last_error_message(void);

/**
 * Load a volume from its JSON header path.
 *
 * # Safety
 * `path` must be a valid NUL-terminated string; `out` must be a valid
 * destination pointer.
 */
enum GwStatus gw_volume_load(const char *path, struct GwVolume **out);

/**
 * Save a volume (header + raw payload next to it).
 *
 * # Safety
 * `vol` must be a live handle from this library; `path` a valid string.
 */
enum GwStatus gw_volume_save(const struct GwVolume *vol, const char *path);

/**
 * Voxel counts of a volume.
 *
 * # Safety
 * All pointers must be valid.
 */
enum GwStatus gw_volume_dims(const struct GwVolume *vol, size_t *x, size_t *y, size_t *z);

/**
 * # Safety
 * `vol` must be a handle returned by this library, not yet freed.
 */
void gw_volume_free(struct GwVolume *vol);

/**
 * Generate a synthetic tubular volume.
 *
 * # Safety
 * `cfg` and `out` must be valid pointers.
 */
enum GwStatus gw_synth_generate(const struct GwSynthConfig *cfg, struct GwVolume **out);

/**
 * Drop `ns` slices starting at `z0` and build the gap instance.
 *
 * # Safety
 * `gt` must be a live volume handle; `out` a valid destination.
 */
enum GwStatus gw_gap_simulate(const struct GwVolume *gt,
                              size_t z0,
                              size_t ns,
                              struct GwGapInstance **out);

/**
 * Write the instance (manifest + gapped volume) into a directory.
 *
 * # Safety
 * `inst` must be a live handle; `dir` a valid string.
 */
enum GwStatus gw_gap_save(const struct GwGapInstance *inst, const char *dir);

/**
 * Load an instance from a directory written by [`gw_gap_save`].
 *
 * # Safety
 * `dir` must be a valid string; `out` a valid destination.
 */
enum GwStatus gw_gap_load(const char *dir, struct GwGapInstance **out);

/**
 * Number of ground-truth merge pairs; 0 for a NULL handle.
 *
 * # Safety
 * `inst` must be NULL or a live handle.
 */
size_t gw_gap_truth_pair_count(const struct GwGapInstance *inst);

/**
 * # Safety
 * `inst` must be a handle returned by this library, not yet freed.
 */
void gw_gap_free(struct GwGapInstance *inst);

/**
 * Build the labeled point-cloud dataset for a gap instance and write it to
 * `dataset_out`. `candidates_out` may be NULL to skip the candidate
 * manifest. The normalization scale is computed from the dataset.
 *
 * # Safety
 * `inst` must be a live handle; paths valid strings (or NULL where allowed).
 */
enum GwStatus gw_extract_examples(const struct GwGapInstance *inst,
                                  size_t cs,
                                  size_t np,
                                  size_t group_size,
                                  uint64_t seed,
                                  const char *dataset_out,
                                  const char *candidates_out);

/**
 * Fresh seeded parameters (Xavier-uniform weights, zero biases).
 *
 * # Safety
 * `out` must be a valid destination pointer.
 */
enum GwStatus gw_params_init(uint64_t seed, struct GwScorerParams **out);

/**
 * # Safety
 * `path` must be a valid string; `out` a valid destination.
 */
enum GwStatus gw_params_load(const char *path, struct GwScorerParams **out);

/**
 * # Safety
 * `params` must be a live handle; `path` a valid string.
 */
enum GwStatus gw_params_save(const struct GwScorerParams *params, const char *path);

/**
 * # Safety
 * `params` must be a handle returned by this library, not yet freed.
 */
void gw_params_free(struct GwScorerParams *params);

/**
 * Train `params` in place on a labeled dataset file. When `final_loss` is
 * non-NULL it receives the last epoch's mean cross-entropy.
 *
 * # Safety
 * `params` must be a live mutable handle; `dataset_path` a valid string.
 */
enum GwStatus gw_train(struct GwScorerParams *params,
                       const char *dataset_path,
                       size_t epochs,
                       double learning_rate,
                       size_t batch_size,
                       uint64_t seed,
                       double *final_loss);

/**
 * Score a dataset file with the native network; writes the score TsV.
 *
 * # Safety
 * `params` must be a live handle; paths valid strings.
 */
enum GwStatus gw_score_native(const struct GwScorerParams *params,
                              const char *dataset_path,
                              const char *scores_out);

/**
 * Score an instance with the distance baseline; writes the score TSV.
 *
 * # Safety
 * `inst` must be a live handle; `scores_out` a valid string.
 */
enum GwStatus gw_score_baseline(const struct GwGapInstance *inst,
                                size_t group_size,
                                const char *scores_out);

/**
 * Threshold a score TSV and apply the merges to the instance.
 *
 * # Safety
 * `inst` must be a live handle; `scores_path` a valid string; `out` a valid
 * destination.
 */
enum GwStatus gw_stitch(const struct GwGapInstance *inst,
                        const char *scores_path,
                        double threshold,
                        struct GwVolume **out);

/**
 * Evaluate one instance against ground truth with scores from a TSV;
 * writes the report JSON.
 *
 * # Safety
 * `gt` and `inst` must be live handles; `cfg` valid; paths valid strings.
 */
enum GwStatus gw_evaluate(const struct GwVolume *gt,
                          const struct GwGapInstance *inst,
                          const char *scores_path,
                          double threshold,
                          const struct GwEvalConfig *cfg,
                          const char *report_out);

/**
 * Sliding-gap evaluation at one threshold; writes the report JSON. A NULL
 * `params` selects the distance baseline, otherwise the native network.
 *
 * # Safety
 * `gt` must be a live handle; `cfg` valid; `report_out` a valid string;
 * `params` NULL or a live handle.
 */
enum GwStatus gw_sliding_eval(const struct GwVolume *gt,
                              size_t ns,
                              const struct GwScorerParams *params,
                              double threshold,
                              const struct GwEvalConfig *cfg,
                              const char *report_out);

/**
 * Threshold sweep over the sliding protocol; writes the merge-curve CSV.
 * A NULL `params` selects the distance baseline.
 *
 * # Safety
 * `gt` must be a live handle; `thresholds` must point at `n_thresholds`
 * doubles; `cfg` valid; `csv_out` a valid string; `params` NULL or live.
 */
enum GwStatus gw_sweep(const struct GwVolume *gt,
                       size_t ns,
                       const struct GwScorerParams *params,
                       const double *thresholds,
                       size_t n_thresholds,
                       const struct GwEvalConfig *cfg,
                       const char *csv_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GAPWELD_H */
