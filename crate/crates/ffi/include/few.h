#ifndef FEW_H
#define FEW_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes of the C interface.
 */
typedef enum FewStatus {
  FEW_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  FEW_STATUS_NULL_POINTER = 1,
  /**
   * An argument was malformed (bad UTF-8, index out of range, bad JSON).
   */
  FEW_STATUS_INVALID_ARGUMENT = 2,
  FEW_STATUS_INVALID_CONFIG = 3,
  /**
   * The input data could not be loaded or has the wrong shape.
   */
  FEW_STATUS_DATA_ERROR = 4,
  FEW_STATUS_RUNTIME_ERROR = 5,
  /**
   * A panic was caught at the boundary.
   */
  FEW_STATUS_PANIC = 6,
} FewStatus;

/**
 * Loaded dataset: attributes plus encoded labels.
 */
typedef struct FewDataset FewDataset;

/**
 * Fitted feature pipeline.
 */
typedef struct FewPipeline FewPipeline;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *few_version(void);

/**
 * Message of the last failed call on this thread, or null. Valid until
 * the next call into the library from the same thread.
 */
const char *few_last_error(void);

/**
 * Loads a CSV file. `target` names the label column (or its index); null
 * selects the last column.
 *
 * # Safety
 * `path` and a non-null `target` must be NUL-terminated strings; `out`
 * must be writable.
 */
enum FewStatus few_dataset_load_csv(const char *path, const char *target, struct FewDataset **out);

/**
 * Builds a dataset from a row-major `n_rows × n_cols` matrix and labels in
 * `0..n_classes`. Attributes are named x0, x1, ... and classes "0", "1", ...
 *
 * # Safety
 * `x` must hold `n_rows * n_cols` doubles and `y` `n_rows` labels; `out`
 * must be writable.
 */
enum FewStatus few_dataset_from_arrays(const double *x,
                                       size_t n_rows,
                                       size_t n_cols,
                                       const uint32_t *y,
                                       size_t n_classes,
                                       struct FewDataset **out);

/**
 * Number of samples, or 0 for a null handle.
 *
 * # Safety
 * `ds` must be null or a live dataset handle.
 */
size_t few_dataset_n_samples(const struct FewDataset *ds);

/**
 * Number of attributes, or 0 for a null handle.
 *
 * # Safety
 * `ds` must be null or a live dataset handle.
 */
size_t few_dataset_n_features(const struct FewDataset *ds);

/**
 * # Safety
 * `ds` must be null or a handle not yet freed.
 */
void few_dataset_free(struct FewDataset *ds);

/**
 * Fits a pipeline. `config_json` is an engine configuration object; keys
 * left out take their defaults and null means all defaults.
 *
 * # Safety
 * `ds` must be a live dataset handle, `config_json` null or a
 * NUL-terminated string, and `out` writable.
 */
enum FewStatus few_fit(const struct FewDataset *ds,
                       const char *config_json,
                       struct FewPipeline **out);

/**
 * Serializes a pipeline. The string is released with `few_string_free`.
 *
 * # Safety
 * `p` must be a live pipeline handle and `out` writable.
 */
enum FewStatus few_pipeline_to_json(const struct FewPipeline *p, char **out);

/**
 * Restores a pipeline written by `few_pipeline_to_json`.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` writable.
 */
enum FewStatus few_pipeline_from_json(const char *json, struct FewPipeline **out);

/**
 * Predicts class indices for a row-major `n_rows × n_cols` matrix into
 * `labels`, which must have room for `n_rows` values.
 *
 * # Safety
 * `p` must be a live pipeline handle, `x` must hold `n_rows * n_cols`
 * doubles and `labels` `n_rows` slots.
 */
enum FewStatus few_pipeline_predict(const struct FewPipeline *p,
                                    const double *x,
                                    size_t n_rows,
                                    size_t n_cols,
                                    uint32_t *labels);

/**
 * Number of engineered features, or 0 for a null handle.
 *
 * # Safety
 * `p` must be null or a live pipeline handle.
 */
size_t few_pipeline_n_features(const struct FewPipeline *p);

/**
 * Number of attributes the pipeline expects, or 0 for a null handle.
 *
 * # Safety
 * `p` must be null or a live pipeline handle.
 */
size_t few_pipeline_n_inputs(const struct FewPipeline *p);

/**
 * Validation accuracy of the archived feature set.
 *
 * # Safety
 * `p` must be a live pipeline handle and `out` writable.
 */
enum FewStatus few_pipeline_best_score(const struct FewPipeline *p, double *out);

/**
 * S-expression of feature `index`. The string is released with
 * `few_string_free`.
 *
 * # Safety
 * `p` must be a live pipeline handle and `out` writable.
 */
enum FewStatus few_pipeline_feature_text(const struct FewPipeline *p, size_t index, char **out);

/**
 * # Safety
 * `p` must be null or a handle not yet freed.
 */
void few_pipeline_free(struct FewPipeline *p);

/**
 * Releases a string returned by this library.
 *
 * # Safety
 * `s` must be null or a string from this library not yet freed.
 */
void few_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FEW_H */
