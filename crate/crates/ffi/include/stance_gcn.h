#ifndef STANCE_GCN_H
#define STANCE_GCN_H

/* Generated by cbindgen. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SgStance {
  SG_STANCE_NEG = 0,
  SG_STANCE_NEUTRAL = 1,
  SG_STANCE_POS = 2,
} SgStance;

typedef enum SgStatus {
  SG_STATUS_OK = 0,
  SG_STATUS_NULL_ARGUMENT = 1,
  SG_STATUS_INVALID_UTF8 = 2,
  SG_STATUS_NOT_FOUND = 3,
  SG_STATUS_IO = 4,
  SG_STATUS_PARSE = 5,
  SG_STATUS_CONFIG = 6,
  SG_STATUS_BOUNDS = 7,
  SG_STATUS_NUMERICS = 8,
  SG_STATUS_EMPTY = 9,
  SG_STATUS_SHAPE = 10,
  SG_STATUS_PANIC = 11,
} SgStatus;

/**
 * Annotation classes resolved against a model's hashtags.
 */
typedef struct SgAnnotations SgAnnotations;

/**
 * Trained final embeddings of one fold plus the row names.
 */
typedef struct SgModel SgModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL. The pointer
 * stays valid until the next call into this library on the same thread.
 */
const char *sg_last_error(void);

/**
 * Library version, static string.
 */
const char *sg_version(void);

/**
 * Writes a synthetic dataset to `out_dir`. `config_text` holds `key = value`
 * lines and may be NULL.
 *
 * # Safety
 * String arguments must be NULL or NUL-terminated.
 */
enum SgStatus sg_synth(const char *out_dir, const char *config_text);

/**
 * Splits, trains every fold and writes the run directory.
 *
 * # Safety
 * String arguments must be NULL or NUL-terminated.
 */
enum SgStatus sg_train(const char *counts_dir,
                       const char *annotations,
                       const char *out_dir,
                       const char *config_text);

/**
 * Loads the final embeddings of `fold` from a run directory.
 *
 * # Safety
 * `run_dir` must be NUL-terminated; `out_model` must point to writable storage.
 */
enum SgStatus sg_model_load(const char *run_dir, size_t fold, struct SgModel **out_model);

/**
 * # Safety
 * `model` must come from [`sg_model_load`] and not be freed twice.
 */
void sg_model_free(struct SgModel *model);

/**
 * # Safety
 * `model` must be NULL or a live handle.
 */
size_t sg_model_n_users(const struct SgModel *model);

/**
 * # Safety
 * `model` must be NULL or a live handle.
 */
size_t sg_model_n_hashtags(const struct SgModel *model);

/**
 * # Safety
 * `model` must be NULL or a live handle.
 */
size_t sg_model_dim(const struct SgModel *model);

/**
 * Row of the named user.
 *
 * # Safety
 * `model` must be a live handle, `name` NUL-terminated.
 */
enum SgStatus sg_model_user_index(const struct SgModel *model, const char *name, size_t *out_index);

/**
 * Column of the named hashtag (normalized form, no `#`).
 *
 * # Safety
 * `model` must be a live handle, `name` NUL-terminated.
 */
enum SgStatus sg_model_hashtag_index(const struct SgModel *model,
                                     const char *name,
                                     size_t *out_index);

/**
 * Affinity of `user` for `hashtag`.
 *
 * # Safety
 * `model` must be a live handle.
 */
enum SgStatus sg_model_score(const struct SgModel *model,
                             size_t user,
                             size_t hashtag,
                             double *out_score);

/**
 * Up to `k` hashtag columns by descending affinity, ties to the lower
 * index. `out_indices` must hold `k` entries; `out_len` receives the count.
 *
 * # Safety
 * `model` must be a live handle and `out_indices` valid for `k` writes.
 */
enum SgStatus sg_model_top_k(const struct SgModel *model,
                             size_t user,
                             size_t k,
                             size_t *out_indices,
                             size_t *out_len);

/**
 * Reads a `class<TAB>hashtag` file and resolves it against the model's
 * hashtags. Annotated hashtags the model has never seen are dropped.
 *
 * # Safety
 * `model` must be a live handle, `file` NUL-terminated.
 */
enum SgStatus sg_annotations_load(const struct SgModel *model,
                                  const char *file,
                                  struct SgAnnotations **out_annotations);

/**
 * # Safety
 * `annotations` must come from [`sg_annotations_load`] and not be freed twice.
 */
void sg_annotations_free(struct SgAnnotations *annotations);

/**
 * Stance of `user`: the class whose annotated hashtags have the highest
 * mean affinity.
 *
 * # Safety
 * Both handles must be live and `annotations` loaded for this model.
 */
enum SgStatus sg_classify(const struct SgModel *model,
                          const struct SgAnnotations *annotations,
                          size_t user,
                          enum SgStance *out_stance);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* STANCE_GCN_H */
