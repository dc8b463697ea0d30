#ifndef CONSTRAINTMATCH_H
#define CONSTRAINTMATCH_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define CM_REGIME_CONSTRAINTMATCH 0

#define CM_REGIME_CONSTRAINED 1

#define CM_REGIME_NAIVE_PL 2

#define CM_REGIME_FULLY_CONSTRAINED 3

#define CM_SELECTION_ENTROPY 0

#define CM_SELECTION_CONFIDENCE 1

/**
 * Result code of every fallible call.
 */
typedef enum CmStatus {
  CM_STATUS_OK = 0,
  CM_STATUS_NULL_POINTER = 1,
  CM_STATUS_INVALID_ARGUMENT = 2,
  CM_STATUS_DIMENSION_MISMATCH = 3,
  CM_STATUS_IO = 4,
  CM_STATUS_PARSE = 5,
  CM_STATUS_NON_FINITE = 6,
  CM_STATUS_UNLABELED = 7,
  CM_STATUS_PANIC = 8,
  CM_STATUS_OTHER = 9,
} CmStatus;

/**
 * Opaque list of pairwise constraints.
 */
typedef struct CmConstraints CmConstraints;

/**
 * Opaque dataset handle.
 */
typedef struct CmDataset CmDataset;

/**
 * Opaque trained model.
 */
typedef struct CmModel CmModel;

/**
 * Training options. Obtain defaults from [`cm_train_options_default`] and
 * change fields as needed. `n_out == 0` means one cluster per class.
 */
typedef struct CmTrainOptions {
  uint32_t regime;
  uint32_t selection;
  double tau;
  double lambda;
  bool soft;
  double mu;
  double eta;
  size_t total_steps;
  size_t warmup_steps;
  size_t batch_c;
  size_t batch_u;
  size_t n_out;
  uint64_t seed;
} CmTrainOptions;

typedef struct CmEvalReport {
  double acc;
  double nmi;
  double ari;
} CmEvalReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *cm_version(void);

/**
 * Message for the last failed call on this thread, or NULL. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *cm_last_error(void);

/**
 * Generates the Gaussian blobs benchmark: `k` classes of `per_class`
 * points in `d` dimensions.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum CmStatus cm_dataset_make_blobs(size_t k,
                                    size_t per_class,
                                    size_t d,
                                    double spread,
                                    uint64_t seed,
                                    struct CmDataset **out);

/**
 * Builds a dataset from a row-major `n x d` feature matrix. `labels` may be
 * NULL for unlabeled data; otherwise it must hold `n` entries.
 *
 * # Safety
 * `features` must point to `n * d` doubles, `labels` (if non-NULL) to `n`
 * values and `out` to writable storage for one handle.
 */
enum CmStatus cm_dataset_from_rows(const double *features,
                                   size_t n,
                                   size_t d,
                                   const size_t *labels,
                                   struct CmDataset **out);

/**
 * Reads a dataset CSV (feature columns, optional trailing `label`).
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` writable.
 */
enum CmStatus cm_dataset_load_csv(const char *path, struct CmDataset **out);

/**
 * Number of samples; 0 for NULL.
 *
 * # Safety
 * `ds` must be NULL or a live handle.
 */
size_t cm_dataset_len(const struct CmDataset *ds);

/**
 * Feature dimension; 0 for NULL.
 *
 * # Safety
 * `ds` must be NULL or a live handle.
 */
size_t cm_dataset_dim(const struct CmDataset *ds);

/**
 * Number of classes; 0 for NULL or unlabeled data.
 *
 * # Safety
 * `ds` must be NULL or a live handle.
 */
size_t cm_dataset_num_classes(const struct CmDataset *ds);

/**
 * # Safety
 * `ds` must be NULL or a handle not yet freed.
 */
void cm_dataset_free(struct CmDataset *ds);

/**
 * Samples `n_c` ground-truth constraints from a labeled dataset.
 *
 * # Safety
 * `ds` must be a live handle and `out` writable.
 */
enum CmStatus cm_constraints_sample(const struct CmDataset *ds,
                                    size_t n_c,
                                    uint64_t seed,
                                    struct CmConstraints **out);

/**
 * Builds a constraint list from parallel arrays; `must_link[t]` nonzero
 * marks pair `t` as must-link.
 *
 * # Safety
 * `i`, `j` and `must_link` must each point to `n` values; `out` writable.
 */
enum CmStatus cm_constraints_from_pairs(const size_t *i,
                                        const size_t *j,
                                        const uint8_t *must_link,
                                        size_t n,
                                        struct CmConstraints **out);

/**
 * Number of pairs; 0 for NULL.
 *
 * # Safety
 * `c` must be NULL or a live handle.
 */
size_t cm_constraints_len(const struct CmConstraints *c);

/**
 * Reads pair `idx`.
 *
 * # Safety
 * `c` must be a live handle; the out-pointers must be writable.
 */
enum CmStatus cm_constraints_get(const struct CmConstraints *c,
                                 size_t idx,
                                 size_t *i,
                                 size_t *j,
                                 uint8_t *must_link);

/**
 * # Safety
 * `c` must be NULL or a handle not yet freed.
 */
void cm_constraints_free(struct CmConstraints *c);

/**
 * Library defaults for the given regime (`CM_REGIME_*`). Naive
 * pseudo-labeling defaults to confidence selection.
 */
struct CmTrainOptions cm_train_options_default(uint32_t regime);

/**
 * Trains a model. `constraints` may be NULL for the fully constrained
 * regime, which draws pairs from the labels.
 *
 * # Safety
 * `ds` and `opts` must be valid, `constraints` NULL or live, `out` writable.
 */
enum CmStatus cm_train(const struct CmDataset *ds,
                       const struct CmConstraints *constraints,
                       const struct CmTrainOptions *opts,
                       struct CmModel **out);

/**
 * Number of output clusters; 0 for NULL.
 *
 * # Safety
 * `m` must be NULL or a live handle.
 */
size_t cm_model_n_out(const struct CmModel *m);

/**
 * Expected feature dimension; 0 for NULL.
 *
 * # Safety
 * `m` must be NULL or a live handle.
 */
size_t cm_model_input_dim(const struct CmModel *m);

/**
 * Writes the argmax cluster of each of the `n` rows into `out_labels`.
 *
 * # Safety
 * `features` must hold `n * d` doubles and `out_labels` room for `n`.
 */
enum CmStatus cm_model_predict(const struct CmModel *m,
                               const double *features,
                               size_t n,
                               size_t d,
                               size_t *out_labels);

/**
 * Writes the row-major `n x n_out` cluster probabilities into `out_probs`.
 *
 * # Safety
 * `features` must hold `n * d` doubles and `out_probs` room for
 * `n * n_out`.
 */
enum CmStatus cm_model_predict_proba(const struct CmModel *m,
                                     const double *features,
                                     size_t n,
                                     size_t d,
                                     double *out_probs);

/**
 * Scores the model on a labeled dataset.
 *
 * # Safety
 * `m` and `ds` must be live handles, `out` writable.
 */
enum CmStatus cm_model_evaluate(const struct CmModel *m,
                                const struct CmDataset *ds,
                                struct CmEvalReport *out);

/**
 * Scores raw cluster assignments against labels. Clusters beyond
 * `num_classes` that cannot be matched count as errors.
 *
 * # Safety
 * `preds` and `labels` must each hold `n` values; `out` writable.
 */
enum CmStatus cm_evaluate(const size_t *preds,
                          const size_t *labels,
                          size_t n,
                          size_t num_classes,
                          size_t n_out,
                          struct CmEvalReport *out);

/**
 * Writes a JSON checkpoint.
 *
 * # Safety
 * `m` must be live and `path` NUL-terminated.
 */
enum CmStatus cm_model_save(const struct CmModel *m, const char *path);

/**
 * Reads a JSON checkpoint.
 *
 * # Safety
 * `path` must be NUL-terminated and `out` writable.
 */
enum CmStatus cm_model_load(const char *path, struct CmModel **out);

/**
 * # Safety
 * `m` must be NULL or a handle not yet freed.
 */
void cm_model_free(struct CmModel *m);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CONSTRAINTMATCH_H */
