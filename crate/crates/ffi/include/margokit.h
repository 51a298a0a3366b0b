#ifndef MARGOKIT_H
#define MARGOKIT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum MkStatus {
  MK_STATUS_OK = 0,
  MK_STATUS_NULL_POINTER = 1,
  MK_STATUS_INVALID_ARGUMENT = 2,
  MK_STATUS_INCOMPATIBLE = 3,
  MK_STATUS_DIMENSION_MISMATCH = 4,
  MK_STATUS_MISSING_LABELS = 5,
  MK_STATUS_PARSE = 6,
  MK_STATUS_MODEL_FILE = 7,
  MK_STATUS_NUMERICAL = 8,
  MK_STATUS_IO = 9,
  MK_STATUS_PANIC = 10,
} MkStatus;

typedef enum MkMethod {
  MK_METHOD_MTL = 0,
  MK_METHOD_POOLING = 1,
} MkMethod;

typedef enum MkTrainer {
  MK_TRAINER_EXACT = 0,
  MK_TRAINER_RFF = 1,
  MK_TRAINER_NYSTROM = 2,
} MkTrainer;

typedef enum MkLoss {
  MK_LOSS_HINGE = 0,
  MK_LOSS_EPS_INSENSITIVE = 1,
} MkLoss;

/**
 * Opaque bag collection.
 */
typedef struct MkCollection MkCollection;

/**
 * Opaque trained model.
 */
typedef struct MkModel MkModel;

/**
 * Training options; fill with [`mk_train_config_default`] and adjust.
 */
typedef struct MkTrainConfig {
  enum MkMethod method;
  enum MkTrainer trainer;
  enum MkLoss loss;
  /**
   * Tube half-width for `EpsInsensitive`; ignored for `Hinge`.
   */
  double epsilon;
  double lambda;
  double sigma_x;
  double sigma_xp;
  double sigma_p;
  size_t rff_inner;
  size_t rff_outer;
  size_t nystrom_m;
  uint64_t seed;
  /**
   * Nonzero: pooled examples weighted 1/M instead of 1/(N n_i).
   */
  int32_t concatenate;
} MkTrainConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *mk_last_error(void);

/**
 * Defaults used by the command-line tool.
 *
 * # Safety
 * `out` must point to writable memory for one `MkTrainConfig`.
 */
enum MkStatus mk_train_config_default(struct MkTrainConfig *out);

/**
 * Read a bag CSV.
 *
 * # Safety
 * `path` must be a nul-terminated string; `out` must be writable.
 */
enum MkStatus mk_collection_read(const char *path, struct MkCollection **out);

/**
 * Generate the synthetic ellipse collection.
 *
 * # Safety
 * `out` must be writable.
 */
enum MkStatus mk_collection_synth(size_t tasks,
                                  size_t points,
                                  uint64_t seed,
                                  struct MkCollection **out);

/**
 * Write a collection as bag CSV.
 *
 * # Safety
 * `coll` must be a live handle and `path` a nul-terminated string.
 */
enum MkStatus mk_collection_write(const struct MkCollection *coll, const char *path);

/**
 * Number of bags, or 0 for a null handle.
 *
 * # Safety
 * `coll` must be null or a live handle.
 */
size_t mk_collection_len(const struct MkCollection *coll);

/**
 * Feature dimension, or 0 for a null handle.
 *
 * # Safety
 * `coll` must be null or a live handle.
 */
size_t mk_collection_dim(const struct MkCollection *coll);

/**
 * # Safety
 * `coll` must be null or a handle not yet freed.
 */
void mk_collection_free(struct MkCollection *coll);

/**
 * Train on a labelled collection.
 *
 * # Safety
 * `coll` and `cfg` must be valid pointers; `out` must be writable.
 */
enum MkStatus mk_train(const struct MkCollection *coll,
                       const struct MkTrainConfig *cfg,
                       struct MkModel **out);

/**
 * # Safety
 * `path` must be a nul-terminated string; `out` must be writable.
 */
enum MkStatus mk_model_load(const char *path, struct MkModel **out);

/**
 * # Safety
 * `model` must be a live handle and `path` a nul-terminated string.
 */
enum MkStatus mk_model_save(const struct MkModel *model, const char *path);

/**
 * Input dimension of a model, or 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t mk_model_input_dim(const struct MkModel *model);

/**
 * Margins for one test bag given as a row-major `n x d` matrix; the bag
 * itself serves as the test marginal. Writes `n` values to `out`.
 *
 * # Safety
 * `points` must hold `n * d` doubles and `out` room for `n` doubles.
 */
enum MkStatus mk_model_predict(const struct MkModel *model,
                               const double *points,
                               size_t n,
                               size_t d,
                               double *out);

/**
 * Mean per-bag risk and, for classification models, the error rate
 * (`error_rate` is set to NaN for regression).
 *
 * # Safety
 * Handles must be live; output pointers must be writable.
 */
enum MkStatus mk_model_evaluate(const struct MkModel *model,
                                const struct MkCollection *coll,
                                double *mean_risk,
                                double *error_rate);

/**
 * # Safety
 * `model` must be null or a handle not yet freed.
 */
void mk_model_free(struct MkModel *model);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MARGOKIT_H */
