#ifndef NETPRICE_H
#define NETPRICE_H

/* Generated by cbindgen from the netprice-ffi crate. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum NpStatus {
  NP_STATUS_OK = 0,
  NP_STATUS_NULL_POINTER = 1,
  NP_STATUS_INVALID_ARGUMENT = 2,
  NP_STATUS_PARAM = 3,
  NP_STATUS_FIT = 4,
  NP_STATUS_SHAPE = 5,
  NP_STATUS_IO = 6,
  NP_STATUS_JSON = 7,
  NP_STATUS_DEGENERATE_VARIANCE = 8,
  NP_STATUS_PANIC = 99,
} NpStatus;

typedef enum NpEstimator {
  NP_ESTIMATOR_RANDOM_FOREST = 0,
  NP_ESTIMATOR_GRADIENT_BOOSTED = 1,
  NP_ESTIMATOR_DECISION_TREE = 2,
  NP_ESTIMATOR_LINEAR = 3,
} NpEstimator;

// Row-major feature matrix with labels.
typedef struct NpDataset NpDataset;

// A fitted model with its estimator, parameters and feature names.
typedef struct NpModel NpModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread; empty if none. The
// pointer stays valid until the next failing call on the same thread.
const char *np_last_error(void);

// Library version as a static NUL-terminated string.
const char *np_version(void);

// Copies an `n_rows × n_features` row-major matrix and `n_rows` labels
// into a new dataset.
//
// # Safety
// `x` must point to `n_rows * n_features` doubles, `y` to `n_rows`
// doubles, and `out` to writable storage for one pointer.
enum NpStatus np_dataset_new(const double *x,
                             size_t n_rows,
                             size_t n_features,
                             const double *y,
                             struct NpDataset **out);

// # Safety
// `data` must be null or a handle from `np_dataset_new` not yet freed.
void np_dataset_free(struct NpDataset *data);

// # Safety
// `data` must be a live dataset handle.
size_t np_dataset_n_rows(const struct NpDataset *data);

// # Safety
// `data` must be a live dataset handle.
size_t np_dataset_n_features(const struct NpDataset *data);

// Fits an estimator. `params_json` is a JSON object of hyperparameters,
// e.g. `{"max_depth": 4}`; null means defaults.
//
// # Safety
// `data` must be a live dataset handle, `params_json` null or a
// NUL-terminated string, `out` writable.
enum NpStatus np_model_fit(enum NpEstimator kind,
                           const struct NpDataset *data,
                           const char *params_json,
                           struct NpModel **out);

// # Safety
// `model` must be null or a live model handle.
void np_model_free(struct NpModel *model);

// # Safety
// `model` must be a live model handle.
size_t np_model_n_features(const struct NpModel *model);

// Predicts `n_rows` rows of a row-major matrix into `out`.
//
// # Safety
// `x` must point to `n_rows * n_features` doubles and `out` to `n_rows`
// writable doubles.
enum NpStatus np_model_predict(const struct NpModel *model,
                               const double *x,
                               size_t n_rows,
                               size_t n_features,
                               double *out);

// Serializes the model document to a newly allocated JSON string; release
// it with `np_string_free`.
//
// # Safety
// `model` must be a live model handle and `out` writable.
enum NpStatus np_model_to_json(const struct NpModel *model, char **out);

// # Safety
// `json` must be a NUL-terminated string and `out` writable.
enum NpStatus np_model_from_json(const char *json, struct NpModel **out);

// # Safety
// `model` must be a live model handle and `path` a NUL-terminated string.
enum NpStatus np_model_save(const struct NpModel *model, const char *path);

// # Safety
// `path` must be a NUL-terminated string and `out` writable.
enum NpStatus np_model_load(const char *path, struct NpModel **out);

// # Safety
// `s` must be null or a string returned by this library.
void np_string_free(char *s);

// # Safety
// `y` and `yhat` must point to `n` doubles and `out` to one.
enum NpStatus np_rmse(const double *y, const double *yhat, size_t n, double *out);

// Fails with `NP_STATUS_DEGENERATE_VARIANCE` when `y` is constant.
//
// # Safety
// `y` and `yhat` must point to `n` doubles and `out` to one.
enum NpStatus np_r2(const double *y, const double *yhat, size_t n, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NETPRICE_H */
