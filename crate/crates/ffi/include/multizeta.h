#ifndef MULTIZETA_H
#define MULTIZETA_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result code of every fallible call.
 */
typedef enum MzStatus {
  MZ_STATUS_OK = 0,
  MZ_STATUS_NULL_POINTER = 1,
  MZ_STATUS_INVALID_UTF8 = 2,
  MZ_STATUS_INVALID_PARAMETER = 3,
  MZ_STATUS_DIMENSION_MISMATCH = 4,
  MZ_STATUS_NON_FINITE = 5,
  MZ_STATUS_NOT_POSITIVE_DEFINITE = 6,
  MZ_STATUS_IO = 7,
  MZ_STATUS_PARSE = 8,
  MZ_STATUS_INVALID_DATA = 9,
  MZ_STATUS_SERIALIZATION = 10,
  MZ_STATUS_PANIC = 11,
} MzStatus;

typedef enum MzKernelFamily {
  MZ_KERNEL_FAMILY_SQUARED_EXPONENTIAL = 0,
  MZ_KERNEL_FAMILY_EXPONENTIAL = 1,
  MZ_KERNEL_FAMILY_MATERN32 = 2,
  MZ_KERNEL_FAMILY_MATERN52 = 3,
} MzKernelFamily;

/*
 Opaque dataset handle.
 */
typedef struct MzDataset MzDataset;

/*
 Opaque fitted-model handle.
 */
typedef struct MzModel MzModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread, or NULL. The pointer stays
 valid until the next `mz_*` call on the same thread.
 */
const char *mz_last_error_message(void);

/*
 Loads a CSV dataset (header row, last column is the target).
 */
enum MzStatus mz_dataset_load_csv(const char *path, struct MzDataset **out);

/*
 Builds a dataset from `n_rows x dimension` row-major inputs and `n_rows` targets.
 */
enum MzStatus mz_dataset_from_arrays(const double *inputs,
                                     const double *targets,
                                     size_t n_rows,
                                     size_t dimension,
                                     struct MzDataset **out);

/*
 Synthetic Morse-like surface sampled uniformly on `[-halfwidth, halfwidth]^dimension`.
 */
enum MzStatus mz_dataset_synthetic(size_t dimension,
                                   size_t n_points,
                                   uint64_t seed,
                                   double halfwidth,
                                   struct MzDataset **out);

/*
 Number of rows, 0 for NULL.
 */
size_t mz_dataset_len(const struct MzDataset *dataset);

/*
 Number of input columns, 0 for NULL.
 */
size_t mz_dataset_dimension(const struct MzDataset *dataset);

void mz_dataset_free(struct MzDataset *dataset);

/*
 Rectangular multi-zeta fit on every row of `dataset`, using its first
 `n_centers` rows as centers. Inputs are standardized with statistics of
 the whole dataset. `lengths` must be positive and strictly increasing.
 */
enum MzStatus mz_fit_rectangular(const struct MzDataset *dataset,
                                 size_t n_centers,
                                 enum MzKernelFamily family,
                                 const double *lengths,
                                 size_t n_lengths,
                                 double rcond,
                                 struct MzModel **out);

/*
 Square GPR fit `c = (K + delta I)^{-1} f` over every row of `dataset`.
 */
enum MzStatus mz_fit_square_gpr(const struct MzDataset *dataset,
                                enum MzKernelFamily family,
                                double length,
                                double delta,
                                struct MzModel **out);

/*
 Predicts `n_rows` raw (unstandardized) row-major inputs into `predictions`.
 */
enum MzStatus mz_model_predict(const struct MzModel *model,
                               const double *inputs,
                               size_t n_rows,
                               size_t dimension,
                               double *predictions);

/*
 Input dimension of the model, 0 for NULL.
 */
size_t mz_model_dimension(const struct MzModel *model);

/*
 Number of coefficients (centers times zeta count), 0 for NULL.
 */
size_t mz_model_coefficient_count(const struct MzModel *model);

/*
 Effective rank of the pseudoinverse solve; -1 for square GPR models or NULL.
 */
int64_t mz_model_effective_rank(const struct MzModel *model);

/*
 Serializes the model to JSON. Release the string with [`mz_string_free`].
 */
enum MzStatus mz_model_to_json(const struct MzModel *model, char **out);

enum MzStatus mz_model_from_json(const char *json, struct MzModel **out);

void mz_model_free(struct MzModel *model);

/*
 Frees a string returned by this library.
 */
void mz_string_free(char *s);

/*
 Probability that a standard normal vector in `dimension` dimensions lies within radius `r`.
 */
enum MzStatus mz_gaussian_mass_within(size_t dimension, double r, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MULTIZETA_H */
