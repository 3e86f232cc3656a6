#ifndef SOLARCAST_H
#define SOLARCAST_H

#pragma once

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum SolarcastStatus {
  SOLARCAST_STATUS_OK = 0,
  SOLARCAST_STATUS_NULL_POINTER = 1,
  SOLARCAST_STATUS_INVALID_PARAMETER = 2,
  SOLARCAST_STATUS_EMPTY_DATA = 3,
  SOLARCAST_STATUS_DIMENSION_MISMATCH = 4,
  SOLARCAST_STATUS_INSUFFICIENT_DATA = 5,
  SOLARCAST_STATUS_ZERO_VARIANCE = 6,
  SOLARCAST_STATUS_SINGULAR_FIT = 7,
  SOLARCAST_STATUS_NOT_POSITIVE_DEFINITE = 8,
  SOLARCAST_STATUS_NON_CONVERGENCE = 9,
  SOLARCAST_STATUS_INTERNAL = 10,
} SolarcastStatus;

// Gaussian posterior over weights plus likelihood noise.
typedef struct SolarcastBayesModel SolarcastBayesModel;

// Least-squares point model.
typedef struct SolarcastLinearModel SolarcastLinearModel;

// One linear model per quantile level.
typedef struct SolarcastQuantileModel SolarcastQuantileModel;

// Clear-sky irradiance in W/m² and solar zenith in degrees.
typedef struct SolarcastClearSky {
  double zenith_deg;
  double ghi;
  double dni;
} SolarcastClearSky;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the most recent failure on this thread, or null after a
// success. Valid until the next solarcast call on the same thread.
const char *solarcast_last_error_message(void);

// Static, NUL-terminated library version.
const char *solarcast_version(void);

// Fits ordinary least squares.
//
// # Safety
// `x` must point to `n_rows * n_features` doubles, `y` to `n_rows` doubles,
// and `out` must be writable. Release the model with
// [`solarcast_linear_free`].
enum SolarcastStatus solarcast_linear_fit(const double *x,
                                          size_t n_rows,
                                          size_t n_features,
                                          const double *y,
                                          bool intercept,
                                          struct SolarcastLinearModel **out);

// Number of weights including the intercept, or 0 for a null handle.
//
// # Safety
// `model` must be null or a live handle from [`solarcast_linear_fit`].
size_t solarcast_linear_n_weights(const struct SolarcastLinearModel *model);

// Copies the weights, intercept first when present.
//
// # Safety
// `model` must be a live handle and `out` must hold `len` doubles.
enum SolarcastStatus solarcast_linear_weights(const struct SolarcastLinearModel *model,
                                              double *out,
                                              size_t len);

// Point prediction at one row of raw features.
//
// # Safety
// `model` must be a live handle, `x` must hold `n_features` doubles and
// `out` must be writable.
enum SolarcastStatus solarcast_linear_predict(const struct SolarcastLinearModel *model,
                                              const double *x,
                                              size_t n_features,
                                              double *out);

// # Safety
// `model` must be null or a handle from [`solarcast_linear_fit`] that has
// not been freed.
void solarcast_linear_free(struct SolarcastLinearModel *model);

// Fits one quantile regression per level. Levels must be strictly
// increasing inside (0, 1).
//
// # Safety
// As for [`solarcast_linear_fit`]; `levels` must hold `n_levels` doubles.
// Release the model with [`solarcast_quantile_free`].
enum SolarcastStatus solarcast_quantile_fit(const double *x,
                                            size_t n_rows,
                                            size_t n_features,
                                            const double *y,
                                            bool intercept,
                                            const double *levels,
                                            size_t n_levels,
                                            struct SolarcastQuantileModel **out);

// Number of quantile levels, or 0 for a null handle.
//
// # Safety
// `model` must be null or a live handle from [`solarcast_quantile_fit`].
size_t solarcast_quantile_n_levels(const struct SolarcastQuantileModel *model);

// Writes one prediction per level, nondecreasing in the level.
//
// # Safety
// `model` must be a live handle, `x` must hold `n_features` doubles and
// `out` must hold `n_levels` doubles.
enum SolarcastStatus solarcast_quantile_predict(const struct SolarcastQuantileModel *model,
                                                const double *x,
                                                size_t n_features,
                                                double *out,
                                                size_t n_levels);

// # Safety
// `model` must be null or a handle from [`solarcast_quantile_fit`] that has
// not been freed.
void solarcast_quantile_free(struct SolarcastQuantileModel *model);

// Bayesian linear regression with the copula-derived prior. A NaN
// `noise_std` selects the residual standard deviation of a least-squares
// fit.
//
// # Safety
// As for [`solarcast_linear_fit`]. Release the model with
// [`solarcast_bayes_free`].
enum SolarcastStatus solarcast_bayes_fit(const double *x,
                                         size_t n_rows,
                                         size_t n_features,
                                         const double *y,
                                         bool intercept,
                                         double prior_std,
                                         double noise_std,
                                         struct SolarcastBayesModel **out);

// Posterior mean of the weights, intercept first when present.
//
// # Safety
// `model` must be a live handle and `out` must hold `len` doubles.
enum SolarcastStatus solarcast_bayes_posterior_mean(const struct SolarcastBayesModel *model,
                                                    double *out,
                                                    size_t len);

// Gaussian predictive mean and standard deviation at one row.
//
// # Safety
// `model` must be a live handle, `x` must hold `n_features` doubles and
// `mean` and `std` must be writable.
enum SolarcastStatus solarcast_bayes_predict(const struct SolarcastBayesModel *model,
                                             const double *x,
                                             size_t n_features,
                                             double *mean,
                                             double *std);

// # Safety
// `model` must be null or a handle from [`solarcast_bayes_fit`] that has
// not been freed.
void solarcast_bayes_free(struct SolarcastBayesModel *model);

// Closed-form CRPS of N(mean, std²) at `actual`.
//
// # Safety
// `out` must be writable.
enum SolarcastStatus solarcast_crps_gaussian(double mean, double std, double actual, double *out);

// Pinball loss of a level-`q` prediction.
//
// # Safety
// `out` must be writable.
enum SolarcastStatus solarcast_pinball(double q, double predicted, double actual, double *out);

// Clear-sky irradiance at a local standard clock time. `utc_offset` is in
// hours east of UTC; `turbidity` is the Linke factor in [1, 10].
//
// # Safety
// `out` must be writable.
enum SolarcastStatus solarcast_clear_sky(double latitude,
                                         double longitude,
                                         double utc_offset,
                                         int32_t year,
                                         uint32_t month,
                                         uint32_t day,
                                         uint32_t hour,
                                         uint32_t minute,
                                         double turbidity,
                                         struct SolarcastClearSky *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SOLARCAST_H */
