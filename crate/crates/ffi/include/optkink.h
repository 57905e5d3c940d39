#ifndef OPTKINK_H
#define OPTKINK_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum OptkinkStatus {
  OPTKINK_STATUS_OK = 0,
  OPTKINK_STATUS_INVALID_ARGUMENT = 1,
  OPTKINK_STATUS_INVALID_DATA = 2,
  OPTKINK_STATUS_INSUFFICIENT_SUPPORT = 3,
  OPTKINK_STATUS_NUMERICAL = 4,
  OPTKINK_STATUS_NULL_POINTER = 5,
  OPTKINK_STATUS_PANIC = 6,
} OptkinkStatus;

typedef enum OptkinkCriterion {
  // Worst-case mean squared error.
  OPTKINK_CRITERION_UMSE = 0,
  // Shortest honest interval.
  OPTKINK_CRITERION_HL = 1,
} OptkinkCriterion;

typedef enum OptkinkOrder {
  // Jump in the first derivative.
  OPTKINK_ORDER_KINK = 0,
  // Jump in the level.
  OPTKINK_ORDER_LEVEL = 1,
} OptkinkOrder;

typedef enum OptkinkVariance {
  OPTKINK_VARIANCE_NN = 0,
  OPTKINK_VARIANCE_NN_ADJUSTED = 1,
  OPTKINK_VARIANCE_HOMOSKEDASTIC = 2,
} OptkinkVariance;

// Solved optimized interval with its weights.
typedef struct OptkinkEstimate OptkinkEstimate;

// Observations relative to the cutoff.
typedef struct OptkinkSample OptkinkSample;

// Honest interval and its ingredients.
typedef struct OptkinkInterval {
  double estimate;
  double lower;
  double upper;
  double se;
  double max_bias;
  double t_bar;
  double cv;
  double kappa;
} OptkinkInterval;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failure on this thread, or null. The pointer stays valid
// until the next call into the library from the same thread.
const char *optkink_last_error(void);

// Library version as a static string.
const char *optkink_version(void);

// Copies `n` observations into a new sample; `x` is normalized by `cutoff`.
//
// # Safety
// `x` and `y` must point to `n` readable doubles and `out` to writable storage.
enum OptkinkStatus optkink_sample_new(const double *x,
                                      const double *y,
                                      size_t n,
                                      double cutoff,
                                      struct OptkinkSample **out_sample);

// Number of observations, or 0 for a null handle.
//
// # Safety
// `sample` must be null or a live handle.
size_t optkink_sample_len(const struct OptkinkSample *sample);

// Releases a sample; null is ignored.
//
// # Safety
// `sample` must be null or a handle not yet freed.
void optkink_sample_free(struct OptkinkSample *sample);

// Optimized honest interval at curvature bound `l`.
//
// # Safety
// `sample` must be a live handle and `out_estimate` writable.
enum OptkinkStatus optkink_estimate(const struct OptkinkSample *sample,
                                    double l,
                                    enum OptkinkCriterion criterion,
                                    enum OptkinkOrder order,
                                    enum OptkinkVariance variance,
                                    double alpha,
                                    struct OptkinkEstimate **out_estimate);

// Copies the interval of an estimate into `interval`.
//
// # Safety
// `estimate` must be a live handle and `interval` writable.
enum OptkinkStatus optkink_estimate_interval(const struct OptkinkEstimate *estimate,
                                             struct OptkinkInterval *interval);

// Copies the observation weights into `buf`, which must hold exactly the sample length.
//
// # Safety
// `estimate` must be a live handle and `buf` must point to `len` writable doubles.
enum OptkinkStatus optkink_estimate_weights(const struct OptkinkEstimate *estimate,
                                            double *buf,
                                            size_t len);

// Releases an estimate; null is ignored.
//
// # Safety
// `estimate` must be null or a handle not yet freed.
void optkink_estimate_free(struct OptkinkEstimate *estimate);

// Global quartic rule of thumb for the curvature bound.
//
// # Safety
// `sample` must be a live handle and `value` writable.
enum OptkinkStatus optkink_rot_quartic(const struct OptkinkSample *sample, double *value);

// Critical value for a bias of `t_bar` standard deviations at level `alpha`.
//
// # Safety
// `value` must be writable.
enum OptkinkStatus optkink_critical_value(double t_bar, double alpha, double *value);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* OPTKINK_H */
