#ifndef LEAKY_IV_H
#define LEAKY_IV_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum LivStatus {
  LIV_STATUS_OK = 0,
  LIV_STATUS_NULL_POINTER = 1,
  LIV_STATUS_INVALID_INPUT = 2,
  LIV_STATUS_NOT_POSITIVE_DEFINITE = 3,
  LIV_STATUS_DEGENERATE_DATA = 4,
  LIV_STATUS_IRRELEVANCE = 5,
  LIV_STATUS_DEGENERATE_KAPPA = 6,
  LIV_STATUS_DOMAIN_ERROR = 7,
  LIV_STATUS_INFEASIBLE = 8,
  LIV_STATUS_ALL_ZERO_TAU = 9,
  LIV_STATUS_TOO_FEW_INSTRUMENTS = 10,
  LIV_STATUS_NULL_NOT_REPAIRABLE = 11,
  LIV_STATUS_TOO_MANY_DISCARDED = 12,
  LIV_STATUS_UNACHIEVABLE_SNR = 13,
  LIV_STATUS_DEGENERATE_DIRECTION = 14,
  LIV_STATUS_RANK_DEFICIENT = 15,
  LIV_STATUS_CHAIN_DIVERGED = 16,
  LIV_STATUS_IO = 17,
  LIV_STATUS_PANIC = 99,
} LivStatus;

typedef enum LivBootstrapMethod {
  LIV_BOOTSTRAP_METHOD_EMPIRICAL = 0,
  LIV_BOOTSTRAP_METHOD_KERNEL = 1,
  LIV_BOOTSTRAP_METHOD_GAUSSIAN = 2,
} LivBootstrapMethod;

/**
 * Opaque covariance handle.
 */
typedef struct LivCovariance LivCovariance;

/**
 * Opaque dataset handle.
 */
typedef struct LivDataset LivDataset;

/**
 * Sharp bounds and the minimum-leakage point they surround.
 */
typedef struct LivBounds {
  double theta_minus;
  double theta_plus;
  double rho_minus;
  double rho_plus;
  /**
   * Midpoint of the minimising set (a single point unless p ∈ {1, ∞}).
   */
  double theta_check;
  double rho_check;
  double tau_check;
  double tau;
  bool boundary_clipped;
} LivBounds;

typedef struct LivTestResult {
  double psi_hat;
  double p_value;
  size_t replicates;
  double theta_2sls;
} LivTestResult;

typedef struct LivBootstrapResult {
  double theta_minus;
  double theta_plus;
  double theta_minus_ci[2];
  double theta_plus_ci[2];
  size_t n_discarded;
  size_t replicates;
} LivBootstrapResult;

/**
 * Simulation settings; start from [`liv_sim_config_default`].
 */
typedef struct LivSimConfig {
  size_t d_z;
  /**
   * Toeplitz instrument covariance with lag-one correlation `autocorr` (else diagonal).
   */
  bool toeplitz;
  double autocorr;
  double rho;
  double snr_x;
  double snr_y;
  double theta_star;
  double sigma_yy;
  double gamma_sparsity;
  uint64_t seed;
} LivSimConfig;

/**
 * Scalar summary of the simulated ground truth.
 */
typedef struct LivGroundTruth {
  double theta_star;
  double rho;
  double eta_x;
  double eta_y;
  double tau_star_2;
  double tau_check_2;
} LivGroundTruth;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL. The pointer stays
 * valid until the next call into this library on the same thread.
 */
const char *liv_last_error_message(void);

/**
 * Static description of a status code.
 */
const char *liv_status_string(enum LivStatus status);

const char *liv_version(void);

/**
 * Copies an `n × (d_z + 2)` row-major matrix into a new dataset.
 *
 * # Safety
 * `values` must point to `n * (d_z + 2)` doubles; `out` must be writable.
 */
enum LivStatus liv_dataset_from_rows(const double *values,
                                     size_t n,
                                     size_t d_z,
                                     struct LivDataset **out);

/**
 * Reads a CSV with header `X,Y,Z1,...,Zd`.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum LivStatus liv_dataset_read_csv(const char *path, struct LivDataset **out);

/**
 * # Safety
 * `data` must be NULL or a handle from this library that has not been freed.
 */
void liv_dataset_free(struct LivDataset *data);

/**
 * Number of rows, or 0 for NULL.
 *
 * # Safety
 * `data` must be NULL or a live handle.
 */
size_t liv_dataset_n(const struct LivDataset *data);

/**
 * Number of instruments, or 0 for NULL.
 *
 * # Safety
 * `data` must be NULL or a live handle.
 */
size_t liv_dataset_d_z(const struct LivDataset *data);

/**
 * Sample covariance of a dataset (`ridge` is added to the diagonal).
 *
 * # Safety
 * `data` must be a live handle; `out` must be writable.
 */
enum LivStatus liv_covariance_from_dataset(const struct LivDataset *data,
                                           double ridge,
                                           bool unbiased,
                                           struct LivCovariance **out);

/**
 * Wraps a `size × size` row-major covariance of `[Z1..Zd, X, Y]`; it must be symmetric positive definite.
 *
 * # Safety
 * `matrix` must point to `size * size` doubles; `out` must be writable.
 */
enum LivStatus liv_covariance_from_matrix(const double *matrix,
                                          size_t size,
                                          struct LivCovariance **out);

/**
 * # Safety
 * `cov` must be NULL or a handle from this library that has not been freed.
 */
void liv_covariance_free(struct LivCovariance *cov);

/**
 * Bounds under ‖γ‖_p ≤ tau. Pass `p = INFINITY` for the max norm.
 *
 * # Safety
 * `cov` must be a live handle; `out` must be writable.
 */
enum LivStatus liv_bounds_scalar(const struct LivCovariance *cov,
                                 double p,
                                 double tau,
                                 struct LivBounds *out);

/**
 * Smallest feasible budget for ‖γ‖_p.
 *
 * # Safety
 * `cov` must be a live handle; `out` must be writable.
 */
enum LivStatus liv_min_leakage(const struct LivCovariance *cov, double p, double *out);

/**
 * Bounds under |γ_j| ≤ tau[j]; zero entries mark valid instruments.
 *
 * # Safety
 * `cov` must be a live handle, `tau` must point to `len` doubles and `out` must be writable.
 */
enum LivStatus liv_bounds_vector(const struct LivCovariance *cov,
                                 const double *tau,
                                 size_t len,
                                 struct LivBounds *out);

/**
 * Monte Carlo exclusion test with `replicates` ≥ 99 null draws.
 *
 * # Safety
 * `data` must be a live handle; `out` must be writable.
 */
enum LivStatus liv_exclusion_test(const struct LivDataset *data,
                                  size_t replicates,
                                  uint64_t seed,
                                  struct LivTestResult *out);

/**
 * Bootstrap intervals for both bounds under ‖γ‖_p ≤ tau.
 *
 * # Safety
 * `data` must be a live handle; `out` must be writable.
 */
enum LivStatus liv_bootstrap_bounds(const struct LivDataset *data,
                                    double p,
                                    double tau,
                                    size_t replicates,
                                    double alpha,
                                    enum LivBootstrapMethod method,
                                    uint64_t seed,
                                    struct LivBootstrapResult *out);

struct LivSimConfig liv_sim_config_default(void);

/**
 * Draws `n` rows; `truth` may be NULL.
 *
 * # Safety
 * `config` must be readable, `out` writable and `truth` NULL or writable.
 */
enum LivStatus liv_simulate(const struct LivSimConfig *config,
                            size_t n,
                            struct LivDataset **out,
                            struct LivGroundTruth *truth);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LEAKY_IV_H */
