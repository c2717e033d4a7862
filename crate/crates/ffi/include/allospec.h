#ifndef ALLOSPEC_H
#define ALLOSPEC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/*
 Result codes.
 */
typedef enum AllospecStatus {
  ALLOSPEC_STATUS_OK = 0,
  /*
   Null pointer, bad length, or out-of-range argument.
   */
  ALLOSPEC_STATUS_INVALID_ARGUMENT = 1,
  /*
   Malformed JSON or a value rejected by a schema or model check.
   */
  ALLOSPEC_STATUS_CONFIG = 2,
  /*
   Eigensolver failure, indefinite matrix, or undefined sign convention.
   */
  ALLOSPEC_STATUS_NUMERICAL = 3,
  ALLOSPEC_STATUS_UNSUPPORTED = 4,
  ALLOSPEC_STATUS_IO = 5,
  /*
   A Rust panic was caught at the boundary.
   */
  ALLOSPEC_STATUS_PANIC = 6,
} AllospecStatus;

/*
 Opaque model handle.
 */
typedef struct AllospecModel AllospecModel;

/*
 Opaque labeled-sample handle.
 */
typedef struct AllospecSample AllospecSample;

/*
 Absolute constants of the bounds.
 */
typedef struct AllospecConstants {
  double big_c;
  double small_c;
  double k;
  double k_g;
} AllospecConstants;

/*
 Summary of one clustering of a labeled sample.
 */
typedef struct AllospecClusterSummary {
  double lambda1_hat;
  double misclustering_rate;
  bool exact_recovery;
  /*
   Set when the sample covariance has no clear leading eigenvalue.
   */
  bool ill_conditioned;
  /*
   Oracle-aligned misclassification count, or -1 when no alignment
   direction was given.
   */
  int64_t misclassification_count;
} AllospecClusterSummary;

/*
 Both sides of the sample-size condition.
 */
typedef struct AllospecCondition {
  double lhs;
  double rhs;
  bool holds;
} AllospecCondition;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Library version as a static NUL-terminated string.
 */
const char *allospec_version(void);

/*
 Message for the last failure on this thread, or null if none. Valid until
 the next failing call on the same thread.
 */
const char *allospec_last_error(void);

/*
 Releases a string returned by this library.
 */
void allospec_string_free(char *s);

/*
 Standard normal distribution function.
 */
double allospec_std_normal_cdf(double x);

/*
 Default constants: `C = 1`, `c = 0.01`, `K = √(32/(4−e))`, `K_g = √(8/3)`.
 */
struct AllospecConstants allospec_constants_default(void);

/*
 Builds a model from a JSON model spec (`n`, `mu_norm`, `mu_direction`,
 `eigvals1`, `eigvals2`, `tail_basis`, `pi1`).
 */
enum AllospecStatus allospec_model_build(const char *spec_json, struct AllospecModel **out);

/*
 Reads a model from its JSON file representation and validates it.
 */
enum AllospecStatus allospec_model_from_json(const char *json, struct AllospecModel **out);

/*
 Assembles a model from `mu` (length `n`) and the packed lower triangles of
 both covariances (length `n(n+1)/2`, row-major), then validates it with
 alignment tolerance `tol`.
 */
enum AllospecStatus allospec_model_from_parts(size_t n,
                                              const double *mu,
                                              const double *sigma1_packed,
                                              const double *sigma2_packed,
                                              double pi1,
                                              double tol,
                                              struct AllospecModel **out);

void allospec_model_free(struct AllospecModel *model);

enum AllospecStatus allospec_model_dim(const struct AllospecModel *model, size_t *out);

/*
 Serializes the model; release the string with [`allospec_string_free`].
 */
enum AllospecStatus allospec_model_to_json(const struct AllospecModel *model, char **out);

/*
 Signal-to-noise ratio `‖μ‖² / max(λ₁(Σ₁), λ₁(Σ₂))`.
 */
enum AllospecStatus allospec_model_snr(const struct AllospecModel *model, double *out);

/*
 Runs every invariant check at tolerance `tol`; `passed` receives the
 overall verdict. A failing check is not an error.
 */
enum AllospecStatus allospec_model_validate(const struct AllospecModel *model,
                                            double tol,
                                            bool *passed);

/*
 Exact leading eigenvalue of the mixture covariance.
 */
enum AllospecStatus allospec_model_lambda1_mix(const struct AllospecModel *model, double *out);

/*
 Draws `m` labeled points from stream `(seed, stream_id)`.
 */
enum AllospecStatus allospec_sample_draw(const struct AllospecModel *model,
                                         size_t m,
                                         uint64_t seed,
                                         uint64_t stream_id,
                                         struct AllospecSample **out);

void allospec_sample_free(struct AllospecSample *sample);

enum AllospecStatus allospec_sample_dims(const struct AllospecSample *sample, size_t *m, size_t *n);

/*
 Copies the points row-major into `buf`, which must hold `m·n` values.
 */
enum AllospecStatus allospec_sample_points(const struct AllospecSample *sample,
                                           double *buf,
                                           size_t len);

/*
 Copies the `±1` labels into `buf`, which must hold `m` values.
 */
enum AllospecStatus allospec_sample_labels(const struct AllospecSample *sample,
                                           int8_t *buf,
                                           size_t len);

/*
 Clusters a labeled sample and scores it. `align` (length `n`, may be
 null) fixes the sign of the estimated eigenvector for the
 misclassification count.
 */
enum AllospecStatus allospec_sample_cluster(const struct AllospecSample *sample,
                                            const double *align,
                                            struct AllospecClusterSummary *out);

/*
 Clusters unlabeled points (`m×n`, row-major). Writes the cluster sign of
 every point to `signs` (length `m`) and, if non-null, the unit leading
 eigenvector to `gamma` (length `n`).
 */
enum AllospecStatus allospec_cluster_points(const double *points,
                                            size_t m,
                                            size_t n,
                                            int8_t *signs,
                                            double *gamma);

/*
 Per-point misclassification bound `Φ(−(1−α)‖μ‖/√maxλ₁) + 6e^{−n}`.
 */
enum AllospecStatus allospec_misclassification_bound(const struct AllospecModel *model,
                                                     double alpha,
                                                     double n,
                                                     double *out);

/*
 Mills-ratio form of the misclassification bound.
 */
enum AllospecStatus allospec_mills_bound(double alpha, double eta, double n, double *out);

/*
 Evaluates the sample-size condition; `constants` may be null for the
 defaults.
 */
enum AllospecStatus allospec_condition(const struct AllospecModel *model,
                                       double m,
                                       double n,
                                       double alpha,
                                       const struct AllospecConstants *constants,
                                       struct AllospecCondition *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ALLOSPEC_H */
