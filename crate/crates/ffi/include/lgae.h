#ifndef LGAE_H
#define LGAE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Values of the `variant` arguments.
 */
#define LGAE_VARIANT_LGAE 0

#define LGAE_VARIANT_LGAE_KL 1

#define LGAE_VARIANT_VAE 2

/**
 * Values of the `repr` arguments.
 */
#define LGAE_REPR_MU 0

#define LGAE_REPR_MU_CONCAT_SIGMA 1

#define LGAE_REPR_LIE_ALGEBRA 2

typedef enum LgaeStatus {
  LGAE_STATUS_OK = 0,
  LGAE_STATUS_NULL_POINTER = 1,
  LGAE_STATUS_INVALID_ARGUMENT = 2,
  LGAE_STATUS_DIMENSION_MISMATCH = 3,
  LGAE_STATUS_NUMERIC = 4,
  LGAE_STATUS_IO = 5,
  LGAE_STATUS_PANIC = 6,
} LgaeStatus;

/**
 * Opaque model handle: parameters, optimizer state and random generator.
 */
typedef struct LgaeModel LgaeModel;

typedef struct LgaeLoss {
  double total;
  double rec;
  double reg;
} LgaeLoss;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *lgae_version(void);

/**
 * Copies the message recorded by the calling thread's most recent call into `buf` (truncated and
 * always NUL-terminated when `buf_len > 0`). Returns the buffer size needed
 * for the full message including the terminator.
 */
size_t lgae_last_error_message(char *buf, size_t buf_len);

/**
 * `sigma = exp(phi)`, `mu = theta * (exp(phi) - 1) / phi` for `k` components.
 */
enum LgaeStatus lgae_diag_exp_map(const double *phi,
                                  const double *theta,
                                  size_t k,
                                  double *mu_out,
                                  double *sigma_out);

/**
 * Inverse of [`lgae_diag_exp_map`]; every `sigma` must be positive.
 */
enum LgaeStatus lgae_diag_log_map(const double *mu,
                                  const double *sigma,
                                  size_t k,
                                  double *phi_out,
                                  double *theta_out);

/**
 * Geodesic distance between two UTDATs given as upper-triangular `n x n`
 * factors (row-major) and `n`-vectors of means.
 */
enum LgaeStatus lgae_geodesic_distance(size_t n,
                                       const double *u_a,
                                       const double *mu_a,
                                       const double *u_b,
                                       const double *mu_b,
                                       double *out);

/**
 * Mean over `batch` rows of `sum(phi^2 + theta^2)`; `phi` and `theta` are
 * `batch x k`.
 */
enum LgaeStatus lgae_intrinsic_loss(const double *phi,
                                    const double *theta,
                                    size_t batch,
                                    size_t k,
                                    double *out);

/**
 * Creates a randomly initialized model with samples per input `m = 1`.
 */
enum LgaeStatus lgae_model_new(uint32_t variant,
                               size_t input_dim,
                               size_t hidden,
                               size_t latent_dim,
                               double lambda,
                               double learning_rate,
                               uint64_t seed,
                               struct LgaeModel **out);

/**
 * Loads a checkpoint written by `lgae train`, including optimizer and
 * random generator state.
 */
enum LgaeStatus lgae_model_load(const char *path, struct LgaeModel **out);

/**
 * Releases a handle. Null is accepted and ignored.
 */
void lgae_model_free(struct LgaeModel *model);

enum LgaeStatus lgae_model_dims(const struct LgaeModel *model,
                                size_t *input_dim,
                                size_t *latent_dim);

/**
 * Number of `double`s written by [`lgae_model_encode`] per input row.
 */
enum LgaeStatus lgae_model_repr_width(const struct LgaeModel *model, uint32_t repr, size_t *width);

/**
 * Deterministic encoder features of `rows` inputs. `out_len` must equal
 * `rows` times the width reported by [`lgae_model_repr_width`].
 */
enum LgaeStatus lgae_model_encode(const struct LgaeModel *model,
                                  const double *x,
                                  size_t rows,
                                  size_t cols,
                                  uint32_t repr,
                                  double *out,
                                  size_t out_len);

/**
 * Decoder probabilities for `rows` latent codes; writes `rows * input_dim`
 * values.
 */
enum LgaeStatus lgae_model_decode(const struct LgaeModel *model,
                                  const double *z,
                                  size_t rows,
                                  size_t latent_dim,
                                  double *out,
                                  size_t out_len);

/**
 * One Adagrad step on a minibatch; `loss` receives the pre-update loss.
 */
enum LgaeStatus lgae_model_train_step(struct LgaeModel *model,
                                      const double *x,
                                      size_t rows,
                                      size_t cols,
                                      struct LgaeLoss *loss);

/**
 * One shuffled pass over `rows` examples; `loss` receives the epoch means.
 */
enum LgaeStatus lgae_model_train_epoch(struct LgaeModel *model,
                                       const double *x,
                                       size_t rows,
                                       size_t cols,
                                       size_t batch_size,
                                       struct LgaeLoss *loss);

/**
 * Mean loss over `rows` examples with sampling noise drawn from `seed`.
 * Leaves the model untouched.
 */
enum LgaeStatus lgae_model_eval_loss(const struct LgaeModel *model,
                                     const double *x,
                                     size_t rows,
                                     size_t cols,
                                     size_t batch_size,
                                     uint64_t seed,
                                     struct LgaeLoss *loss);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LGAE_H */
