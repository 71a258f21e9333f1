#ifndef INSPIRATION_H
#define INSPIRATION_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum InspStatus {
  INSP_STATUS_OK = 0,
  INSP_STATUS_NULL_POINTER = 1,
  INSP_STATUS_INVALID_ARGUMENT = 2,
  INSP_STATUS_PARSE_ERROR = 3,
  INSP_STATUS_IO_ERROR = 4,
  INSP_STATUS_BUFFER_TOO_SMALL = 5,
  /**
   * The episode has ended; reset before stepping again.
   */
  INSP_STATUS_EPISODE_OVER = 6,
  INSP_STATUS_PANIC = 7,
} InspStatus;

typedef enum InspActionKind {
  INSP_ACTION_KIND_PRIMITIVE = 0,
  INSP_ACTION_KIND_MACRO = 1,
  /**
   * Raw continuous controls; the point mass only.
   */
  INSP_ACTION_KIND_CONTINUOUS = 2,
} InspActionKind;

typedef enum InspRewardMode {
  INSP_REWARD_MODE_BASIC = 0,
  INSP_REWARD_MODE_PREF = 1,
  INSP_REWARD_MODE_SOFT = 2,
} InspRewardMode;

/**
 * A live environment episode with a fixed discrete action set.
 */
typedef struct InspEnv InspEnv;

/**
 * Saved model parameters with their action space.
 */
typedef struct InspModel InspModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; empty after a success.
 * Valid until the next call into this library on the same thread.
 */
const char *insp_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *insp_version(void);

/**
 * Loads a parameter file written by the command-line tool.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum InspStatus insp_model_load(const char *path, struct InspModel **out);

/**
 * # Safety
 * `model` must come from [`insp_model_load`] and not be used afterwards.
 */
void insp_model_free(struct InspModel *model);

/**
 * Observation width and number of policy outputs (actions, or the
 * continuous action dimension).
 *
 * # Safety
 * `model` must be a live handle; outputs must be writable.
 */
enum InspStatus insp_model_dims(const struct InspModel *model, size_t *obs_dim, size_t *n_outputs);

/**
 * Policy head output (logits or Gaussian means) and state value.
 *
 * # Safety
 * `obs` must hold `obs_len` values and `policy_out` `policy_len`.
 */
enum InspStatus insp_model_forward(const struct InspModel *model,
                                   const double *obs,
                                   size_t obs_len,
                                   double *policy_out,
                                   size_t policy_len,
                                   double *value_out);

/**
 * Probability that `s -> s_next` came from the expert. Both states have
 * the model's observation width.
 *
 * # Safety
 * `s` and `s_next` must each hold `len` values.
 */
enum InspStatus insp_model_classify(const struct InspModel *model,
                                    const double *s,
                                    const double *s_next,
                                    size_t len,
                                    double *out);

/**
 * Creates an environment from a preset name (`grid7`, `grid4`, `point`) or
 * an environment config file, and resets it.
 *
 * # Safety
 * `name` must be a NUL-terminated string; `out` must be writable.
 */
enum InspStatus insp_env_new(const char *name, enum InspActionKind kind, struct InspEnv **out);

/**
 * # Safety
 * `env` must come from [`insp_env_new`] and not be used afterwards.
 */
void insp_env_free(struct InspEnv *env);

/**
 * Observation width and number of discrete actions (the control
 * dimension for continuous environments).
 *
 * # Safety
 * `env` must be a live handle; outputs must be writable.
 */
enum InspStatus insp_env_dims(const struct InspEnv *env, size_t *obs_dim, size_t *n_actions);

/**
 * Starts a new episode and writes the initial observation.
 *
 * # Safety
 * `obs_out` must hold `obs_len` values.
 */
enum InspStatus insp_env_reset(struct InspEnv *env, uint64_t seed, double *obs_out, size_t obs_len);

/**
 * Executes discrete action `action` (a whole macro for macro sets).
 *
 * # Safety
 * `obs_out` must hold `obs_len` values; `reward_out` and `done_out` must be writable.
 */
enum InspStatus insp_env_step(struct InspEnv *env,
                              size_t action,
                              double *obs_out,
                              size_t obs_len,
                              double *reward_out,
                              bool *done_out);

/**
 * Executes a raw continuous control.
 *
 * # Safety
 * `control` must hold `control_len` values; other pointers as for [`insp_env_step`].
 */
enum InspStatus insp_env_step_continuous(struct InspEnv *env,
                                         const double *control,
                                         size_t control_len,
                                         double *obs_out,
                                         size_t obs_len,
                                         double *reward_out,
                                         bool *done_out);

/**
 * The state discrete action `action` would lead to from `state`, without
 * touching the episode.
 *
 * # Safety
 * `state` must hold `len` values and `out` `len` values.
 */
enum InspStatus insp_env_peek(const struct InspEnv *env,
                              const double *state,
                              size_t len,
                              size_t action,
                              double *out);

/**
 * Reward of `action` given the classifier scores of all actions. Scores
 * must lie strictly between 0 and 1.
 *
 * # Safety
 * `scores` must hold `n` values; `out` must be writable.
 */
enum InspStatus insp_reward(enum InspRewardMode mode,
                            const double *scores,
                            size_t n,
                            size_t action,
                            double *out);

/**
 * Worst relative error between analytic and central-difference gradients
 * over every head and trunk variant.
 *
 * # Safety
 * `out` must be writable.
 */
enum InspStatus insp_grad_check(uint64_t seed, double epsilon, double *out);

/**
 * k-means on `n` row-major points of width `dim`. Writes `k * dim`
 * centroid values, sorted lexicographically by row.
 *
 * # Safety
 * `points` must hold `n * dim` values and `out` `out_len`.
 */
enum InspStatus insp_kmeans(const double *points,
                            size_t n,
                            size_t dim,
                            size_t k,
                            uint64_t seed,
                            double *out,
                            size_t out_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* INSPIRATION_H */
