#ifndef LANDING_H
#define LANDING_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  LND_STATUS_OK = 0,
  LND_STATUS_NULL_POINTER = 1,
  LND_STATUS_INVALID_ARGUMENT = 2,
  LND_STATUS_CONFIG = 3,
  LND_STATUS_NON_CONVERGENCE = 4,
  LND_STATUS_FORMAT = 5,
  LND_STATUS_GEOMETRY_MISMATCH = 6,
  LND_STATUS_IO = 7,
  LND_STATUS_RUNTIME = 8,
  LND_STATUS_PANIC = 9,
} LndStatus;

typedef enum {
  LND_TRAJECTORY_STATIC = 0,
  LND_TRAJECTORY_RPM = 1,
  LND_TRAJECTORY_EIGHT_SHAPE = 2,
} LndTrajectory;

/**
 * Validated configuration with its derived hyperparameters.
 */
typedef struct LndConfig LndConfig;

/**
 * Trained Q-tables for all curriculum steps.
 */
typedef struct LndPolicy LndPolicy;

/**
 * Hyperparameters derived from a configuration.
 */
typedef struct {
  double a_mp_max;
  double omega_mp;
  double theta_max;
  double f_ag;
  double dt_agent;
  double t_0;
  uint32_t n_cs;
  uint32_t n_theta;
  double delta_theta;
  double p_max;
  double v_max;
  double a_max;
} LndDerived;

/**
 * Platform motion for an evaluation run.
 */
typedef struct {
  LndTrajectory kind;
  double v_mp;
  double r_mp;
} LndScenario;

/**
 * Aggregate results of one evaluation scenario.
 */
typedef struct {
  uint32_t n_trials;
  uint32_t successes;
  uint32_t misses;
  uint32_t flyzone_exits;
  double success_rate;
  /**
   * NaN when no trial touched down.
   */
  double mean_landing_time;
  double jitter_mean;
  double jitter_std;
} LndStats;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or NULL. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *lnd_last_error(void);

/**
 * Clears the per-thread error message.
 */
void lnd_clear_error(void);

/**
 * Creates a configuration from a named preset such as `"hardware-rpm-0.4"`.
 *
 * # Safety
 * `name` must be a NUL-terminated string and `out` a writable pointer.
 */
LndStatus lnd_config_from_preset(const char *name, LndConfig **out);

/**
 * Creates a configuration from TOML text.
 *
 * # Safety
 * `toml` must be a NUL-terminated string and `out` a writable pointer.
 */
LndStatus lnd_config_from_toml(const char *toml, LndConfig **out);

/**
 * # Safety
 * `config` must be NULL or a handle from `lnd_config_from_*` not yet freed.
 */
void lnd_config_free(LndConfig *config);

/**
 * # Safety
 * `config` must be a live handle and `out` a writable pointer.
 */
LndStatus lnd_config_derive(const LndConfig *config, LndDerived *out);

/**
 * Trains a policy with master seed `seed`. When a curriculum step fails to
 * converge, `*out` still receives the partial policy and the call returns
 * `LND_STATUS_NON_CONVERGENCE`.
 *
 * # Safety
 * `config` must be a live handle and `out` a writable pointer.
 */
LndStatus lnd_train(const LndConfig *config, uint64_t seed, LndPolicy **out);

/**
 * # Safety
 * `path` must be a NUL-terminated string and `out` a writable pointer.
 */
LndStatus lnd_policy_load(const char *path, LndPolicy **out);

/**
 * # Safety
 * `policy` must be a live handle and `path` a NUL-terminated string.
 */
LndStatus lnd_policy_save(const LndPolicy *policy, const char *path);

/**
 * # Safety
 * `policy` must be NULL or a live handle.
 */
void lnd_policy_free(LndPolicy *policy);

/**
 * Number of curriculum steps stored in the policy.
 *
 * # Safety
 * `policy` must be a live handle and `out` a writable pointer.
 */
LndStatus lnd_policy_num_steps(const LndPolicy *policy, uint32_t *out);

/**
 * Greedy action for one axis. `p`, `v`, `a` are normalized relative
 * position, velocity and acceleration; `i_theta` is the current pitch index
 * in `[0, 2 n_theta]`. Writes the action (0 increase, 1 decrease, 2 hold)
 * and the curriculum step whose table was used. Ties go to the lowest
 * action index.
 *
 * # Safety
 * `policy` must be a live handle; `action` and `step` writable pointers.
 */
LndStatus lnd_policy_act(const LndPolicy *policy,
                         double p,
                         double v,
                         double a,
                         uint32_t i_theta,
                         uint32_t *action,
                         uint32_t *step);

/**
 * Runs `n_trials` landing trials (0 uses the configured count) against one
 * platform motion.
 *
 * # Safety
 * `config` and `policy` must be live handles and `out` a writable pointer.
 */
LndStatus lnd_evaluate(const LndConfig *config,
                       const LndPolicy *policy,
                       LndScenario scenario,
                       uint32_t n_trials,
                       bool noisy,
                       uint64_t seed,
                       LndStats *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LANDING_H */
