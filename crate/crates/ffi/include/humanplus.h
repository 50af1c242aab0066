#ifndef HUMANPLUS_H
#define HUMANPLUS_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum HpStatus {
  HP_STATUS_OK = 0,
  HP_STATUS_NULL_POINTER = 1,
  HP_STATUS_INVALID_ARGUMENT = 2,
  HP_STATUS_IO = 3,
  HP_STATUS_PARSE = 4,
  HP_STATUS_DIMENSION = 5,
  HP_STATUS_NOT_RESET = 6,
  HP_STATUS_NON_FINITE = 7,
  HP_STATUS_BUFFER_TOO_SMALL = 8,
  HP_STATUS_PANIC = 9,
} HpStatus;

/**
 * Physics environment with its own random stream.
 */
typedef struct HpEnv HpEnv;

/**
 * Kinematic description of a humanoid.
 */
typedef struct HpModel HpModel;

/**
 * Human motion clip.
 */
typedef struct HpMotion HpMotion;

/**
 * Shadowing policy together with its token history.
 */
typedef struct HpPolicy HpPolicy;

/**
 * Retargeted per-step humanoid targets.
 */
typedef struct HpTargets HpTargets;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *hp_version(void);

/**
 * Length in bytes of the last error message on this thread, without the
 * terminating NUL.
 */
uintptr_t hp_last_error_length(void);

/**
 * Copies the last error message into `buf` as a NUL-terminated string,
 * truncating to `cap - 1` bytes. Returns the full message length.
 *
 * # Safety
 * `buf` must be null or valid for `cap` bytes of writes.
 */
uintptr_t hp_last_error_message(char *buf, uintptr_t cap);

/**
 * Creates the built-in 33-joint humanoid.
 *
 * # Safety
 * `out` must be valid for one pointer write.
 */
enum HpStatus hp_model_default(struct HpModel **out);

/**
 * Loads a humanoid description from a TOML file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` valid for one pointer write.
 */
enum HpStatus hp_model_load(const char *path, struct HpModel **out);

/**
 * # Safety
 * `model` must be null or a handle from `hp_model_default`/`hp_model_load`
 * that has not been freed.
 */
void hp_model_free(struct HpModel *model);

/**
 * Number of actuated joints, or 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
uintptr_t hp_model_num_joints(const struct HpModel *model);

/**
 * Number of links, or 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
uintptr_t hp_model_num_links(const struct HpModel *model);

/**
 * Writes the lower and upper joint limits, one value per joint.
 *
 * # Safety
 * `lower` and `upper` must each be valid for `cap` doubles.
 */
enum HpStatus hp_model_joint_limits(const struct HpModel *model,
                                    double *lower,
                                    double *upper,
                                    uintptr_t cap);

/**
 * Computes world link positions (x, y, z per link) for a base pose given as
 * a position and a (w, x, y, z) quaternion plus joint angles.
 *
 * # Safety
 * `base_position` must hold 3 doubles, `base_quaternion` 4, `q` `nq`, and
 * `positions` must be valid for `cap` doubles.
 */
enum HpStatus hp_model_forward_kinematics(const struct HpModel *model,
                                          const double *base_position,
                                          const double *base_quaternion,
                                          const double *q,
                                          uintptr_t nq,
                                          double *positions,
                                          uintptr_t cap);

/**
 * Loads a motion clip in the canonical binary format.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` valid for one pointer write.
 */
enum HpStatus hp_motion_load(const char *path, struct HpMotion **out);

/**
 * # Safety
 * `motion` must be null or a live handle.
 */
void hp_motion_free(struct HpMotion *motion);

/**
 * # Safety
 * `motion` must be null or a live handle.
 */
uintptr_t hp_motion_num_frames(const struct HpMotion *motion);

/**
 * Frame rate in Hz, or 0 for a null handle.
 *
 * # Safety
 * `motion` must be null or a live handle.
 */
double hp_motion_fps(const struct HpMotion *motion);

/**
 * Retargets a motion onto a model with the built-in map, producing 50 Hz
 * targets.
 *
 * # Safety
 * `motion` and `model` must be live handles and `out` valid for one pointer write.
 */
enum HpStatus hp_targets_from_motion(const struct HpMotion *motion,
                                     const struct HpModel *model,
                                     struct HpTargets **out);

/**
 * Loads a saved target stream.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` valid for one pointer write.
 */
enum HpStatus hp_targets_load(const char *path, struct HpTargets **out);

/**
 * Targets that hold every joint at `q` for `frames` steps.
 *
 * # Safety
 * `q` must hold `nq` doubles and `out` be valid for one pointer write.
 */
enum HpStatus hp_targets_standing(const double *q,
                                  uintptr_t nq,
                                  uintptr_t frames,
                                  struct HpTargets **out);

/**
 * # Safety
 * `targets` must be null or a live handle.
 */
void hp_targets_free(struct HpTargets *targets);

/**
 * # Safety
 * `targets` must be null or a live handle.
 */
uintptr_t hp_targets_len(const struct HpTargets *targets);

/**
 * Writes the joint targets of one frame.
 *
 * # Safety
 * `q` must be valid for `cap` doubles.
 */
enum HpStatus hp_targets_joint_positions(const struct HpTargets *targets,
                                         uintptr_t frame,
                                         double *q,
                                         uintptr_t cap);

/**
 * Creates an environment with the default simulation settings.
 *
 * # Safety
 * `model` must be a live handle and `out` valid for one pointer write.
 */
enum HpStatus hp_env_new(const struct HpModel *model, uint64_t seed, struct HpEnv **out);

/**
 * # Safety
 * `env` must be null or a live handle.
 */
void hp_env_free(struct HpEnv *env);

/**
 * Proprioception length of the environment observation.
 */
uintptr_t hp_env_proprio_dim(void);

/**
 * Target token length of the environment observation.
 */
uintptr_t hp_env_target_dim(void);

/**
 * Body action length accepted by `hp_env_step`.
 */
uintptr_t hp_env_action_dim(void);

/**
 * Starts an episode on `targets` with freshly sampled physical parameters
 * and writes the first proprioception.
 *
 * # Safety
 * `env` and `targets` must be live handles and `proprio` valid for `cap` doubles.
 */
enum HpStatus hp_env_reset(struct HpEnv *env,
                           const struct HpTargets *targets,
                           double *proprio,
                           uintptr_t cap);

/**
 * Advances one policy step. `done` is set to 1 when the episode ended.
 *
 * # Safety
 * `action` must hold `n_action` doubles; `proprio` and `target` must be
 * valid for their capacities; `reward` and `done` must be valid for one write.
 */
enum HpStatus hp_env_step(struct HpEnv *env,
                          const double *action,
                          uintptr_t n_action,
                          double *proprio,
                          uintptr_t proprio_cap,
                          double *target,
                          uintptr_t target_cap,
                          double *reward,
                          int32_t *done);

/**
 * Loads a shadowing policy checkpoint.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` valid for one pointer write.
 */
enum HpStatus hp_policy_load(const char *path, struct HpPolicy **out);

/**
 * # Safety
 * `policy` must be null or a live handle.
 */
void hp_policy_free(struct HpPolicy *policy);

/**
 * Forgets the token history, as at the start of an episode.
 *
 * # Safety
 * `policy` must be a live handle.
 */
enum HpStatus hp_policy_reset(struct HpPolicy *policy);

/**
 * Appends one (proprioception, target) token and writes the mean action.
 *
 * # Safety
 * `proprio` and `target` must hold their stated lengths and `action` must
 * be valid for `action_cap` doubles.
 */
enum HpStatus hp_policy_act(struct HpPolicy *policy,
                            const double *proprio,
                            uintptr_t n_proprio,
                            const double *target,
                            uintptr_t n_target,
                            double *action,
                            uintptr_t action_cap);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HUMANPLUS_H */
