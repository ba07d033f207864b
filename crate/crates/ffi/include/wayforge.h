#ifndef WAYFORGE_H
#define WAYFORGE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes. Values 2 to 5 match the `wayforge` CLI exit codes.
 */
typedef enum WfStatus {
  WF_STATUS_OK = 0,
  WF_STATUS_NULL_POINTER = 1,
  WF_STATUS_CONFIG = 2,
  WF_STATUS_SCENARIO = 3,
  WF_STATUS_MISMATCH = 4,
  WF_STATUS_INTERNAL = 5,
  WF_STATUS_INVALID_ARGUMENT = 6,
  WF_STATUS_PANIC = 7,
} WfStatus;

typedef struct WfConfig WfConfig;

typedef struct WfFuzzy WfFuzzy;

typedef struct WfPlan WfPlan;

typedef struct WfScenario WfScenario;

typedef struct WfEnergy {
  double f_l;
  double f_z;
  double f;
} WfEnergy;

typedef struct WfTrackingSummary {
  /**
   * -1 when the deviations never settle inside the band.
   */
  int64_t convergence_step;
  double max_center_mm;
  double max_angle_deg;
  double realized_length_m;
  uint64_t off_track_events;
  bool reached_goal;
} WfTrackingSummary;

typedef struct WfPose {
  double x;
  double y;
  double theta;
} WfPose;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Last error message on this thread, or NULL. The pointer stays valid
 * until the next failing call on the same thread.
 */
const char *wf_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *wf_version(void);

/**
 * Parses scenario-file text.
 *
 * # Safety
 * `text_ptr` must be NUL-terminated; `out` must be writable.
 */
enum WfStatus wf_scenario_parse(const char *text_ptr, struct WfScenario **out);

/**
 * # Safety
 * `scenario` must be NULL or a handle from this library.
 */
void wf_scenario_free(struct WfScenario *scenario);

/**
 * Number of obstacles, or 0 for NULL.
 *
 * # Safety
 * `scenario` must be NULL or a live handle.
 */
size_t wf_scenario_obstacle_count(const struct WfScenario *scenario);

/**
 * Default run configuration.
 *
 * # Safety
 * `out` must be writable.
 */
enum WfStatus wf_config_default(struct WfConfig **out);

/**
 * Parses TOML config text. Relative scenario paths resolve against
 * `base_dir`, which may be NULL for the working directory.
 *
 * # Safety
 * `toml` and non-NULL `base_dir` must be NUL-terminated; `out` writable.
 */
enum WfStatus wf_config_from_toml(const char *toml, const char *base_dir, struct WfConfig **out);

/**
 * # Safety
 * `config` must be NULL or a handle from this library.
 */
void wf_config_free(struct WfConfig *config);

/**
 * Loads the scenario file the config refers to.
 *
 * # Safety
 * `config` must be a live handle; `out` writable.
 */
enum WfStatus wf_config_load_scenario(const struct WfConfig *config, struct WfScenario **out);

/**
 * Plans a path for `scenario` with the config's planner section and `seed`.
 *
 * # Safety
 * `scenario` and `config` must be live handles; `out` writable.
 */
enum WfStatus wf_plan(const struct WfScenario *scenario,
                      const struct WfConfig *config,
                      uint64_t seed,
                      struct WfPlan **out);

/**
 * # Safety
 * `plan` must be NULL or a handle from this library.
 */
void wf_plan_free(struct WfPlan *plan);

/**
 * Number of waypoints, or 0 for NULL.
 *
 * # Safety
 * `plan` must be NULL or a live handle.
 */
size_t wf_plan_len(const struct WfPlan *plan);

/**
 * Copies waypoints as interleaved `x, y` pairs into `xy`, which must hold
 * `2 * wf_plan_len(plan)` doubles; `capacity` is its length in doubles.
 *
 * # Safety
 * `plan` must be a live handle; `xy` must point to `capacity` doubles.
 */
enum WfStatus wf_plan_waypoints(const struct WfPlan *plan, double *xy, size_t capacity);

/**
 * Sum of segment lengths in meters, or NaN for NULL.
 *
 * # Safety
 * `plan` must be NULL or a live handle.
 */
double wf_plan_length(const struct WfPlan *plan);

/**
 * # Safety
 * `plan` must be a live handle; `out` writable.
 */
enum WfStatus wf_plan_energy(const struct WfPlan *plan, struct WfEnergy *out);

/**
 * Tracks `plan` in closed loop with the config's robot, behavior, fuzzy
 * and sim sections; noise is seeded from the config.
 *
 * # Safety
 * All handles must be live; `out` writable.
 */
enum WfStatus wf_track(const struct WfScenario *scenario,
                       const struct WfPlan *plan,
                       const struct WfConfig *config,
                       struct WfTrackingSummary *out);

/**
 * Fuzzy controller from the config's fuzzy section, or the defaults when
 * `config` is NULL.
 *
 * # Safety
 * `config` must be NULL or a live handle; `out` writable.
 */
enum WfStatus wf_fuzzy_new(const struct WfConfig *config, struct WfFuzzy **out);

/**
 * Speed difference for an angle deviation (degrees) and center deviation
 * (millimeters).
 *
 * # Safety
 * `fuzzy` must be a live handle; `out` writable.
 */
enum WfStatus wf_fuzzy_eval(const struct WfFuzzy *fuzzy,
                            double angle_deg,
                            double center_mm,
                            double *out);

/**
 * # Safety
 * `fuzzy` must be NULL or a handle from this library.
 */
void wf_fuzzy_free(struct WfFuzzy *fuzzy);

/**
 * One forward-Euler step of the unicycle model.
 *
 * # Safety
 * `out` must be writable.
 */
enum WfStatus wf_integrate(struct WfPose pose,
                           double v,
                           double omega,
                           double dt,
                           struct WfPose *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WAYFORGE_H */
