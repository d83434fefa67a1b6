#ifndef QPS_H
#define QPS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

// Result code of every `qps_*` call.
typedef enum QpsStatus {
  QPS_STATUS_OK = 0,
  QPS_STATUS_NULL_POINTER = 1,
  QPS_STATUS_INVALID_UTF8 = 2,
  QPS_STATUS_PARSE = 3,
  QPS_STATUS_DOMAIN = 4,
  QPS_STATUS_INFEASIBLE_THRUST = 5,
  QPS_STATUS_SINGULARITY = 6,
  QPS_STATUS_NO_PATH = 7,
  QPS_STATUS_NO_FEASIBLE_TIME = 8,
  QPS_STATUS_NUMERICAL_BLOWUP = 9,
  QPS_STATUS_CONFIG = 10,
  QPS_STATUS_IO = 11,
  // The caller's buffer cannot hold the output; the required size was reported.
  QPS_STATUS_BUFFER_TOO_SMALL = 12,
  // A Rust panic was caught. This is a bug.
  QPS_STATUS_PANIC = 13,
} QpsStatus;

// Opaque elevation map.
typedef struct QpsElevationMap QpsElevationMap;

// Opaque result of a simulated mission.
typedef struct QpsMission QpsMission;

// Synthetic terrain parameters; start from [`qps_synth_params_default`].
typedef struct QpsSynthParams {
  double origin[2];
  double extent[2];
  double cell_size;
  uint64_t seed;
  double density;
  double height_range[2];
  double base_height;
  double ground_amplitude;
  double footprint_range[2];
} QpsSynthParams;

typedef struct QpsVehicleParams {
  double mass;
  double inertia[3];
  double thrust_coeff;
  double drag_coeff;
  double arm_length;
  double gravity;
} QpsVehicleParams;

typedef struct QpsRigidBody {
  double mass;
  double inertia[3];
} QpsRigidBody;

typedef struct QpsCombinedBody {
  double mass;
  double inertia[3];
  // Distance of the combined center of mass below the quadcopter's, m.
  double offset;
} QpsCombinedBody;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. Valid until the
// next `qps_*` call on the same thread.
const char *qps_last_error_message(void);

// Static name of a status code, e.g. `"no-path"`.
const char *qps_status_name(enum QpsStatus status);

// Parses an elevation grid document.
//
// # Safety
// `text` must be a NUL-terminated string; `out` must be valid for writes.
enum QpsStatus qps_elevation_map_parse(const char *text, struct QpsElevationMap **out);

struct QpsSynthParams qps_synth_params_default(void);

// Generates a seeded synthetic urban map.
//
// # Safety
// `params` and `out` must be valid pointers.
enum QpsStatus qps_elevation_map_synth(const struct QpsSynthParams *params,
                                       struct QpsElevationMap **out);

// Grid dimensions in cells.
//
// # Safety
// All pointers must be valid.
enum QpsStatus qps_elevation_map_dims(const struct QpsElevationMap *map,
                                      size_t *width,
                                      size_t *height);

// Height of the map at `(x, y)`; a domain error outside the footprint.
//
// # Safety
// `map` and `out` must be valid pointers.
enum QpsStatus qps_elevation_map_sample(const struct QpsElevationMap *map,
                                        double x,
                                        double y,
                                        double *out);

// New map inflated by `radius`; the input map is left untouched.
//
// # Safety
// `map` and `out` must be valid pointers.
enum QpsStatus qps_elevation_map_expand(const struct QpsElevationMap *map,
                                        double radius,
                                        struct QpsElevationMap **out);

// Serializes the map as a grid document.
//
// # Safety
// `map` and `len` must be valid; `buf` must hold `cap` bytes or be null.
enum QpsStatus qps_elevation_map_to_text(const struct QpsElevationMap *map,
                                         char *buf,
                                         size_t cap,
                                         size_t *len);

// # Safety
// `map` must be null or a handle from this library not yet freed.
void qps_elevation_map_free(struct QpsElevationMap *map);

struct QpsVehicleParams qps_vehicle_params_default(void);

// Rigid combination of a quadcopter and a payload hung `separation` below it.
//
// # Safety
// `out` must be valid for writes.
enum QpsStatus qps_combine_inertia(struct QpsRigidBody quad,
                                   struct QpsRigidBody payload,
                                   double separation,
                                   struct QpsCombinedBody *out);

// Rotor speeds (rad/s, signed by spin direction) producing `thrust` and body
// `torque`. `params` may be null for the reference vehicle.
//
// # Safety
// `torque` must point to 3 doubles and `out` to 4; `params` must be null or valid.
enum QpsStatus qps_rotor_speeds(const struct QpsVehicleParams *params,
                                double thrust,
                                const double *torque,
                                double *out);

// The rest-to-rest blend and its first three derivatives at `t ∈ [0, 1]`.
//
// # Safety
// `out` must point to 4 writable doubles.
enum QpsStatus qps_sigma3(double t, double *out);

// Plans, times and flies the mission described by a TOML document.
//
// Relative terrain paths resolve against `base_dir` (null means the current
// directory). A mission that completes but breaks a safety condition still
// returns `Ok`; check [`qps_mission_is_safe`].
//
// # Safety
// `config` must be a NUL-terminated string, `base_dir` null or one, `out` valid.
enum QpsStatus qps_mission_run(const char *config, const char *base_dir, struct QpsMission **out);

// Whether every sample met all safety conditions. False for a null handle.
//
// # Safety
// `mission` must be null or a live handle.
bool qps_mission_is_safe(const struct QpsMission *mission);

// Arrival time at the goal, s. NaN for a null handle.
//
// # Safety
// `mission` must be null or a live handle.
double qps_mission_arrival_time(const struct QpsMission *mission);

// Summary as JSON.
//
// Text outputs copy the text and a NUL into `buf` when `cap` is large enough,
// and always store the text length (without the NUL) in `*len`; pass a null
// buffer to learn the length first.
//
// # Safety
// `mission` and `len` must be valid; `buf` must hold `cap` bytes or be null.
enum QpsStatus qps_mission_summary_json(const struct QpsMission *mission,
                                        char *buf,
                                        size_t cap,
                                        size_t *len);

// Full trace as CSV, same format as the command-line tool writes.
//
// # Safety
// `mission` and `len` must be valid; `buf` must hold `cap` bytes or be null.
enum QpsStatus qps_mission_trace_csv(const struct QpsMission *mission,
                                     char *buf,
                                     size_t cap,
                                     size_t *len);

// # Safety
// `mission` must be null or a handle from this library not yet freed.
void qps_mission_free(struct QpsMission *mission);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QPS_H */
