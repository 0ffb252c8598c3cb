#ifndef SKYLOOP_SKYLOOP_H
#define SKYLOOP_SKYLOOP_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define SK_API __declspec(dllexport)
#else
#define SK_API __attribute__((visibility("default")))
#endif

typedef enum sk_status {
  SK_OK = 0,
  SK_ERROR_INVALID_ARGUMENT = 1, /* bad config, flags or input files */
  SK_ERROR_IO = 2,               /* output could not be written */
  SK_ERROR_GAUGE = 3,            /* pose graph is under-constrained */
  SK_ERROR_NO_PATH = 4,          /* planner ran out of iterations */
  SK_ERROR_ENDPOINT = 5,         /* start or goal not free */
  SK_ERROR_INTERNAL = 6
} sk_status;

typedef enum sk_occupancy {
  SK_UNKNOWN = 0,
  SK_FREE = 1,
  SK_OCCUPIED = 2
} sk_occupancy;

/* Message for the last failed call on this thread; empty after success. */
SK_API const char* sk_last_error(void);
SK_API const char* sk_version(void);

/* Poses cross the boundary as double[7]: px, py, pz, qw, qx, qy, qz. */

/* ---- configuration ---- */

typedef struct sk_config sk_config;

SK_API sk_status sk_config_new(sk_config** out);
SK_API sk_status sk_config_load(const char* path, sk_config** out);
/* Sets one `key = value` entry; the config is not re-validated until used. */
SK_API sk_status sk_config_set(sk_config* config, const char* key, const char* value);
SK_API sk_status sk_config_validate(const sk_config* config);
/* Effective config text. Writes at most `capacity` bytes including the terminator and
   stores the full length (without terminator) in `length` when non-null. */
SK_API sk_status sk_config_effective(const sk_config* config, char* buffer, size_t capacity,
                                     size_t* length);
SK_API void sk_config_free(sk_config* config);

/* ---- commands ---- */

SK_API sk_status sk_simulate(const sk_config* config, const char* out_dir);
SK_API sk_status sk_run(const sk_config* config, const char* trace_dir, const char* out_dir);
/* `bounds` is x0,y0,z0,x1,y1,z1 or null for automatic bounds. Outputs may be null. */
SK_API sk_status sk_plan(const sk_config* config, const char* octree_path, const double start[3],
                         const double goal[3], const double* bounds, const char* out_csv,
                         double* length, size_t* waypoint_count);
/* `series` is "pose_smoothed" or "pose_raw" (null selects pose_smoothed); a null
   `out_path` writes to stdout. */
SK_API sk_status sk_compare(const char* const* run_dirs, size_t count, const char* series,
                            const char* out_path);

/* ---- correction smoother ---- */

typedef struct sk_smoother sk_smoother;

SK_API sk_status sk_alpha(double t, double s, double t_x, double* out);
SK_API sk_status sk_smoother_new(double s, double t_x, const double initial_correction[7],
                                 sk_smoother** out);
SK_API sk_status sk_smoother_event(sk_smoother* smoother, const double correction[7], double now);
SK_API sk_status sk_smoother_global_pose(const sk_smoother* smoother, const double local_pose[7],
                                         double now, double out_pose[7]);
SK_API void sk_smoother_free(sk_smoother* smoother);

/* ---- occupancy octree ---- */

typedef struct sk_octree sk_octree;

SK_API sk_status sk_octree_new(double resolution, sk_octree** out);
SK_API sk_status sk_octree_load(const char* path, sk_octree** out);
SK_API sk_status sk_octree_save(const sk_octree* octree, const char* path);
/* `points` holds `count` xyz triples in the map frame. */
SK_API sk_status sk_octree_insert_cloud(sk_octree* octree, const double* points, size_t count,
                                        const double sensor_origin[3]);
SK_API sk_status sk_octree_query(const sk_octree* octree, const double point[3], int* occupancy);
SK_API sk_status sk_octree_prune(sk_octree* octree);
SK_API sk_status sk_octree_leaf_count(const sk_octree* octree, size_t* count);
SK_API void sk_octree_free(sk_octree* octree);

#ifdef __cplusplus
}
#endif

#endif /* SKYLOOP_SKYLOOP_H */
