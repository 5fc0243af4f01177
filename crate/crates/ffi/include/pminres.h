#ifndef PMINRES_H
#define PMINRES_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PmStatus {
  PM_STATUS_OK = 0,
  PM_STATUS_NULL_POINTER = 1,
  PM_STATUS_INVALID_ARGUMENT = 2,
  PM_STATUS_INVALID_CONFIG = 3,
  PM_STATUS_MESH = 4,
  PM_STATUS_SOLVER_FAILURE = 5,
  PM_STATUS_IO = 6,
  PM_STATUS_OUT_OF_RANGE = 7,
  PM_STATUS_BUFFER_TOO_SMALL = 8,
  PM_STATUS_PANIC = 99,
} PmStatus;

typedef enum PmStrategy {
  PM_STRATEGY_UNIFORM = 0,
  PM_STRATEGY_PRE_ADAPTED = 1,
  PM_STRATEGY_ADAPTIVE = 2,
} PmStrategy;

typedef enum PmWarmStart {
  PM_WARM_START_OFF = 0,
  PM_WARM_START_RESTART = 1,
  PM_WARM_START_AT_TARGET = 2,
} PmWarmStart;

typedef enum PmQuantity {
  PM_QUANTITY_ERROR = 0,
  PM_QUANTITY_ESTIMATOR = 1,
} PmQuantity;

// Study configuration.
typedef struct PmConfig PmConfig;

// Triangulation of the unit square.
typedef struct PmMesh PmMesh;

// Completed (or partially completed) study.
typedef struct PmStudy PmStudy;

// One level of a study.
typedef struct PmRecord {
  size_t level;
  size_t n_free_trial;
  size_t n_free_test;
  size_t n_total;
  double h_max;
  double error;
  double eta;
  double eta_over_error;
  double eta_root_over_error;
  size_t newton_total;
  size_t damping_events;
  double wall_ms;
} PmRecord;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the calling thread's last error message into `buf` (NUL
// terminated, truncated to `len`). Returns the full message length
// excluding the terminator, so callers can size the buffer.
size_t pm_last_error_message(char *buf, size_t len);

// Library version as a static NUL-terminated string.
const char *pm_version(void);

// Smooth benchmark with target exponent `p`.
enum PmStatus pm_config_new_case1(double p, struct PmConfig **out_config);

// Corner-singularity benchmark with the given refinement strategy.
enum PmStatus pm_config_new_case2(enum PmStrategy strategy, struct PmConfig **out_config);

// Parses a TOML configuration.
enum PmStatus pm_config_from_toml(const char *toml, struct PmConfig **out_config);

enum PmStatus pm_config_set_max_levels(struct PmConfig *config, size_t levels);

enum PmStatus pm_config_set_theta(struct PmConfig *config, double theta);

enum PmStatus pm_config_set_warm_start(struct PmConfig *config, enum PmWarmStart mode);

// Directory for the records CSV and snapshots; null disables file output.
enum PmStatus pm_config_set_output_dir(struct PmConfig *config, const char *dir);

void pm_config_free(struct PmConfig *config);

// Runs the study. When levels fail after some have completed, the
// partial study is still returned through `out_study` together with
// `PM_STATUS_SOLVER_FAILURE`; otherwise `*out_study` is left untouched on
// error.
enum PmStatus pm_study_run(const struct PmConfig *config, struct PmStudy **out_study);

enum PmStatus pm_study_num_levels(const struct PmStudy *study, size_t *out_levels);

enum PmStatus pm_study_record(const struct PmStudy *study,
                              size_t level,
                              struct PmRecord *out_record);

// New handle to the mesh of `level`; release it with `pm_mesh_free`.
enum PmStatus pm_study_mesh(const struct PmStudy *study, size_t level, struct PmMesh **out_mesh);

void pm_study_free(struct PmStudy *study);

// Least-squares slope of `quantity` against `n_total` over the last
// `window` of `n` records.
enum PmStatus pm_fit_rate(const struct PmRecord *records,
                          size_t n,
                          enum PmQuantity quantity,
                          size_t window,
                          double *out_slope);

// `n × n` squares, each split along its diagonal.
enum PmStatus pm_mesh_new_unit_square(size_t n, struct PmMesh **out_mesh);

enum PmStatus pm_mesh_refine_uniform(const struct PmMesh *mesh, struct PmMesh **out_mesh);

// Bisects the `n` triangles in `marked` (with conforming closure).
enum PmStatus pm_mesh_refine_marked(const struct PmMesh *mesh,
                                    const size_t *marked,
                                    size_t n,
                                    struct PmMesh **out_mesh);

enum PmStatus pm_mesh_counts(const struct PmMesh *mesh,
                             size_t *out_vertices,
                             size_t *out_edges,
                             size_t *out_triangles);

// Writes `2 * num_vertices` coordinates (x0, y0, x1, y1, ...).
enum PmStatus pm_mesh_vertices(const struct PmMesh *mesh, double *buf, size_t len);

// Writes `3 * num_triangles` vertex indices, counter-clockwise.
enum PmStatus pm_mesh_triangles(const struct PmMesh *mesh, size_t *buf, size_t len);

enum PmStatus pm_mesh_min_angle(const struct PmMesh *mesh, double *out_radians);

enum PmStatus pm_mesh_write_svg(const struct PmMesh *mesh, const char *path);

void pm_mesh_free(struct PmMesh *mesh);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PMINRES_H */
