#ifndef VOXPACK_H
#define VOXPACK_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes returned by every fallible function.
typedef enum VxStatus {
  VX_STATUS_OK = 0,
  VX_STATUS_NULL_ARGUMENT = 1,
  VX_STATUS_IO = 2,
  VX_STATUS_INVALID_ARGUMENT = 3,
  VX_STATUS_GEOMETRY = 4,
  VX_STATUS_PIPELINE = 5,
  VX_STATUS_PANIC = 6,
} VxStatus;

// A loaded triangle mesh.
typedef struct VxMesh VxMesh;

// A set of seed placements.
typedef struct VxSeeds VxSeeds;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last error on this thread, or null if there was none. The
// pointer stays valid until the next failing call on the same thread.
const char *vx_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *vx_version(void);

// Loads an OBJ, STL or PLY mesh.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum VxStatus vx_mesh_load(const char *path, struct VxMesh **out);

// # Safety
// `mesh` must be null or a handle from `vx_mesh_load` not yet freed.
void vx_mesh_free(struct VxMesh *mesh);

// # Safety
// `mesh` must be null or a live mesh handle.
size_t vx_mesh_vertex_count(const struct VxMesh *mesh);

// # Safety
// `mesh` must be null or a live mesh handle.
size_t vx_mesh_triangle_count(const struct VxMesh *mesh);

// Enclosed volume and surface area.
//
// # Safety
// `mesh` must be a live mesh handle; `volume` and `area` valid pointers.
enum VxStatus vx_mesh_measure(const struct VxMesh *mesh, double *volume, double *area);

// Generates seeds on `base` for the given decorations. `config_json` is a
// JSON seeding config; null uses the defaults.
//
// # Safety
// `base` must be a live mesh handle, `decorations` an array of
// `decoration_count` live mesh handles, `config_json` null or a
// NUL-terminated string and `out` a valid pointer.
enum VxStatus vx_seeds_generate(const struct VxMesh *base,
                                const struct VxMesh *const *decorations,
                                size_t decoration_count,
                                const char *config_json,
                                struct VxSeeds **out);

// # Safety
// `seeds` must be null or a live seeds handle.
size_t vx_seeds_count(const struct VxSeeds *seeds);

// Position of seed `index` as three doubles.
//
// # Safety
// `seeds` must be a live seeds handle and `xyz` point to three doubles.
enum VxStatus vx_seeds_position(const struct VxSeeds *seeds, size_t index, double *xyz);

// Writes the seeds as a JSON seed file.
//
// # Safety
// `seeds` must be a live seeds handle and `path` a NUL-terminated string.
enum VxStatus vx_seeds_write(const struct VxSeeds *seeds, const char *path);

// # Safety
// `seeds` must be null or a handle from `vx_seeds_generate` not yet freed.
void vx_seeds_free(struct VxSeeds *seeds);

// Runs every stage of the pipeline described by a TOML or JSON config file.
// A non-null `output_dir` overrides the config's output directory.
//
// # Safety
// `config_path` must be a NUL-terminated string and `output_dir` null or one.
enum VxStatus vx_pipeline_run(const char *config_path, const char *output_dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* VOXPACK_H */
