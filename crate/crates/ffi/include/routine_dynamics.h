#ifndef ROUTINE_DYNAMICS_H
#define ROUTINE_DYNAMICS_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Parent index stored for the root.
 */
#define RD_NO_PARENT -1

typedef enum RdStatus {
  RD_STATUS_OK = 0,
  RD_STATUS_NULL_POINTER = 1,
  RD_STATUS_INVALID_ARGUMENT = 2,
  RD_STATUS_INVALID_GRAPH = 3,
  RD_STATUS_CATALOG_MISMATCH = 4,
  RD_STATUS_CHECKPOINT = 5,
  RD_STATUS_IO = 6,
  RD_STATUS_INTERNAL = 7,
  RD_STATUS_PANIC = 8,
} RdStatus;

typedef struct RdCatalog RdCatalog;

typedef struct RdGraph RdGraph;

typedef struct RdModel RdModel;

typedef struct RdProbGraph RdProbGraph;

typedef struct RdRelocations RdRelocations;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next call on the same thread.
 */
const char *rd_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *rd_version(void);

/**
 * Parses a catalog file (`{"nodes": [...]}`).
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` writable.
 */
enum RdStatus rd_catalog_from_json(const char *json, struct RdCatalog **out);

/**
 * # Safety
 * `catalog` must be a live handle and `out` writable.
 */
enum RdStatus rd_catalog_len(const struct RdCatalog *catalog, size_t *out);

/**
 * # Safety
 * `catalog` must be null or a handle not yet freed.
 */
void rd_catalog_free(struct RdCatalog *catalog);

/**
 * Builds a graph from one parent index per node; [`RD_NO_PARENT`] marks
 * the root. The graph is not required to be valid; see
 * [`rd_graph_validate`].
 *
 * # Safety
 * `parents` must point to `n` readable values and `out` be writable.
 */
enum RdStatus rd_graph_new(const struct RdCatalog *catalog,
                           const int64_t *parents,
                           size_t n,
                           uint32_t minute,
                           struct RdGraph **out);

/**
 * # Safety
 * `graph` must be null or a handle not yet freed.
 */
void rd_graph_free(struct RdGraph *graph);

/**
 * Writes whether the graph is a valid in-tree.
 *
 * # Safety
 * `graph` must be a live handle and `valid` writable.
 */
enum RdStatus rd_graph_validate(const struct RdGraph *graph, bool *valid);

/**
 * Writes the parent of `node`, or [`RD_NO_PARENT`].
 *
 * # Safety
 * `graph` must be a live handle and `out` writable.
 */
enum RdStatus rd_graph_parent(const struct RdGraph *graph, size_t node, int64_t *out);

/**
 * # Safety
 * `graph` must be a live handle and `out` writable.
 */
enum RdStatus rd_graph_minute(const struct RdGraph *graph, uint32_t *out);

/**
 * Relocations taking `from` to `to`.
 *
 * # Safety
 * Both graphs must be live handles and `out` writable.
 */
enum RdStatus rd_diff(const struct RdGraph *from,
                      const struct RdGraph *to,
                      struct RdRelocations **out);

/**
 * # Safety
 * `set` must be a live handle and `out` writable.
 */
enum RdStatus rd_relocations_len(const struct RdRelocations *set, size_t *out);

/**
 * Writes the `index`-th relocation as node indices.
 *
 * # Safety
 * `set` must be a live handle and the three outputs writable.
 */
enum RdStatus rd_relocations_get(const struct RdRelocations *set,
                                 size_t index,
                                 size_t *object,
                                 size_t *origin,
                                 size_t *destination);

/**
 * # Safety
 * `set` must be null or a handle not yet freed.
 */
void rd_relocations_free(struct RdRelocations *set);

/**
 * Loads a checkpoint of any predictor kind.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` writable.
 */
enum RdStatus rd_model_load(const char *path, struct RdModel **out);

/**
 * # Safety
 * `model` must be null or a handle not yet freed.
 */
void rd_model_free(struct RdModel *model);

/**
 * Parent distribution one step after `graph`, observed on `day`.
 *
 * # Safety
 * `model` and `graph` must be live handles and `out` writable.
 */
enum RdStatus rd_model_predict_step(const struct RdModel *model,
                                    const struct RdGraph *graph,
                                    uint32_t day,
                                    struct RdProbGraph **out);

/**
 * Probability that `parent` holds `node`.
 *
 * # Safety
 * `p` must be a live handle and `out` writable.
 */
enum RdStatus rd_prob(const struct RdProbGraph *p, size_t node, size_t parent, double *out);

/**
 * # Safety
 * `p` must be null or a handle not yet freed.
 */
void rd_prob_free(struct RdProbGraph *p);

/**
 * Most likely valid in-tree under `p`.
 *
 * # Safety
 * `p` must be a live handle and `out` writable.
 */
enum RdStatus rd_posterior(const struct RdProbGraph *p, struct RdGraph **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ROUTINE_DYNAMICS_H */
