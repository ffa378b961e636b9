#ifndef DGI_H
#define DGI_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DgiCorruption {
  DGI_CORRUPTION_FEATURE_SHUFFLE = 0,
  DGI_CORRUPTION_EDGE_XOR = 1,
  DGI_CORRUPTION_BOTH = 2,
} DgiCorruption;

typedef enum DgiEncoder {
  DGI_ENCODER_GCN1 = 0,
  DGI_ENCODER_MEANPOOL_SKIP3 = 1,
  DGI_ENCODER_MEANPOOL_DENSE_SKIP3 = 2,
} DgiEncoder;

/**
 * Result of every fallible call.
 */
typedef enum DgiStatus {
  DGI_STATUS_OK = 0,
  DGI_STATUS_NULL_POINTER = 1,
  DGI_STATUS_INVALID_ARGUMENT = 2,
  DGI_STATUS_IO = 3,
  DGI_STATUS_PARSE = 4,
  DGI_STATUS_DIMENSION_MISMATCH = 5,
  DGI_STATUS_NON_FINITE = 6,
  DGI_STATUS_CHECKPOINT = 7,
  DGI_STATUS_ASSERTION = 8,
  DGI_STATUS_PANIC = 9,
} DgiStatus;

/**
 * Opaque graph handle.
 */
typedef struct DgiGraph DgiGraph;

/**
 * Opaque model handle.
 */
typedef struct DgiModel DgiModel;

/**
 * Training options; fill with [`dgi_train_options_default`] first.
 */
typedef struct DgiTrainOptions {
  enum DgiEncoder encoder;
  size_t hidden_dim;
  double lr;
  size_t max_epochs;
  /**
   * 0 disables early stopping.
   */
  size_t patience;
  enum DgiCorruption corruption;
  double rho;
  uint64_t seed;
} DgiTrainOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the last failure on this thread, or NULL. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *dgi_last_error(void);

/**
 * Static, NUL-terminated library version.
 */
const char *dgi_version(void);

/**
 * Loads a dataset file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a writable pointer.
 */
enum DgiStatus dgi_graph_load(const char *path, struct DgiGraph **out);

/**
 * Builds an unlabeled graph from row-major `n × f` features and `m`
 * undirected edges given as `2m` node indices.
 *
 * # Safety
 * `features` must hold `n * f` doubles and `edges` `2 * m` indices (either
 * may be NULL when its length is zero); `out` must be writable.
 */
enum DgiStatus dgi_graph_from_edges(size_t n,
                                    size_t f,
                                    const double *features,
                                    size_t m,
                                    const size_t *edges,
                                    struct DgiGraph **out);

/**
 * Number of nodes, or 0 for NULL.
 *
 * # Safety
 * `graph` must be NULL or a live handle.
 */
size_t dgi_graph_node_count(const struct DgiGraph *graph);

/**
 * Feature dimension, or 0 for NULL.
 *
 * # Safety
 * `graph` must be NULL or a live handle.
 */
size_t dgi_graph_feature_dim(const struct DgiGraph *graph);

/**
 * Undirected edge count, or 0 for NULL.
 *
 * # Safety
 * `graph` must be NULL or a live handle.
 */
size_t dgi_graph_edge_count(const struct DgiGraph *graph);

/**
 * Scales every feature row to sum to one (all-zero rows are kept).
 *
 * # Safety
 * `graph` must be a live handle.
 */
enum DgiStatus dgi_graph_row_normalize(struct DgiGraph *graph);

/**
 * # Safety
 * `graph` must be NULL or a handle not yet freed.
 */
void dgi_graph_free(struct DgiGraph *graph);

/**
 * Defaults: one GCN layer, width 512, lr 0.001, at most 10000 epochs,
 * patience 20, feature-shuffle negatives, seed 0.
 *
 * # Safety
 * `out` must be writable.
 */
enum DgiStatus dgi_train_options_default(struct DgiTrainOptions *out);

/**
 * Freshly initialized (untrained) model.
 *
 * # Safety
 * `out` must be writable.
 */
enum DgiStatus dgi_model_init(enum DgiEncoder encoder,
                              size_t input_dim,
                              size_t hidden_dim,
                              uint64_t seed,
                              struct DgiModel **out);

/**
 * Trains on `graph` and returns the best model.
 *
 * # Safety
 * `graph` and `options` must be live; `out` must be writable.
 */
enum DgiStatus dgi_train(const struct DgiGraph *graph,
                         const struct DgiTrainOptions *options,
                         struct DgiModel **out);

/**
 * Embedding width, or 0 for NULL.
 *
 * # Safety
 * `model` must be NULL or a live handle.
 */
size_t dgi_model_hidden_dim(const struct DgiModel *model);

/**
 * Expected feature dimension, or 0 for NULL.
 *
 * # Safety
 * `model` must be NULL or a live handle.
 */
size_t dgi_model_input_dim(const struct DgiModel *model);

/**
 * Writes row-major `node_count × hidden_dim` embeddings into `out`.
 *
 * # Safety
 * `model` and `graph` must be live; `out` must hold `out_len` doubles.
 */
enum DgiStatus dgi_encode(const struct DgiModel *model,
                          const struct DgiGraph *graph,
                          double *out,
                          size_t out_len);

/**
 * # Safety
 * `model` must be live and `path` NUL-terminated.
 */
enum DgiStatus dgi_model_save(const struct DgiModel *model, const char *path, uint64_t seed);

/**
 * # Safety
 * `path` must be NUL-terminated and `out` writable.
 */
enum DgiStatus dgi_model_load(const char *path, struct DgiModel **out);

/**
 * # Safety
 * `model` must be NULL or a handle not yet freed.
 */
void dgi_model_free(struct DgiModel *model);

/**
 * Runs the exact theory suite; `failed` (optional) receives the number of
 * failing cases. A non-zero `halve_bound` deliberately corrupts the bound.
 *
 * # Safety
 * `failed` must be NULL or writable.
 */
enum DgiStatus dgi_theory_suite(int32_t halve_bound, size_t *failed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DGI_H */
