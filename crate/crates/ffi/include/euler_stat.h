#ifndef EULER_STAT_H
#define EULER_STAT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum EsStatus {
  ES_STATUS_OK = 0,
  // A required pointer argument was null.
  ES_STATUS_NULL_POINTER = 1,
  // Bad arguments or configuration.
  ES_STATUS_INVALID = 2,
  // The computation failed (non-convergence, non-finite values, broken invariants).
  ES_STATUS_NUMERICAL = 3,
  // File system or file format error.
  ES_STATUS_IO = 4,
  // Internal panic caught at the boundary.
  ES_STATUS_PANIC = 5,
} EsStatus;

// Parsed experiment configuration.
typedef struct EsConfig EsConfig;

// Completed ensemble run, in memory or backed by a run directory.
typedef struct EsEnsemble EsEnsemble;

// Discrete Leray projection on a fixed grid.
typedef struct EsSolver EsSolver;

typedef struct EsEnsembleInfo {
  size_t n1;
  size_t n2;
  size_t samples;
  size_t times;
} EsEnsembleInfo;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *es_version(void);

// Message of the last failure on this thread, or NULL if none.
//
// The pointer stays valid until the next failing call on this thread.
const char *es_last_error(void);

// Parse configuration text (`key = value` lines).
//
// # Safety
// `text` must be a NUL-terminated string and `out` a writable pointer.
enum EsStatus es_config_parse(const char *text, struct EsConfig **out);

// # Safety
// `cfg` must be NULL or a handle from [`es_config_parse`] not yet freed.
void es_config_free(struct EsConfig *cfg);

// Override the worker thread count; 0 lets the thread pool decide.
//
// # Safety
// `cfg` must be a live configuration handle.
enum EsStatus es_config_set_workers(struct EsConfig *cfg, size_t workers);

// Run the configured ensemble in memory.
//
// # Safety
// `cfg` must be a live configuration handle and `out` a writable pointer.
enum EsStatus es_run_ensemble(const struct EsConfig *cfg, struct EsEnsemble **out);

// Run the configured ensemble into a run directory, resuming if it already
// holds a matching partial run.
//
// # Safety
// `cfg` must be a live configuration handle, `dir` a NUL-terminated path
// and `out` a writable pointer.
enum EsStatus es_run_in_dir(const struct EsConfig *cfg, const char *dir, struct EsEnsemble **out);

// Load a completed run directory.
//
// # Safety
// `dir` must be a NUL-terminated path and `out` a writable pointer.
enum EsStatus es_ensemble_load(const char *dir, struct EsEnsemble **out);

// # Safety
// `ens` must be a live ensemble handle and `dir` a NUL-terminated path.
enum EsStatus es_ensemble_save(const struct EsEnsemble *ens, const char *dir);

// # Safety
// `ens` must be NULL or an ensemble handle not yet freed.
void es_ensemble_free(struct EsEnsemble *ens);

// # Safety
// `ens` must be a live ensemble handle and `info` writable.
enum EsStatus es_ensemble_info(const struct EsEnsemble *ens, struct EsEnsembleInfo *info);

// Output time with index `k`.
//
// # Safety
// `ens` must be a live ensemble handle and `t` writable.
enum EsStatus es_ensemble_time(const struct EsEnsemble *ens, size_t k, double *t);

// Copy sample `m` at output index `k` into `u` and `v`, each of `len = n1 * n2`.
//
// # Safety
// `u` and `v` must each point to `len` writable doubles.
enum EsStatus es_ensemble_copy_field(const struct EsEnsemble *ens,
                                     size_t m,
                                     size_t k,
                                     double *u,
                                     double *v,
                                     size_t len);

// # Safety
// `out` must be a writable pointer.
enum EsStatus es_solver_new(size_t n1, size_t n2, struct EsSolver **out);

// # Safety
// `solver` must be NULL or a solver handle not yet freed.
void es_solver_free(struct EsSolver *solver);

// Project `(u, v)` onto discretely divergence-free fields, in place.
//
// # Safety
// `u` and `v` must each point to `len = n1 * n2` readable and writable doubles.
enum EsStatus es_project(const struct EsSolver *solver, double *u, double *v, size_t len);

// Structure function of order `p` at output index `k` for `l = 1..=l_max`,
// written to `values[0..l_max]`.
//
// # Safety
// `values` must point to `l_max` writable doubles.
enum EsStatus es_structure_function(const struct EsEnsemble *ens,
                                    size_t k,
                                    double p,
                                    size_t l_max,
                                    double *values);

// W1 distance between the k-point marginals of two ensembles at output
// indices `ka` and `kb`, averaged over `tuples` seeded cell tuples.
//
// Both ensembles must share the grid and the sample count.
//
// # Safety
// `a` and `b` must be live ensemble handles and `value` writable.
enum EsStatus es_wasserstein(const struct EsEnsemble *a,
                             size_t ka,
                             const struct EsEnsemble *b,
                             size_t kb,
                             size_t k,
                             size_t tuples,
                             uint64_t tuple_seed,
                             double *value);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EULER_STAT_H */
