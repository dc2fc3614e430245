#ifndef RDCEG_H
#define RDCEG_H

/* Generated by cbindgen from the rdceg-ffi crate; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define RDCEG_OK 0

#define RDCEG_ERR_NULL_ARGUMENT -1

#define RDCEG_ERR_INVALID_UTF8 -2

#define RDCEG_ERR_UNKNOWN_MODEL -3

#define RDCEG_ERR_RUNTIME -4

#define RDCEG_ERR_INVALID_PARAMETER -5

// An opaque dataset of path observations.
typedef struct rdceg_dataset_t rdceg_dataset_t;

// An opaque fitted model (MAP staging/clustering with posteriors).
typedef struct rdceg_fit_t rdceg_fit_t;

// An opaque generating model (builtin or loaded from a config file).
typedef struct rdceg_model_t rdceg_model_t;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the most recent error on this thread, or NULL when the last
// call succeeded. The string must be freed with `rdceg_string_free`.
char *rdceg_last_error(void);

// Frees a string returned by this library.
//
// # Safety
// `s` must be a pointer previously returned by an rdceg function and not
// yet freed; NULL is ignored.
void rdceg_string_free(char *s);

// Library version string (static storage; do not free).
const char *rdceg_version(void);

// Loads a builtin generating model by name
// (falls | epilepsy-like | smoking-a | smoking-b).
//
// # Safety
// `name` must be a valid NUL-terminated string; `out` must be non-null.
int rdceg_model_builtin(const char *name, struct rdceg_model_t **out);

// # Safety
// `model` must come from `rdceg_model_builtin` and not be freed twice.
void rdceg_model_free(struct rdceg_model_t *model);

// Number of non-sink positions of the model's graph (the entry state
// included).
//
// # Safety
// `model` must be a live handle.
int rdceg_model_n_positions(const struct rdceg_model_t *model);

// DOT rendering of the model's graph.
//
// # Safety
// `model` must be a live handle; `out` non-null.
int rdceg_model_dot(const struct rdceg_model_t *model, char **out);

// Simulates an open population.
//
// # Safety
// `model` must be a live handle; `out` non-null.
int rdceg_simulate(const struct rdceg_model_t *model,
                   uint64_t n,
                   uint64_t seed,
                   struct rdceg_dataset_t **out);

// Loads a dataset from a JSONL (`.jsonl`) or CSV (`.csv`) file.
//
// # Safety
// `path` must be a valid NUL-terminated string; `out` non-null.
int rdceg_dataset_load(const char *path, struct rdceg_dataset_t **out);

// Writes a dataset to a JSONL or CSV file (format by extension).
//
// # Safety
// `dataset` must be a live handle; `path` a valid string.
int rdceg_dataset_save(const struct rdceg_dataset_t *dataset, const char *path);

// Number of observations in the dataset.
//
// # Safety
// `dataset` must be a live handle.
int64_t rdceg_dataset_len(const struct rdceg_dataset_t *dataset);

// # Safety
// `dataset` must come from this library and not be freed twice.
void rdceg_dataset_free(struct rdceg_dataset_t *dataset);

// Fits the MAP staging and clustering to a dataset under the model's
// search configuration. `alpha_total <= 0` keeps the configured prior;
// `tau_scale <= 0` keeps the configured phantom holding time.
//
// # Safety
// `model` and `dataset` must be live handles; `out` non-null.
int rdceg_fit(const struct rdceg_model_t *model,
              const struct rdceg_dataset_t *dataset,
              double alpha_total,
              double tau_scale,
              struct rdceg_fit_t **out);

// # Safety
// `fit` must come from `rdceg_fit` and not be freed twice.
void rdceg_fit_free(struct rdceg_fit_t *fit);

// Log marginal likelihood of the fitted model.
//
// # Safety
// `fit` must be a live handle.
double rdceg_fit_log_score(const struct rdceg_fit_t *fit);

// Numbers of stages and clusters in the MAP partitions.
//
// # Safety
// `fit` must be a live handle; out pointers may be NULL to skip.
int rdceg_fit_shape(const struct rdceg_fit_t *fit,
                    int *n_stages,
                    int *n_clusters,
                    int *n_positions);

// Self-contained JSON bundle of the fitted model.
//
// # Safety
// `fit` must be a live handle; `out` non-null.
int rdceg_fit_to_json(const struct rdceg_fit_t *fit, char **out);

// DOT rendering of the fitted MAP graph.
//
// # Safety
// `fit` must be a live handle; `out` non-null.
int rdceg_fit_dot(const struct rdceg_fit_t *fit, char **out);

// Total situational and cluster errors of a fit against its generating
// model.
//
// # Safety
// `model` and `fit` must be live handles over the same template; out
// pointers may be NULL to skip either value.
int rdceg_fit_errors(const struct rdceg_model_t *model,
                     const struct rdceg_fit_t *fit,
                     double *situational,
                     double *cluster);

// Density of the compound Weibull-Inverse-Gamma holding law.
//
// # Safety
// `out` must be a valid writable pointer.
int rdceg_compound_density(double zeta, double beta, double kappa, double t, double *out);

// Cumulative distribution of the compound holding law.
//
// # Safety
// `out` must be a valid writable pointer.
int rdceg_compound_cdf(double zeta, double beta, double kappa, double t, double *out);

// Mean of the compound holding law; infinite moments are reported through
// the `finite` flag with the value left untouched.
//
// # Safety
// `out` and `finite` must be valid writable pointers.
int rdceg_compound_mean(double zeta, double beta, double kappa, double *out, int *finite);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RDCEG_H */
