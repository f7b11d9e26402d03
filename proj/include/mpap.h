/* C interface to the mPAP estimation toolkit: physics feature extraction,
 * gradient-boosting ensembles, and the end-to-end experiment pipeline.
 * All functions return a status code; on failure mpap_last_error() holds a
 * message describing what went wrong (thread-local). */
#ifndef MPAP_H
#define MPAP_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum {
  MPAP_OK = 0,
  MPAP_ERR_USAGE = 1,       /* bad configuration or arguments */
  MPAP_ERR_DATA = 2,        /* malformed or degenerate input data */
  MPAP_ERR_CONVERGENCE = 3  /* an iterative procedure failed to converge */
} mpap_status;

const char* mpap_last_error(void);

/* Strings returned through char** are allocated by the library. */
void mpap_string_free(char* s);

/* ---- experiment pipeline -------------------------------------------------
 * Configuration is a JSON object; unknown keys are rejected. Keys (all
 * optional unless a command requires them):
 *   task ("regression"|"classification"), mode ("gbdt"|"dart"|"goss"),
 *   groups ("all" or comma list of demographics,physics,mri),
 *   cv ("loocv"|"kfold8"|"stratified8"), strategy ("youden"|"f1"|
 *   "closest01"|"concordance"), threshold (mmHg), budget (int), seed (int),
 *   in (path), out (path), n_patients (int), skip_failures (bool). */
typedef struct mpap_experiment mpap_experiment;

mpap_status mpap_experiment_create(const char* config_json, mpap_experiment** out);
void mpap_experiment_free(mpap_experiment* e);

/* Synthesize a cohort (cohort.csv + waveforms/) under `out`. `summary`
 * receives a short "patients=... positives=..." line when non-NULL. */
mpap_status mpap_synth(const mpap_experiment* e, char** summary);

/* Extract Windkessel + wave-power features for every patient of `in`,
 * writing the feature-complete cohort CSV to `out`. */
mpap_status mpap_features(const mpap_experiment* e, char** summary);

/* Hyperparameter search; writes history.csv and best_config.json. */
mpap_status mpap_tune(const mpap_experiment* e);

/* Tune + out-of-fold evaluation; writes report.json and scatter.csv or
 * roc.csv. */
mpap_status mpap_run(const mpap_experiment* e);

/* Full ablation over feature-group subsets x boosting modes x both tasks;
 * writes ablation.csv and ablation_pvalues.csv. */
mpap_status mpap_ablate(const mpap_experiment* e);

/* Render the artifacts under `in` as plain text. */
mpap_status mpap_report(const mpap_experiment* e, char** text);

/* ---- physics features ---------------------------------------------------- */
typedef struct {
  double rd;       /* distal resistance, kg/(m^4 s) */
  double rc;       /* proximal resistance, kg/(m^4 s) */
  double c;        /* compliance, m^4 s^2 / kg */
  double rtot;     /* rc + rd */
  double wb_wtot;  /* backward wave power fraction */
} mpap_physics_features;

/* Windkessel fit + wave separation on one `t,flow,area` waveform CSV. */
mpap_status mpap_physics_from_csv(const char* waveform_csv_path, uint64_t seed,
                                  mpap_physics_features* out);

/* ---- boosting ensembles --------------------------------------------------
 * config_json keys: mode, loss ("squared_error"|"logistic"), seed, and any
 * of n_trees, learning_rate, max_depth, min_samples_leaf, min_gain,
 * feature_fraction, lambda, drop_rate, max_dropped, top_rate, other_rate. */
typedef struct mpap_ensemble mpap_ensemble;

mpap_status mpap_ensemble_train(const double* rows, size_t n_rows, size_t n_cols,
                                const double* targets, const char* config_json,
                                mpap_ensemble** out);
mpap_status mpap_ensemble_predict(const mpap_ensemble* e, const double* rows, size_t n_rows,
                                  size_t n_cols, double* predictions);
mpap_status mpap_ensemble_save(const mpap_ensemble* e, const char* path);
mpap_status mpap_ensemble_load(const char* path, mpap_ensemble** out);
void mpap_ensemble_free(mpap_ensemble* e);

#ifdef __cplusplus
}
#endif

#endif /* MPAP_H */
