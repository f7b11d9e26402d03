#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "cohort.hpp"
#include "gbdt.hpp"
#include "metrics.hpp"
#include "tune.hpp"

namespace mpap::pipeline {

enum class Task { regression, classification };
Task task_from_string(const std::string& s);
std::string to_string(Task t);

std::set<cohort::Group> parse_groups(const std::string& s);  // "all" or comma list
std::string groups_to_string(const std::set<cohort::Group>& groups);

struct ExperimentConfig {
  Task task = Task::regression;
  gbdt::Mode mode = gbdt::Mode::gbdt;
  std::set<cohort::Group> groups = {cohort::Group::demographics, cohort::Group::physics,
                                    cohort::Group::mri};
  std::string cv = "loocv";  // final evaluation scheme
  metrics::ThresholdStrategy strategy = metrics::ThresholdStrategy::youden;
  double threshold = cohort::kDefaultPhThreshold;
  int budget = 200;
  std::uint64_t seed = 42;
  std::string in;
  std::string out;

  // synth only
  std::size_t n_patients = 352;
  // features only: skip patients whose extraction fails instead of aborting
  bool skip_failures = false;

  void validate() const;
};

// synth: cohort.csv (physics columns left blank) + waveforms/patient_<i>.csv
// under config.out. Returns "patients=N positives=P seed=S".
std::string cmd_synth(const ExperimentConfig& config);

// features: reads <in>/cohort.csv and <in>/waveforms/, writes config.out
// (a cohort CSV with the physics columns filled).
std::string cmd_features(const ExperimentConfig& config);

// tune: hyperparameter search on a feature-complete cohort CSV; writes
// history.csv + best_config.json under config.out.
tune::TuneResult cmd_tune(const ExperimentConfig& config);

struct RunOutcome {
  tune::TuneResult tuning;
  gbdt::BoostingConfig best_config;
  std::vector<double> targets;      // mpap or 0/1 labels
  std::vector<double> predictions;  // out-of-fold
  double primary_metric = 0.0;      // MAE (regression) or AUC (classification)
};

// run: tune, then out-of-fold evaluation with the best config under the
// config.cv scheme; writes report.json, history.csv, best_config.json and
// scatter.csv (regression) or roc.csv (classification) under config.out.
RunOutcome cmd_run(const ExperimentConfig& config);

struct AblationCell {
  Task task;
  gbdt::Mode mode;
  std::set<cohort::Group> groups;
  bool ok = false;
  std::string error;
  double metric = 0.0;                // MAE or AUC
  double p_vs_all = 1.0;              // paired test against the all-groups cell
  std::vector<double> abs_errors;     // per-sample |prediction - target|
};

struct AblationResult {
  std::vector<AblationCell> cells;  // tasks x modes x 7 subsets, fixed order
};

// ablate: both tasks x 3 modes x 7 group subsets; writes ablation.csv and
// ablation_pvalues.csv under config.out. Failed cells are marked and the
// run continues.
AblationResult cmd_ablate(const ExperimentConfig& config);

// report: summarizes report.json / ablation.csv found under config.in into
// plain text (returned; also written to config.out when set).
std::string cmd_report(const ExperimentConfig& config);

}  // namespace mpap::pipeline
