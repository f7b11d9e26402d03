// mpap: synthesize cohorts, extract physics features, tune/train boosting
// models, and run the ablation + report experiments over the C API.
#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "mpap.h"

namespace {

struct Flags {
  std::string task = "regression";
  std::string mode = "gbdt";
  std::string groups = "all";
  std::string cv = "loocv";
  std::string strategy = "youden";
  double threshold = 25.0;
  int budget = 200;
  std::uint64_t seed = 42;
  std::string in;
  std::string out;
  std::size_t n_patients = 352;
  bool skip_failures = false;
};

std::string to_json(const Flags& f) {
  nlohmann::json j;
  j["task"] = f.task;
  j["mode"] = f.mode;
  j["groups"] = f.groups;
  j["cv"] = f.cv;
  j["strategy"] = f.strategy;
  j["threshold"] = f.threshold;
  j["budget"] = f.budget;
  j["seed"] = f.seed;
  j["in"] = f.in;
  j["out"] = f.out;
  j["n_patients"] = f.n_patients;
  j["skip_failures"] = f.skip_failures;
  return j.dump();
}

int fail(mpap_status status) {
  std::cerr << "error: " << mpap_last_error() << "\n";
  return static_cast<int>(status);
}

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--seed", f.seed, "master seed for all derived stages");
  cmd->add_option("--threshold", f.threshold, "PH threshold in mmHg");
}

void add_model(CLI::App* cmd, Flags& f) {
  cmd->add_option("--task", f.task, "regression|classification");
  cmd->add_option("--mode", f.mode, "gbdt|dart|goss");
  cmd->add_option("--groups", f.groups, "all or comma list of demographics,physics,mri");
  cmd->add_option("--cv", f.cv, "loocv|kfold8|stratified8 (final evaluation)");
  cmd->add_option("--strategy", f.strategy, "youden|f1|closest01|concordance");
  cmd->add_option("--budget", f.budget, "tuning iterations");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"noninvasive mPAP estimation toolkit"};
  app.require_subcommand(1);

  Flags f;

  auto* synth = app.add_subcommand("synth", "generate a synthetic cohort with waveforms");
  add_common(synth, f);
  synth->add_option("--n", f.n_patients, "number of patients");
  synth->add_option("--out", f.out, "output directory")->required();

  auto* features = app.add_subcommand("features", "extract Windkessel + wave-power features");
  add_common(features, f);
  features->add_option("--in", f.in, "cohort directory (cohort.csv + waveforms/)")->required();
  features->add_option("--out", f.out, "output cohort CSV")->required();
  features->add_flag("--skip-failures", f.skip_failures,
                     "exclude patients whose extraction fails instead of aborting");

  auto* tunecmd = app.add_subcommand("tune", "Bayesian hyperparameter search");
  add_common(tunecmd, f);
  add_model(tunecmd, f);
  tunecmd->add_option("--in", f.in, "feature-complete cohort CSV")->required();
  tunecmd->add_option("--out", f.out, "output directory")->required();

  auto* run = app.add_subcommand("run", "tune + out-of-fold evaluation + report files");
  add_common(run, f);
  add_model(run, f);
  run->add_option("--in", f.in, "feature-complete cohort CSV")->required();
  run->add_option("--out", f.out, "output directory")->required();

  auto* ablate = app.add_subcommand("ablate", "feature-group x mode x task ablation grid");
  add_common(ablate, f);
  add_model(ablate, f);
  ablate->add_option("--in", f.in, "feature-complete cohort CSV")->required();
  ablate->add_option("--out", f.out, "output directory")->required();

  auto* report = app.add_subcommand("report", "render run/ablate artifacts as text");
  report->add_option("--in", f.in, "directory with report.json and/or ablation.csv")->required();
  report->add_option("--out", f.out, "also write the rendered text here");

  // desk-scale defaults for the grid: 42 cells at full budget is a long run
  ablate->parse_complete_callback([&] {
    if (ablate->count("--budget") == 0) f.budget = 50;
    if (ablate->count("--cv") == 0) f.cv = "kfold8";
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  mpap_experiment* exp = nullptr;
  mpap_status status = mpap_experiment_create(to_json(f).c_str(), &exp);
  if (status != MPAP_OK) return fail(status);

  char* text = nullptr;
  if (synth->parsed()) {
    status = mpap_synth(exp, &text);
  } else if (features->parsed()) {
    status = mpap_features(exp, &text);
  } else if (tunecmd->parsed()) {
    status = mpap_tune(exp);
  } else if (run->parsed()) {
    status = mpap_run(exp);
  } else if (ablate->parsed()) {
    status = mpap_ablate(exp);
  } else if (report->parsed()) {
    status = mpap_report(exp, &text);
  }

  int rc = 0;
  if (status != MPAP_OK) {
    rc = fail(status);
  } else if (text) {
    std::cout << text << (report->parsed() ? "" : "\n");
  }
  if (text) mpap_string_free(text);
  mpap_experiment_free(exp);
  return rc;
}
