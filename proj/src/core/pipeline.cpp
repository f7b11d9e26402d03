#include "pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "csv.hpp"
#include "error.hpp"
#include "hemo.hpp"
#include "rng.hpp"
#include "waveform.hpp"

namespace mpap::pipeline {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

Task task_from_string(const std::string& s) {
  if (s == "regression") return Task::regression;
  if (s == "classification") return Task::classification;
  throw UsageError("unknown task: " + s);
}

std::string to_string(Task t) {
  return t == Task::regression ? "regression" : "classification";
}

std::set<cohort::Group> parse_groups(const std::string& s) {
  std::set<cohort::Group> groups;
  if (s == "all") {
    return {cohort::Group::demographics, cohort::Group::physics, cohort::Group::mri};
  }
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) groups.insert(cohort::group_from_string(item));
  }
  if (groups.empty()) throw UsageError("no feature groups given");
  return groups;
}

std::string groups_to_string(const std::set<cohort::Group>& groups) {
  if (groups.size() == 3) return "all";
  std::string out;
  for (const auto g : {cohort::Group::demographics, cohort::Group::physics, cohort::Group::mri}) {
    if (!groups.count(g)) continue;
    if (!out.empty()) out += "+";
    out += cohort::to_string(g);
  }
  return out;
}

void ExperimentConfig::validate() const {
  if (budget < 1) throw UsageError("budget must be >= 1");
  if (!(threshold > 0.0)) throw UsageError("threshold must be positive");
  if (groups.empty()) throw UsageError("at least one feature group is required");
  if (n_patients == 0) throw UsageError("n_patients must be positive");
  tune::scheme_from_string(cv, seed);  // validates the name
}

namespace {

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << text;
}

std::string patient_waveform_path(const std::string& dir, std::size_t i) {
  return dir + "/waveforms/patient_" + std::to_string(i) + ".csv";
}

gbdt::Loss loss_for(Task task) {
  return task == Task::regression ? gbdt::Loss::squared_error : gbdt::Loss::logistic;
}

tune::Trainer make_trainer(gbdt::Mode mode, gbdt::Loss loss, const gbdt::BoostingConfig& cfg,
                           std::uint64_t seed) {
  return [mode, loss, cfg, seed](const Matrix& train_x, const std::vector<double>& train_y,
                                 const Matrix& test_x, std::size_t fold) {
    const auto ens = gbdt::train(train_x, train_y, cfg, mode, loss,
                                 derive_seed(seed, "train.fold." + std::to_string(fold)));
    return ens.predict(test_x);
  };
}

struct Prepared {
  cohort::EncodedCohort enc;
  Matrix sel;                    // selected feature columns
  std::vector<double> targets;   // mpap or 0/1 labels
  std::vector<int> labels;
};

Prepared prepare(const cohort::EncodedCohort& enc, Task task,
                 const std::set<cohort::Group>& groups) {
  Prepared p;
  p.enc = enc;
  p.sel = cohort::select_feature_set(enc.matrix, groups).matrix;
  p.labels = enc.ph_labels;
  if (task == Task::regression) {
    p.targets = enc.mpap;
  } else {
    p.targets.reserve(enc.ph_labels.size());
    for (const int l : enc.ph_labels) p.targets.push_back(static_cast<double>(l));
  }
  return p;
}

cohort::EncodedCohort load_encoded(const std::string& path, double threshold) {
  if (path.empty()) throw UsageError("--in is required");
  const auto raw = cohort::load_cohort(path, threshold);
  return cohort::encode(cohort::impute(raw));
}

struct CellResult {
  tune::TuneResult tuning;
  gbdt::BoostingConfig best_config;
  std::vector<double> oof;
  double cv_objective = 0.0;
};

// tune (8-fold, stratified for classification) then evaluate out-of-fold
// under the requested final scheme
CellResult evaluate_cell(const Prepared& data, Task task, gbdt::Mode mode, const std::string& cv,
                         int budget, std::uint64_t seed) {
  const auto space = tune::SearchSpace::boosting_default(mode);
  const gbdt::Loss loss = loss_for(task);
  const auto tune_scheme = tune::scheme_from_string(
      task == Task::classification ? "stratified8" : "kfold8", derive_seed(seed, "tune.cv"));
  const auto objective =
      task == Task::regression ? tune::Objective::mse : tune::Objective::auc;

  const auto objective_fn = [&](const std::vector<double>& point) {
    const auto cfg = tune::config_from_point(space, point);
    const auto cvres = tune::cross_validate(data.sel, data.targets, tune_scheme,
                                            make_trainer(mode, loss, cfg, seed), objective);
    return task == Task::regression ? cvres.objective : -cvres.objective;
  };

  CellResult cell;
  cell.tuning = tune::bayes_optimize(space, objective_fn, budget, seed);
  cell.best_config = tune::config_from_point(space, cell.tuning.best_point);

  const auto eval_scheme = tune::scheme_from_string(cv, derive_seed(seed, "eval.cv"));
  const auto cvres =
      tune::cross_validate(data.sel, data.targets, eval_scheme,
                           make_trainer(mode, loss, cell.best_config,
                                        derive_seed(seed, "eval.train")),
                           objective);
  cell.oof = cvres.oof;
  cell.cv_objective = cvres.objective;
  return cell;
}

ordered_json config_to_json(const gbdt::BoostingConfig& c, gbdt::Mode mode) {
  ordered_json j;
  j["mode"] = gbdt::to_string(mode);
  j["n_trees"] = c.n_trees;
  j["learning_rate"] = c.learning_rate;
  j["max_depth"] = c.max_depth;
  j["min_samples_leaf"] = c.min_samples_leaf;
  j["min_gain"] = c.min_gain;
  j["feature_fraction"] = c.feature_fraction;
  j["lambda"] = c.lambda;
  if (mode == gbdt::Mode::dart) {
    j["drop_rate"] = c.drop_rate;
    j["max_dropped"] = c.max_dropped;
  }
  if (mode == gbdt::Mode::goss) {
    j["top_rate"] = c.top_rate;
    j["other_rate"] = c.other_rate;
  }
  return j;
}

std::string history_csv(const tune::SearchSpace& space, const tune::TuneResult& result) {
  std::string out = "iteration,objective";
  for (const auto& p : space.params) out += "," + p.name;
  out += "\n";
  for (std::size_t i = 0; i < result.history.size(); ++i) {
    const auto& obs = result.history[i];
    out += std::to_string(i);
    out += ",";
    if (obs.ok) out += format_double(obs.objective);
    for (const double v : obs.point) out += "," + format_double(v);
    out += "\n";
  }
  return out;
}

ordered_json confusion_to_json(const metrics::ConfusionMetrics& c) {
  ordered_json j;
  j["tp"] = c.tp;
  j["fp"] = c.fp;
  j["tn"] = c.tn;
  j["fn"] = c.fn;
  j["sensitivity"] = c.sensitivity;
  j["specificity"] = c.specificity;
  j["accuracy"] = c.accuracy;
  return j;
}

ordered_json finite_or_string(double v) {
  if (std::isfinite(v)) return v;
  return format_double(v);  // "inf"/"-inf" survive JSON round trips
}

}  // namespace

std::string cmd_synth(const ExperimentConfig& config) {
  config.validate();
  if (config.out.empty()) throw UsageError("--out directory is required");

  cohort::SynthConfig sc;
  sc.n_patients = config.n_patients;
  sc.seed = config.seed;
  sc.ph_threshold = config.threshold;
  const auto result = cohort::synth_cohort(sc);

  fs::create_directories(config.out + "/waveforms");
  cohort::save_cohort(config.out + "/cohort.csv", result.cohort);
  for (std::size_t i = 0; i < result.waveforms.size(); ++i) {
    save_waveform_csv(patient_waveform_path(config.out, i), result.waveforms[i]);
  }

  return "patients=" + std::to_string(result.cohort.size()) +
         " positives=" + std::to_string(result.cohort.positives()) +
         " seed=" + std::to_string(config.seed);
}

std::string cmd_features(const ExperimentConfig& config) {
  config.validate();
  if (config.in.empty()) throw UsageError("--in directory is required");
  if (config.out.empty()) throw UsageError("--out path is required");

  auto data = cohort::load_cohort(config.in + "/cohort.csv", config.threshold);
  hemo::FitOptions fit;
  fit.seed = derive_seed(config.seed, "features.fit");

  const std::size_t idx_rd = cohort::feature_index("rd");
  const std::size_t idx_rc = cohort::feature_index("rc");
  const std::size_t idx_c = cohort::feature_index("c");
  const std::size_t idx_rtot = cohort::feature_index("rtot");
  const std::size_t idx_wb = cohort::feature_index("wb_wtot");

  cohort::Cohort out;
  out.ph_threshold = data.ph_threshold;
  out.provenance = data.provenance;
  std::size_t skipped = 0;

  for (std::size_t i = 0; i < data.records.size(); ++i) {
    const auto path = patient_waveform_path(config.in, i);
    try {
      if (!fs::exists(path)) throw DataError("missing waveform file " + path);
      const auto pair = load_waveform_csv(path);
      const auto feats = hemo::physics_features(pair.flow, pair.area, TubeLaw{}, fit);
      auto rec = data.records[i];
      rec.values[idx_rd] = feats.Rd;
      rec.values[idx_rc] = feats.Rc;
      rec.values[idx_c] = feats.C;
      rec.values[idx_rtot] = feats.Rtot;
      rec.values[idx_wb] = feats.wb_wtot;
      out.records.push_back(std::move(rec));
    } catch (const Error& e) {
      if (!config.skip_failures) {
        throw Error(e.code(), "patient " + std::to_string(i) + ": " + e.what());
      }
      std::cerr << "patient " << i << ": " << e.what() << " (excluded)\n";
      ++skipped;
    }
  }
  if (out.records.empty()) throw DataError("feature extraction failed for every patient");

  cohort::save_cohort(config.out, out);
  return "patients=" + std::to_string(data.records.size()) +
         " extracted=" + std::to_string(out.records.size()) +
         " skipped=" + std::to_string(skipped);
}

tune::TuneResult cmd_tune(const ExperimentConfig& config) {
  config.validate();
  const auto enc = load_encoded(config.in, config.threshold);
  const auto data = prepare(enc, config.task, config.groups);
  const auto space = tune::SearchSpace::boosting_default(config.mode);

  CellResult cell;
  {
    // tuning only: reuse the cell evaluator's search, skip the final CV
    const gbdt::Loss loss = loss_for(config.task);
    const auto scheme = tune::scheme_from_string(
        config.task == Task::classification ? "stratified8" : "kfold8",
        derive_seed(config.seed, "tune.cv"));
    const auto objective =
        config.task == Task::regression ? tune::Objective::mse : tune::Objective::auc;
    const auto objective_fn = [&](const std::vector<double>& point) {
      const auto cfg = tune::config_from_point(space, point);
      const auto cvres = tune::cross_validate(data.sel, data.targets, scheme,
                                              make_trainer(config.mode, loss, cfg, config.seed),
                                              objective);
      return config.task == Task::regression ? cvres.objective : -cvres.objective;
    };
    cell.tuning = tune::bayes_optimize(space, objective_fn, config.budget, config.seed);
    cell.best_config = tune::config_from_point(space, cell.tuning.best_point);
  }

  if (!config.out.empty()) {
    fs::create_directories(config.out);
    write_text(config.out + "/history.csv", history_csv(space, cell.tuning));
    ordered_json best = config_to_json(cell.best_config, config.mode);
    best["objective"] = cell.tuning.best_objective;
    best["seed"] = config.seed;
    write_text(config.out + "/best_config.json", best.dump(2) + "\n");
  }
  return cell.tuning;
}

RunOutcome cmd_run(const ExperimentConfig& config) {
  config.validate();
  const auto enc = load_encoded(config.in, config.threshold);
  const auto data = prepare(enc, config.task, config.groups);
  const auto cell =
      evaluate_cell(data, config.task, config.mode, config.cv, config.budget, config.seed);

  RunOutcome outcome;
  outcome.tuning = cell.tuning;
  outcome.best_config = cell.best_config;
  outcome.targets = data.targets;
  outcome.predictions = cell.oof;

  ordered_json report;
  report["task"] = to_string(config.task);
  report["mode"] = gbdt::to_string(config.mode);
  report["groups"] = groups_to_string(config.groups);
  report["cv"] = config.cv;
  report["seed"] = config.seed;
  report["budget"] = config.budget;
  report["threshold"] = config.threshold;
  report["patients"] = data.sel.rows;
  report["best_config"] = config_to_json(cell.best_config, config.mode);
  report["tuning_objective"] = cell.tuning.best_objective;

  std::string figure_name, figure;
  if (config.task == Task::regression) {
    const auto reg = metrics::regression_metrics(data.targets, cell.oof);
    const auto conf = metrics::confusion_at(data.targets, cell.oof, config.threshold);
    outcome.primary_metric = reg.mae;
    report["regression"] = {{"mae", reg.mae}, {"rmse", reg.rmse}, {"mse", reg.mse}, {"r2", reg.r2}};
    report["confusion_at_threshold"] = confusion_to_json(conf);

    figure_name = "scatter.csv";
    figure = "measured,predicted\n";
    for (std::size_t i = 0; i < data.targets.size(); ++i) {
      figure += format_double(data.targets[i]) + "," + format_double(cell.oof[i]) + "\n";
    }
  } else {
    const auto roc = metrics::roc_curve(data.labels, cell.oof);
    outcome.primary_metric = roc.auc;
    report["auc"] = roc.auc;
    ordered_json strategies;
    for (const auto strategy :
         {metrics::ThresholdStrategy::youden, metrics::ThresholdStrategy::f1,
          metrics::ThresholdStrategy::closest01, metrics::ThresholdStrategy::concordance}) {
      const auto choice = metrics::select_threshold(data.labels, cell.oof, strategy);
      ordered_json s;
      s["threshold"] = finite_or_string(choice.threshold);
      s["sensitivity"] = choice.confusion.sensitivity;
      s["specificity"] = choice.confusion.specificity;
      s["accuracy"] = choice.confusion.accuracy;
      s["f1"] = choice.confusion.f1();
      strategies[metrics::to_string(strategy)] = std::move(s);
    }
    report["strategies"] = std::move(strategies);
    report["selected_strategy"] = metrics::to_string(config.strategy);

    figure_name = "roc.csv";
    figure = "fpr,tpr,threshold\n";
    for (const auto& p : roc.points) {
      figure += format_double(p.fpr) + "," + format_double(p.tpr) + "," +
                format_double(p.threshold) + "\n";
    }
  }

  if (!config.out.empty()) {
    fs::create_directories(config.out);
    write_text(config.out + "/report.json", report.dump(2) + "\n");
    write_text(config.out + "/" + figure_name, figure);
    const auto space = tune::SearchSpace::boosting_default(config.mode);
    write_text(config.out + "/history.csv", history_csv(space, cell.tuning));
    ordered_json best = config_to_json(cell.best_config, config.mode);
    best["objective"] = cell.tuning.best_objective;
    best["seed"] = config.seed;
    write_text(config.out + "/best_config.json", best.dump(2) + "\n");
  }
  return outcome;
}

AblationResult cmd_ablate(const ExperimentConfig& config) {
  config.validate();
  const auto enc = load_encoded(config.in, config.threshold);

  using cohort::Group;
  const std::vector<std::set<Group>> subsets = {
      {Group::demographics},
      {Group::physics},
      {Group::mri},
      {Group::demographics, Group::physics},
      {Group::demographics, Group::mri},
      {Group::physics, Group::mri},
      {Group::demographics, Group::physics, Group::mri},
  };
  const std::vector<gbdt::Mode> modes = {gbdt::Mode::gbdt, gbdt::Mode::dart, gbdt::Mode::goss};

  AblationResult result;
  for (const Task task : {Task::regression, Task::classification}) {
    for (const auto mode : modes) {
      std::vector<AblationCell> row;
      for (const auto& groups : subsets) {
        AblationCell cell;
        cell.task = task;
        cell.mode = mode;
        cell.groups = groups;
        const auto tag = "ablate." + to_string(task) + "." + gbdt::to_string(mode) + "." +
                         groups_to_string(groups);
        try {
          const auto data = prepare(enc, task, groups);
          const auto r = evaluate_cell(data, task, mode, config.cv, config.budget,
                                       derive_seed(config.seed, tag));
          cell.ok = true;
          if (task == Task::regression) {
            cell.metric = metrics::regression_metrics(data.targets, r.oof).mae;
          } else {
            cell.metric = metrics::roc_curve(data.labels, r.oof).auc;
          }
          cell.abs_errors.reserve(r.oof.size());
          for (std::size_t i = 0; i < r.oof.size(); ++i) {
            cell.abs_errors.push_back(std::abs(r.oof[i] - data.targets[i]));
          }
        } catch (const Error& e) {
          cell.error = e.what();
          std::cerr << tag << ": " << e.what() << " (cell marked failed)\n";
        }
        row.push_back(std::move(cell));
      }
      // paired significance against the all-groups cell of the same row
      const AblationCell& all_cell = row.back();
      for (auto& cell : row) {
        if (cell.ok && all_cell.ok) {
          cell.p_vs_all = metrics::paired_error_test(cell.abs_errors, all_cell.abs_errors);
        }
      }
      for (auto& cell : row) result.cells.push_back(std::move(cell));
    }
  }

  if (!config.out.empty()) {
    fs::create_directories(config.out);
    std::string header = "task,mode";
    for (const auto& groups : subsets) header += "," + groups_to_string(groups);
    std::string values = header + "\n";
    std::string pvalues = header + "\n";
    for (std::size_t i = 0; i < result.cells.size(); i += subsets.size()) {
      const auto& first = result.cells[i];
      const std::string prefix = to_string(first.task) + "," + gbdt::to_string(first.mode);
      values += prefix;
      pvalues += prefix;
      for (std::size_t j = 0; j < subsets.size(); ++j) {
        const auto& cell = result.cells[i + j];
        values += "," + (cell.ok ? format_double(cell.metric) : std::string("failed"));
        pvalues += "," + (cell.ok ? format_double(cell.p_vs_all) : std::string("failed"));
      }
      values += "\n";
      pvalues += "\n";
    }
    write_text(config.out + "/ablation.csv", values);
    write_text(config.out + "/ablation_pvalues.csv", pvalues);
  }
  return result;
}

namespace {

void render_json(const ordered_json& j, const std::string& indent, std::string& out) {
  for (const auto& [key, value] : j.items()) {
    if (value.is_object()) {
      out += indent + key + ":\n";
      render_json(value, indent + "  ", out);
    } else {
      out += indent + key + ": " + (value.is_string() ? value.get<std::string>() : value.dump()) +
             "\n";
    }
  }
}

std::string render_grid(const std::string& path) {
  const auto table = csv::read_file(path);
  std::vector<std::size_t> width(table.header.size());
  for (std::size_t c = 0; c < table.header.size(); ++c) width[c] = table.header[c].size();
  for (const auto& row : table.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  }
  std::string out;
  const auto emit = [&](const std::vector<std::string>& row) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      out += row[c];
      if (c + 1 < row.size()) out += std::string(width[c] - row[c].size() + 2, ' ');
    }
    out += "\n";
  };
  emit(table.header);
  for (const auto& row : table.rows) emit(row);
  return out;
}

}  // namespace

std::string cmd_report(const ExperimentConfig& config) {
  if (config.in.empty()) throw UsageError("--in directory is required");
  std::string out;

  const auto report_path = config.in + "/report.json";
  if (fs::exists(report_path)) {
    std::ifstream in(report_path);
    ordered_json j;
    try {
      j = ordered_json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw DataError(report_path + ": " + e.what());
    }
    out += "experiment report\n";
    render_json(j, "  ", out);
  }
  if (fs::exists(config.in + "/ablation.csv")) {
    if (!out.empty()) out += "\n";
    out += "ablation (MAE for regression rows, AUC for classification rows)\n";
    out += render_grid(config.in + "/ablation.csv");
    if (fs::exists(config.in + "/ablation_pvalues.csv")) {
      out += "\npaired p-values vs the all-features column\n";
      out += render_grid(config.in + "/ablation_pvalues.csv");
    }
  }
  if (out.empty()) {
    throw DataError("nothing to report under " + config.in +
                    " (expected report.json or ablation.csv)");
  }
  if (!config.out.empty()) write_text(config.out, out);
  return out;
}

}  // namespace mpap::pipeline
