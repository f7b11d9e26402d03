#include "mpap.h"

#include <cstring>
#include <new>
#include <string>

#include <json.hpp>

#include "../core/error.hpp"
#include "../core/gbdt.hpp"
#include "../core/hemo.hpp"
#include "../core/pipeline.hpp"
#include "../core/waveform.hpp"

using nlohmann::json;

namespace {

thread_local std::string g_last_error;

mpap_status set_error(mpap_status code, const std::string& what) {
  g_last_error = what;
  return code;
}

mpap_status from_code(mpap::ErrorCode code) {
  switch (code) {
    case mpap::ErrorCode::usage: return MPAP_ERR_USAGE;
    case mpap::ErrorCode::data: return MPAP_ERR_DATA;
    case mpap::ErrorCode::convergence: return MPAP_ERR_CONVERGENCE;
  }
  return MPAP_ERR_DATA;
}

template <class Fn>
mpap_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return MPAP_OK;
  } catch (const mpap::Error& e) {
    return set_error(from_code(e.code()), e.what());
  } catch (const json::exception& e) {
    return set_error(MPAP_ERR_USAGE, std::string("JSON: ") + e.what());
  } catch (const std::exception& e) {
    return set_error(MPAP_ERR_DATA, e.what());
  }
}

char* dup_string(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

mpap::pipeline::ExperimentConfig parse_experiment(const char* text) {
  if (!text) throw mpap::UsageError("config JSON is null");
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw mpap::UsageError(std::string("config JSON parse error: ") + e.what());
  }
  if (!j.is_object()) throw mpap::UsageError("config JSON must be an object");

  mpap::pipeline::ExperimentConfig cfg;
  for (const auto& [key, value] : j.items()) {
    if (key == "task") {
      cfg.task = mpap::pipeline::task_from_string(value.get<std::string>());
    } else if (key == "mode") {
      cfg.mode = mpap::gbdt::mode_from_string(value.get<std::string>());
    } else if (key == "groups") {
      cfg.groups = mpap::pipeline::parse_groups(value.get<std::string>());
    } else if (key == "cv") {
      cfg.cv = value.get<std::string>();
    } else if (key == "strategy") {
      cfg.strategy = mpap::metrics::strategy_from_string(value.get<std::string>());
    } else if (key == "threshold") {
      cfg.threshold = value.get<double>();
    } else if (key == "budget") {
      cfg.budget = value.get<int>();
    } else if (key == "seed") {
      cfg.seed = value.get<std::uint64_t>();
    } else if (key == "in") {
      cfg.in = value.get<std::string>();
    } else if (key == "out") {
      cfg.out = value.get<std::string>();
    } else if (key == "n_patients") {
      cfg.n_patients = value.get<std::size_t>();
    } else if (key == "skip_failures") {
      cfg.skip_failures = value.get<bool>();
    } else {
      throw mpap::UsageError("unknown config key: " + key);
    }
  }
  cfg.validate();
  return cfg;
}

}  // namespace

struct mpap_experiment {
  mpap::pipeline::ExperimentConfig config;
};

struct mpap_ensemble {
  mpap::gbdt::Ensemble ensemble;
};

extern "C" {

const char* mpap_last_error(void) { return g_last_error.c_str(); }

void mpap_string_free(char* s) { delete[] s; }

mpap_status mpap_experiment_create(const char* config_json, mpap_experiment** out) {
  if (!out) return set_error(MPAP_ERR_USAGE, "out pointer is null");
  *out = nullptr;
  return guarded([&] { *out = new mpap_experiment{parse_experiment(config_json)}; });
}

void mpap_experiment_free(mpap_experiment* e) { delete e; }

static mpap_status require_experiment(const mpap_experiment* e) {
  if (!e) return set_error(MPAP_ERR_USAGE, "experiment handle is null");
  return MPAP_OK;
}

mpap_status mpap_synth(const mpap_experiment* e, char** summary) {
  if (require_experiment(e) != MPAP_OK) return MPAP_ERR_USAGE;
  return guarded([&] {
    const auto line = mpap::pipeline::cmd_synth(e->config);
    if (summary) *summary = dup_string(line);
  });
}

mpap_status mpap_features(const mpap_experiment* e, char** summary) {
  if (require_experiment(e) != MPAP_OK) return MPAP_ERR_USAGE;
  return guarded([&] {
    const auto line = mpap::pipeline::cmd_features(e->config);
    if (summary) *summary = dup_string(line);
  });
}

mpap_status mpap_tune(const mpap_experiment* e) {
  if (require_experiment(e) != MPAP_OK) return MPAP_ERR_USAGE;
  return guarded([&] { mpap::pipeline::cmd_tune(e->config); });
}

mpap_status mpap_run(const mpap_experiment* e) {
  if (require_experiment(e) != MPAP_OK) return MPAP_ERR_USAGE;
  return guarded([&] { mpap::pipeline::cmd_run(e->config); });
}

mpap_status mpap_ablate(const mpap_experiment* e) {
  if (require_experiment(e) != MPAP_OK) return MPAP_ERR_USAGE;
  return guarded([&] { mpap::pipeline::cmd_ablate(e->config); });
}

mpap_status mpap_report(const mpap_experiment* e, char** text) {
  if (require_experiment(e) != MPAP_OK) return MPAP_ERR_USAGE;
  return guarded([&] {
    const auto body = mpap::pipeline::cmd_report(e->config);
    if (text) *text = dup_string(body);
  });
}

mpap_status mpap_physics_from_csv(const char* waveform_csv_path, uint64_t seed,
                                  mpap_physics_features* out) {
  if (!waveform_csv_path || !out) return set_error(MPAP_ERR_USAGE, "null argument");
  return guarded([&] {
    const auto pair = mpap::load_waveform_csv(waveform_csv_path);
    mpap::hemo::FitOptions options;
    options.seed = seed;
    const auto f = mpap::hemo::physics_features(pair.flow, pair.area, mpap::TubeLaw{}, options);
    out->rd = f.Rd;
    out->rc = f.Rc;
    out->c = f.C;
    out->rtot = f.Rtot;
    out->wb_wtot = f.wb_wtot;
  });
}

mpap_status mpap_ensemble_train(const double* rows, size_t n_rows, size_t n_cols,
                                const double* targets, const char* config_json,
                                mpap_ensemble** out) {
  if (!rows || !targets || !config_json || !out) {
    return set_error(MPAP_ERR_USAGE, "null argument");
  }
  *out = nullptr;
  return guarded([&] {
    json j = json::parse(config_json);
    auto mode = mpap::gbdt::Mode::gbdt;
    auto loss = mpap::gbdt::Loss::squared_error;
    std::uint64_t seed = 0;
    mpap::gbdt::BoostingConfig cfg;
    for (const auto& [key, value] : j.items()) {
      if (key == "mode") {
        mode = mpap::gbdt::mode_from_string(value.get<std::string>());
      } else if (key == "loss") {
        loss = mpap::gbdt::loss_from_string(value.get<std::string>());
      } else if (key == "seed") {
        seed = value.get<std::uint64_t>();
      } else if (key == "n_trees") {
        cfg.n_trees = value.get<int>();
      } else if (key == "learning_rate") {
        cfg.learning_rate = value.get<double>();
      } else if (key == "max_depth") {
        cfg.max_depth = value.get<int>();
      } else if (key == "min_samples_leaf") {
        cfg.min_samples_leaf = value.get<int>();
      } else if (key == "min_gain") {
        cfg.min_gain = value.get<double>();
      } else if (key == "feature_fraction") {
        cfg.feature_fraction = value.get<double>();
      } else if (key == "lambda") {
        cfg.lambda = value.get<double>();
      } else if (key == "drop_rate") {
        cfg.drop_rate = value.get<double>();
      } else if (key == "max_dropped") {
        cfg.max_dropped = value.get<int>();
      } else if (key == "top_rate") {
        cfg.top_rate = value.get<double>();
      } else if (key == "other_rate") {
        cfg.other_rate = value.get<double>();
      } else {
        throw mpap::UsageError("unknown training config key: " + key);
      }
    }
    mpap::Matrix m(n_rows, n_cols);
    m.data.assign(rows, rows + n_rows * n_cols);
    const std::vector<double> y(targets, targets + n_rows);
    *out = new mpap_ensemble{mpap::gbdt::train(m, y, cfg, mode, loss, seed)};
  });
}

mpap_status mpap_ensemble_predict(const mpap_ensemble* e, const double* rows, size_t n_rows,
                                  size_t n_cols, double* predictions) {
  if (!e || !rows || !predictions) return set_error(MPAP_ERR_USAGE, "null argument");
  return guarded([&] {
    mpap::Matrix m(n_rows, n_cols);
    m.data.assign(rows, rows + n_rows * n_cols);
    const auto pred = e->ensemble.predict(m);
    std::memcpy(predictions, pred.data(), pred.size() * sizeof(double));
  });
}

mpap_status mpap_ensemble_save(const mpap_ensemble* e, const char* path) {
  if (!e || !path) return set_error(MPAP_ERR_USAGE, "null argument");
  return guarded([&] { e->ensemble.save(path); });
}

mpap_status mpap_ensemble_load(const char* path, mpap_ensemble** out) {
  if (!path || !out) return set_error(MPAP_ERR_USAGE, "null argument");
  *out = nullptr;
  return guarded([&] { *out = new mpap_ensemble{mpap::gbdt::Ensemble::load(path)}; });
}

void mpap_ensemble_free(mpap_ensemble* e) { delete e; }

}  // extern "C"
