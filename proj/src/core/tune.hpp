#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "gbdt.hpp"
#include "matrix.hpp"

namespace mpap::tune {

enum class CvKind { loocv, kfold, stratified_kfold };

struct CvScheme {
  CvKind kind = CvKind::loocv;
  int k = 8;
  std::uint64_t seed = 0;
};

CvScheme scheme_from_string(const std::string& s, std::uint64_t seed);
std::string to_string(const CvScheme& s);

// Test-fold index sets; every index lands in exactly one fold. `labels` is
// only consulted for stratified folds.
std::vector<std::vector<std::size_t>> make_folds(std::size_t n, const std::vector<int>& labels,
                                                 const CvScheme& scheme);

enum class Objective { mse, auc };

struct CvResult {
  std::vector<double> oof;  // out-of-fold prediction per sample
  double objective = 0.0;   // MSE of oof, or AUC of oof scores
};

// Trainer contract: fit on (train_x, train_y), return one prediction per
// test_x row; deterministic given fold index.
using Trainer = std::function<std::vector<double>(const Matrix& train_x,
                                                  const std::vector<double>& train_y,
                                                  const Matrix& test_x, std::size_t fold)>;

// Out-of-fold evaluation. Standardization (when enabled) is refit on each
// training fold and applied to its test fold; the trainer only ever sees
// scaled values.
CvResult cross_validate(const Matrix& matrix, const std::vector<double>& targets,
                        const CvScheme& scheme, const Trainer& trainer, Objective objective,
                        bool standardize = true);

struct ParamSpec {
  std::string name;
  double lo = 0.0;
  double hi = 1.0;
  bool log_scale = false;
  bool integer = false;

  double to_value(double unit) const;  // [0,1] -> parameter value
  double to_unit(double value) const;
};

struct SearchSpace {
  std::vector<ParamSpec> params;

  void validate() const;
  // Defaults bracketing common boosting regimes at cohort scale; mode picks
  // which sampler knobs are searched.
  static SearchSpace boosting_default(gbdt::Mode mode);
};

// Apply a search point (aligned with space.params) onto a config.
gbdt::BoostingConfig config_from_point(const SearchSpace& space, const std::vector<double>& point,
                                       gbdt::BoostingConfig base = {});

struct Observation {
  std::vector<double> point;
  double objective = 0.0;
  bool ok = true;  // false when the objective came back non-finite
};

struct TuneResult {
  std::vector<double> best_point;
  double best_objective = 0.0;
  std::vector<Observation> history;  // length = budget
};

// Sequential model-based minimization: quasi-random initial design (up to 20
// points), then a Matern-5/2 GP surrogate with expected-improvement
// acquisition over seeded random candidates. Deterministic given seed.
TuneResult bayes_optimize(const SearchSpace& space,
                          const std::function<double(const std::vector<double>&)>& objective_fn,
                          int budget = 200, std::uint64_t seed = 0);

}  // namespace mpap::tune
