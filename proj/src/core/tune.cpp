#include "tune.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Dense>

#include "cohort.hpp"
#include "error.hpp"
#include "metrics.hpp"
#include "rng.hpp"

namespace mpap::tune {

CvScheme scheme_from_string(const std::string& s, std::uint64_t seed) {
  CvScheme scheme;
  scheme.seed = seed;
  if (s == "loocv") {
    scheme.kind = CvKind::loocv;
  } else if (s == "kfold8") {
    scheme.kind = CvKind::kfold;
    scheme.k = 8;
  } else if (s == "stratified8") {
    scheme.kind = CvKind::stratified_kfold;
    scheme.k = 8;
  } else {
    throw UsageError("unknown cv scheme: " + s);
  }
  return scheme;
}

std::string to_string(const CvScheme& s) {
  switch (s.kind) {
    case CvKind::loocv: return "loocv";
    case CvKind::kfold: return "kfold" + std::to_string(s.k);
    case CvKind::stratified_kfold: return "stratified" + std::to_string(s.k);
  }
  return "loocv";
}

std::vector<std::vector<std::size_t>> make_folds(std::size_t n, const std::vector<int>& labels,
                                                 const CvScheme& scheme) {
  if (n == 0) throw DataError("make_folds: empty index set");

  if (scheme.kind == CvKind::loocv) {
    std::vector<std::vector<std::size_t>> folds(n);
    for (std::size_t i = 0; i < n; ++i) folds[i] = {i};
    return folds;
  }

  const auto k = static_cast<std::size_t>(scheme.k);
  if (scheme.k < 2) throw UsageError("make_folds: k must be >= 2");
  if (k > n) throw DataError("make_folds: k exceeds sample count");

  Rng rng(derive_seed(scheme.seed, "tune.folds"));
  std::vector<std::vector<std::size_t>> folds(k);

  if (scheme.kind == CvKind::kfold) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order);
    const std::size_t base = n / k;
    const std::size_t extra = n % k;
    std::size_t at = 0;
    for (std::size_t f = 0; f < k; ++f) {
      const std::size_t len = base + (f < extra ? 1 : 0);
      folds[f].assign(order.begin() + static_cast<long>(at),
                      order.begin() + static_cast<long>(at + len));
      std::sort(folds[f].begin(), folds[f].end());
      at += len;
    }
    return folds;
  }

  // stratified: per-class seeded shuffle, then one round-robin counter that
  // runs on across classes so fold sizes stay balanced too
  if (labels.size() != n) throw DataError("make_folds: labels length mismatch");
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < n; ++i) (labels[i] ? pos : neg).push_back(i);
  if (pos.empty() || neg.empty()) throw DataError("make_folds: stratified needs both classes");
  rng.shuffle(pos);
  rng.shuffle(neg);

  std::size_t counter = 0;
  for (const auto cls : {&pos, &neg}) {
    for (const auto idx : *cls) folds[counter++ % k].push_back(idx);
  }
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

CvResult cross_validate(const Matrix& matrix, const std::vector<double>& targets,
                        const CvScheme& scheme, const Trainer& trainer, Objective objective,
                        bool standardize) {
  if (matrix.rows == 0 || matrix.rows != targets.size()) {
    throw DataError("cross_validate: matrix/target size mismatch");
  }
  std::vector<int> labels(targets.size());
  for (std::size_t i = 0; i < targets.size(); ++i) labels[i] = targets[i] != 0.0 ? 1 : 0;
  const auto folds = make_folds(matrix.rows, labels, scheme);

  CvResult result;
  result.oof.assign(matrix.rows, 0.0);

  std::vector<std::size_t> train_idx;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    const auto& test_idx = folds[f];
    train_idx.clear();
    std::vector<char> in_test(matrix.rows, 0);
    for (const auto i : test_idx) in_test[i] = 1;
    for (std::size_t i = 0; i < matrix.rows; ++i) {
      if (!in_test[i]) train_idx.push_back(i);
    }

    Matrix train_x = matrix.select_rows(train_idx);
    Matrix test_x = matrix.select_rows(test_idx);
    if (standardize) {
      const auto scaler = cohort::standardize_fit(train_x);
      train_x = cohort::standardize_apply(scaler, train_x);
      test_x = cohort::standardize_apply(scaler, test_x);
    }
    std::vector<double> train_y;
    train_y.reserve(train_idx.size());
    for (const auto i : train_idx) train_y.push_back(targets[i]);

    std::vector<double> pred;
    try {
      pred = trainer(train_x, train_y, test_x, f);
    } catch (const Error& e) {
      throw Error(e.code(), "fold " + std::to_string(f) + ": " + e.what());
    }
    if (pred.size() != test_idx.size()) throw DataError("trainer prediction count mismatch");
    for (std::size_t i = 0; i < test_idx.size(); ++i) result.oof[test_idx[i]] = pred[i];
  }

  if (objective == Objective::mse) {
    result.objective = metrics::regression_metrics(targets, result.oof).mse;
  } else {
    result.objective = metrics::roc_curve(labels, result.oof).auc;
  }
  return result;
}

// --- search space ---------------------------------------------------------

double ParamSpec::to_value(double unit) const {
  const double u = std::clamp(unit, 0.0, 1.0);
  double v = log_scale ? std::exp(std::log(lo) + u * (std::log(hi) - std::log(lo)))
                       : lo + u * (hi - lo);
  if (integer) v = std::clamp(std::round(v), lo, hi);
  return v;
}

double ParamSpec::to_unit(double value) const {
  const double u = log_scale ? (std::log(value) - std::log(lo)) / (std::log(hi) - std::log(lo))
                             : (value - lo) / (hi - lo);
  return std::clamp(u, 0.0, 1.0);
}

void SearchSpace::validate() const {
  if (params.empty()) throw UsageError("search space is empty");
  for (const auto& p : params) {
    if (!std::isfinite(p.lo) || !std::isfinite(p.hi) || !(p.lo < p.hi)) {
      throw UsageError("search space bounds invalid for " + p.name);
    }
    if (p.log_scale && !(p.lo > 0.0)) {
      throw UsageError("log-scale bounds must be positive for " + p.name);
    }
  }
}

SearchSpace boosting_space_common() {
  SearchSpace space;
  space.params = {
      {"n_trees", 50, 1000, false, true},
      {"learning_rate", 1e-3, 0.3, true, false},
      {"max_depth", 2, 8, false, true},
      {"min_samples_leaf", 1, 30, false, true},
      {"feature_fraction", 0.5, 1.0, false, false},
      {"lambda", 1e-3, 10, true, false},
  };
  return space;
}

SearchSpace SearchSpace::boosting_default(gbdt::Mode mode) {
  SearchSpace space = boosting_space_common();
  if (mode == gbdt::Mode::dart) {
    space.params.push_back({"drop_rate", 0.0, 0.5, false, false});
  } else if (mode == gbdt::Mode::goss) {
    space.params.push_back({"top_rate", 0.05, 0.5, false, false});
    space.params.push_back({"other_rate", 0.05, 0.5, false, false});
  }
  return space;
}

gbdt::BoostingConfig config_from_point(const SearchSpace& space, const std::vector<double>& point,
                                       gbdt::BoostingConfig base) {
  if (point.size() != space.params.size()) throw UsageError("search point width mismatch");
  for (std::size_t i = 0; i < point.size(); ++i) {
    const auto& name = space.params[i].name;
    const double v = point[i];
    if (name == "n_trees") {
      base.n_trees = static_cast<int>(v);
    } else if (name == "learning_rate") {
      base.learning_rate = v;
    } else if (name == "max_depth") {
      base.max_depth = static_cast<int>(v);
    } else if (name == "min_samples_leaf") {
      base.min_samples_leaf = static_cast<int>(v);
    } else if (name == "min_gain") {
      base.min_gain = v;
    } else if (name == "feature_fraction") {
      base.feature_fraction = v;
    } else if (name == "lambda") {
      base.lambda = v;
    } else if (name == "drop_rate") {
      base.drop_rate = v;
    } else if (name == "top_rate") {
      base.top_rate = v;
    } else if (name == "other_rate") {
      base.other_rate = v;
    } else {
      throw UsageError("unknown hyperparameter: " + name);
    }
  }
  return base;
}

// --- Bayesian optimization --------------------------------------------------

namespace {

double halton(std::size_t index, unsigned base) {
  double f = 1.0, r = 0.0;
  while (index > 0) {
    f /= static_cast<double>(base);
    r += f * static_cast<double>(index % base);
    index /= base;
  }
  return r;
}

constexpr unsigned kPrimes[] = {2,  3,  5,  7,  11, 13, 17, 19, 23, 29,
                                31, 37, 41, 43, 47, 53, 59, 61, 67, 71};

double matern52(double r, double ell) {
  const double s = std::sqrt(5.0) * r / ell;
  return (1.0 + s + s * s / 3.0) * std::exp(-s);
}

struct Gp {
  std::vector<std::vector<double>> x;  // unit-cube coordinates
  Eigen::LLT<Eigen::MatrixXd> llt;
  Eigen::VectorXd alpha;  // K^-1 y
  double ell = 0.5;
  double y_mean = 0.0;
  double y_sd = 1.0;
};

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

Gp fit_gp(const std::vector<std::vector<double>>& x, const std::vector<double>& y) {
  const auto n = static_cast<long>(x.size());
  Gp gp;
  gp.x = x;

  const double nd = static_cast<double>(n);
  gp.y_mean = std::accumulate(y.begin(), y.end(), 0.0) / nd;
  double var = 0.0;
  for (const double v : y) var += (v - gp.y_mean) * (v - gp.y_mean);
  gp.y_sd = std::sqrt(var / nd);
  if (gp.y_sd <= 0.0) gp.y_sd = 1.0;

  Eigen::VectorXd ys(n);
  for (long i = 0; i < n; ++i) ys[i] = (y[static_cast<std::size_t>(i)] - gp.y_mean) / gp.y_sd;

  Eigen::MatrixXd dist(n, n);
  for (long i = 0; i < n; ++i) {
    for (long j = 0; j <= i; ++j) {
      const double d = std::sqrt(sq_dist(x[static_cast<std::size_t>(i)],
                                         x[static_cast<std::size_t>(j)]));
      dist(i, j) = d;
      dist(j, i) = d;
    }
  }

  constexpr double kNugget = 1e-6;
  double best_ml = -std::numeric_limits<double>::infinity();
  for (const double ell : {0.1, 0.25, 0.5, 1.0, 2.0}) {
    Eigen::MatrixXd k(n, n);
    for (long i = 0; i < n; ++i) {
      for (long j = 0; j <= i; ++j) {
        const double v = matern52(dist(i, j), ell);
        k(i, j) = v;
        k(j, i) = v;
      }
      k(i, i) += kNugget;
    }
    Eigen::LLT<Eigen::MatrixXd> llt(k);
    if (llt.info() != Eigen::Success) continue;
    const Eigen::VectorXd a = llt.solve(ys);
    double logdet = 0.0;
    for (long i = 0; i < n; ++i) logdet += 2.0 * std::log(llt.matrixL()(i, i));
    const double ml = -0.5 * ys.dot(a) - 0.5 * logdet;
    if (ml > best_ml) {
      best_ml = ml;
      gp.ell = ell;
      gp.llt = llt;
      gp.alpha = a;
    }
  }
  if (!std::isfinite(best_ml)) throw ConvergenceError("GP surrogate fit failed");
  return gp;
}

void gp_predict(const Gp& gp, const std::vector<double>& point, double& mean, double& sd) {
  const auto n = static_cast<long>(gp.x.size());
  Eigen::VectorXd ks(n);
  for (long i = 0; i < n; ++i) {
    ks[i] = matern52(std::sqrt(sq_dist(gp.x[static_cast<std::size_t>(i)], point)), gp.ell);
  }
  const double mu = ks.dot(gp.alpha);
  const Eigen::VectorXd v = gp.llt.solve(ks);
  const double var = std::max(0.0, 1.0 + 1e-6 - ks.dot(v));
  mean = gp.y_mean + gp.y_sd * mu;
  sd = gp.y_sd * std::sqrt(var);
}

double expected_improvement(double mean, double sd, double best) {
  const double gap = best - mean;
  if (sd <= 0.0) return std::max(gap, 0.0);
  const double z = gap / sd;
  const double phi = std::exp(-0.5 * z * z) / std::sqrt(2.0 * 3.14159265358979323846);
  const double cdf = 0.5 * std::erfc(-z / std::sqrt(2.0));
  return gap * cdf + sd * phi;
}

}  // namespace

TuneResult bayes_optimize(const SearchSpace& space,
                          const std::function<double(const std::vector<double>&)>& objective_fn,
                          int budget, std::uint64_t seed) {
  space.validate();
  if (budget < 1) throw UsageError("bayes_optimize: budget must be >= 1");
  const std::size_t dims = space.params.size();
  if (dims > std::size(kPrimes)) throw UsageError("bayes_optimize: too many dimensions");

  Rng rng(derive_seed(seed, "tune.bayes"));

  TuneResult result;
  result.best_objective = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> ok_units;
  std::vector<double> ok_values;
  std::vector<double> best_unit;

  auto evaluate = [&](const std::vector<double>& unit) {
    Observation obs;
    obs.point.resize(dims);
    std::vector<double> snapped(dims);  // unit coords of the values actually tried
    for (std::size_t d = 0; d < dims; ++d) {
      obs.point[d] = space.params[d].to_value(unit[d]);
      snapped[d] = space.params[d].to_unit(obs.point[d]);
    }
    double y = std::numeric_limits<double>::quiet_NaN();
    try {
      y = objective_fn(obs.point);
    } catch (const Error&) {
      // recorded as a failed evaluation
    }
    if (std::isfinite(y)) {
      obs.objective = y;
      ok_units.push_back(snapped);
      ok_values.push_back(y);
      if (y < result.best_objective) {
        result.best_objective = y;
        result.best_point = obs.point;
        best_unit = snapped;
      }
    } else {
      obs.ok = false;
      obs.objective = std::numeric_limits<double>::quiet_NaN();
    }
    result.history.push_back(std::move(obs));
  };

  // randomly shifted Halton design
  const std::size_t design = std::min<std::size_t>(20, static_cast<std::size_t>(budget));
  std::vector<double> shift(dims);
  for (auto& s : shift) s = rng.uniform();
  for (std::size_t i = 0; i < design; ++i) {
    std::vector<double> u(dims);
    for (std::size_t d = 0; d < dims; ++d) {
      u[d] = std::fmod(halton(i + 1, kPrimes[d]) + shift[d], 1.0);
    }
    evaluate(u);
  }

  while (result.history.size() < static_cast<std::size_t>(budget)) {
    std::vector<double> proposal(dims);
    if (ok_units.size() < 2) {
      for (auto& u : proposal) u = rng.uniform();
    } else {
      const Gp gp = fit_gp(ok_units, ok_values);
      double best_ei = -1.0;
      std::vector<double> cand(dims);
      for (int c = 0; c < 512 + 64; ++c) {
        if (c < 512) {
          for (auto& u : cand) u = rng.uniform();
        } else {
          // local refinement around the incumbent
          for (std::size_t d = 0; d < dims; ++d) {
            cand[d] = std::clamp(best_unit[d] + 0.05 * rng.normal(), 0.0, 1.0);
          }
        }
        double mean, sd;
        gp_predict(gp, cand, mean, sd);
        const double ei = expected_improvement(mean, sd, result.best_objective);
        if (ei > best_ei) {
          best_ei = ei;
          proposal = cand;
        }
      }
    }
    evaluate(proposal);
  }

  if (ok_values.empty()) throw ConvergenceError("bayes_optimize: all evaluations failed");
  return result;
}

}  // namespace mpap::tune
