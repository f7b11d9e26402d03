#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <vector>

#include "core/error.hpp"
#include "core/rng.hpp"
#include "core/tune.hpp"

using namespace mpap;
using namespace mpap::tune;

namespace {

// a trainer that predicts the training-target mean, ignoring features
const Trainer mean_trainer = [](const Matrix&, const std::vector<double>& y, const Matrix& test,
                                std::size_t) {
  const double mean = std::accumulate(y.begin(), y.end(), 0.0) / y.size();
  return std::vector<double>(test.rows, mean);
};

}  // namespace

TEST_CASE("fold construction") {
  SUBCASE("loocv enumerates singleton folds in order") {
    const auto folds = make_folds(3, {}, {CvKind::loocv, 0, 0});
    REQUIRE(folds.size() == 3);
    CHECK(folds[0] == std::vector<std::size_t>{0});
    CHECK(folds[1] == std::vector<std::size_t>{1});
    CHECK(folds[2] == std::vector<std::size_t>{2});
  }

  SUBCASE("every index appears in exactly one fold") {
    for (const CvKind kind : {CvKind::kfold, CvKind::stratified_kfold}) {
      std::vector<int> labels(37);
      for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = i % 3 == 0;
      const auto folds = make_folds(37, labels, {kind, 5, 11});
      REQUIRE(folds.size() == 5);
      std::set<std::size_t> seen;
      for (const auto& fold : folds) {
        for (const std::size_t i : fold) {
          CHECK(seen.insert(i).second);
          CHECK(i < 37);
        }
      }
      CHECK(seen.size() == 37);
      // sizes differ by at most one
      std::size_t lo = 37, hi = 0;
      for (const auto& fold : folds) {
        lo = std::min(lo, fold.size());
        hi = std::max(hi, fold.size());
      }
      CHECK(hi - lo <= 1);
    }
  }

  SUBCASE("stratified folds at cohort scale balance the positives") {
    std::vector<int> labels(352);
    for (std::size_t i = 0; i < 286; ++i) labels[i] = 1;
    const auto folds = make_folds(352, labels, {CvKind::stratified_kfold, 8, 42});
    REQUIRE(folds.size() == 8);
    for (const auto& fold : folds) {
      CHECK(fold.size() == 44);
      std::size_t pos = 0;
      for (const std::size_t i : fold) pos += labels[i] == 1;
      CHECK(pos >= 35);
      CHECK(pos <= 36);
    }
  }

  SUBCASE("deterministic given a seed, shuffled across seeds") {
    std::vector<int> labels(40, 0);
    for (std::size_t i = 0; i < 20; ++i) labels[i] = 1;
    const auto a = make_folds(40, labels, {CvKind::kfold, 4, 7});
    const auto b = make_folds(40, labels, {CvKind::kfold, 4, 7});
    CHECK(a == b);
    const auto c = make_folds(40, labels, {CvKind::kfold, 4, 8});
    CHECK(a != c);
  }

  SUBCASE("more folds than samples rejected") {
    CHECK_THROWS_AS(make_folds(3, {}, {CvKind::kfold, 8, 0}), DataError);
  }

  SUBCASE("scheme strings parse") {
    CHECK(scheme_from_string("loocv", 1).kind == CvKind::loocv);
    const auto kf = scheme_from_string("kfold8", 1);
    CHECK(kf.kind == CvKind::kfold);
    CHECK(kf.k == 8);
    CHECK(scheme_from_string("stratified8", 1).kind == CvKind::stratified_kfold);
    CHECK_THROWS_AS(scheme_from_string("kfold0", 1), UsageError);
    CHECK_THROWS_AS(scheme_from_string("mystery", 1), UsageError);
  }
}

TEST_CASE("cross validation") {
  SUBCASE("loocv with a mean trainer has a closed form") {
    Matrix m(3, 1);
    const std::vector<double> y = {1.0, 2.0, 3.0};
    const auto res = cross_validate(m, y, {CvKind::loocv, 0, 0}, mean_trainer, Objective::mse,
                                    /*standardize=*/false);
    REQUIRE(res.oof.size() == 3);
    CHECK(res.oof[0] == doctest::Approx(2.5));
    CHECK(res.oof[1] == doctest::Approx(2.0));
    CHECK(res.oof[2] == doctest::Approx(1.5));
    const double mse = ((2.5 - 1) * (2.5 - 1) + 0.0 + (1.5 - 3) * (1.5 - 3)) / 3.0;
    CHECK(res.objective == doctest::Approx(mse));
  }

  SUBCASE("standardization is fit on the training fold only") {
    // trainer leaks the scaled test feature directly; with train-only fitting
    // the held-out outlier lands far outside [-1.2, 1.2]
    Matrix m(5, 1);
    for (std::size_t r = 0; r < 4; ++r) m.at(r, 0) = static_cast<double>(r);
    m.at(4, 0) = 1000.0;
    const std::vector<double> y = {0.0, 1.0, 2.0, 3.0, 4.0};
    double seen = 0.0;
    const Trainer probe = [&](const Matrix&, const std::vector<double>&, const Matrix& test,
                              std::size_t fold) {
      if (fold == 4) seen = test.at(0, 0);
      return std::vector<double>(test.rows, 0.0);
    };
    cross_validate(m, y, {CvKind::loocv, 0, 0}, probe, Objective::mse, true);
    CHECK(seen > 100.0);  // (1000 - 1.5) / sd({0,1,2,3})
  }

  SUBCASE("auc objective scores the pooled out-of-fold predictions") {
    Matrix m(6, 1);
    for (std::size_t r = 0; r < 6; ++r) m.at(r, 0) = static_cast<double>(r);
    const std::vector<double> labels = {0, 0, 0, 1, 1, 1};
    const Trainer identity = [](const Matrix&, const std::vector<double>&, const Matrix& test,
                                std::size_t) {
      std::vector<double> out(test.rows);
      for (std::size_t r = 0; r < test.rows; ++r) out[r] = test.at(r, 0);
      return out;
    };
    const auto res =
        cross_validate(m, labels, {CvKind::loocv, 0, 0}, identity, Objective::auc, false);
    CHECK(res.objective == doctest::Approx(1.0));
  }

  SUBCASE("trainer failures are tagged with the fold") {
    Matrix m(4, 1);
    const std::vector<double> y = {1.0, 2.0, 3.0, 4.0};
    const Trainer boom = [](const Matrix&, const std::vector<double>&, const Matrix&,
                            std::size_t fold) -> std::vector<double> {
      if (fold == 2) throw DataError("synthetic failure");
      return {0.0};
    };
    try {
      cross_validate(m, y, {CvKind::loocv, 0, 0}, boom, Objective::mse, false);
      FAIL("expected an error");
    } catch (const Error& e) {
      const std::string msg = e.what();
      CHECK(msg.find("fold 2") != std::string::npos);
      CHECK(msg.find("synthetic failure") != std::string::npos);
    }
  }
}

TEST_CASE("search space plumbing") {
  SUBCASE("unit mapping round trips, log and integer included") {
    const ParamSpec lin{"x", 2.0, 10.0, false, false};
    CHECK(lin.to_value(0.0) == doctest::Approx(2.0));
    CHECK(lin.to_value(1.0) == doctest::Approx(10.0));
    CHECK(lin.to_unit(lin.to_value(0.37)) == doctest::Approx(0.37));

    const ParamSpec log{"lr", 1e-3, 1.0, true, false};
    CHECK(log.to_value(0.5) == doctest::Approx(std::sqrt(1e-3)));

    const ParamSpec depth{"d", 2.0, 8.0, false, true};
    CHECK(depth.to_value(0.0) == 2.0);
    CHECK(depth.to_value(1.0) == 8.0);
    CHECK(depth.to_value(0.49) == std::round(2.0 + 0.49 * 6.0));
  }

  SUBCASE("boosting defaults carry mode-specific knobs") {
    const auto base = SearchSpace::boosting_default(gbdt::Mode::gbdt);
    const auto dart = SearchSpace::boosting_default(gbdt::Mode::dart);
    const auto goss = SearchSpace::boosting_default(gbdt::Mode::goss);
    const auto has = [](const SearchSpace& s, const std::string& name) {
      return std::any_of(s.params.begin(), s.params.end(),
                         [&](const ParamSpec& p) { return p.name == name; });
    };
    CHECK(has(base, "n_trees"));
    CHECK(has(base, "learning_rate"));
    CHECK_FALSE(has(base, "drop_rate"));
    CHECK(has(dart, "drop_rate"));
    CHECK(has(goss, "top_rate"));
    CHECK(has(goss, "other_rate"));

    std::vector<double> mid(base.params.size());
    for (std::size_t i = 0; i < mid.size(); ++i) {
      mid[i] = base.params[i].to_value(0.5);
    }
    const auto cfg = config_from_point(base, mid);
    CHECK(cfg.n_trees >= 50);
    CHECK(cfg.learning_rate > 0.0);
    CHECK(cfg.max_depth >= 2);
  }

  SUBCASE("point length mismatch rejected") {
    const auto space = SearchSpace::boosting_default(gbdt::Mode::gbdt);
    CHECK_THROWS_AS(config_from_point(space, {0.1}), UsageError);
  }
}

TEST_CASE("bayesian optimization") {
  SUBCASE("finds the minimum of a smooth bowl") {
    SearchSpace space;
    space.params = {{"a", -2.0, 2.0, false, false}, {"b", -2.0, 2.0, false, false}};
    const auto fn = [](const std::vector<double>& p) {
      return (p[0] - 0.7) * (p[0] - 0.7) + (p[1] + 0.3) * (p[1] + 0.3);
    };
    const auto res = bayes_optimize(space, fn, 50, 9);
    CHECK(res.best_objective < 0.02);
    CHECK(std::abs(res.best_point[0] - 0.7) < 0.15);
    CHECK(std::abs(res.best_point[1] + 0.3) < 0.15);
  }

  SUBCASE("history bookkeeping") {
    SearchSpace space;
    space.params = {{"a", 0.0, 1.0, false, false}};
    const auto fn = [](const std::vector<double>& p) { return p[0]; };
    const auto res = bayes_optimize(space, fn, 30, 3);
    CHECK(res.history.size() == 30);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& obs : res.history) {
      REQUIRE(obs.point.size() == 1);
      CHECK(obs.point[0] >= 0.0);
      CHECK(obs.point[0] <= 1.0);
      if (obs.ok) best = std::min(best, obs.objective);
    }
    CHECK(res.best_objective == best);
    CHECK(res.best_objective < 0.05);
  }

  SUBCASE("deterministic per seed") {
    SearchSpace space;
    space.params = {{"a", 0.0, 1.0, false, false}};
    const auto fn = [](const std::vector<double>& p) { return std::sin(13.0 * p[0]); };
    const auto a = bayes_optimize(space, fn, 25, 5);
    const auto b = bayes_optimize(space, fn, 25, 5);
    CHECK(a.best_objective == b.best_objective);
    CHECK(a.best_point == b.best_point);
    for (std::size_t i = 0; i < a.history.size(); ++i) {
      CHECK(a.history[i].point == b.history[i].point);
    }
  }

  SUBCASE("budget at or below the initial design still works") {
    SearchSpace space;
    space.params = {{"a", 0.0, 1.0, false, false}};
    const auto fn = [](const std::vector<double>& p) { return p[0] * p[0]; };
    const auto res = bayes_optimize(space, fn, 5, 1);
    CHECK(res.history.size() == 5);
    CHECK(std::isfinite(res.best_objective));
  }

  SUBCASE("failed evaluations are recorded and skipped") {
    SearchSpace space;
    space.params = {{"a", 0.0, 1.0, false, false}};
    int calls = 0;
    const auto fn = [&](const std::vector<double>& p) {
      ++calls;
      if (p[0] > 0.5) return std::numeric_limits<double>::quiet_NaN();
      return p[0];
    };
    const auto res = bayes_optimize(space, fn, 30, 2);
    CHECK(calls == 30);
    bool any_failed = false;
    for (const auto& obs : res.history) {
      if (!obs.ok) any_failed = true;
      if (obs.ok) CHECK(std::isfinite(obs.objective));
    }
    CHECK(any_failed);
    CHECK(res.best_point[0] <= 0.5);
  }

  SUBCASE("all evaluations failing is a convergence error") {
    SearchSpace space;
    space.params = {{"a", 0.0, 1.0, false, false}};
    const auto fn = [](const std::vector<double>&) {
      return std::numeric_limits<double>::quiet_NaN();
    };
    CHECK_THROWS_AS(bayes_optimize(space, fn, 10, 1), ConvergenceError);
  }

  SUBCASE("nonpositive budget rejected") {
    SearchSpace space;
    space.params = {{"a", 0.0, 1.0, false, false}};
    CHECK_THROWS_AS(bayes_optimize(space, [](const std::vector<double>&) { return 0.0; }, 0, 1),
                    UsageError);
  }
}
