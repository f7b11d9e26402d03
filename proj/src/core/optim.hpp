#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

namespace mpap {

struct NelderMeadResult {
  std::vector<double> x;
  double f = std::numeric_limits<double>::infinity();
  int evals = 0;
};

// Standard Nelder-Mead simplex minimizer (reflection 1, expansion 2,
// contraction 0.5, shrink 0.5). Objective may return +inf for infeasible
// points.
inline NelderMeadResult nelder_mead(const std::function<double(const std::vector<double>&)>& fn,
                                    const std::vector<double>& x0, double init_step,
                                    double xtol, double ftol_rel, int max_iter) {
  const std::size_t n = x0.size();
  NelderMeadResult result;

  std::vector<std::vector<double>> simplex(n + 1, x0);
  std::vector<double> fvals(n + 1);
  for (std::size_t i = 1; i <= n; ++i) simplex[i][i - 1] += init_step;
  for (std::size_t i = 0; i <= n; ++i) {
    fvals[i] = fn(simplex[i]);
    ++result.evals;
  }

  auto order = [&] {
    std::vector<std::size_t> idx(n + 1);
    for (std::size_t i = 0; i <= n; ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      if (fvals[a] != fvals[b]) return fvals[a] < fvals[b];
      return a < b;  // deterministic tie-break
    });
    std::vector<std::vector<double>> s2;
    std::vector<double> f2;
    for (const auto i : idx) {
      s2.push_back(simplex[i]);
      f2.push_back(fvals[i]);
    }
    simplex.swap(s2);
    fvals.swap(f2);
  };

  for (int iter = 0; iter < max_iter; ++iter) {
    order();

    // convergence: simplex extent in x and f
    double xspread = 0.0;
    for (std::size_t i = 1; i <= n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        xspread = std::max(xspread, std::abs(simplex[i][j] - simplex[0][j]));
      }
    }
    const double fspread = fvals[n] - fvals[0];
    if (xspread <= xtol) break;
    if (std::isfinite(fvals[0]) && fspread <= ftol_rel * (std::abs(fvals[0]) + 1e-300)) break;

    std::vector<double> centroid(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) centroid[j] += simplex[i][j];
    }
    for (auto& c : centroid) c /= static_cast<double>(n);

    auto blend = [&](double coef) {
      std::vector<double> x(n);
      for (std::size_t j = 0; j < n; ++j) {
        x[j] = centroid[j] + coef * (simplex[n][j] - centroid[j]);
      }
      return x;
    };

    const auto xr = blend(-1.0);
    const double fr = fn(xr);
    ++result.evals;

    if (fr < fvals[0]) {
      const auto xe = blend(-2.0);
      const double fe = fn(xe);
      ++result.evals;
      if (fe < fr) {
        simplex[n] = xe;
        fvals[n] = fe;
      } else {
        simplex[n] = xr;
        fvals[n] = fr;
      }
    } else if (fr < fvals[n - 1]) {
      simplex[n] = xr;
      fvals[n] = fr;
    } else {
      const bool outside = fr < fvals[n];
      const auto xc = blend(outside ? -0.5 : 0.5);
      const double fc = fn(xc);
      ++result.evals;
      if (fc < std::min(fr, fvals[n])) {
        simplex[n] = xc;
        fvals[n] = fc;
      } else {
        for (std::size_t i = 1; i <= n; ++i) {
          for (std::size_t j = 0; j < n; ++j) {
            simplex[i][j] = simplex[0][j] + 0.5 * (simplex[i][j] - simplex[0][j]);
          }
          fvals[i] = fn(simplex[i]);
          ++result.evals;
        }
      }
    }
  }

  order();
  result.x = simplex[0];
  result.f = fvals[0];
  return result;
}

}  // namespace mpap
