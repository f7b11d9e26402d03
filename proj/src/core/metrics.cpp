#include "metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "error.hpp"

namespace mpap::metrics {

double ConfusionMetrics::f1() const {
  const double denom = static_cast<double>(2 * tp + fp + fn);
  return denom > 0.0 ? 2.0 * static_cast<double>(tp) / denom : 0.0;
}

ThresholdStrategy strategy_from_string(const std::string& s) {
  if (s == "youden") return ThresholdStrategy::youden;
  if (s == "f1") return ThresholdStrategy::f1;
  if (s == "closest01") return ThresholdStrategy::closest01;
  if (s == "concordance") return ThresholdStrategy::concordance;
  throw UsageError("unknown threshold strategy: " + s);
}

std::string to_string(ThresholdStrategy s) {
  switch (s) {
    case ThresholdStrategy::youden: return "youden";
    case ThresholdStrategy::f1: return "f1";
    case ThresholdStrategy::closest01: return "closest01";
    case ThresholdStrategy::concordance: return "concordance";
  }
  return "youden";
}

RegressionMetrics regression_metrics(const std::vector<double>& measured,
                                     const std::vector<double>& predicted) {
  if (measured.empty() || measured.size() != predicted.size()) {
    throw DataError("regression metrics need equal non-empty vectors");
  }
  const auto n = static_cast<double>(measured.size());
  const double mean = std::accumulate(measured.begin(), measured.end(), 0.0) / n;

  double sae = 0.0, sse = 0.0, sst = 0.0;
  for (std::size_t i = 0; i < measured.size(); ++i) {
    const double e = predicted[i] - measured[i];
    sae += std::abs(e);
    sse += e * e;
    sst += (measured[i] - mean) * (measured[i] - mean);
  }
  if (sst == 0.0) throw DataError("r2 undefined: measured values are constant");

  RegressionMetrics m;
  m.mae = sae / n;
  m.mse = sse / n;
  m.rmse = std::sqrt(m.mse);
  m.r2 = 1.0 - sse / sst;
  return m;
}

ConfusionMetrics confusion_from_labels(const std::vector<int>& labels,
                                       const std::vector<int>& predicted) {
  if (labels.size() != predicted.size()) throw DataError("label length mismatch");
  ConfusionMetrics c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i]) {
      predicted[i] ? ++c.tp : ++c.fn;
    } else {
      predicted[i] ? ++c.fp : ++c.tn;
    }
  }
  const double pos = static_cast<double>(c.tp + c.fn);
  const double neg = static_cast<double>(c.tn + c.fp);
  c.sensitivity = pos > 0.0 ? static_cast<double>(c.tp) / pos : 0.0;
  c.specificity = neg > 0.0 ? static_cast<double>(c.tn) / neg : 0.0;
  c.accuracy = labels.empty() ? 0.0 : static_cast<double>(c.tp + c.tn) / static_cast<double>(labels.size());
  return c;
}

ConfusionMetrics confusion_at(const std::vector<double>& measured,
                              const std::vector<double>& predicted, double threshold) {
  if (measured.size() != predicted.size()) throw DataError("confusion_at length mismatch");
  std::vector<int> lab(measured.size()), pred(measured.size());
  for (std::size_t i = 0; i < measured.size(); ++i) {
    lab[i] = measured[i] >= threshold ? 1 : 0;
    pred[i] = predicted[i] >= threshold ? 1 : 0;
  }
  return confusion_from_labels(lab, pred);
}

RocCurve roc_curve(const std::vector<int>& labels, const std::vector<double>& scores) {
  if (labels.size() != scores.size() || labels.empty()) throw DataError("roc_curve length mismatch");
  std::size_t n_pos = 0;
  for (const int l : labels) n_pos += (l != 0);
  const std::size_t n_neg = labels.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) throw DataError("roc_curve needs both classes");

  std::vector<std::size_t> order(labels.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  RocCurve curve;
  curve.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});

  std::size_t tp = 0, fp = 0, i = 0;
  double auc = 0.0;
  while (i < order.size()) {
    const double s = scores[order[i]];
    std::size_t block_tp = 0, block_fp = 0;
    while (i < order.size() && scores[order[i]] == s) {  // tie block collapses into one step
      labels[order[i]] ? ++block_tp : ++block_fp;
      ++i;
    }
    const double tpr0 = static_cast<double>(tp) / static_cast<double>(n_pos);
    const double fpr0 = static_cast<double>(fp) / static_cast<double>(n_neg);
    tp += block_tp;
    fp += block_fp;
    const double tpr1 = static_cast<double>(tp) / static_cast<double>(n_pos);
    const double fpr1 = static_cast<double>(fp) / static_cast<double>(n_neg);
    auc += 0.5 * (tpr0 + tpr1) * (fpr1 - fpr0);
    curve.points.push_back({s, fpr1, tpr1});
  }
  curve.auc = auc;
  return curve;
}

ThresholdChoice select_threshold(const std::vector<int>& labels, const std::vector<double>& scores,
                                 ThresholdStrategy strategy) {
  if (labels.size() != scores.size() || labels.empty()) throw DataError("select_threshold length mismatch");

  std::vector<double> distinct = scores;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());

  std::vector<double> candidates;
  candidates.push_back(-std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i + 1 < distinct.size(); ++i) {
    candidates.push_back(0.5 * (distinct[i] + distinct[i + 1]));
  }
  candidates.push_back(std::numeric_limits<double>::infinity());

  auto objective_of = [strategy](const ConfusionMetrics& c) {
    switch (strategy) {
      case ThresholdStrategy::youden: return c.sensitivity + c.specificity;
      case ThresholdStrategy::f1: return c.f1();
      case ThresholdStrategy::closest01: {
        const double d = std::hypot(1.0 - c.sensitivity, 1.0 - c.specificity);
        return -d;  // maximize negated distance to (0,1)
      }
      case ThresholdStrategy::concordance: return c.sensitivity * c.specificity;
    }
    return 0.0;
  };

  ThresholdChoice best;
  bool have = false;
  std::vector<int> pred(labels.size());
  for (const double thr : candidates) {
    for (std::size_t i = 0; i < scores.size(); ++i) pred[i] = scores[i] >= thr ? 1 : 0;
    const ConfusionMetrics c = confusion_from_labels(labels, pred);
    const double obj = objective_of(c);
    const bool better = !have || obj > best.objective ||
                        (obj == best.objective && c.sensitivity > best.confusion.sensitivity) ||
                        (obj == best.objective && c.sensitivity == best.confusion.sensitivity &&
                         thr < best.threshold);
    if (better) {
      best = {thr, c, obj};
      have = true;
    }
  }
  return best;
}

double paired_error_test(const std::vector<double>& abs_errors_a,
                         const std::vector<double>& abs_errors_b) {
  if (abs_errors_a.size() != abs_errors_b.size()) throw DataError("paired test length mismatch");
  if (abs_errors_a.size() < 6) throw DataError("paired test needs n >= 6");

  std::vector<double> diffs;
  for (std::size_t i = 0; i < abs_errors_a.size(); ++i) {
    const double d = abs_errors_a[i] - abs_errors_b[i];
    if (d != 0.0) diffs.push_back(d);
  }
  if (diffs.empty()) return 1.0;

  const std::size_t n = diffs.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return std::abs(diffs[a]) < std::abs(diffs[b]); });

  // midranks, doubled so tie averages stay integral
  std::vector<long> rank2(n);
  double tie_correction = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && std::abs(diffs[order[j]]) == std::abs(diffs[order[i]])) ++j;
    const long sum2 = static_cast<long>(i + 1 + j) ;  // 2 * average of ranks i+1 .. j
    for (std::size_t k = i; k < j; ++k) rank2[order[k]] = sum2;
    const double t = static_cast<double>(j - i);
    tie_correction += t * t * t - t;
    i = j;
  }

  long w2 = 0;  // 2 * W+
  long total2 = 0;
  for (std::size_t k = 0; k < n; ++k) {
    total2 += rank2[k];
    if (diffs[k] > 0.0) w2 += rank2[k];
  }

  if (n <= 25) {
    // exact: distribution of 2*W+ over all 2^n sign patterns via convolution
    std::vector<double> dist(static_cast<std::size_t>(total2) + 1, 0.0);
    dist[0] = 1.0;
    long reach = 0;
    for (std::size_t k = 0; k < n; ++k) {
      reach += rank2[k];
      for (long s = reach; s >= rank2[k]; --s) {
        dist[static_cast<std::size_t>(s)] += dist[static_cast<std::size_t>(s - rank2[k])];
      }
    }
    const double denom = std::ldexp(1.0, static_cast<int>(n));  // 2^n
    double below = 0.0, above = 0.0;
    for (long s = 0; s <= total2; ++s) {
      const double p = dist[static_cast<std::size_t>(s)];
      if (s <= w2) below += p;
      if (s >= w2) above += p;
    }
    return std::min(1.0, 2.0 * std::min(below, above) / denom);
  }

  const double nd = static_cast<double>(n);
  const double mean = nd * (nd + 1.0) / 4.0;
  const double var = nd * (nd + 1.0) * (2.0 * nd + 1.0) / 24.0 - tie_correction / 48.0;
  if (var <= 0.0) return 1.0;
  const double w = static_cast<double>(w2) / 2.0;
  double z = w - mean;
  z -= 0.5 * (z > 0.0 ? 1.0 : (z < 0.0 ? -1.0 : 0.0));  // continuity correction
  z /= std::sqrt(var);
  return std::min(1.0, std::erfc(std::abs(z) / std::sqrt(2.0)));
}

}  // namespace mpap::metrics
