#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace mpap::metrics {

struct RegressionMetrics {
  double mae = 0.0;
  double rmse = 0.0;
  double mse = 0.0;
  double r2 = 0.0;
};

struct ConfusionMetrics {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  double sensitivity = 0.0;
  double specificity = 0.0;
  double accuracy = 0.0;

  double f1() const;
};

struct RocPoint {
  double threshold;  // predict positive when score >= threshold
  double fpr;
  double tpr;
};

struct RocCurve {
  std::vector<RocPoint> points;  // from (0,0) at +inf down to (1,1)
  double auc = 0.0;
};

enum class ThresholdStrategy { youden, f1, closest01, concordance };
ThresholdStrategy strategy_from_string(const std::string& s);
std::string to_string(ThresholdStrategy s);

RegressionMetrics regression_metrics(const std::vector<double>& measured,
                                     const std::vector<double>& predicted);

// Regression-as-classifier: threshold both vectors at `threshold` mmHg, then
// count.
ConfusionMetrics confusion_at(const std::vector<double>& measured,
                              const std::vector<double>& predicted, double threshold = 25.0);

ConfusionMetrics confusion_from_labels(const std::vector<int>& labels,
                                       const std::vector<int>& predicted);

RocCurve roc_curve(const std::vector<int>& labels, const std::vector<double>& scores);

struct ThresholdChoice {
  double threshold = 0.0;
  ConfusionMetrics confusion;
  double objective = 0.0;
};

// Scans midpoints between consecutive distinct scores plus +/-inf sentinels;
// ties broken toward higher sensitivity, then lower threshold.
ThresholdChoice select_threshold(const std::vector<int>& labels, const std::vector<double>& scores,
                                 ThresholdStrategy strategy);

// Two-sided Wilcoxon signed-rank test on paired per-sample differences;
// exact null distribution for n <= 25 (after dropping zero differences),
// normal approximation with tie correction above.
double paired_error_test(const std::vector<double>& abs_errors_a,
                         const std::vector<double>& abs_errors_b);

}  // namespace mpap::metrics
