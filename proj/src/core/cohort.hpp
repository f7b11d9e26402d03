#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "matrix.hpp"
#include "waveform.hpp"

namespace mpap::cohort {

enum class Group { demographics, physics, mri };
enum class Kind { numeric, categorical };

Group group_from_string(const std::string& s);
std::string to_string(Group g);

// One predictor column: name, grouping for the ablation, and the published
// per-class summary statistics (index 0 = no PH, 1 = PH) used by the
// synthetic generator. lo/hi clamp generated values to physical ranges.
struct FeatureSpec {
  std::string name;
  Group group;
  Kind kind;
  std::string units;
  double lo;
  double hi;
  double mean[2];
  double sd[2];
};

// The 47 canonical predictors: 4 demographics, 5 physics (0D/1D), 38 MRI.
const std::vector<FeatureSpec>& feature_table();
std::vector<std::size_t> group_columns(Group g);
std::size_t feature_index(const std::string& name);

constexpr double kDefaultPhThreshold = 25.0;  // mmHg

struct PatientRecord {
  std::vector<std::optional<double>> values;  // aligned with feature_table()
  double mpap = 0.0;
  bool ph_label = false;  // mpap >= threshold
};

struct Cohort {
  std::vector<PatientRecord> records;
  double ph_threshold = kDefaultPhThreshold;
  std::string provenance;

  std::size_t size() const { return records.size(); }
  std::size_t positives() const;
};

enum class ImputeStrategy { linear_by_row_order, mean };

Cohort load_cohort(const std::string& path, double ph_threshold = kDefaultPhThreshold);
void save_cohort(const std::string& path, const Cohort& cohort);

// Fill missing cells per feature; `linear_by_row_order` interpolates between
// the nearest non-missing neighbours in record order, with nearest-value
// extrapolation at the edges.
Cohort impute(const Cohort& cohort, ImputeStrategy strategy = ImputeStrategy::linear_by_row_order);

struct EncodedCohort {
  Matrix matrix;  // n x 47, canonical column order
  std::vector<std::string> column_names;
  std::vector<double> mpap;
  std::vector<int> ph_labels;
};

EncodedCohort encode(const Cohort& cohort);

struct Scaler {
  std::vector<double> mean;
  std::vector<double> scale;  // 0 for constant columns -> mapped to zeros
};

Scaler standardize_fit(const Matrix& m);
Matrix standardize_apply(const Scaler& s, const Matrix& m);

struct FeatureSelection {
  Matrix matrix;
  std::vector<std::size_t> columns;  // indices into the full 47
};

FeatureSelection select_feature_set(const Matrix& full, const std::set<Group>& groups);

// Two-sided p-value for the null "univariate OLS slope of mpap on the
// feature is zero" (t statistic, n-2 dof).
double univariate_pvalue(const std::vector<double>& feature, const std::vector<double>& mpap);

struct SynthConfig {
  std::size_t n_patients = 352;
  double positive_fraction = 286.0 / 352.0;
  double ph_threshold = kDefaultPhThreshold;
  std::uint64_t seed = 42;

  // waveforms
  std::size_t n_samples = 256;
  double period = 1.0;              // s
  double systole_fraction = 0.35;
  double mean_flow = 8.0e-5;        // m^3/s
  double flow_cv = 0.1;
  double reflection_delay_fraction = 0.15;
  TubeLaw law;

  // ground-truth physics draws (dispersion tempered vs the published stds so
  // mPAP stays learnable at desk scale)
  double rd_cv = 0.25;
  double rc_cv = 0.30;
  double c_cv = 0.40;
  double c_mean_ph = 2.5e-9;  // the published PH compliance mean is a fit outlier

  double mpap_noise_sd = 3.0;  // mmHg
  double missing_rate = 0.02;  // demographics/MRI cells dropped at random

  // per-feature per-group mean/std table; defaults to feature_table()
  std::vector<FeatureSpec> feature_stats;

  SynthConfig();
  void validate() const;
};

struct SynthResult {
  Cohort cohort;                       // physics feature cells left missing
  std::vector<WaveformPair> waveforms; // one per record
  std::vector<double> true_rtot;
  std::vector<double> true_rc;
  std::vector<double> true_rd;
  std::vector<double> true_c;
  std::vector<double> true_wb_wtot;
};

SynthResult synth_cohort(const SynthConfig& config);

}  // namespace mpap::cohort
