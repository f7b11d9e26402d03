#include "cohort.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>

#include "csv.hpp"
#include "error.hpp"
#include "hemo.hpp"
#include "rng.hpp"

namespace mpap::cohort {

Group group_from_string(const std::string& s) {
  if (s == "demographics") return Group::demographics;
  if (s == "physics") return Group::physics;
  if (s == "mri") return Group::mri;
  throw UsageError("unknown feature group: " + s);
}

std::string to_string(Group g) {
  switch (g) {
    case Group::demographics: return "demographics";
    case Group::physics: return "physics";
    case Group::mri: return "mri";
  }
  return "mri";
}

// Published cohort means/stds per class (index 0 = no PH, 1 = PH); the
// gender "mean" is the male fraction.
const std::vector<FeatureSpec>& feature_table() {
  static const std::vector<FeatureSpec> table = {
      // demographics
      {"age", Group::demographics, Kind::numeric, "years", 18, 95, {56.61, 61.69}, {13.78, 14.24}},
      {"gender", Group::demographics, Kind::categorical, "female/male", 0, 1,
       {23.0 / 66.0, 113.0 / 286.0}, {0, 0}},
      {"who", Group::demographics, Kind::numeric, "no.", 1, 4, {2.52, 3.04}, {0.54, 0.44}},
      {"bsa", Group::demographics, Kind::numeric, "m2", 1.0, 2.8, {1.88, 1.82}, {0.25, 0.22}},
      // 0D and 1D models
      {"rd", Group::physics, Kind::numeric, "kg/m4s", 1e5, 1e10, {6.08e7, 1.46e8}, {4.94e7, 2.53e8}},
      {"rc", Group::physics, Kind::numeric, "kg/m4s", 1e4, 1e10, {7.94e6, 9.17e6}, {7.80e6, 1.87e7}},
      {"c", Group::physics, Kind::numeric, "m4s2/kg", 1e-12, 1e-3, {9.92e-9, 3.94e-4}, {6.71e-9, 6.65e-3}},
      {"rtot", Group::physics, Kind::numeric, "kg/m4s", 1e5, 1e10, {6.83e7, 1.56e8}, {5.38e7, 2.62e8}},
      {"wb_wtot", Group::physics, Kind::numeric, "", 0, 1, {0.24, 0.39}, {0.10, 0.11}},
      // MRI
      {"rac_fiesta", Group::mri, Kind::numeric, "%", 0, 100, {26.39, 13.68}, {15.43, 8.93}},
      {"syst_area_fiesta", Group::mri, Kind::numeric, "cm2", 0.5, 30, {7.62, 9.78}, {2.17, 2.78}},
      {"diast_area_fiesta", Group::mri, Kind::numeric, "cm2", 0.5, 30, {6.08, 8.66}, {1.71, 2.57}},
      {"rvedv", Group::mri, Kind::numeric, "mL", 10, 500, {118.93, 159.58}, {36.00, 58.27}},
      {"rvedv_index", Group::mri, Kind::numeric, "mL/m2", 5, 300, {53.78, 73.92}, {21.83, 39.39}},
      {"rvesv", Group::mri, Kind::numeric, "mL", 5, 400, {55.41, 102.48}, {20.68, 49.92}},
      {"rvesv_index", Group::mri, Kind::numeric, "mL/m2", 2, 250, {24.64, 47.63}, {10.84, 30.19}},
      {"rvef", Group::mri, Kind::numeric, "%", 5, 90, {53.32, 38.05}, {9.86, 13.59}},
      {"rvsv", Group::mri, Kind::numeric, "mL", 5, 300, {63.52, 57.15}, {22.61, 23.39}},
      {"rvsv_index", Group::mri, Kind::numeric, "mL/m2", 2, 150, {29.14, 26.32}, {13.90, 15.02}},
      {"lvedv", Group::mri, Kind::numeric, "mL", 10, 400, {116.57, 91.30}, {33.09, 27.33}},
      {"lvedv_index", Group::mri, Kind::numeric, "mL/m2", 5, 250, {53.16, 41.25}, {21.90, 19.20}},
      {"lvesv", Group::mri, Kind::numeric, "mL", 2, 300, {34.27, 31.32}, {15.66, 14.56}},
      {"lvesv_index", Group::mri, Kind::numeric, "mL/m2", 1, 150, {16.85, 14.01}, {16.81, 8.18}},
      {"lvef", Group::mri, Kind::numeric, "%", 5, 95, {71.13, 65.81}, {8.54, 10.92}},
      {"lvsv", Group::mri, Kind::numeric, "mL", 5, 300, {82.30, 59.97}, {23.30, 19.93}},
      {"lvsv_index", Group::mri, Kind::numeric, "mL/m2", 2, 150, {38.07, 27.20}, {16.20, 13.51}},
      {"rv_dia_mass", Group::mri, Kind::numeric, "g", 5, 300, {22.62, 44.48}, {6.80, 25.47}},
      {"lv_dia_mass", Group::mri, Kind::numeric, "g", 10, 400, {91.47, 90.64}, {27.71, 24.98}},
      {"lv_syst_mass", Group::mri, Kind::numeric, "g", 10, 400, {111.74, 99.83}, {32.17, 26.39}},
      {"rv_mass_index", Group::mri, Kind::numeric, "g/m2", 1, 150, {10.44, 20.94}, {4.94, 15.09}},
      {"lv_mass_index", Group::mri, Kind::numeric, "g/m2", 5, 200, {40.90, 39.84}, {17.87, 18.99}},
      {"sept_angle_syst", Group::mri, Kind::numeric, "degrees", 90, 270, {139.95, 172.51}, {11.68, 22.11}},
      {"sept_angle_diast", Group::mri, Kind::numeric, "degrees", 90, 270, {134.21, 145.01}, {8.28, 11.93}},
      {"4ch_la_area", Group::mri, Kind::numeric, "mm2", 200, 6000, {1921.95, 1785.95}, {387.56, 556.53}},
      {"4ch_la_length", Group::mri, Kind::numeric, "mm", 10, 150, {55.76, 55.62}, {7.86, 8.60}},
      {"2ch_la_area", Group::mri, Kind::numeric, "mm2", 200, 6000, {1764.62, 1901.67}, {496.75, 545.35}},
      {"2ch_la_length", Group::mri, Kind::numeric, "mm", 10, 150, {48.66, 52.12}, {9.08, 9.33}},
      {"la_volume", Group::mri, Kind::numeric, "mL", 5, 300, {55.22, 54.16}, {17.96, 25.36}},
      {"la_volume_index", Group::mri, Kind::numeric, "mL/m2", 2, 150, {24.95, 23.24}, {10.14, 10.45}},
      {"ao_qflowpos", Group::mri, Kind::numeric, "L/min", 0.5, 15, {6.09, 5.29}, {1.50, 1.50}},
      {"ao_qfp_ind", Group::mri, Kind::numeric, "L/min/m2", 0.2, 8, {2.79, 2.44}, {1.18, 1.15}},
      {"pa_qflowpos", Group::mri, Kind::numeric, "L/min", 0.5, 15, {5.50, 5.00}, {1.84, 1.97}},
      {"pa_qflowneg", Group::mri, Kind::numeric, "L/min", 0, 8, {0.62, 1.07}, {0.59, 0.83}},
      {"pa_qfn_ind", Group::mri, Kind::numeric, "L/min/m2", 0, 60, {9.70, 17.49}, {7.19, 9.85}},
      {"systolic_area_pc", Group::mri, Kind::numeric, "mm2", 100, 3000, {731.05, 950.17}, {236.42, 268.98}},
      {"diastolic_area_pc", Group::mri, Kind::numeric, "mm2", 100, 3000, {619.82, 866.42}, {162.71, 244.57}},
      {"rac_pc", Group::mri, Kind::numeric, "%", 0, 100, {17.02, 10.01}, {13.70, 8.14}},
  };
  return table;
}

// mPAP per-class mean/std (mmHg); calibration targets for the generator.
static constexpr double kMpapMean[2] = {19.67, 46.95};

std::vector<std::size_t> group_columns(Group g) {
  std::vector<std::size_t> cols;
  const auto& table = feature_table();
  for (std::size_t i = 0; i < table.size(); ++i) {
    if (table[i].group == g) cols.push_back(i);
  }
  return cols;
}

std::size_t feature_index(const std::string& name) {
  const auto& table = feature_table();
  for (std::size_t i = 0; i < table.size(); ++i) {
    if (table[i].name == name) return i;
  }
  throw UsageError("unknown feature: " + name);
}

std::size_t Cohort::positives() const {
  std::size_t n = 0;
  for (const auto& r : records) n += r.ph_label;
  return n;
}

static double parse_cell(const std::string& s, std::size_t row, const std::string& col) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw DataError("non-numeric cell at row " + std::to_string(row) + ", column " + col + ": '" +
                    s + "'");
  }
  return v;
}

Cohort load_cohort(const std::string& path, double ph_threshold) {
  const auto table = csv::read_file(path);
  const auto& spec = feature_table();

  std::vector<long> col_of_feature(spec.size(), -1);
  long mpap_col = -1;
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    const auto& name = table.header[c];
    if (name == "mpap") {
      if (mpap_col >= 0) throw DataError(path + ": duplicate column mpap");
      mpap_col = static_cast<long>(c);
      continue;
    }
    const auto it = std::find_if(spec.begin(), spec.end(),
                                 [&](const FeatureSpec& f) { return f.name == name; });
    if (it == spec.end()) throw DataError(path + ": unknown column " + name);
    const auto idx = static_cast<std::size_t>(it - spec.begin());
    if (col_of_feature[idx] >= 0) throw DataError(path + ": duplicate column " + name);
    col_of_feature[idx] = static_cast<long>(c);
  }
  if (mpap_col < 0) throw DataError(path + ": missing mpap column");
  for (std::size_t i = 0; i < spec.size(); ++i) {
    if (col_of_feature[i] < 0) throw DataError(path + ": missing column " + spec[i].name);
  }
  if (table.rows.empty()) throw DataError(path + ": no records");

  Cohort cohort;
  cohort.ph_threshold = ph_threshold;
  cohort.provenance = "file:" + path;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    PatientRecord rec;
    rec.values.resize(spec.size());
    for (std::size_t i = 0; i < spec.size(); ++i) {
      const auto& cell = row[static_cast<std::size_t>(col_of_feature[i])];
      if (cell.empty()) continue;
      if (spec[i].name == "gender") {
        if (cell == "female") {
          rec.values[i] = 0.0;
        } else if (cell == "male") {
          rec.values[i] = 1.0;
        } else {
          rec.values[i] = parse_cell(cell, r, "gender");
        }
      } else {
        rec.values[i] = parse_cell(cell, r, spec[i].name);
      }
    }
    const auto& mpap_cell = row[static_cast<std::size_t>(mpap_col)];
    if (mpap_cell.empty()) throw DataError(path + ": missing mpap at row " + std::to_string(r));
    rec.mpap = parse_cell(mpap_cell, r, "mpap");
    rec.ph_label = rec.mpap >= ph_threshold;
    cohort.records.push_back(std::move(rec));
  }
  return cohort;
}

void save_cohort(const std::string& path, const Cohort& cohort) {
  const auto& spec = feature_table();
  csv::Table table;
  for (const auto& f : spec) table.header.push_back(f.name);
  table.header.push_back("mpap");
  for (const auto& rec : cohort.records) {
    std::vector<std::string> row;
    for (std::size_t i = 0; i < spec.size(); ++i) {
      if (!rec.values[i]) {
        row.emplace_back();
      } else if (spec[i].name == "gender" && (*rec.values[i] == 0.0 || *rec.values[i] == 1.0)) {
        row.emplace_back(*rec.values[i] == 0.0 ? "female" : "male");
      } else {
        row.push_back(format_double(*rec.values[i]));
      }
    }
    row.push_back(format_double(rec.mpap));
    table.rows.push_back(std::move(row));
  }
  csv::write_file(path, table);
}

Cohort impute(const Cohort& cohort, ImputeStrategy strategy) {
  if (cohort.records.empty()) throw DataError("impute on empty cohort");
  const std::size_t n = cohort.records.size();
  const std::size_t nf = feature_table().size();
  Cohort out = cohort;

  for (std::size_t f = 0; f < nf; ++f) {
    std::vector<std::size_t> known;
    for (std::size_t r = 0; r < n; ++r) {
      if (cohort.records[r].values[f]) known.push_back(r);
    }
    if (known.empty()) {
      throw DataError("feature entirely missing: " + feature_table()[f].name);
    }
    if (known.size() == n) continue;

    if (strategy == ImputeStrategy::mean) {
      double sum = 0.0;
      for (const auto r : known) sum += *cohort.records[r].values[f];
      const double mean = sum / static_cast<double>(known.size());
      for (std::size_t r = 0; r < n; ++r) {
        if (!out.records[r].values[f]) out.records[r].values[f] = mean;
      }
      continue;
    }

    // linear interpolation along record order, nearest value at the edges
    for (std::size_t r = 0; r < n; ++r) {
      if (out.records[r].values[f]) continue;
      const auto next = std::lower_bound(known.begin(), known.end(), r);
      if (next == known.begin()) {
        out.records[r].values[f] = *cohort.records[known.front()].values[f];
      } else if (next == known.end()) {
        out.records[r].values[f] = *cohort.records[known.back()].values[f];
      } else {
        const std::size_t hi = *next;
        const std::size_t lo = *(next - 1);
        const double vlo = *cohort.records[lo].values[f];
        const double vhi = *cohort.records[hi].values[f];
        const double t = static_cast<double>(r - lo) / static_cast<double>(hi - lo);
        out.records[r].values[f] = vlo + t * (vhi - vlo);
      }
    }
  }
  return out;
}

EncodedCohort encode(const Cohort& cohort) {
  if (cohort.records.empty()) throw DataError("encode on empty cohort");
  const auto& spec = feature_table();
  EncodedCohort out;
  out.matrix = Matrix(cohort.size(), spec.size());
  for (const auto& f : spec) out.column_names.push_back(f.name);

  for (std::size_t r = 0; r < cohort.size(); ++r) {
    const auto& rec = cohort.records[r];
    for (std::size_t c = 0; c < spec.size(); ++c) {
      if (!rec.values[c]) {
        throw DataError("encode requires an imputed cohort (missing " + spec[c].name + " at row " +
                        std::to_string(r) + ")");
      }
      const double v = *rec.values[c];
      if (spec[c].name == "gender" && (v < 0.0 || v > 1.0)) {
        throw DataError("unseen gender category at row " + std::to_string(r));
      }
      out.matrix.at(r, c) = v;
    }
    out.mpap.push_back(rec.mpap);
    out.ph_labels.push_back(rec.ph_label ? 1 : 0);
  }
  return out;
}

Scaler standardize_fit(const Matrix& m) {
  if (m.rows == 0) throw DataError("standardize_fit on empty matrix");
  Scaler s;
  s.mean.resize(m.cols);
  s.scale.resize(m.cols);
  const double n = static_cast<double>(m.rows);
  for (std::size_t c = 0; c < m.cols; ++c) {
    double sum = 0.0;
    for (std::size_t r = 0; r < m.rows; ++r) sum += m.at(r, c);
    const double mean = sum / n;
    double var = 0.0;
    for (std::size_t r = 0; r < m.rows; ++r) {
      const double d = m.at(r, c) - mean;
      var += d * d;
    }
    var /= n;
    const double sd = std::sqrt(var);
    s.mean[c] = mean;
    s.scale[c] = sd > 1e-12 * std::max(1.0, std::abs(mean)) ? sd : 0.0;
  }
  return s;
}

Matrix standardize_apply(const Scaler& s, const Matrix& m) {
  if (m.cols != s.mean.size()) throw DataError("scaler width mismatch");
  Matrix out(m.rows, m.cols);
  for (std::size_t r = 0; r < m.rows; ++r) {
    for (std::size_t c = 0; c < m.cols; ++c) {
      out.at(r, c) = s.scale[c] > 0.0 ? (m.at(r, c) - s.mean[c]) / s.scale[c] : 0.0;
    }
  }
  return out;
}

FeatureSelection select_feature_set(const Matrix& full, const std::set<Group>& groups) {
  if (groups.empty()) throw UsageError("feature selection needs at least one group");
  if (full.cols != feature_table().size()) throw DataError("feature selection expects the full matrix");
  FeatureSelection sel;
  for (const Group g : {Group::demographics, Group::physics, Group::mri}) {
    if (!groups.count(g)) continue;
    for (const auto c : group_columns(g)) sel.columns.push_back(c);
  }
  std::sort(sel.columns.begin(), sel.columns.end());  // canonical order
  sel.matrix = full.select_cols(sel.columns);
  return sel;
}

double univariate_pvalue(const std::vector<double>& feature, const std::vector<double>& mpap) {
  if (feature.size() != mpap.size()) throw DataError("p-value input length mismatch");
  const std::size_t n = feature.size();
  if (n < 3) throw DataError("p-value needs n >= 3");

  const double nd = static_cast<double>(n);
  const double mx = std::accumulate(feature.begin(), feature.end(), 0.0) / nd;
  const double my = std::accumulate(mpap.begin(), mpap.end(), 0.0) / nd;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = feature[i] - mx;
    const double dy = mpap[i] - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (sxx == 0.0) throw DataError("p-value undefined for a constant feature");

  const double slope = sxy / sxx;
  const double sse = std::max(0.0, syy - slope * sxy);
  const double dof = nd - 2.0;
  if (sse == 0.0) return slope == 0.0 ? 1.0 : 0.0;
  const double se = std::sqrt(sse / dof / sxx);
  const double t = slope / se;
  const boost::math::students_t dist(dof);
  return 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
}

// --- synthetic cohort ---------------------------------------------------

SynthConfig::SynthConfig() : feature_stats(feature_table()) {}

void SynthConfig::validate() const {
  if (n_patients == 0) throw UsageError("synth: n_patients must be positive");
  if (!(positive_fraction > 0.0) || !(positive_fraction < 1.0)) {
    throw UsageError("synth: positive_fraction must be in (0,1)");
  }
  if (n_samples < 16) throw UsageError("synth: n_samples must be >= 16");
  if (!(period > 0.0)) throw UsageError("synth: period must be positive");
  if (!(systole_fraction > 0.0) || systole_fraction >= 1.0) {
    throw UsageError("synth: systole_fraction must be in (0,1)");
  }
  if (!(mean_flow > 0.0)) throw UsageError("synth: mean_flow must be positive");
  if (mpap_noise_sd < 0.0 || flow_cv < 0.0 || rd_cv < 0.0 || rc_cv < 0.0 || c_cv < 0.0) {
    throw UsageError("synth: dispersions must be >= 0");
  }
  if (missing_rate < 0.0 || missing_rate >= 1.0) throw UsageError("synth: missing_rate in [0,1)");
  if (feature_stats.size() != feature_table().size()) {
    throw UsageError("synth: feature_stats must cover all 47 predictors");
  }
  for (const auto& f : feature_stats) {
    if (f.sd[0] < 0.0 || f.sd[1] < 0.0) throw UsageError("synth: negative std for " + f.name);
  }
  law.validate();
}

namespace {

constexpr double kPaPerMmHg = 133.322;

// lognormal with a given arithmetic mean and coefficient of variation
double draw_lognormal(Rng& rng, double mean, double cv) {
  const double s2 = std::log(1.0 + cv * cv);
  const double mu = std::log(mean) - 0.5 * s2;
  return std::exp(mu + std::sqrt(s2) * rng.normal());
}

}  // namespace

SynthResult synth_cohort(const SynthConfig& config) {
  config.validate();
  const auto& spec = config.feature_stats;
  const std::size_t nf = spec.size();

  const std::size_t idx_rd = feature_index("rd");
  const std::size_t idx_rc = feature_index("rc");
  const std::size_t idx_wb = feature_index("wb_wtot");
  const std::size_t idx_paq = feature_index("pa_qflowpos");

  // calibrate mpap = alpha * Rtot*meanQ/kPa + beta * wb so class means land on
  // the published mPAP means
  double x[2], w[2];
  for (int g = 0; g < 2; ++g) {
    x[g] = (spec[idx_rc].mean[g] + spec[idx_rd].mean[g]) * config.mean_flow / kPaPerMmHg;
    w[g] = spec[idx_wb].mean[g];
  }
  double alpha, beta;
  const double det = x[0] * w[1] - x[1] * w[0];
  if (std::abs(det) > 1e-9 * std::abs(x[0] * w[1])) {
    alpha = (kMpapMean[0] * w[1] - kMpapMean[1] * w[0]) / det;
    beta = (x[0] * kMpapMean[1] - x[1] * kMpapMean[0]) / det;
  } else {
    alpha = (kMpapMean[1] - kMpapMean[0]) / (x[1] - x[0]);
    beta = 0.0;
  }

  const std::size_t n_samples = config.n_samples;
  const double dt = config.period / static_cast<double>(n_samples);
  const double systole = config.systole_fraction * config.period;

  // base flow shape, mean 1
  std::vector<double> shape(n_samples);
  double shape_mean = 0.0;
  for (std::size_t k = 0; k < n_samples; ++k) {
    const double t = static_cast<double>(k) * dt;
    const double pulse = t < systole ? std::sin(3.14159265358979323846 * t / systole) : 0.0;
    shape[k] = 0.1 + pulse * pulse;
    shape_mean += shape[k];
  }
  shape_mean /= static_cast<double>(n_samples);
  for (auto& s : shape) s /= shape_mean;

  const auto shift = static_cast<std::size_t>(
      std::lround(config.reflection_delay_fraction * static_cast<double>(n_samples)));

  Rng rng(derive_seed(config.seed, "cohort.synth"));

  SynthResult result;
  result.cohort.ph_threshold = config.ph_threshold;
  result.cohort.provenance = "synthetic:seed=" + std::to_string(config.seed);

  for (std::size_t p = 0; p < config.n_patients; ++p) {
    const int g = rng.bernoulli(config.positive_fraction) ? 1 : 0;

    PatientRecord rec;
    rec.values.resize(nf);
    for (std::size_t f = 0; f < nf; ++f) {
      if (spec[f].group == Group::physics) continue;  // recomputed from waveforms
      double v;
      if (spec[f].kind == Kind::categorical) {
        v = rng.bernoulli(spec[f].mean[g]) ? 1.0 : 0.0;
      } else {
        v = std::clamp(rng.normal(spec[f].mean[g], spec[f].sd[g]), spec[f].lo, spec[f].hi);
      }
      rec.values[f] = v;
    }

    // ground-truth hemodynamics
    const double q = draw_lognormal(rng, config.mean_flow, config.flow_cv);
    const double rd = draw_lognormal(rng, spec[idx_rd].mean[g], config.rd_cv);
    const double rc = draw_lognormal(rng, spec[idx_rc].mean[g], config.rc_cv);
    const double c_mean = g == 1 ? config.c_mean_ph : feature_table()[feature_index("c")].mean[0];
    double c = draw_lognormal(rng, c_mean, config.c_cv);
    // keep the decay time constant resolvable at the waveform step
    c = std::clamp(c, 8.0 * dt / rd, 50.0 * config.period / rd);
    const double wb = std::clamp(rng.normal(spec[idx_wb].mean[g], spec[idx_wb].sd[g]), 0.02, 0.8);

    rec.values[idx_paq] = q * 60000.0;  // m^3/s -> L/min, consistent with the flow waveform

    Waveform base_flow;
    base_flow.dt = dt;
    base_flow.quantity = Quantity::flow;
    base_flow.samples.resize(n_samples);
    for (std::size_t k = 0; k < n_samples; ++k) base_flow.samples[k] = q * shape[k];

    const auto truth = hemo::WindkesselParams::make(rc, c, rd);
    const Waveform pwk = hemo::windkessel_periodic_cycle(truth, base_flow);
    const double mean_p = pwk.mean();

    const double a_mean = config.law.area(mean_p);
    const double wave_speed =
        std::sqrt(a_mean / (config.law.rho * config.law.compliance(a_mean)));
    const double zc = config.law.rho * wave_speed / a_mean;

    const double gamma = std::sqrt(wb / (1.0 - wb));
    WaveformPair pair;
    pair.flow.dt = dt;
    pair.flow.quantity = Quantity::flow;
    pair.flow.samples.resize(n_samples);
    pair.area.dt = dt;
    pair.area.quantity = Quantity::area;
    pair.area.samples.resize(n_samples);
    for (std::size_t k = 0; k < n_samples; ++k) {
      const double pf = pwk.samples[k];
      const double pb = gamma * (pwk.samples[(k + n_samples - shift) % n_samples] - mean_p);
      const double p_tot = pf + pb;
      pair.flow.samples[k] = (pf - mean_p) / zc - pb / zc + q;
      pair.area.samples[k] = config.law.area(p_tot);
    }

    double mpap = alpha * truth.Rtot * q / kPaPerMmHg + beta * wb +
                  rng.normal(0.0, config.mpap_noise_sd);
    mpap = std::max(mpap, 5.0);
    rec.mpap = mpap;
    rec.ph_label = mpap >= config.ph_threshold;

    // sprinkle missingness over the measured (non-physics) cells
    if (config.missing_rate > 0.0) {
      for (std::size_t f = 0; f < nf; ++f) {
        if (spec[f].group == Group::physics) continue;
        if (rng.bernoulli(config.missing_rate)) rec.values[f].reset();
      }
    }

    result.cohort.records.push_back(std::move(rec));
    result.waveforms.push_back(std::move(pair));
    result.true_rtot.push_back(truth.Rtot);
    result.true_rc.push_back(rc);
    result.true_rd.push_back(rd);
    result.true_c.push_back(c);
    result.true_wb_wtot.push_back(wb);
  }

  return result;
}

}  // namespace mpap::cohort
