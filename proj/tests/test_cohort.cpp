#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <vector>

#include "core/cohort.hpp"
#include "core/error.hpp"
#include "core/hemo.hpp"
#include "core/rng.hpp"

using namespace mpap;
using namespace mpap::cohort;

namespace {

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("mpap_test_" + name);
}

Cohort tiny_cohort() {
  const auto& table = feature_table();
  Cohort c;
  Rng rng(1);
  for (int i = 0; i < 4; ++i) {
    PatientRecord rec;
    rec.values.resize(table.size());
    for (std::size_t f = 0; f < table.size(); ++f) {
      if (table[f].name == "gender") {
        rec.values[f] = static_cast<double>(i % 2);
      } else {
        rec.values[f] = rng.uniform(table[f].lo, std::min(table[f].hi, table[f].lo + 1.0));
      }
    }
    rec.mpap = 15.0 + 10.0 * i;
    rec.ph_label = rec.mpap >= 25.0;
    c.records.push_back(rec);
  }
  return c;
}

// full-width CSV: every feature column present, cells empty unless provided
void write_csv(const std::string& path,
               const std::vector<std::vector<std::pair<std::string, std::string>>>& rows) {
  const auto& table = feature_table();
  std::ofstream out(path);
  for (const auto& f : table) out << f.name << ",";
  out << "mpap\n";
  for (const auto& row : rows) {
    const auto cell = [&](const std::string& name) -> std::string {
      for (const auto& [k, v] : row) {
        if (k == name) return v;
      }
      return "";
    };
    for (const auto& f : table) out << cell(f.name) << ",";
    out << cell("mpap") << "\n";
  }
}

}  // namespace

TEST_CASE("feature table layout") {
  const auto& table = feature_table();
  CHECK(table.size() == 47);

  std::size_t demo = 0, phys = 0, mri = 0;
  std::set<std::string> names;
  for (const auto& f : table) {
    names.insert(f.name);
    if (f.group == Group::demographics) ++demo;
    if (f.group == Group::physics) ++phys;
    if (f.group == Group::mri) ++mri;
    CHECK(f.lo < f.hi);
    for (int cls = 0; cls < 2; ++cls) {
      CHECK(std::isfinite(f.mean[cls]));
      CHECK(f.sd[cls] >= 0.0);
    }
  }
  CHECK(names.size() == 47);  // no duplicate names
  CHECK(demo == 4);
  CHECK(phys == 5);
  CHECK(mri == 38);

  CHECK(group_columns(Group::demographics).size() == 4);
  CHECK(group_columns(Group::physics).size() == 5);
  CHECK(group_columns(Group::mri).size() == 38);

  CHECK(feature_index("age") < 47);
  CHECK(table[feature_index("wb_wtot")].group == Group::physics);
  CHECK_THROWS_AS(feature_index("nope"), UsageError);

  CHECK(group_from_string("physics") == Group::physics);
  CHECK(to_string(Group::mri) == "mri");
  CHECK_THROWS_AS(group_from_string("bogus"), UsageError);
}

TEST_CASE("csv round trip and parse errors") {
  const auto path = temp_file("roundtrip.csv").string();

  SUBCASE("save then load preserves everything") {
    auto original = tiny_cohort();
    original.records[1].values[feature_index("age")] = std::nullopt;
    save_cohort(path, original);
    const auto loaded = load_cohort(path);
    REQUIRE(loaded.size() == original.size());
    for (std::size_t r = 0; r < original.size(); ++r) {
      CHECK(loaded.records[r].mpap == original.records[r].mpap);
      CHECK(loaded.records[r].ph_label == original.records[r].ph_label);
      for (std::size_t f = 0; f < 47; ++f) {
        const auto& a = original.records[r].values[f];
        const auto& b = loaded.records[r].values[f];
        CHECK(a.has_value() == b.has_value());
        if (a && b) CHECK(*a == *b);
      }
    }
    std::remove(path.c_str());
  }

  SUBCASE("missing file names the path") {
    try {
      load_cohort("/nonexistent/cohort.csv");
      FAIL("expected DataError");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("/nonexistent/cohort.csv") != std::string::npos);
    }
  }

  SUBCASE("unknown column rejected") {
    std::ofstream(path) << "age,mystery,mpap\n50,1,20\n";
    CHECK_THROWS_AS(load_cohort(path), DataError);
    std::remove(path.c_str());
  }

  SUBCASE("missing mpap column rejected") {
    std::ofstream(path) << "age,bsa\n50,1.8\n";
    CHECK_THROWS_AS(load_cohort(path), DataError);
    std::remove(path.c_str());
  }

  SUBCASE("bad cell names row and column") {
    write_csv(path, {{{"age", "50"}, {"mpap", "20"}}, {{"age", "fifty"}, {"mpap", "21"}}});
    try {
      load_cohort(path);
      FAIL("expected DataError");
    } catch (const DataError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("age") != std::string::npos);
    }
    std::remove(path.c_str());
  }

  SUBCASE("gender accepts words and numbers") {
    write_csv(path, {{{"gender", "female"}, {"mpap", "20"}},
                     {{"gender", "male"}, {"mpap", "30"}},
                     {{"gender", "1"}, {"mpap", "40"}}});
    const auto c = load_cohort(path);
    CHECK(c.records[0].values[feature_index("gender")].value() == 0.0);
    CHECK(c.records[1].values[feature_index("gender")].value() == 1.0);
    CHECK(c.records[2].values[feature_index("gender")].value() == 1.0);
    CHECK(c.positives() == 2);
    std::remove(path.c_str());
  }
}

TEST_CASE("imputation") {
  const auto make = [](const std::vector<std::optional<double>>& age_col) {
    Cohort c;
    const std::size_t age = feature_index("age");
    for (const auto& v : age_col) {
      PatientRecord rec;
      rec.values.assign(47, 1.0);  // every other feature fully observed
      rec.values[age] = v;
      rec.mpap = 20.0;
      c.records.push_back(rec);
    }
    return c;
  };
  const std::size_t age = feature_index("age");
  const auto m = std::nullopt;

  SUBCASE("interior gap is linearly interpolated") {
    const auto out = impute(make({1.0, m, 3.0}));
    CHECK(out.records[1].values[age].value() == doctest::Approx(2.0));
  }

  SUBCASE("leading gap copies the first known value") {
    const auto out = impute(make({m, 5.0, 5.0}));
    CHECK(out.records[0].values[age].value() == doctest::Approx(5.0));
  }

  SUBCASE("double interior gap spaces evenly") {
    const auto out = impute(make({2.0, m, m, 8.0}));
    CHECK(out.records[1].values[age].value() == doctest::Approx(4.0));
    CHECK(out.records[2].values[age].value() == doctest::Approx(6.0));
  }

  SUBCASE("mean strategy uses the column mean") {
    const auto out = impute(make({1.0, m, 4.0}), ImputeStrategy::mean);
    CHECK(out.records[1].values[age].value() == doctest::Approx(2.5));
  }

  SUBCASE("known cells never change") {
    const auto out = impute(make({1.0, m, 3.0}));
    CHECK(out.records[0].values[age].value() == 1.0);
    CHECK(out.records[2].values[age].value() == 3.0);
  }

  SUBCASE("entirely missing feature is an error") {
    CHECK_THROWS_AS(impute(make({m, m, m})), DataError);
  }
}

TEST_CASE("encoding") {
  SUBCASE("complete cohort encodes in canonical order") {
    const auto c = tiny_cohort();
    const auto enc = encode(c);
    CHECK(enc.matrix.rows == 4);
    CHECK(enc.matrix.cols == 47);
    REQUIRE(enc.column_names.size() == 47);
    const auto& table = feature_table();
    for (std::size_t f = 0; f < 47; ++f) CHECK(enc.column_names[f] == table[f].name);
    for (std::size_t r = 0; r < 4; ++r) {
      CHECK(enc.mpap[r] == c.records[r].mpap);
      CHECK(enc.ph_labels[r] == (c.records[r].mpap >= 25.0 ? 1 : 0));
      for (std::size_t f = 0; f < 47; ++f) {
        CHECK(enc.matrix.at(r, f) == c.records[r].values[f].value());
      }
    }
  }

  SUBCASE("missing cell rejected") {
    auto c = tiny_cohort();
    c.records[2].values[5] = std::nullopt;
    CHECK_THROWS_AS(encode(c), DataError);
  }

  SUBCASE("out-of-range gender rejected") {
    auto c = tiny_cohort();
    c.records[0].values[feature_index("gender")] = 2.0;
    try {
      encode(c);
      FAIL("expected DataError");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("gender") != std::string::npos);
    }
  }
}

TEST_CASE("standardization") {
  Matrix m(4, 2);
  const double col0[] = {1.0, 2.0, 3.0, 6.0};
  for (std::size_t r = 0; r < 4; ++r) {
    m.at(r, 0) = col0[r];
    m.at(r, 1) = 7.5;  // constant column
  }
  const auto scaler = standardize_fit(m);
  const auto z = standardize_apply(scaler, m);

  SUBCASE("transformed columns have mean 0 and population variance 1") {
    double mean = 0.0, var = 0.0;
    for (std::size_t r = 0; r < 4; ++r) mean += z.at(r, 0);
    mean /= 4;
    for (std::size_t r = 0; r < 4; ++r) var += (z.at(r, 0) - mean) * (z.at(r, 0) - mean);
    var /= 4;
    CHECK(mean == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(var == doctest::Approx(1.0));
  }

  SUBCASE("constant columns map to zero, not NaN") {
    for (std::size_t r = 0; r < 4; ++r) CHECK(z.at(r, 1) == 0.0);
    CHECK(scaler.scale[1] == 0.0);
  }

  SUBCASE("fitting on train only leaves test genuinely out of sample") {
    Matrix test(1, 2);
    test.at(0, 0) = 100.0;
    test.at(0, 1) = 7.5;
    const auto zt = standardize_apply(scaler, test);
    CHECK(zt.at(0, 0) == doctest::Approx((100.0 - 3.0) / std::sqrt(3.5)));
  }

  SUBCASE("width mismatch rejected") {
    Matrix narrow(2, 1);
    CHECK_THROWS_AS(standardize_apply(scaler, narrow), DataError);
  }
}

TEST_CASE("feature set selection") {
  const auto c = tiny_cohort();
  const auto enc = encode(c);

  CHECK(select_feature_set(enc.matrix, {Group::demographics}).columns.size() == 4);
  CHECK(select_feature_set(enc.matrix, {Group::physics}).columns.size() == 5);
  CHECK(select_feature_set(enc.matrix, {Group::demographics, Group::mri}).columns.size() == 42);

  const auto all =
      select_feature_set(enc.matrix, {Group::demographics, Group::physics, Group::mri});
  CHECK(all.columns.size() == 47);
  CHECK(std::is_sorted(all.columns.begin(), all.columns.end()));
  for (std::size_t r = 0; r < enc.matrix.rows; ++r) {
    for (std::size_t f = 0; f < 47; ++f) CHECK(all.matrix.at(r, f) == enc.matrix.at(r, f));
  }

  CHECK_THROWS_AS(select_feature_set(enc.matrix, {}), UsageError);
}

TEST_CASE("univariate p-value") {
  SUBCASE("matches an independent statistics package") {
    const std::vector<double> x = {1, 2, 3, 4, 5, 6, 7, 8};
    const std::vector<double> y = {2.1, 1.3, 4.4, 3.2, 5.9, 4.8, 7.5, 6.6};
    CHECK(univariate_pvalue(x, y) == doctest::Approx(0.003084174836480944).epsilon(1e-10));
  }

  SUBCASE("perfect linear relation is maximally significant") {
    const std::vector<double> x = {1, 2, 3, 4, 5, 6};
    std::vector<double> y;
    for (const double v : x) y.push_back(2.0 * v + 1.0);
    CHECK(univariate_pvalue(x, y) < 1e-12);
  }

  SUBCASE("zero slope gives p = 1") {
    CHECK(univariate_pvalue({1.0, 2.0, 3.0}, {5.0, 5.0, 5.0}) == doctest::Approx(1.0));
  }

  SUBCASE("too few points rejected") {
    CHECK_THROWS_AS(univariate_pvalue({1.0, 2.0}, {1.0, 2.0}), DataError);
  }
}

TEST_CASE("synthetic cohort generation") {
  SUBCASE("deterministic for a fixed seed") {
    SynthConfig cfg;
    cfg.n_patients = 24;
    const auto a = synth_cohort(cfg);
    const auto b = synth_cohort(cfg);
    REQUIRE(a.cohort.size() == 24);
    for (std::size_t r = 0; r < 24; ++r) {
      CHECK(a.cohort.records[r].mpap == b.cohort.records[r].mpap);
      for (std::size_t s = 0; s < a.waveforms[r].flow.samples.size(); ++s) {
        CHECK(a.waveforms[r].flow.samples[s] == b.waveforms[r].flow.samples[s]);
      }
    }
    SynthConfig other = cfg;
    other.seed = 43;
    const auto c = synth_cohort(other);
    bool differs = false;
    for (std::size_t r = 0; r < 24 && !differs; ++r) {
      differs = c.cohort.records[r].mpap != a.cohort.records[r].mpap;
    }
    CHECK(differs);
  }

  SUBCASE("class balance near the configured fraction") {
    SynthConfig cfg;
    cfg.n_patients = 352;
    const auto res = synth_cohort(cfg);
    // binomial(352, 286/352): 99% interval is about [267, 305]
    CHECK(res.cohort.positives() >= 267);
    CHECK(res.cohort.positives() <= 305);
  }

  SUBCASE("group mpap means land near the published targets") {
    SynthConfig cfg;
    cfg.n_patients = 1000;
    const auto res = synth_cohort(cfg);
    double pos = 0.0, neg = 0.0;
    std::size_t npos = 0, nneg = 0;
    for (const auto& rec : res.cohort.records) {
      if (rec.ph_label) {
        pos += rec.mpap;
        ++npos;
      } else {
        neg += rec.mpap;
        ++nneg;
      }
    }
    REQUIRE(npos > 0);
    REQUIRE(nneg > 0);
    CHECK(pos / npos == doctest::Approx(46.95).epsilon(0.10));
    CHECK(neg / nneg == doctest::Approx(19.67).epsilon(0.10));
  }

  SUBCASE("waveform physics recovers the planted total resistance") {
    SynthConfig cfg;
    cfg.n_patients = 40;
    const auto res = synth_cohort(cfg);
    std::vector<double> rel;
    for (std::size_t r = 0; r < res.cohort.size(); ++r) {
      const auto feats = hemo::physics_features(res.waveforms[r].flow, res.waveforms[r].area,
                                                cfg.law);
      rel.push_back(std::abs(feats.Rtot - res.true_rtot[r]) / res.true_rtot[r]);
    }
    std::sort(rel.begin(), rel.end());
    CHECK(rel[rel.size() / 2] < 0.05);  // median relative error
  }

  SUBCASE("physics cells stay missing, others mostly present") {
    SynthConfig cfg;
    cfg.n_patients = 30;
    cfg.missing_rate = 0.1;
    const auto res = synth_cohort(cfg);
    const auto phys = group_columns(Group::physics);
    std::size_t missing_elsewhere = 0;
    for (const auto& rec : res.cohort.records) {
      for (const std::size_t f : phys) CHECK_FALSE(rec.values[f].has_value());
      for (std::size_t f = 0; f < 47; ++f) {
        if (std::find(phys.begin(), phys.end(), f) == phys.end() && !rec.values[f]) {
          ++missing_elsewhere;
        }
      }
    }
    CHECK(missing_elsewhere > 0);
  }

  SUBCASE("invalid configuration rejected") {
    SynthConfig cfg;
    cfg.n_patients = 0;
    CHECK_THROWS_AS(synth_cohort(cfg), UsageError);
    SynthConfig neg;
    neg.positive_fraction = 1.5;
    CHECK_THROWS_AS(synth_cohort(neg), UsageError);
  }
}
