#include "waveform.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "csv.hpp"
#include "error.hpp"

namespace mpap {

double Waveform::mean() const {
  if (samples.empty()) return 0.0;
  return std::accumulate(samples.begin(), samples.end(), 0.0) /
         static_cast<double>(samples.size());
}

void Waveform::validate() const {
  if (dt <= 0.0 || !std::isfinite(dt)) throw DataError("waveform dt must be positive");
  if (samples.size() < 16) throw DataError("waveform needs at least 16 samples");
  for (const double s : samples) {
    if (!std::isfinite(s)) throw DataError("waveform contains a non-finite sample");
    if ((quantity == Quantity::area || quantity == Quantity::pressure) && s <= 0.0) {
      throw DataError("area/pressure waveform must be strictly positive");
    }
  }
}

void TubeLaw::validate() const {
  if (!(A0 > 0.0)) throw DataError("tube law A0 must be positive");
  if (!(stiffness > 0.0)) throw DataError("tube law stiffness must be positive");
  if (!(rho > 0.0)) throw DataError("tube law rho must be positive");
}

double TubeLaw::pressure(double a) const {
  if (!(a > 0.0)) throw DataError("tube law evaluated at non-positive area");
  return p0 + stiffness * (std::sqrt(a / A0) - 1.0);
}

double TubeLaw::area(double p) const {
  const double r = 1.0 + (p - p0) / stiffness;  // radius ratio
  if (!(r > 0.0)) throw DataError("tube law inverse at pressure below collapse");
  return A0 * r * r;
}

double TubeLaw::compliance(double a) const {
  // dp/dA = stiffness / (2 sqrt(A*A0)) from the law, inverted analytically.
  if (!(a > 0.0)) throw DataError("tube law compliance at non-positive area");
  return 2.0 * std::sqrt(a * A0) / stiffness;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

static double parse_double(const std::string& s, const std::string& ctx) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw DataError("not a number in " + ctx + ": '" + s + "'");
  }
  return v;
}

WaveformPair load_waveform_csv(const std::string& path) {
  const auto table = csv::read_file(path);
  if (table.header != std::vector<std::string>{"t", "flow", "area"}) {
    throw DataError(path + ": expected header t,flow,area");
  }
  if (table.rows.size() < 16) throw DataError(path + ": fewer than 16 samples");

  std::vector<double> t, q, a;
  for (const auto& row : table.rows) {
    t.push_back(parse_double(row[0], path));
    q.push_back(parse_double(row[1], path));
    a.push_back(parse_double(row[2], path));
  }
  const double dt = t[1] - t[0];
  if (!(dt > 0.0)) throw DataError(path + ": time must be strictly increasing");
  const double span = t.back() - t.front();
  for (std::size_t i = 1; i < t.size(); ++i) {
    const double step = t[i] - t[i - 1];
    if (std::abs(step - dt) > 1e-9 * std::max(std::abs(span), 1.0)) {
      throw DataError(path + ": non-uniform time spacing at row " + std::to_string(i));
    }
  }

  WaveformPair pair;
  pair.flow = Waveform{std::move(q), dt, Quantity::flow};
  pair.area = Waveform{std::move(a), dt, Quantity::area};
  pair.flow.validate();
  pair.area.validate();
  return pair;
}

void save_waveform_csv(const std::string& path, const WaveformPair& pair) {
  if (pair.flow.size() != pair.area.size() || pair.flow.dt != pair.area.dt) {
    throw DataError("flow/area waveforms disagree in sampling");
  }
  csv::Table table;
  table.header = {"t", "flow", "area"};
  for (std::size_t i = 0; i < pair.flow.size(); ++i) {
    table.rows.push_back({format_double(static_cast<double>(i) * pair.flow.dt),
                          format_double(pair.flow.samples[i]),
                          format_double(pair.area.samples[i])});
  }
  csv::write_file(path, table);
}

}  // namespace mpap
