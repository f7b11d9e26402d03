#pragma once

#include <string>
#include <vector>

namespace mpap {

enum class Quantity { flow, area, pressure };

// One cardiac cycle of a uniformly sampled periodic signal.
struct Waveform {
  std::vector<double> samples;
  double dt = 0.0;  // seconds per sample
  Quantity quantity = Quantity::flow;

  std::size_t size() const { return samples.size(); }
  double period() const { return dt * static_cast<double>(samples.size()); }
  double mean() const;

  // Enforces the type invariants (>= 16 finite samples, dt > 0, positivity
  // for area/pressure). Throws DataError on violation.
  void validate() const;
};

// Elastic tube law p(A) = p0 + stiffness * (sqrt(A/A0) - 1), linear in radius.
struct TubeLaw {
  double p0 = 0.0;         // Pa at reference area
  double A0 = 7.0e-4;      // m^2
  double stiffness = 2.5e4;  // Pa
  double rho = 1060.0;     // kg/m^3

  void validate() const;
  double pressure(double area) const;
  double area(double pressure) const;           // inverse law
  double compliance(double area) const;         // dA/dp at the given area
};

// Waveform file: CSV `t,flow,area`, SI units, uniform spacing (checked to
// 1e-9 relative).
struct WaveformPair {
  Waveform flow;
  Waveform area;
};

WaveformPair load_waveform_csv(const std::string& path);
void save_waveform_csv(const std::string& path, const WaveformPair& pair);

std::string format_double(double v);  // shortest round-trip decimal

}  // namespace mpap
