#include "hemo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "error.hpp"
#include "optim.hpp"

namespace mpap::hemo {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// One RK4 step of C*dpc/dt = Q(t) - pc/Rd is affine in pc:
//   pc_{k+1} = R(z)*pc_k + (dt/(6C)) * (c0*Q_k + ch*Q_{k+1/2} + Q_{k+1})
// with z = -dt/(Rd*C). Precomputing the coefficients makes one model
// evaluation two passes over the cycle.
struct StepCoeffs {
  double R;   // homogeneous multiplier
  double w0;  // weight of Q_k
  double wh;  // weight of Q at the half step
  double w1;  // weight of Q_{k+1}
  bool stable;
};

StepCoeffs step_coeffs(const WindkesselParams& p, double dt) {
  const double z = -dt / (p.Rd * p.C);
  StepCoeffs c{};
  c.R = 1.0 + z + z * z / 2.0 + z * z * z / 6.0 + z * z * z * z / 24.0;
  const double scale = dt / (6.0 * p.C);
  c.w0 = scale * (1.0 + z + z * z / 2.0 + z * z * z / 4.0);
  c.wh = scale * (4.0 + 2.0 * z + z * z / 2.0);
  c.w1 = scale;
  c.stable = std::isfinite(c.R) && std::abs(c.R) < 1.0;
  return c;
}

struct CycleGrid {
  std::vector<double> q;   // N samples
  std::vector<double> qh;  // N periodic midpoints
  double dt;

  explicit CycleGrid(const Waveform& flow) : dt(flow.dt) {
    const std::size_t n = flow.size();
    q = flow.samples;
    qh.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
      qh[k] = 0.5 * (q[k] + q[(k + 1) % n]);
    }
  }

  std::size_t size() const { return q.size(); }

  // advance pc by one full cycle; no output
  double run_cycle(const StepCoeffs& c, double pc) const {
    const std::size_t n = q.size();
    for (std::size_t k = 0; k < n; ++k) {
      pc = c.R * pc + c.w0 * q[k] + c.wh * qh[k] + c.w1 * q[(k + 1) % n];
    }
    return pc;
  }

  // capacitor pressure at the fixed point of the one-cycle affine map
  double periodic_start(const StepCoeffs& c) const {
    const double b = run_cycle(c, 0.0);
    const double a = std::pow(c.R, static_cast<double>(q.size()));
    const double denom = 1.0 - a;
    if (!(std::abs(denom) > 1e-300) || !std::isfinite(b)) {
      throw ConvergenceError("windkessel periodic orbit is degenerate (Rd*C too large)");
    }
    return b / denom;
  }

  // SSE of p = Rc*Q + pc against observed pressure over one periodic cycle
  double periodic_sse(const WindkesselParams& p, const StepCoeffs& c,
                      const std::vector<double>& observed) const {
    double pc = 0.0;
    const double b = run_cycle(c, pc);
    const double a = std::pow(c.R, static_cast<double>(q.size()));
    const double denom = 1.0 - a;
    if (!(std::abs(denom) > 1e-300) || !std::isfinite(b)) return kInf;
    pc = b / denom;
    double sse = 0.0;
    const std::size_t n = q.size();
    for (std::size_t k = 0; k < n; ++k) {
      const double err = p.Rc * q[k] + pc - observed[k];
      sse += err * err;
      pc = c.R * pc + c.w0 * q[k] + c.wh * qh[k] + c.w1 * q[(k + 1) % n];
    }
    return std::isfinite(sse) ? sse : kInf;
  }
};

}  // namespace

WindkesselParams WindkesselParams::make(double rc, double c, double rd) {
  WindkesselParams p{rc, c, rd, rc + rd};
  p.validate();
  return p;
}

void WindkesselParams::validate() const {
  if (!(Rc > 0.0) || !(Rd > 0.0) || !(C > 0.0)) {
    throw DataError("windkessel parameters must be positive");
  }
  if (Rtot != Rc + Rd) throw DataError("Rtot must equal Rc + Rd");
}

Waveform pressure_from_area(const Waveform& area, const TubeLaw& law) {
  if (area.quantity != Quantity::area) throw DataError("pressure_from_area expects an area waveform");
  area.validate();
  law.validate();
  Waveform p;
  p.dt = area.dt;
  p.quantity = Quantity::pressure;
  p.samples.reserve(area.size());
  for (const double a : area.samples) p.samples.push_back(law.pressure(a));
  return p;
}

std::vector<double> windkessel_integrate(const WindkesselParams& params, const Waveform& flow,
                                         int n_cycles, double pc0) {
  params.validate();
  flow.validate();
  if (n_cycles < 1) throw UsageError("n_cycles must be >= 1");
  const CycleGrid grid(flow);
  const auto c = step_coeffs(params, grid.dt);
  std::vector<double> pc;
  pc.reserve(static_cast<std::size_t>(n_cycles) * grid.size() + 1);
  double x = pc0;
  pc.push_back(x);
  for (int cycle = 0; cycle < n_cycles; ++cycle) {
    for (std::size_t k = 0; k < grid.size(); ++k) {
      x = c.R * x + c.w0 * grid.q[k] + c.wh * grid.qh[k] + c.w1 * grid.q[(k + 1) % grid.size()];
      pc.push_back(x);
    }
  }
  return pc;
}

Waveform simulate_windkessel(const WindkesselParams& params, const Waveform& flow, int n_cycles) {
  params.validate();
  flow.validate();
  if (n_cycles < 1) throw UsageError("n_cycles must be >= 1");
  const CycleGrid grid(flow);
  const auto c = step_coeffs(params, grid.dt);
  if (!c.stable) {
    throw ConvergenceError("RK4 step is unstable for this Rd*C at the waveform dt");
  }
  const std::size_t n = grid.size();

  double pc = params.Rd * flow.mean();  // DC steady state, transient carries only the pulsatile part
  std::vector<double> prev(n, kInf), cur(n);
  double mismatch = kInf;
  for (int cycle = 0; cycle < n_cycles; ++cycle) {
    double mean = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      cur[k] = params.Rc * grid.q[k] + pc;
      mean += cur[k];
      pc = c.R * pc + c.w0 * grid.q[k] + c.wh * grid.qh[k] + c.w1 * grid.q[(k + 1) % n];
    }
    mean /= static_cast<double>(n);
    mismatch = 0.0;
    for (std::size_t k = 0; k < n; ++k) mismatch = std::max(mismatch, std::abs(cur[k] - prev[k]));
    if (cycle > 0 && mismatch <= 1e-6 * std::max(std::abs(mean), 1e-12)) {
      return Waveform{cur, flow.dt, Quantity::pressure};
    }
    prev.swap(cur);
  }
  throw ConvergenceError("windkessel simulation not periodic after " + std::to_string(n_cycles) +
                         " cycles (last mismatch " + format_double(mismatch) + " Pa)");
}

Waveform windkessel_periodic_cycle(const WindkesselParams& params, const Waveform& flow) {
  params.validate();
  flow.validate();
  const CycleGrid grid(flow);
  const auto c = step_coeffs(params, grid.dt);
  if (!c.stable) {
    throw ConvergenceError("RK4 step is unstable for this Rd*C at the waveform dt");
  }
  double pc = grid.periodic_start(c);
  Waveform p;
  p.dt = flow.dt;
  p.quantity = Quantity::pressure;
  p.samples.resize(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    p.samples[k] = params.Rc * grid.q[k] + pc;
    pc = c.R * pc + c.w0 * grid.q[k] + c.wh * grid.qh[k] + c.w1 * grid.q[(k + 1) % grid.size()];
  }
  return p;
}

FitResult fit_windkessel(const Waveform& flow, const Waveform& pressure, const FitOptions& options) {
  flow.validate();
  if (pressure.size() != flow.size()) throw DataError("flow/pressure length mismatch");
  if (std::abs(pressure.dt - flow.dt) > 1e-12 * flow.dt) throw DataError("flow/pressure dt mismatch");

  const double mean_q = flow.mean();
  const double mean_p = pressure.mean();
  if (!(mean_p > 0.0)) throw DataError("mean pressure must be positive");
  if (!(mean_q > 0.0)) throw DataError("mean flow must be positive");

  const double rtot0 = mean_p / mean_q;
  const double period = flow.period();

  double q_dev = 0.0;
  for (const double q : flow.samples) q_dev = std::max(q_dev, std::abs(q - mean_q));

  if (q_dev <= 1e-9 * std::abs(mean_q)) {
    // DC input: only the sum Rc+Rd is constrained.
    FitResult r;
    r.params = WindkesselParams::make(0.1 * rtot0, period / (0.9 * rtot0), 0.9 * rtot0);
    double sse = 0.0;
    for (const double p : pressure.samples) sse += (p - mean_p) * (p - mean_p);
    r.residual = sse / static_cast<double>(pressure.size());
    r.split_identifiable = false;
    return r;
  }

  const CycleGrid grid(flow);
  const double inv_n = 1.0 / static_cast<double>(grid.size());
  auto objective = [&](const std::vector<double>& x) -> double {
    WindkesselParams p;
    p.Rc = std::exp(x[0]);
    p.C = std::exp(x[1]);
    p.Rd = std::exp(x[2]);
    p.Rtot = p.Rc + p.Rd;
    if (!std::isfinite(p.Rc) || !std::isfinite(p.C) || !std::isfinite(p.Rd)) return kInf;
    const auto c = step_coeffs(p, grid.dt);
    if (!c.stable) return kInf;
    return grid.periodic_sse(p, c, pressure.samples) * inv_n;
  };

  // Deterministic multi-starts: Rc fraction of Rtot x decay time constant.
  const double frac[5] = {0.1, 0.1, 0.1, 0.1, 0.3};
  const double tau[5] = {0.03 * period, 0.3 * period, 3.0 * period, 30.0 * period, 0.3 * period};

  NelderMeadResult best;
  for (int s = 0; s < 5; ++s) {
    const double rc0 = frac[s] * rtot0;
    const double rd0 = (1.0 - frac[s]) * rtot0;
    std::vector<double> x0 = {std::log(rc0), std::log(tau[s] / rd0), std::log(rd0)};
    auto run = nelder_mead(objective, x0, 0.5, 1e-8, 1e-15, options.max_iter);
    const double polish_step[2] = {0.05, 0.005};
    for (int r = 0; r < options.restarts && r < 2; ++r) {
      auto again = nelder_mead(objective, run.x, polish_step[r], 1e-9, 1e-16, options.max_iter);
      if (again.f < run.f) run = again;
    }
    if (run.f < best.f) best = run;
  }

  if (!std::isfinite(best.f)) {
    throw ConvergenceError("windkessel fit failed from every start (best residual inf)");
  }

  FitResult r;
  r.params = WindkesselParams::make(std::exp(best.x[0]), std::exp(best.x[1]), std::exp(best.x[2]));
  r.residual = best.f;
  r.split_identifiable = true;
  return r;
}

double characteristic_impedance(const Waveform& pressure, const Waveform& area,
                                const TubeLaw& law) {
  area.validate();
  if (pressure.size() != area.size()) throw DataError("pressure/area length mismatch");
  law.validate();
  const double a_mean = area.mean();
  const double dadp = law.compliance(a_mean);
  if (!(dadp > 0.0) || !std::isfinite(dadp)) throw DataError("non-positive tube-law compliance");
  const double c = std::sqrt(a_mean / (law.rho * dadp));
  return law.rho * c / a_mean;
}

WaveDecomposition wave_power_decomposition(const Waveform& pressure, const Waveform& flow,
                                           const Waveform& area, double Zc) {
  const std::size_t n = pressure.size();
  if (flow.size() != n || area.size() != n) throw DataError("waveform length mismatch");
  if (!(Zc > 0.0)) throw DataError("Zc must be positive");
  const double a_mean = area.mean();
  if (!(a_mean > 0.0)) throw DataError("mean area must be positive");
  const double za = Zc * a_mean;

  double wf = 0.0, wb = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t k1 = (k + 1) % n;  // periodic increments over the cycle
    const double dp = pressure.samples[k1] - pressure.samples[k];
    const double du = (flow.samples[k1] - flow.samples[k]) / a_mean;
    const double dpf = 0.5 * (dp + za * du);
    const double dpb = 0.5 * (dp - za * du);
    wf += dpf * dpf / za;
    wb += dpb * dpb / za;
  }
  if (wf + wb <= 0.0) throw DataError("flat waveforms carry no wave power");
  return WaveDecomposition{wf, wb, wb / (wf + wb)};
}

PhysicsFeatures physics_features(const Waveform& flow, const Waveform& area, const TubeLaw& law,
                                 const FitOptions& options) {
  auto stage = [](const char* name, auto&& fn) {
    try {
      return fn();
    } catch (const Error& e) {
      throw Error(e.code(), std::string(name) + ": " + e.what());
    }
  };

  const Waveform p = stage("pressure_from_area", [&] { return pressure_from_area(area, law); });
  const FitResult fit = stage("fit_windkessel", [&] { return fit_windkessel(flow, p, options); });
  const double zc =
      stage("characteristic_impedance", [&] { return characteristic_impedance(p, area, law); });
  const WaveDecomposition wd = stage("wave_power_decomposition",
                                     [&] { return wave_power_decomposition(p, flow, area, zc); });

  PhysicsFeatures f;
  f.Rd = fit.params.Rd;
  f.Rc = fit.params.Rc;
  f.C = fit.params.C;
  f.Rtot = fit.params.Rtot;
  f.wb_wtot = wd.ratio;
  return f;
}

}  // namespace mpap::hemo
