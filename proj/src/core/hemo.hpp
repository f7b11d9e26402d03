#pragma once

#include <cstdint>
#include <vector>

#include "waveform.hpp"

namespace mpap::hemo {

// Three-element Windkessel: proximal resistance Rc, compliance C, distal
// resistance Rd. Rtot is maintained as exactly Rc + Rd.
struct WindkesselParams {
  double Rc = 0.0;   // kg/(m^4 s)
  double C = 0.0;    // m^4 s^2 / kg
  double Rd = 0.0;   // kg/(m^4 s)
  double Rtot = 0.0; // Rc + Rd

  static WindkesselParams make(double rc, double c, double rd);
  void validate() const;
};

struct WaveDecomposition {
  double Wf = 0.0;    // forward wave power
  double Wb = 0.0;    // backward wave power
  double ratio = 0.0; // Wb / (Wf + Wb)
};

struct FitOptions {
  std::uint64_t seed = 0;
  int max_iter = 500;   // Nelder-Mead iterations per run
  int restarts = 2;     // polish runs from the incumbent with shrinking steps
};

struct FitResult {
  WindkesselParams params;
  double residual = 0.0;        // attained MSE, Pa^2
  bool split_identifiable = true;  // false when only Rc+Rd is constrained (DC input)
};

struct PhysicsFeatures {
  double Rd = 0.0;
  double Rc = 0.0;
  double C = 0.0;
  double Rtot = 0.0;
  double wb_wtot = 0.0;
};

// p(t) from A(t) through the elastic tube law, sample by sample.
Waveform pressure_from_area(const Waveform& area, const TubeLaw& law);

// RK4 trajectory of the capacitor pressure p_c over n_cycles repetitions of
// the flow cycle, starting from pc0. Returns p_c at every step boundary
// (n_cycles * N + 1 values). Exposed for oracle-style tests.
std::vector<double> windkessel_integrate(const WindkesselParams& params, const Waveform& flow,
                                         int n_cycles, double pc0);

// Cycle-repetition integration until two successive cycles of p(t) agree to
// 1e-6 of the cycle mean pressure; throws ConvergenceError when n_cycles is
// not enough. Returns the final pressure cycle p = Rc*Q + p_c.
Waveform simulate_windkessel(const WindkesselParams& params, const Waveform& flow,
                             int n_cycles = 200);

// The exact periodic orbit of the same discrete RK4 map, found through the
// affine one-cycle map fixed point. Identical to what simulate_windkessel
// converges to, without the transient.
Waveform windkessel_periodic_cycle(const WindkesselParams& params, const Waveform& flow);

// Least-squares Windkessel fit: multi-start Nelder-Mead over
// (log Rc, log C, log Rd) against the periodic model response.
FitResult fit_windkessel(const Waveform& flow, const Waveform& pressure,
                         const FitOptions& options = {});

// Zc = rho*c/A_mean with Bramwell-Hill wave speed c = sqrt(A / (rho dA/dp)),
// compliance taken analytically from the tube law at the mean area.
double characteristic_impedance(const Waveform& pressure, const Waveform& area,
                                const TubeLaw& law);

// Discrete wave-intensity separation of pressure/velocity increments into
// forward and backward power; ratio = Wb/(Wf+Wb).
WaveDecomposition wave_power_decomposition(const Waveform& pressure, const Waveform& flow,
                                           const Waveform& area, double Zc);

// The five Table-style physics features from one waveform pair.
PhysicsFeatures physics_features(const Waveform& flow, const Waveform& area, const TubeLaw& law,
                                 const FitOptions& options = {});

}  // namespace mpap::hemo
