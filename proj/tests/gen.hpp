#pragma once

// Seeded generators for property tests. Uniforms are built directly from the
// 64-bit engine output so sequences do not depend on the standard library's
// distribution implementations.

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "blowuplab/profile.hpp"
#include "blowuplab/scenario.hpp"

namespace gen {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : e_(seed) {}
  double uniform(double a, double b) { return a + (b - a) * static_cast<double>(e_() >> 11) * 0x1p-53; }
  int integer(int lo, int hi) { return lo + static_cast<int>(e_() % static_cast<std::uint64_t>(hi - lo + 1)); }
  bool coin() { return (e_() >> 63) != 0; }
  std::mt19937_64& engine() { return e_; }

 private:
  std::mt19937_64 e_;
};

inline blowuplab::CoefficientProfile constant(Rng& r, double lo, double hi) {
  return blowuplab::CoefficientProfile::constant(r.uniform(lo, hi));
}

// Piecewise-linear profile on [0, t_end] with values in [lo, hi].
inline blowuplab::CoefficientProfile piecewise(Rng& r, double t_end, double lo, double hi,
                                               int max_knots = 6) {
  const int n = r.integer(2, max_knots);
  std::vector<std::pair<double, double>> k;
  for (int i = 0; i < n; ++i) {
    const double t = t_end * i / (n - 1);
    k.emplace_back(t, r.uniform(lo, hi));
  }
  return blowuplab::CoefficientProfile::piecewise_linear(std::move(k));
}

// Nondecreasing piecewise-linear profile starting at q0.
inline blowuplab::CoefficientProfile nondecreasing(Rng& r, double t_end, double q0, double max_rise) {
  const int n = r.integer(2, 6);
  std::vector<std::pair<double, double>> k;
  double v = q0;
  for (int i = 0; i < n; ++i) {
    k.emplace_back(t_end * i / (n - 1), v);
    v += r.uniform(0.0, max_rise / n);
  }
  return blowuplab::CoefficientProfile::piecewise_linear(std::move(k));
}

inline blowuplab::CoefficientProfile any_profile(Rng& r, int depth = 0) {
  using blowuplab::CoefficientProfile;
  switch (r.integer(0, depth == 0 ? 3 : 2)) {
    case 0: return CoefficientProfile::constant(r.uniform(-5, 5), r.coin() ? "c" : "");
    case 1: return piecewise(r, r.uniform(0.5, 4), -3, 3);
    case 2: {
      const double lo = r.uniform(-3, 0), hi = r.uniform(0, 3);
      return CoefficientProfile::band(lo, hi, r.uniform(lo, hi));
    }
    default: return CoefficientProfile::pole_scaled(r.uniform(0.5, 3), any_profile(r, 1), "pole");
  }
}

// A valid scenario with constants consistent with its location/parity.
inline blowuplab::FixedPointScenario scenario(Rng& r) {
  using namespace blowuplab;
  FixedPointScenario s;
  s.location = r.coin() ? Location::Axis : Location::Boundary;
  s.parity = r.coin() ? Parity::EvenSwirl : Parity::OddSwirl;
  if (s.location == Location::Axis && s.parity == Parity::EvenSwirl) s.swirl.b0 = r.uniform(-2, 2);
  if (s.location == Location::Boundary && s.parity == Parity::EvenSwirl) {
    s.swirl.b1 = r.uniform(-2, 2);
    s.swirl.b2 = r.uniform(-2, 2);
  }
  if (s.location == Location::Boundary && s.parity == Parity::OddSwirl) s.swirl.b3 = r.uniform(-2, 2);
  s.a0 = r.uniform(-2, 2);
  s.pressure_rr = any_profile(r);
  switch (r.integer(0, 2)) {
    case 0: s.pressure_zz = ZzFromConstraint{}; break;
    case 1: s.pressure_zz = ZzFromTrace{}; break;
    default: s.pressure_zz = piecewise(r, 3, -2, 2);
  }
  s.c0z = s.location == Location::Axis ? 2.0 * s.a0 : s.a0;
  if (!s.trace_mode()) s.c0z = r.uniform(-2, 2);
  s.t_end = r.uniform(0.1, 0.45);
  s.tolerances.rel_tol = r.uniform(1e-12, 1e-8);
  s.tolerances.f_stop = r.uniform(1e-9, 1e-3);
  s.tolerances.quad_points_per_unit = r.integer(100, 400);
  return s;
}

}  // namespace gen
