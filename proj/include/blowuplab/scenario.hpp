#pragma once

// Fixed-point scenarios: where on the cylinder we sit (axis r=0 or boundary
// r=1, both at z=0), the z-parity of the swirl, the swirl jet constants, the
// initial strain, and the prescribed pressure-Hessian profiles.

#include <cmath>
#include <string>
#include <variant>
#include <vector>

#include "blowuplab/profile.hpp"

namespace blowuplab {

enum class Location { Axis, Boundary };
enum class Parity { EvenSwirl, OddSwirl };

inline const char* to_string(Location l) { return l == Location::Axis ? "axis" : "boundary"; }
inline const char* to_string(Parity p) { return p == Parity::EvenSwirl ? "even" : "odd"; }

// Jet constants of the initial swirl b0(r, z) at the fixed points.
//   b0: d/dr b0(0,0)      (axis, even swirl)
//   b1: b0(1,0)           (boundary, even swirl)
//   b2: d/dr b0(1,0)      (boundary, even swirl)
//   b3: d/dz b0(1,0)      (boundary, odd swirl)
struct SwirlConstants {
  double b0 = 0.0;
  double b1 = 0.0;
  double b2 = 0.0;
  double b3 = 0.0;
  bool operator==(const SwirlConstants&) const = default;
};

struct SolverTolerances {
  double rel_tol = 1e-10;
  double abs_tol = 1e-12;
  double f_stop = 1e-6;  // singularity guard on the vanishing Jacobian component
  double zero_bisect_tol = 1e-12;
  int quad_points_per_unit = 200;
  bool operator==(const SolverTolerances&) const = default;

  std::vector<std::string> problems() const {
    std::vector<std::string> out;
    if (!(rel_tol > 0.0)) out.emplace_back("rel_tol must be positive");
    if (!(abs_tol > 0.0)) out.emplace_back("abs_tol must be positive");
    if (!(f_stop > 0.0)) out.emplace_back("f_stop must be positive");
    if (!(f_stop < 1.0)) out.emplace_back("f_stop must be below 1");
    if (!(zero_bisect_tol > 0.0)) out.emplace_back("zero_bisect_tol must be positive");
    if (quad_points_per_unit <= 0) out.emplace_back("quad_points_per_unit must be positive");
    return out;
  }
};

// g = 1/f^2 (axis) or g = 1/f (boundary), evaluated analytically.
struct ZzFromConstraint {
  bool operator==(const ZzFromConstraint&) const = default;
};
// P_zz derived from the trace identity and the running solution; g integrated.
struct ZzFromTrace {
  bool operator==(const ZzFromTrace&) const = default;
};

using PressureZz = std::variant<ZzFromConstraint, ZzFromTrace, CoefficientProfile>;

struct FixedPointScenario {
  Location location = Location::Axis;
  Parity parity = Parity::EvenSwirl;
  SwirlConstants swirl;
  double a0 = 0.0;   // initial radial strain, f'(0) = -a0
  double c0z = 0.0;  // g'(0)
  CoefficientProfile pressure_rr;
  PressureZz pressure_zz = ZzFromConstraint{};
  double t_end = 1.0;
  SolverTolerances tolerances;

  bool operator==(const FixedPointScenario&) const = default;

  bool trace_mode() const { return std::holds_alternative<ZzFromTrace>(pressure_zz); }
  bool constraint_mode() const { return std::holds_alternative<ZzFromConstraint>(pressure_zz); }
  const CoefficientProfile* zz_profile() const {
    return std::get_if<CoefficientProfile>(&pressure_zz);
  }
  double fp0() const { return -a0; }
};

struct ValidationReport {
  std::vector<std::string> issues;
  bool ok() const { return issues.empty(); }
  std::string joined() const {
    std::string out;
    for (const auto& i : issues) {
      if (!out.empty()) out += "; ";
      out += i;
    }
    return out;
  }
};

inline ValidationReport validate_scenario(const FixedPointScenario& s) {
  ValidationReport rep;
  auto flag = [&rep](std::string msg) { rep.issues.push_back(std::move(msg)); };

  const auto& w = s.swirl;
  for (double v : {w.b0, w.b1, w.b2, w.b3, s.a0, s.c0z})
    if (!std::isfinite(v)) {
      flag("scenario constants must be finite");
      break;
    }

  // Only the jet constants of the scenario's own location/parity may be set.
  const bool axis = s.location == Location::Axis;
  const bool even = s.parity == Parity::EvenSwirl;
  if (!(axis && even) && w.b0 != 0.0) flag("b0 is an axis even-swirl constant; misplaced here");
  if (!(!axis && even)) {
    if (w.b1 != 0.0) flag("b1 is a boundary even-swirl constant; misplaced here");
    if (w.b2 != 0.0) flag("b2 is a boundary even-swirl constant; misplaced here");
  }
  if (!(!axis && !even) && w.b3 != 0.0) flag("b3 is a boundary odd-swirl constant; misplaced here");

  for (auto& p : s.pressure_rr.problems()) flag("pressure_rr: " + p);
  if (const auto* zz = s.zz_profile())
    for (auto& p : zz->problems()) flag("pressure_zz: " + p);

  if (!(s.t_end > 0.0) || !std::isfinite(s.t_end)) flag("t_end must be positive and finite");
  auto check_pole = [&](const CoefficientProfile& p, const char* name) {
    if (auto T = p.domain_end(); T && !(s.t_end < *T))
      flag(std::string(name) + ": t_end must lie before the pole time T");
  };
  check_pole(s.pressure_rr, "pressure_rr");
  if (const auto* zz = s.zz_profile()) check_pole(*zz, "pressure_zz");

  // The trace identity preserves f^2 g = 1 (axis) or f g = 1 (boundary) only
  // when the data satisfy it to first order at t = 0.
  if (s.trace_mode()) {
    const double expected = axis ? -2.0 * s.fp0() : -s.fp0();
    if (std::abs(s.c0z - expected) > 1e-12 * std::max(1.0, std::abs(expected)))
      flag(std::string("trace mode requires g'(0) = ") + (axis ? "-2 f'(0)" : "-f'(0)") +
           " (expected c0z = " + std::to_string(expected) + ")");
  }

  for (auto& p : s.tolerances.problems()) flag("tolerances: " + p);
  return rep;
}

}  // namespace blowuplab
