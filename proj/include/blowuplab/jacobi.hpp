#pragma once

// Fixed-point Jacobian systems along particle paths of axisymmetric Euler
// flow, and the planar central-force system used as an independent oracle
// for the axis equation.
//
//   axis, even swirl:      f'' - b0^2 / f^3 = -P_rr f,        f^2 g = 1
//   boundary, even swirl:  f'' - 2 b1 (b1 + b2) + 3 b1^2 f = -P_rr f,   f g = 1
//   odd swirl / g-equations:  y'' = -Q y
//
// f is the radial Jacobian component, g the vertical one.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "blowuplab/error.hpp"
#include "blowuplab/ode.hpp"
#include "blowuplab/scenario.hpp"

namespace blowuplab {

enum class Termination { Completed, BlowupDetected, StepFailure };

inline const char* to_string(Termination t) {
  switch (t) {
    case Termination::Completed: return "Completed";
    case Termination::BlowupDetected: return "BlowupDetected";
    case Termination::StepFailure: return "StepFailure";
  }
  return "?";
}

enum class ModelKind { AxisEven, BoundaryEven, LinearGAxis, LinearGBoundary, LinearFOdd, CentralForce };

inline const char* to_string(ModelKind k) {
  switch (k) {
    case ModelKind::AxisEven: return "axis_even";
    case ModelKind::BoundaryEven: return "boundary_even";
    case ModelKind::LinearGAxis: return "g_axis";
    case ModelKind::LinearGBoundary: return "g_boundary";
    case ModelKind::LinearFOdd: return "f_odd";
    case ModelKind::CentralForce: return "central_force";
  }
  return "?";
}

enum class LinearTarget { GAxis, GBoundary, FOdd };

// Full Jacobian state at one instant.
struct JacobiPoint {
  double t = 0.0;
  double f = 1.0, fp = 0.0, g = 1.0, gp = 0.0;
  double winding = 0.0;       // int dt/f^2 (axis) or int dt/f (boundary)
  double f_integral = 0.0;    // int f dt
  double forcing_work = 0.0;  // int Q'(t) y(t)^2 dt for the primary coefficient Q
};

// Planar oracle series: x'' = -F x, y'' = -F y.
struct PlanarSeries {
  std::vector<double> x, y, xd, yd, rho, rhodot, theta, angular_momentum;
};

struct JacobiSolution {
  ModelKind model = ModelKind::AxisEven;
  Location location = Location::Axis;
  Parity parity = Parity::EvenSwirl;
  SwirlConstants swirl;

  std::vector<double> grid;
  std::vector<double> f, fp, g, gp;
  std::vector<double> winding_integral;
  std::vector<double> vorticity_integral;
  std::vector<double> f_integral;
  std::vector<double> forcing_work;
  std::vector<double> constraint_residual;
  std::vector<std::string> event;  // row label, empty for plain steps

  std::optional<double> first_zero_f;
  std::optional<double> first_zero_g;
  std::optional<double> blowup_time;
  Termination terminated = Termination::Completed;
  std::string message;
  double t_end_requested = 0.0;

  std::optional<PlanarSeries> planar;

  // Dense evaluation anywhere on [grid.front(), grid.back()].
  std::function<JacobiPoint(double)> sampler;

  std::size_t size() const { return grid.size(); }
  double t_begin() const { return grid.front(); }
  double t_last() const { return grid.back(); }

  JacobiPoint at(double t) const {
    if (!sampler) throw Error(ErrorCode::InvalidArgument, "solution has no dense output");
    if (t < grid.front() || t > grid.back())
      throw Error(ErrorCode::DomainError, "t=" + std::to_string(t) + " outside solution window");
    return sampler(t);
  }

  double vorticity_from(double winding, double fint) const {
    const bool axis = location == Location::Axis;
    if (axis) return parity == Parity::EvenSwirl ? 2.0 * std::abs(swirl.b0) * winding : 0.0;
    if (parity == Parity::EvenSwirl) return std::abs(swirl.b1 + swirl.b2) * winding;
    return std::abs(swirl.b3) * fint;
  }
};

// P_zz from the trace identity at the fixed point (axis or boundary form).
inline double trace_pzz(Location loc, const SwirlConstants& w, double prr, double f, double fp) {
  const double q = fp / f;
  if (loc == Location::Axis)
    return -2.0 * prr - 6.0 * q * q + 2.0 * w.b0 * w.b0 / (f * f * f * f);
  return -prr - 3.0 * w.b1 * w.b1 + 2.0 * w.b1 * (w.b1 + w.b2) / f - 2.0 * q * q;
}

namespace detail {

using IVP = ode::SecondOrderIVP<2, 3>;
using Flat = IVP::Flat;
using Vec2 = IVP::Vec;

inline std::vector<double> scenario_breakpoints(const FixedPointScenario& s) {
  auto bps = s.pressure_rr.breakpoints();
  if (const auto* zz = s.zz_profile()) {
    auto more = zz->breakpoints();
    bps.insert(bps.end(), more.begin(), more.end());
  }
  return bps;
}

inline void ensure_valid(const FixedPointScenario& s) {
  auto rep = validate_scenario(s);
  if (!rep.ok()) throw Error(ErrorCode::InvalidScenario, rep.joined());
}

// Shared driver for every fixed-point model. Component 0 of the state is f,
// component 1 is g; exactly one of them is the primary (guarded) unknown.
inline JacobiSolution run_fixed_point(const FixedPointScenario& s, ModelKind kind) {
  ensure_valid(s);
  const auto& w = s.swirl;
  const auto& tol = s.tolerances;
  const bool axis = s.location == Location::Axis;
  const bool g_primary = kind == ModelKind::LinearGAxis || kind == ModelKind::LinearGBoundary;

  const CoefficientProfile* q_primary = &s.pressure_rr;
  if (g_primary) {
    q_primary = s.zz_profile();
    if (!q_primary)
      throw Error(ErrorCode::InvalidScenario,
                  "g-equation needs pressure_zz given as a profile, not derived");
  }
  const CoefficientProfile prr = s.pressure_rr;
  const CoefficientProfile qp = *q_primary;
  const std::optional<CoefficientProfile> zz =
      s.zz_profile() ? std::optional<CoefficientProfile>(*s.zz_profile()) : std::nullopt;
  const bool trace = s.trace_mode();
  const bool constraint = s.constraint_mode();
  const Location loc = s.location;

  // Primary equation y'' = P(t, y, y').
  std::function<double(double, double, double)> primary;
  bool regular = true;
  switch (kind) {
    case ModelKind::AxisEven: {
      const double c = w.b0 * w.b0;
      regular = c == 0.0;
      primary = [c, prr](double t, double f, double) { return c / (f * f * f) - prr(t) * f; };
      break;
    }
    case ModelKind::BoundaryEven: {
      const double src = 2.0 * w.b1 * (w.b1 + w.b2);
      const double lin = 3.0 * w.b1 * w.b1;
      primary = [src, lin, prr](double t, double f, double) { return src - (lin + prr(t)) * f; };
      break;
    }
    default:
      primary = [qp](double t, double y, double) { return -qp(t) * y; };
      break;
  }

  // Fills in whichever component follows from f^2 g = 1 or f g = 1.
  auto complete = [=](const Flat& x) {
    JacobiPoint p;
    p.f = x[0];
    p.g = x[1];
    p.fp = x[2];
    p.gp = x[3];
    p.winding = x[4];
    p.f_integral = x[5];
    p.forcing_work = x[6];
    if (g_primary) {
      if (axis) {
        p.f = 1.0 / std::sqrt(p.g);
        p.fp = -0.5 * p.gp / (p.g * std::sqrt(p.g));
      } else {
        p.f = 1.0 / p.g;
        p.fp = -p.gp / (p.g * p.g);
      }
    } else if (constraint) {
      if (axis) {
        p.g = 1.0 / (p.f * p.f);
        p.gp = -2.0 * p.fp / (p.f * p.f * p.f);
      } else {
        p.g = 1.0 / p.f;
        p.gp = -p.fp / (p.f * p.f);
      }
    }
    return p;
  };
  auto completed_f = [=](const Vec2& y, const Vec2& yp) {
    Flat x{};
    x[0] = y[0];
    x[1] = y[1];
    x[2] = yp[0];
    x[3] = yp[1];
    return complete(x).f;
  };

  IVP ivp;
  ivp.t_start = 0.0;
  ivp.t_end = s.t_end;
  ivp.breakpoints = scenario_breakpoints(s);
  ivp.y0 = {1.0, 1.0};
  ivp.yp0 = {g_primary ? 0.0 : s.fp0(), g_primary ? s.c0z : (constraint ? 0.0 : s.c0z)};
  ivp.rhs = [=](double t, const Vec2& y, const Vec2& yp) {
    Vec2 acc{0.0, 0.0};
    if (g_primary) {
      acc[1] = primary(t, y[1], yp[1]);
      return acc;
    }
    acc[0] = primary(t, y[0], yp[0]);
    if (trace)
      acc[1] = -trace_pzz(loc, w, prr(t), y[0], yp[0]) * y[1];
    else if (zz)
      acc[1] = -(*zz)(t)*y[1];
    return acc;
  };
  ivp.integrands[0] = [=](double, const Vec2& y, const Vec2& yp) {
    const double f = completed_f(y, yp);
    return axis ? 1.0 / (f * f) : 1.0 / f;
  };
  ivp.integrands[1] = [=](double, const Vec2& y, const Vec2& yp) { return completed_f(y, yp); };
  ivp.integrands[2] = [=](double t, const Vec2& y, const Vec2&) {
    const double v = g_primary ? y[1] : y[0];
    return qp.slope(t) * v * v;
  };

  const std::size_t pidx = g_primary ? 1 : 0;
  std::vector<ode::EventSpec<IVP::N>> events{
      IVP::component_event("blowup", pidx, ode::EventKind::Guard)};
  const bool g_integrated = !g_primary && !constraint;
  if (g_integrated) events.push_back(IVP::component_event("zero_g", 1, ode::EventKind::Record));

  const auto tr = std::make_shared<const ode::Trajectory<IVP::N>>(
      ode::integrate(ivp, tol, events));

  JacobiSolution sol;
  sol.model = kind;
  sol.location = s.location;
  sol.parity = s.parity;
  sol.swirl = w;
  sol.t_end_requested = s.t_end;
  sol.message = tr->message;

  // Rows: accepted steps plus recorded events, in time order.
  struct Row {
    double t;
    Flat x;
    std::string label;
  };
  std::vector<Row> rows;
  for (std::size_t i = 0; i < tr->t.size(); ++i) rows.push_back({tr->t[i], tr->y[i], {}});
  for (const auto& e : tr->events)
    if (e.kind == ode::EventKind::Record) rows.push_back({e.t, e.y, e.name});
  std::stable_sort(rows.begin(), rows.end(),
                   [](const Row& a, const Row& b) { return a.t < b.t; });

  switch (tr->status) {
    case ode::Status::SingularityGuard:
      sol.terminated = Termination::BlowupDetected;
      rows.back().label = "blowup";
      break;
    case ode::Status::StepFailure: sol.terminated = Termination::StepFailure; break;
    default: sol.terminated = Termination::Completed; break;
  }

  for (const auto& r : rows) {
    const JacobiPoint p = complete(r.x);
    sol.grid.push_back(r.t);
    sol.f.push_back(p.f);
    sol.fp.push_back(p.fp);
    sol.g.push_back(p.g);
    sol.gp.push_back(p.gp);
    sol.winding_integral.push_back(p.winding);
    sol.f_integral.push_back(p.f_integral);
    sol.forcing_work.push_back(p.forcing_work);
    sol.vorticity_integral.push_back(sol.vorticity_from(p.winding, p.f_integral));
    sol.constraint_residual.push_back(axis ? p.f * p.f * p.g - 1.0 : p.f * p.g - 1.0);
    sol.event.push_back(r.label);
  }

  for (const auto& e : tr->events)
    if (e.name == "zero_g") {
      sol.first_zero_g = e.t;
      break;
    }

  if (sol.terminated == Termination::BlowupDetected) {
    const double t_guard = tr->t_end();
    sol.blowup_time = t_guard;
    // A regular primary equation can be followed through the zero exactly.
    if (regular && t_guard < s.t_end) {
      ode::SecondOrderIVP<1, 0> tail;
      tail.t_start = t_guard;
      tail.t_end = s.t_end;
      tail.breakpoints = ivp.breakpoints;
      tail.y0 = {tr->y.back()[pidx]};
      tail.yp0 = {tr->y.back()[2 + pidx]};
      tail.rhs = [primary](double t, const ode::State<1>& y, const ode::State<1>& yp) {
        return ode::State<1>{primary(t, y[0], yp[0])};
      };
      const auto tt = ode::integrate(
          tail, tol,
          {ode::SecondOrderIVP<1, 0>::component_event("zero", 0, ode::EventKind::Terminal)});
      if (tt.status == ode::Status::TerminalEvent) {
        (g_primary ? sol.first_zero_g : sol.first_zero_f) = tt.t_end();
        sol.blowup_time = tt.t_end();
      }
    }
  }
  sol.sampler = [tr, complete](double t) {
    JacobiPoint p = complete(tr->at(t));
    p.t = t;
    return p;
  };
  return sol;
}

}  // namespace detail

inline JacobiSolution run_axis_even(const FixedPointScenario& s) {
  if (s.location != Location::Axis || s.parity != Parity::EvenSwirl)
    throw Error(ErrorCode::InvalidScenario, "run_axis_even needs an axis, even-swirl scenario");
  return detail::run_fixed_point(s, ModelKind::AxisEven);
}

inline JacobiSolution run_boundary_even(const FixedPointScenario& s) {
  if (s.location != Location::Boundary || s.parity != Parity::EvenSwirl)
    throw Error(ErrorCode::InvalidScenario,
                "run_boundary_even needs a boundary, even-swirl scenario");
  return detail::run_fixed_point(s, ModelKind::BoundaryEven);
}

// y'' = -Q y with Q = P_zz (g-targets, g(0)=1, g'(0)=c0z) or Q = P_rr
// (odd-swirl f, f(0)=1, f'(0)=-a0).
inline JacobiSolution run_linear(const FixedPointScenario& s, LinearTarget which) {
  switch (which) {
    case LinearTarget::GAxis:
      if (s.location != Location::Axis)
        throw Error(ErrorCode::InvalidScenario, "g_axis target needs an axis scenario");
      return detail::run_fixed_point(s, ModelKind::LinearGAxis);
    case LinearTarget::GBoundary:
      if (s.location != Location::Boundary)
        throw Error(ErrorCode::InvalidScenario, "g_boundary target needs a boundary scenario");
      return detail::run_fixed_point(s, ModelKind::LinearGBoundary);
    case LinearTarget::FOdd:
      if (s.parity != Parity::OddSwirl)
        throw Error(ErrorCode::InvalidScenario, "f_odd target needs an odd-swirl scenario");
      // The axis with odd swirl has no swirl term, so the axis equation with
      // b0 = 0 is the same linear equation.
      return detail::run_fixed_point(
          s, s.location == Location::Axis ? ModelKind::AxisEven : ModelKind::LinearFOdd);
  }
  throw Error(ErrorCode::InvalidArgument, "unknown linear target");
}

// The f-equation appropriate to the scenario's location and parity.
inline JacobiSolution run_model(const FixedPointScenario& s) {
  if (s.parity == Parity::OddSwirl) return run_linear(s, LinearTarget::FOdd);
  return s.location == Location::Axis ? run_axis_even(s) : run_boundary_even(s);
}

// Planar motion x'' = -F x, y'' = -F y from x(0)=1, x'(0)=fp0, y(0)=0,
// y'(0)=b0. Its radius rho solves the axis equation with swirl constant b0.
inline JacobiSolution central_force_oracle(double b0, const CoefficientProfile& F, double t_end,
                                           double fp0 = 0.0, const SolverTolerances& tol = {}) {
  if (!(t_end > 0.0)) throw Error(ErrorCode::InvalidArgument, "t_end must be positive");
  if (auto p = F.problems(); !p.empty()) throw Error(ErrorCode::InvalidScenario, p.front());
  using P = ode::SecondOrderIVP<2, 1>;
  P ivp;
  ivp.t_end = t_end;
  ivp.breakpoints = F.breakpoints();
  ivp.y0 = {1.0, 0.0};
  ivp.yp0 = {fp0, b0};
  ivp.rhs = [F](double t, const P::Vec& q, const P::Vec&) {
    const double k = F(t);
    return P::Vec{-k * q[0], -k * q[1]};
  };
  ivp.integrands[0] = [](double, const P::Vec& q, const P::Vec&) {
    return 1.0 / (q[0] * q[0] + q[1] * q[1]);
  };
  const auto tr = std::make_shared<const ode::Trajectory<P::N>>(ode::integrate(
      ivp, tol,
      {{"blowup",
        [](double, const P::Flat& x) { return std::hypot(x[0], x[1]); },
        ode::EventKind::Guard}}));

  auto point = [](const P::Flat& x) {
    JacobiPoint p;
    const double r = std::hypot(x[0], x[1]);
    p.f = r;
    p.fp = (x[0] * x[2] + x[1] * x[3]) / r;
    p.g = 1.0 / (r * r);
    p.gp = -2.0 * p.fp / (r * r * r);
    p.winding = x[4];
    p.f_integral = 0.0;
    p.forcing_work = 0.0;
    return p;
  };

  JacobiSolution sol;
  sol.model = ModelKind::CentralForce;
  sol.location = Location::Axis;
  sol.parity = Parity::EvenSwirl;
  sol.swirl.b0 = b0;
  sol.t_end_requested = t_end;
  sol.message = tr->message;
  sol.terminated = tr->status == ode::Status::SingularityGuard ? Termination::BlowupDetected
                   : tr->status == ode::Status::StepFailure    ? Termination::StepFailure
                                                                : Termination::Completed;
  if (sol.terminated == Termination::BlowupDetected) sol.blowup_time = tr->t_end();

  PlanarSeries pl;
  double theta = 0.0, prev = 0.0;
  for (std::size_t i = 0; i < tr->t.size(); ++i) {
    const auto& x = tr->y[i];
    // Unwrap the polar angle using dense samples inside the step.
    if (i > 0) {
      const int sub = 8;
      for (int j = 1; j <= sub; ++j) {
        const double ts = tr->t[i - 1] + (tr->t[i] - tr->t[i - 1]) * j / sub;
        const auto xs = j == sub ? x : tr->at(ts);
        const double a = std::atan2(xs[1], xs[0]);
        double d = a - prev;
        d -= 2.0 * M_PI * std::round(d / (2.0 * M_PI));
        theta += d;
        prev = a;
      }
    } else {
      prev = std::atan2(x[1], x[0]);
      theta = prev;
    }
    const JacobiPoint p = point(x);
    sol.grid.push_back(tr->t[i]);
    sol.f.push_back(p.f);
    sol.fp.push_back(p.fp);
    sol.g.push_back(p.g);
    sol.gp.push_back(p.gp);
    sol.winding_integral.push_back(p.winding);
    sol.f_integral.push_back(0.0);
    sol.forcing_work.push_back(0.0);
    sol.vorticity_integral.push_back(2.0 * std::abs(b0) * p.winding);
    sol.constraint_residual.push_back(p.f * p.f * p.g - 1.0);
    sol.event.push_back(i + 1 == tr->t.size() &&
                                sol.terminated == Termination::BlowupDetected
                            ? "blowup"
                            : "");
    pl.x.push_back(x[0]);
    pl.y.push_back(x[1]);
    pl.xd.push_back(x[2]);
    pl.yd.push_back(x[3]);
    pl.rho.push_back(p.f);
    pl.rhodot.push_back(p.fp);
    pl.theta.push_back(theta);
    pl.angular_momentum.push_back(x[0] * x[3] - x[2] * x[1]);
  }
  sol.planar = std::move(pl);
  sol.sampler = [tr, point](double t) {
    JacobiPoint p = point(tr->at(t));
    p.t = t;
    return p;
  };
  return sol;
}

// Solution built from a prescribed f (and f'); g follows from the
// incompressibility constraint and the running integrals are integrated.
// Used to evaluate diagnostics on closed-form Jacobians.
inline JacobiSolution manufactured_solution(Location loc, Parity par, const SwirlConstants& w,
                                            std::function<double(double)> f,
                                            std::function<double(double)> fp, double t0,
                                            double t1, int samples = 400,
                                            const SolverTolerances& tol = {}) {
  if (!(t1 > t0) || samples < 1) throw Error(ErrorCode::InvalidArgument, "bad window");
  const bool axis = loc == Location::Axis;
  ode::FirstOrderIVP<2> iv;
  iv.t_start = t0;
  iv.t_end = t1;
  iv.rhs = [f, axis](double t, const ode::State<2>&) {
    const double v = f(t);
    return ode::State<2>{axis ? 1.0 / (v * v) : 1.0 / v, v};
  };
  const auto tr = std::make_shared<const ode::Trajectory<2>>(ode::integrate(iv, tol));
  if (tr->status != ode::Status::Completed)
    throw Error(ErrorCode::DomainError, "manufactured_solution: integrals failed");

  auto point = [=](double t) {
    JacobiPoint p;
    p.t = t;
    p.f = f(t);
    p.fp = fp(t);
    if (axis) {
      p.g = 1.0 / (p.f * p.f);
      p.gp = -2.0 * p.fp / (p.f * p.f * p.f);
    } else {
      p.g = 1.0 / p.f;
      p.gp = -p.fp / (p.f * p.f);
    }
    const auto x = tr->at(t);
    p.winding = x[0];
    p.f_integral = x[1];
    return p;
  };

  JacobiSolution sol;
  sol.model = axis ? ModelKind::AxisEven
                   : (par == Parity::EvenSwirl ? ModelKind::BoundaryEven : ModelKind::LinearFOdd);
  sol.location = loc;
  sol.parity = par;
  sol.swirl = w;
  sol.t_end_requested = t1;
  sol.message = "manufactured";
  for (int i = 0; i <= samples; ++i) {
    const double t = i == samples ? t1 : t0 + (t1 - t0) * i / samples;
    const auto p = point(t);
    sol.grid.push_back(t);
    sol.f.push_back(p.f);
    sol.fp.push_back(p.fp);
    sol.g.push_back(p.g);
    sol.gp.push_back(p.gp);
    sol.winding_integral.push_back(p.winding);
    sol.f_integral.push_back(p.f_integral);
    sol.forcing_work.push_back(0.0);
    sol.vorticity_integral.push_back(sol.vorticity_from(p.winding, p.f_integral));
    sol.constraint_residual.push_back(axis ? p.f * p.f * p.g - 1.0 : p.f * p.g - 1.0);
    sol.event.emplace_back();
  }
  sol.sampler = point;
  return sol;
}

}  // namespace blowuplab
