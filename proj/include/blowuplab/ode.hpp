#pragma once

/*
 * Adaptive Dormand-Prince 5(4) integration with Hairer's continuous
 * extension, event location by bisection on the dense output, a singularity
 * guard, and running integrals carried as extra state components.
 *
 * Second-order problems y'' = F(t, y, y') are flattened to the first-order
 * state [y, y', I] where the I_k are running integrals of user integrands.
 */

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "blowuplab/error.hpp"
#include "blowuplab/scenario.hpp"

namespace blowuplab::ode {

template <std::size_t N>
using State = std::array<double, N>;

enum class Status { Completed, TerminalEvent, SingularityGuard, StepFailure };

inline const char* to_string(Status s) {
  switch (s) {
    case Status::Completed: return "Completed";
    case Status::TerminalEvent: return "TerminalEvent";
    case Status::SingularityGuard: return "SingularityGuard";
    case Status::StepFailure: return "StepFailure";
  }
  return "?";
}

// Record: log every transversal sign change. Terminal: stop at the first one.
// Guard: stop when the functional drops below `f_stop`.
enum class EventKind { Record, Terminal, Guard };

template <std::size_t N>
struct EventSpec {
  std::string name;
  std::function<double(double, const State<N>&)> fn;
  EventKind kind = EventKind::Record;
};

template <std::size_t N>
struct EventHit {
  std::string name;
  std::size_t spec = 0;
  EventKind kind = EventKind::Record;
  double t = 0.0;
  State<N> y{};
};

// One accepted step and its continuous extension (fourth-order accurate).
template <std::size_t N>
struct DenseStep {
  double t0 = 0.0;
  double h = 0.0;
  State<N> r1{}, r2{}, r3{}, r4{}, r5{};

  State<N> eval(double t) const {
    const double th = h != 0.0 ? (t - t0) / h : 0.0;
    const double th1 = 1.0 - th;
    State<N> out;
    for (std::size_t i = 0; i < N; ++i)
      out[i] = r1[i] + th * (r2[i] + th1 * (r3[i] + th * (r4[i] + th1 * r5[i])));
    return out;
  }
};

template <std::size_t N>
struct Trajectory {
  std::vector<double> t;
  std::vector<State<N>> y;
  std::vector<DenseStep<N>> steps;  // steps[i] spans [t[i], t[i+1]]
  std::vector<EventHit<N>> events;
  Status status = Status::Completed;
  std::string message;
  std::size_t rejected_steps = 0;
  std::size_t rhs_evaluations = 0;

  double t_begin() const { return t.front(); }
  double t_end() const { return t.back(); }

  // Dense-output state at any time in [t_begin, t_end].
  State<N> at(double time) const {
    if (steps.empty()) return y.front();
    auto it = std::upper_bound(t.begin(), t.end(), time);
    std::ptrdiff_t idx = (it - t.begin()) - 1;
    idx = std::clamp<std::ptrdiff_t>(idx, 0, static_cast<std::ptrdiff_t>(steps.size()) - 1);
    return steps[static_cast<std::size_t>(idx)].eval(time);
  }

  const EventHit<N>* first_event(const std::string& name) const {
    for (const auto& e : events)
      if (e.name == name) return &e;
    return nullptr;
  }
};

template <std::size_t N>
struct FirstOrderIVP {
  std::function<State<N>(double, const State<N>&)> rhs;
  State<N> y0{};
  double t_start = 0.0;
  double t_end = 1.0;
  // Slope discontinuities of the coefficients; steps land exactly on them.
  std::vector<double> breakpoints;
};

struct IntegrationOptions {
  double h_init = 0.0;  // 0 selects the starting step automatically
  double h_max = std::numeric_limits<double>::infinity();
  std::size_t max_steps = 20'000'000;
  int event_samples = 4;  // interior dense samples per step scanned for sign changes
};

namespace detail {

// Dormand-Prince 5(4) tableau.
inline constexpr double c2 = 0.2, c3 = 0.3, c4 = 0.8, c5 = 8.0 / 9.0;
inline constexpr double a21 = 0.2;
inline constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
inline constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
inline constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0,
                        a53 = 64448.0 / 6561.0, a54 = -212.0 / 729.0;
inline constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0,
                        a64 = 49.0 / 176.0, a65 = -5103.0 / 18656.0;
inline constexpr double a71 = 35.0 / 384.0, a73 = 500.0 / 1113.0, a74 = 125.0 / 192.0,
                        a75 = -2187.0 / 6784.0, a76 = 11.0 / 84.0;
inline constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0,
                        e5 = -17253.0 / 339200.0, e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;
inline constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                        d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                        d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

template <std::size_t N>
bool all_finite(const State<N>& s) {
  for (double v : s)
    if (!std::isfinite(v)) return false;
  return true;
}

template <std::size_t N>
struct StepResult {
  State<N> y1{};
  State<N> k7{};
  State<N> err{};
  DenseStep<N> dense;
};

// One DP5 step from (t, y) with first stage k1. `t_right` is the time at which
// the c=1 stages are evaluated; it differs from t+h only when the step ends on
// a breakpoint and the coefficients must be seen from the left.
template <std::size_t N, class Rhs>
StepResult<N> dp5_step(const Rhs& f, double t, const State<N>& y, const State<N>& k1, double h,
                       double t_right) {
  State<N> tmp, k2, k3, k4, k5, k6;
  for (std::size_t i = 0; i < N; ++i) tmp[i] = y[i] + h * a21 * k1[i];
  k2 = f(t + c2 * h, tmp);
  for (std::size_t i = 0; i < N; ++i) tmp[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
  k3 = f(t + c3 * h, tmp);
  for (std::size_t i = 0; i < N; ++i)
    tmp[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
  k4 = f(t + c4 * h, tmp);
  for (std::size_t i = 0; i < N; ++i)
    tmp[i] = y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
  k5 = f(t + c5 * h, tmp);
  for (std::size_t i = 0; i < N; ++i)
    tmp[i] = y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
  k6 = f(t_right, tmp);

  StepResult<N> r;
  for (std::size_t i = 0; i < N; ++i)
    r.y1[i] = y[i] + h * (a71 * k1[i] + a73 * k3[i] + a74 * k4[i] + a75 * k5[i] + a76 * k6[i]);
  r.k7 = f(t_right, r.y1);
  for (std::size_t i = 0; i < N; ++i)
    r.err[i] = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] +
                    e7 * r.k7[i]);

  r.dense.t0 = t;
  r.dense.h = h;
  for (std::size_t i = 0; i < N; ++i) {
    r.dense.r1[i] = y[i];
    r.dense.r2[i] = r.y1[i] - y[i];
    r.dense.r3[i] = h * k1[i] - r.dense.r2[i];
    r.dense.r4[i] = r.dense.r2[i] - h * r.k7[i] - r.dense.r3[i];
    r.dense.r5[i] = h * (d1 * k1[i] + d3 * k3[i] + d4 * k4[i] + d5 * k5[i] + d6 * k6[i] +
                         d7 * r.k7[i]);
  }
  return r;
}

inline int sign_of(double v) { return (v > 0.0) - (v < 0.0); }

// Bisection for a sign change of g on [a, b]; g(a) has sign `sa` != 0.
template <class G>
double bisect(const G& g, double a, double b, int sa, double tol) {
  double lo = a, hi = b;
  for (int it = 0; it < 200 && (hi - lo) > tol; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const int sm = sign_of(g(mid));
    if (sm == 0) return mid;
    if (sm == sa)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

inline std::vector<double> interior_breakpoints(std::vector<double> bps, double t0, double t1) {
  std::vector<double> out;
  for (double b : bps)
    if (b > t0 && b < t1) out.push_back(b);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace detail

// Adaptive integration of `ivp` with events. Never throws for numerical
// trouble: failures are reported through `Trajectory::status`.
template <std::size_t N>
Trajectory<N> integrate(const FirstOrderIVP<N>& ivp, const SolverTolerances& tol,
                        const std::vector<EventSpec<N>>& events = {},
                        const IntegrationOptions& opt = {}) {
  if (!(ivp.t_end > ivp.t_start))
    throw Error(ErrorCode::InvalidArgument, "integrate: t_end must exceed t_start");
  if (!ivp.rhs) throw Error(ErrorCode::InvalidArgument, "integrate: missing right-hand side");

  Trajectory<N> tr;
  tr.t.push_back(ivp.t_start);
  tr.y.push_back(ivp.y0);

  auto f = [&](double t, const State<N>& y) {
    ++tr.rhs_evaluations;
    return ivp.rhs(t, y);
  };

  const auto bps = detail::interior_breakpoints(ivp.breakpoints, ivp.t_start, ivp.t_end);
  std::size_t next_bp = 0;

  auto event_value = [&](std::size_t e, double t, const State<N>& y) {
    const double v = events[e].fn(t, y);
    return events[e].kind == EventKind::Guard ? v - tol.f_stop : v;
  };

  // Last nonzero sign seen for each event functional, and where.
  std::vector<int> ev_sign(events.size(), 0);
  std::vector<double> ev_time(events.size(), ivp.t_start);
  for (std::size_t e = 0; e < events.size(); ++e) {
    const double v = event_value(e, ivp.t_start, ivp.y0);
    if (events[e].kind == EventKind::Guard && v <= 0.0) {
      tr.events.push_back({events[e].name, e, EventKind::Guard, ivp.t_start, ivp.y0});
      tr.status = Status::SingularityGuard;
      tr.message = "guard '" + events[e].name + "' already below f_stop at start";
      return tr;
    }
    ev_sign[e] = detail::sign_of(v);
  }

  auto scale = [&](const State<N>& a, const State<N>& b, std::size_t i) {
    return tol.abs_tol + tol.rel_tol * std::max(std::abs(a[i]), std::abs(b[i]));
  };
  auto rms = [](const State<N>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s / static_cast<double>(N));
  };

  double t = ivp.t_start;
  State<N> y = ivp.y0;
  State<N> k1 = f(t, y);
  if (!detail::all_finite(k1)) {
    tr.status = Status::StepFailure;
    tr.message = "non-finite right-hand side at start";
    return tr;
  }

  const double span = ivp.t_end - ivp.t_start;
  double h = opt.h_init;
  if (!(h > 0.0)) {
    State<N> sy, sf;
    for (std::size_t i = 0; i < N; ++i) {
      const double sc = tol.abs_tol + tol.rel_tol * std::abs(y[i]);
      sy[i] = y[i] / sc;
      sf[i] = k1[i] / sc;
    }
    const double d0 = rms(sy), d1 = rms(sf);
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h0 = std::min(h0, span);
    State<N> y1;
    for (std::size_t i = 0; i < N; ++i) y1[i] = y[i] + h0 * k1[i];
    const State<N> f1 = f(t + h0, y1);
    State<N> df;
    for (std::size_t i = 0; i < N; ++i)
      df[i] = (f1[i] - k1[i]) / (tol.abs_tol + tol.rel_tol * std::abs(y[i]));
    const double d2 = detail::all_finite(f1) ? rms(df) / h0 : 0.0;
    const double dm = std::max(d1, d2);
    const double h1 = dm <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dm, 0.2);
    h = std::min(100.0 * h0, h1);
  }
  h = std::min({h, span, opt.h_max});

  bool rejected_last = false;
  std::size_t accepted = 0;
  while (t < ivp.t_end) {
    if (accepted >= opt.max_steps) {
      tr.status = Status::StepFailure;
      tr.message = "maximum number of steps exceeded";
      return tr;
    }
    const double min_step = 16.0 * std::numeric_limits<double>::epsilon() *
                            std::max(1.0, std::abs(t));
    // A knot closer than the underflow size counts as reached.
    while (next_bp < bps.size() && bps[next_bp] <= t + min_step) ++next_bp;
    if (ivp.t_end - t <= min_step) break;
    double t_target = ivp.t_end;
    bool on_break = false;
    if (next_bp < bps.size() && bps[next_bp] < ivp.t_end) {
      t_target = bps[next_bp];
      on_break = true;
    }
    // Stretch steps that would stop just short of the target.
    double t_new = t + h;
    if (t_new >= t_target - 0.01 * h) t_new = t_target;
    if (t_new < t_target) on_break = false;
    const double hh = t_new - t;
    if (!(hh > min_step)) {
      tr.status = Status::StepFailure;
      tr.message = "step size underflow at t=" + std::to_string(t);
      return tr;
    }
    const double t_right =
        (on_break && t_new == t_target) ? std::nextafter(t_new, t) : t_new;

    auto res = detail::dp5_step<N>(f, t, y, k1, hh, t_right);
    double err = 0.0;
    if (!detail::all_finite(res.y1) || !detail::all_finite(res.k7) ||
        !detail::all_finite(res.err)) {
      err = std::numeric_limits<double>::infinity();
    } else {
      State<N> e;
      for (std::size_t i = 0; i < N; ++i) e[i] = res.err[i] / scale(y, res.y1, i);
      err = rms(e);
    }

    if (!(err <= 1.0)) {
      ++tr.rejected_steps;
      const double fac =
          std::isfinite(err) ? std::clamp(0.9 * std::pow(err, -0.2), 0.2, 1.0) : 0.25;
      h = hh * fac;
      rejected_last = true;
      continue;
    }

    // Accept.
    ++accepted;
    tr.steps.push_back(res.dense);
    tr.t.push_back(t_new);
    tr.y.push_back(res.y1);

    // Scan event functionals on the dense output of this step.
    struct Candidate {
      double t;
      std::size_t e;
    };
    std::vector<Candidate> cands;
    const int ns = std::max(1, opt.event_samples);
    for (std::size_t e = 0; e < events.size(); ++e) {
      for (int j = 1; j <= ns; ++j) {
        const double ts = (j == ns) ? t_new : t + hh * static_cast<double>(j) / ns;
        const State<N> ys = (j == ns) ? res.y1 : res.dense.eval(ts);
        const int sg = detail::sign_of(event_value(e, ts, ys));
        if (sg == 0) continue;
        if (ev_sign[e] != 0 && sg != ev_sign[e]) {
          const bool downward = sg < 0;
          if (events[e].kind != EventKind::Guard || downward) {
            auto g = [&](double tt) { return event_value(e, tt, tr.at(tt)); };
            const double tz = detail::bisect(g, ev_time[e], ts, ev_sign[e], tol.zero_bisect_tol);
            cands.push_back({tz, e});
          }
        }
        ev_sign[e] = sg;
        ev_time[e] = ts;
        if (!cands.empty() && cands.back().e == e && events[e].kind != EventKind::Record) break;
      }
    }
    std::stable_sort(cands.begin(), cands.end(),
                     [](const Candidate& a, const Candidate& b) { return a.t < b.t; });
    bool stop = false;
    for (const auto& c : cands) {
      const State<N> yz = tr.at(c.t);
      tr.events.push_back({events[c.e].name, c.e, events[c.e].kind, c.t, yz});
      if (events[c.e].kind != EventKind::Record) {
        tr.t.back() = std::max(c.t, tr.t[tr.t.size() - 2]);
        tr.y.back() = yz;
        tr.status = events[c.e].kind == EventKind::Guard ? Status::SingularityGuard
                                                         : Status::TerminalEvent;
        tr.message = "event '" + events[c.e].name + "' at t=" + std::to_string(c.t);
        stop = true;
        break;
      }
    }
    if (stop) return tr;

    t = t_new;
    y = res.y1;
    if (on_break && t_new == t_target) {
      k1 = f(t, y);  // coefficients restart on the right of the breakpoint
    } else {
      k1 = res.k7;
    }
    double fac = (err == 0.0) ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
    if (rejected_last) fac = std::min(fac, 1.0);
    rejected_last = false;
    h = std::min(hh * fac, opt.h_max);
    if (on_break && t_new == t_target) h = std::max(h, hh);
  }
  tr.status = Status::Completed;
  return tr;
}

// Fixed-step DP5 (fifth-order solution, no error control). Used for
// convergence-order checks.
template <std::size_t N>
Trajectory<N> integrate_fixed(const FirstOrderIVP<N>& ivp, double h) {
  if (!(ivp.t_end > ivp.t_start) || !(h > 0.0))
    throw Error(ErrorCode::InvalidArgument, "integrate_fixed: bad span or step");
  Trajectory<N> tr;
  tr.t.push_back(ivp.t_start);
  tr.y.push_back(ivp.y0);
  auto f = [&](double t, const State<N>& y) {
    ++tr.rhs_evaluations;
    return ivp.rhs(t, y);
  };
  const auto n = static_cast<std::size_t>(std::ceil((ivp.t_end - ivp.t_start) / h - 1e-9));
  const double step = (ivp.t_end - ivp.t_start) / static_cast<double>(n);
  double t = ivp.t_start;
  State<N> y = ivp.y0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t_new = (i + 1 == n) ? ivp.t_end : ivp.t_start + step * static_cast<double>(i + 1);
    const auto res = detail::dp5_step<N>(f, t, y, f(t, y), t_new - t, t_new);
    tr.steps.push_back(res.dense);
    tr.t.push_back(t_new);
    tr.y.push_back(res.y1);
    t = t_new;
    y = res.y1;
  }
  return tr;
}

// Transversal sign changes of one state component on (t1, t2], each refined
// by bisection. Zeros where the component touches 0 without changing sign
// are not counted.
template <std::size_t N>
std::vector<double> find_zeros(const Trajectory<N>& tr, std::size_t component, double t1,
                               double t2, double bisect_tol = 1e-12, int samples_per_step = 8) {
  std::vector<double> zeros;
  if (component >= N) throw Error(ErrorCode::InvalidArgument, "find_zeros: bad component");
  if (tr.t.empty()) return zeros;
  t1 = std::max(t1, tr.t_begin());
  t2 = std::min(t2, tr.t_end());
  if (!(t2 > t1)) return zeros;

  auto value = [&](double tt) { return tr.at(tt)[component]; };
  std::vector<double> samples{t1};
  for (std::size_t i = 0; i + 1 < tr.t.size(); ++i) {
    const double a = tr.t[i], b = tr.t[i + 1];
    if (b <= t1 || a >= t2) continue;
    for (int j = 1; j <= samples_per_step; ++j) {
      const double ts = a + (b - a) * static_cast<double>(j) / samples_per_step;
      if (ts > t1 && ts < t2) samples.push_back(ts);
    }
  }
  samples.push_back(t2);

  int last_sign = 0;
  double last_t = t1;
  for (double ts : samples) {
    const int sg = detail::sign_of(value(ts));
    if (sg == 0) continue;
    if (last_sign != 0 && sg != last_sign)
      zeros.push_back(detail::bisect(value, last_t, ts, last_sign, bisect_tol));
    last_sign = sg;
    last_t = ts;
  }
  return zeros;
}

template <std::size_t N>
std::size_t count_zeros(const Trajectory<N>& tr, std::size_t component, double t1, double t2,
                        double bisect_tol = 1e-12) {
  return find_zeros(tr, component, t1, t2, bisect_tol).size();
}

// y'' = rhs(t, y, y') with K running integrals of integrands(t, y, y').
// Flattened state layout: [y_0..y_{M-1}, y'_0..y'_{M-1}, I_0..I_{K-1}].
template <std::size_t M, std::size_t K = 0>
struct SecondOrderIVP {
  static constexpr std::size_t N = 2 * M + K;
  using Vec = State<M>;
  using Flat = State<N>;

  std::function<Vec(double, const Vec&, const Vec&)> rhs;
  std::array<std::function<double(double, const Vec&, const Vec&)>, K> integrands{};
  Vec y0{};
  Vec yp0{};
  double t_start = 0.0;
  double t_end = 1.0;
  std::vector<double> breakpoints;

  static constexpr std::size_t position_index(std::size_t i) { return i; }
  static constexpr std::size_t velocity_index(std::size_t i) { return M + i; }
  static constexpr std::size_t integral_index(std::size_t k) { return 2 * M + k; }

  static Vec position(const Flat& s) {
    Vec v;
    for (std::size_t i = 0; i < M; ++i) v[i] = s[i];
    return v;
  }
  static Vec velocity(const Flat& s) {
    Vec v;
    for (std::size_t i = 0; i < M; ++i) v[i] = s[M + i];
    return v;
  }

  FirstOrderIVP<N> first_order() const {
    FirstOrderIVP<N> out;
    out.t_start = t_start;
    out.t_end = t_end;
    out.breakpoints = breakpoints;
    for (std::size_t i = 0; i < M; ++i) {
      out.y0[i] = y0[i];
      out.y0[M + i] = yp0[i];
    }
    for (std::size_t k = 0; k < K; ++k) out.y0[2 * M + k] = 0.0;
    out.rhs = [r = rhs, ig = integrands](double t, const Flat& s) {
      const Vec y = position(s);
      const Vec yp = velocity(s);
      const Vec acc = r(t, y, yp);
      Flat d;
      for (std::size_t i = 0; i < M; ++i) {
        d[i] = yp[i];
        d[M + i] = acc[i];
      }
      for (std::size_t k = 0; k < K; ++k) d[2 * M + k] = ig[k] ? ig[k](t, y, yp) : 0.0;
      return d;
    };
    return out;
  }

  // Event on a single flattened state component.
  static EventSpec<N> component_event(std::string name, std::size_t index, EventKind kind) {
    return {std::move(name), [index](double, const Flat& s) { return s[index]; }, kind};
  }
};

template <std::size_t M, std::size_t K>
Trajectory<2 * M + K> integrate(const SecondOrderIVP<M, K>& ivp, const SolverTolerances& tol,
                                const std::vector<EventSpec<2 * M + K>>& events = {},
                                const IntegrationOptions& opt = {}) {
  return integrate<2 * M + K>(ivp.first_order(), tol, events, opt);
}

// Adaptive quadrature of fn over [a, b] through the same integrator.
inline double quadrature(const std::function<double(double)>& fn, double a, double b,
                         const SolverTolerances& tol = {}) {
  if (a == b) return 0.0;
  FirstOrderIVP<1> ivp;
  ivp.t_start = std::min(a, b);
  ivp.t_end = std::max(a, b);
  ivp.rhs = [&fn](double t, const State<1>&) { return State<1>{fn(t)}; };
  const auto tr = integrate<1>(ivp, tol);
  if (tr.status != Status::Completed)
    throw Error(ErrorCode::DomainError, "quadrature failed: " + tr.message);
  return (a < b ? 1.0 : -1.0) * tr.y.back()[0];
}

}  // namespace blowuplab::ode
