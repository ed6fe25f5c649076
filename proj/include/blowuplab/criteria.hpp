#pragma once

// Executable blowup criteria over Jacobian solutions, plus Sturm comparison
// and reduction of order. "For all t" hypotheses are only ever checked on the
// sampled window [0, t_end]; every report states that window.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "blowuplab/error.hpp"
#include "blowuplab/jacobi.hpp"
#include "blowuplab/ode.hpp"
#include "blowuplab/profile.hpp"
#include "blowuplab/scenario.hpp"

namespace blowuplab {

using ojson = nlohmann::ordered_json;

enum class Verdict { Pass, Fail, HypothesisNotMet, Indeterminate };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Pass: return "PASS";
    case Verdict::Fail: return "FAIL";
    case Verdict::HypothesisNotMet: return "HypothesisNotMet";
    case Verdict::Indeterminate: return "Indeterminate";
  }
  return "?";
}

struct CriterionReport {
  std::string criterion;
  std::pair<double, double> hypothesis_window{0.0, 0.0};
  std::optional<double> predicted_bound;
  std::optional<double> observed;
  Verdict verdict = Verdict::Indeterminate;
  ojson diagnostics = ojson::object();

  bool pass() const { return verdict == Verdict::Pass; }

  ojson to_json() const {
    ojson j;
    j["criterion"] = criterion;
    j["hypothesis_window"] = {hypothesis_window.first, hypothesis_window.second};
    j["predicted_bound"] = predicted_bound ? ojson(*predicted_bound) : ojson(nullptr);
    j["observed"] = observed ? ojson(*observed) : ojson(nullptr);
    j["pass"] = pass();
    ojson d = diagnostics;
    d["verdict"] = to_string(verdict);
    j["diagnostics"] = std::move(d);
    return j;
  }
};

// Positive solution k of k (k + coef) = rhs, in closed form.
inline double positive_root(double coef, double rhs) {
  const double disc = coef * coef + 4.0 * rhs;
  if (disc < 0.0) throw Error(ErrorCode::DomainError, "positive_root: negative discriminant");
  const double k = 0.5 * (-coef + std::sqrt(disc));
  if (!(k > 0.0)) throw Error(ErrorCode::DomainError, "positive_root: no positive root");
  return k;
}

// Summary of a profile sampled on a window: uniform points, knots, and any
// extra times (typically integrator steps).
struct ProfileSample {
  double min = 0.0;
  double max = 0.0;
  bool nondecreasing = true;
  std::size_t points = 0;
};

inline ProfileSample sample_profile(const CoefficientProfile& p, double a, double b,
                                    const std::vector<double>& extra = {}, int uniform = 2000) {
  std::vector<double> ts;
  for (int i = 0; i <= uniform; ++i) ts.push_back(a + (b - a) * i / uniform);
  for (double t : p.breakpoints())
    if (t >= a && t <= b) ts.push_back(t);
  for (double t : extra)
    if (t >= a && t <= b) ts.push_back(t);
  std::sort(ts.begin(), ts.end());
  ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
  ProfileSample out;
  out.min = out.max = p(ts.front());
  double prev = out.min;
  for (double t : ts) {
    const double v = p(t);
    out.min = std::min(out.min, v);
    out.max = std::max(out.max, v);
    if (v < prev - 1e-12) out.nondecreasing = false;
    prev = v;
  }
  out.points = ts.size();
  return out;
}

namespace detail {

inline CriterionReport not_met(CriterionReport r, const std::string& why) {
  r.verdict = Verdict::HypothesisNotMet;
  r.diagnostics["reason"] = why;
  return r;
}

inline bool is_g_model(const JacobiSolution& sol) {
  return sol.model == ModelKind::LinearGAxis || sol.model == ModelKind::LinearGBoundary;
}

}  // namespace detail

// Sign criterion: Q >= 0 and y'(0) < 0 force a zero of y no later than -1/y'(0).
// The g-branch uses Q = P_zz and y = g; the f-branch needs P_rr >= 0, f'(0) < 0
// and no swirl term in the f-equation.
inline CriterionReport check_sign_criterion(const JacobiSolution& sol, const FixedPointScenario& s) {
  CriterionReport r;
  r.criterion = "sign_criterion";
  r.hypothesis_window = {0.0, s.t_end};
  const bool g_branch = detail::is_g_model(sol);
  r.diagnostics["branch"] = g_branch ? "g" : "f";

  const CoefficientProfile* q = g_branch ? s.zz_profile() : &s.pressure_rr;
  if (!q) return detail::not_met(r, "pressure_zz must be a prescribed profile for the g-branch");
  const double slope0 = g_branch ? s.c0z : s.fp0();
  const auto smp = sample_profile(*q, 0.0, s.t_end, sol.grid);
  r.diagnostics["q_min"] = smp.min;
  r.diagnostics["initial_slope"] = slope0;
  if (smp.min < 0.0) return detail::not_met(r, "coefficient takes negative values on the window");
  if (!(slope0 < 0.0)) return detail::not_met(r, "initial slope must be negative");
  if (!g_branch) {
    const bool axis = s.location == Location::Axis;
    const bool swirl_free =
        s.parity == Parity::OddSwirl || (axis ? s.swirl.b0 == 0.0 : s.swirl.b1 == 0.0);
    if (!swirl_free) return detail::not_met(r, "f-branch requires the swirl term to vanish");
  }

  const double bound = -1.0 / slope0;
  r.predicted_bound = bound;
  const auto zero = g_branch ? sol.first_zero_g : sol.first_zero_f;
  if (!zero) {
    r.verdict = sol.t_end_requested < bound ? Verdict::Indeterminate : Verdict::Fail;
    r.diagnostics["reason"] = sol.t_end_requested < bound ? "window ends before the bound"
                                                          : "no zero found before the bound";
    return r;
  }
  r.observed = *zero;
  r.verdict = *zero <= bound + 1e-6 ? Verdict::Pass : Verdict::Fail;
  return r;
}

// Log-time oscillation test for F(t) = H(s)/(T-t)^2 with s = -ln(T-t):
// j'' = (1/4 - H(s)) j oscillates iff H exceeds 1/4.
inline CriterionReport check_quarter_threshold(const FixedPointScenario& s,
                                               double s_length = 50.0) {
  CriterionReport r;
  r.criterion = "quarter_threshold";
  if (!s.pressure_rr.is<CoefficientProfile::PoleScaled>())
    return detail::not_met(r, "pressure_rr must be pole-scaled");
  if (s.location != Location::Axis || s.parity != Parity::EvenSwirl)
    return detail::not_met(r, "axis even-swirl scenario required");
  if (s.swirl.b0 == 0.0) return detail::not_met(r, "b0 must be nonzero");
  const auto& pole = s.pressure_rr.as<CoefficientProfile::PoleScaled>();
  const double T = pole.T;
  const CoefficientProfile H = *pole.inner;
  const double s0 = -std::log(T);
  const double s1 = s0 + s_length;
  r.hypothesis_window = {s0, s1};
  r.diagnostics["window_variable"] = "s";
  r.diagnostics["T"] = T;

  const auto tail = sample_profile(H, s1 - 0.2 * s_length, s1);
  const double hmax = tail.max, hmin = tail.min;
  r.diagnostics["limsup_estimate"] = hmax;
  r.diagnostics["tail_min"] = hmin;

  ode::SecondOrderIVP<1, 0> jv;
  jv.t_start = s0;
  jv.t_end = s1;
  jv.breakpoints = H.breakpoints();
  jv.y0 = {0.0};
  jv.yp0 = {1.0};
  jv.rhs = [H](double ss, const ode::State<1>& j, const ode::State<1>&) {
    return ode::State<1>{(0.25 - H(ss)) * j[0]};
  };
  const auto& tol = s.tolerances;
  const auto jt = ode::integrate(jv, tol);
  const auto zeros = ode::find_zeros(jt, 0, s0, s1, tol.zero_bisect_tol);
  const double tail_start = s1 - 0.2 * s_length;
  const auto tail_zeros =
      std::count_if(zeros.begin(), zeros.end(), [&](double z) { return z > tail_start; });
  r.diagnostics["zero_count"] = zeros.size();
  r.diagnostics["tail_zero_count"] = tail_zeros;
  r.diagnostics["zeros"] = zeros;

  std::vector<double> spacing;
  for (std::size_t i = 1; i < zeros.size(); ++i) spacing.push_back(zeros[i] - zeros[i - 1]);
  if (!spacing.empty()) {
    double mean = 0.0;
    for (double d : spacing) mean += d;
    mean /= static_cast<double>(spacing.size());
    r.diagnostics["mean_spacing"] = mean;
  }
  r.observed = static_cast<double>(zeros.size());

  const double thr_tol = 1e-9;
  if (std::abs(hmax - 0.25) <= thr_tol) {
    r.verdict = Verdict::Indeterminate;
    r.diagnostics["regime"] = "marginal";
  } else if (hmax < 0.25) {
    r.diagnostics["regime"] = "non-oscillatory";
    r.verdict = tail_zeros <= 1 ? Verdict::Pass : Verdict::Fail;
  } else if (hmin > 0.25) {
    r.diagnostics["regime"] = "oscillatory";
    // Sturm comparison with the constant H_min bounds the spacing; for
    // constant H the spacing is exact.
    const double bound = M_PI / std::sqrt(hmin - 0.25);
    r.predicted_bound = bound;
    // With H constant on the whole window every spacing is exact; otherwise
    // only spacings ending in the tail are compared against the bound.
    const auto whole = sample_profile(H, s0, s1);
    const bool constant = whole.max - whole.min <= thr_tol;
    std::vector<double> tail_spacing;
    for (std::size_t i = 1; i < zeros.size(); ++i)
      if (constant || zeros[i] > tail_start) tail_spacing.push_back(zeros[i] - zeros[i - 1]);
    double dev = 0.0, worst = 0.0;
    for (double d : tail_spacing) {
      dev = std::max(dev, std::abs(d - bound));
      worst = std::max(worst, d);
    }
    r.diagnostics["tail_spacing_max_deviation"] = dev;
    r.diagnostics["constant_tail"] = constant;
    if (tail_spacing.empty())
      r.verdict = Verdict::Fail;
    else if (constant)
      r.verdict = dev <= 1e-6 ? Verdict::Pass : Verdict::Fail;
    else
      r.verdict = worst <= bound + 1e-6 ? Verdict::Pass : Verdict::Fail;
  } else {
    r.diagnostics["regime"] = "mixed";
    r.verdict = Verdict::Indeterminate;
  }

  // t-time cross-checks on [0, T - T e^{-12}].
  const double ds = std::min(12.0, s_length);
  const double t_cross = T - T * std::exp(-ds);
  ojson cross;
  cross["t_end"] = t_cross;
  try {
    // (a) Ermakov-Pinney run: zeros of x = rho cos(theta) against j-zeros.
    FixedPointScenario sc = s;
    sc.t_end = t_cross;
    sc.pressure_zz = ZzFromConstraint{};
    const auto ax = run_axis_even(sc);
    const double theta = std::abs(s.swirl.b0) * ax.winding_integral.back();
    const auto x_zeros = static_cast<long>(std::floor(theta / M_PI + 0.5));
    const auto j_zeros = std::count_if(zeros.begin(), zeros.end(),
                                       [&](double z) { return z <= s0 + ds; });
    cross["axis_terminated"] = to_string(ax.terminated);
    cross["axis_angle"] = theta;
    cross["axis_x_zeros"] = x_zeros;
    cross["j_zeros"] = j_zeros;
    cross["vorticity_integral"] = ax.vorticity_integral.back();
    const bool counts_ok = std::abs(x_zeros - static_cast<long>(j_zeros)) <= 1;
    cross["zero_count_consistent"] = counts_ok;

    // (b) Same linear equation in t with data mapped from j(s0)=0, j'(s0)=1.
    ode::SecondOrderIVP<1, 0> xv;
    xv.t_end = t_cross;
    xv.breakpoints = s.pressure_rr.breakpoints();
    xv.y0 = {0.0};
    xv.yp0 = {1.0 / std::sqrt(T)};
    const CoefficientProfile F = s.pressure_rr;
    xv.rhs = [F](double t, const ode::State<1>& x, const ode::State<1>&) {
      return ode::State<1>{-F(t) * x[0]};
    };
    const auto xt = ode::integrate(xv, tol);
    const auto tz = ode::find_zeros(xt, 0, 0.0, t_cross, tol.zero_bisect_tol);
    double worst = 0.0;
    std::size_t matched = 0;
    for (std::size_t i = 0; i < tz.size() && i < zeros.size(); ++i) {
      worst = std::max(worst, std::abs(-std::log(T - tz[i]) - zeros[i]));
      ++matched;
    }
    cross["mapped_zero_count"] = tz.size();
    cross["mapped_zero_max_deviation"] = worst;
    const bool mapped_ok = tz.size() == static_cast<std::size_t>(j_zeros) && worst <= 1e-6;
    cross["mapped_zeros_consistent"] = mapped_ok;
    if (r.verdict == Verdict::Pass && !(counts_ok && mapped_ok)) r.verdict = Verdict::Fail;
  } catch (const Error& e) {
    cross["error"] = e.what();
  }
  r.diagnostics["t_time_cross_check"] = std::move(cross);
  return r;
}

// Rotation-driven blowup at the boundary with 2 b1 (b1 + b2) = -c^2 < 0.
inline CriterionReport check_rotation_blowup(const FixedPointScenario& s) {
  CriterionReport r;
  r.criterion = "rotation_blowup";
  r.hypothesis_window = {0.0, s.t_end};
  if (s.location != Location::Boundary || s.parity != Parity::EvenSwirl)
    return detail::not_met(r, "boundary even-swirl scenario required");
  const double c2 = -2.0 * s.swirl.b1 * (s.swirl.b1 + s.swirl.b2);
  const double a = s.a0;
  r.diagnostics["c2"] = c2;
  r.diagnostics["a"] = a;
  if (!(c2 > 0.0)) return detail::not_met(r, "2 b1 (b1 + b2) must be negative");
  if (!(a > 0.0)) return detail::not_met(r, "initial strain a0 must be positive");

  // k (k + f'(0)) = c^2 ln 2 with f'(0) = -a.
  const double k = positive_root(s.fp0(), c2 * std::log(2.0));
  r.diagnostics["k"] = k;
  const double ratio_bound = (k * k - a * k - c2 * std::log(2.0)) / (k * k);
  r.diagnostics["ratio_bound"] = ratio_bound;

  const double b1sq3 = 3.0 * s.swirl.b1 * s.swirl.b1;
  const auto smp = sample_profile(s.pressure_rr, 0.0, s.t_end);
  const double fmin = smp.min + b1sq3, fmax = smp.max + b1sq3;
  r.diagnostics["forcing_min"] = fmin;
  r.diagnostics["forcing_max"] = fmax;
  int branch = 0;
  if (fmin >= 0.0)
    branch = 2;
  else if (fmin >= -k * k * (1.0 + 1e-12) && fmax <= 0.0)
    branch = 1;
  else
    return detail::not_met(r, "P_rr + 3 b1^2 lies in neither band");
  r.diagnostics["branch"] = branch;

  const auto sol = run_boundary_even(s);
  r.diagnostics["terminated"] = to_string(sol.terminated);
  std::optional<double> crossing = sol.first_zero_f;
  if (!crossing && sol.terminated == Termination::BlowupDetected) crossing = sol.blowup_time;
  if (crossing) r.observed = *crossing;

  if (branch == 2) {
    const double tstar = (-a + std::sqrt(a * a + 2.0 * c2)) / c2;
    r.predicted_bound = tstar;
    bool env = true;
    double worst = -1e300;
    for (std::size_t i = 0; i < sol.size(); ++i) {
      const double t = sol.grid[i];
      const double e = sol.f[i] - (1.0 - a * t - 0.5 * c2 * t * t);
      worst = std::max(worst, e);
      if (e > 1e-8) env = false;
    }
    r.diagnostics["envelope_ok"] = env;
    r.diagnostics["envelope_max_excess"] = worst;
    r.verdict = crossing && *crossing <= tstar + 1e-6 && env ? Verdict::Pass : Verdict::Fail;
  } else {
    // f1 / y1 <= E(t) with y1'' = -(P_rr + 3 b1^2) y1, y1(0)=1, y1'(0)=0.
    ode::SecondOrderIVP<1, 0> yv;
    const double tmax = sol.t_last();
    const CoefficientProfile prr = s.pressure_rr;
    yv.t_end = tmax;
    yv.breakpoints = prr.breakpoints();
    yv.y0 = {1.0};
    yv.yp0 = {0.0};
    yv.rhs = [prr, b1sq3](double t, const ode::State<1>& y, const ode::State<1>&) {
      return ode::State<1>{-(prr(t) + b1sq3) * y[0]};
    };
    bool env = true;
    double worst = -1e300;
    if (tmax > 0.0) {
      const auto yt = ode::integrate(yv, s.tolerances);
      for (std::size_t i = 0; i < sol.size(); ++i) {
        const double t = sol.grid[i];
        const double y1 = yt.at(t)[0];
        const double kt = k * t;
        const double E = 1.0 - (a / k) * std::tanh(kt) - c2 * std::log(2.0) / (k * k) +
                         (c2 / (k * k)) * std::log1p(std::exp(-2.0 * kt)) +
                         2.0 * c2 * t / (k * (1.0 + std::exp(2.0 * kt)));
        const double e = sol.f[i] / y1 - E;
        worst = std::max(worst, e);
        if (e > 1e-8) env = false;
      }
    }
    r.diagnostics["envelope_ok"] = env;
    r.diagnostics["envelope_max_excess"] = worst;
    r.verdict = crossing ? Verdict::Pass : Verdict::Fail;
  }
  return r;
}

// Nondecreasing negative forcing: y'' = -Q y, y(0)=1, y'(0)=-a with Q(0) < 0
// and nu^2 = a^2 + Q(0) > 0 gives y <= 1 - nu t and a zero before 1/nu.
inline CriterionReport check_monotone_pressure(const FixedPointScenario& s) {
  CriterionReport r;
  r.criterion = "monotone_pressure";
  r.hypothesis_window = {0.0, s.t_end};

  const CoefficientProfile* q = nullptr;
  double a = 0.0;
  std::optional<LinearTarget> target;
  if (const auto* zz = s.zz_profile()) {
    q = zz;
    a = -s.c0z;
    target = s.location == Location::Axis ? LinearTarget::GAxis : LinearTarget::GBoundary;
    r.diagnostics["component"] = "gamma_z";
  } else if (s.parity == Parity::OddSwirl) {
    q = &s.pressure_rr;
    a = s.a0;
    target = LinearTarget::FOdd;
    r.diagnostics["component"] = "alpha_r";
  } else {
    return detail::not_met(r, "needs a prescribed P_zz or an odd-swirl scenario");
  }
  const double q0 = (*q)(0.0);
  const double nu2 = a * a + q0;
  r.diagnostics["a"] = a;
  r.diagnostics["q0"] = q0;
  r.diagnostics["nu2"] = nu2;
  if (!(q0 < 0.0)) return detail::not_met(r, "Q(0) must be negative");
  if (!(a > 0.0)) return detail::not_met(r, "initial slope must be negative");
  if (!(nu2 > 0.0)) return detail::not_met(r, "nu^2 = a^2 + Q(0) must be positive");
  const auto smp = sample_profile(*q, 0.0, s.t_end);
  if (!smp.nondecreasing) return detail::not_met(r, "Q is not nondecreasing on the window");

  const double nu = std::sqrt(nu2);
  r.diagnostics["nu"] = nu;
  r.predicted_bound = 1.0 / nu;
  const auto sol = run_linear(s, *target);
  const bool g_comp = detail::is_g_model(sol);
  const auto& y = g_comp ? sol.g : sol.f;
  const auto& yp = g_comp ? sol.gp : sol.fp;
  const auto zero = g_comp ? sol.first_zero_g : sol.first_zero_f;

  bool env = true;
  double drift = 0.0;
  for (std::size_t i = 0; i < sol.size(); ++i) {
    const double t = sol.grid[i];
    if (y[i] > 1.0 - nu * t + 1e-9) env = false;
    const double energy = yp[i] * yp[i] + (*q)(t)*y[i] * y[i] - sol.forcing_work[i];
    drift = std::max(drift, std::abs(energy - nu2) / nu2);
  }
  r.diagnostics["envelope_ok"] = env;
  r.diagnostics["energy_drift"] = drift;
  if (zero) r.observed = *zero;
  r.verdict = zero && *zero <= 1.0 / nu + 1e-6 && env && drift <= 1e-7 ? Verdict::Pass
                                                                        : Verdict::Fail;
  return r;
}

struct InitialData {
  double y0 = 1.0;
  double yp0 = 0.0;
};

struct ComparisonReport {
  std::vector<double> zeros_q1;
  std::vector<double> zeros_q2;
  bool separation_ok = true;
  std::optional<bool> envelope_q1_ok;  // 1 <= y <= cosh(kt) when Q1 <= 0 and data (1, 0)
  std::optional<bool> envelope_q2_ok;
  std::pair<double, double> span{0.0, 0.0};

  bool pass() const {
    return separation_ok && envelope_q1_ok.value_or(true) && envelope_q2_ok.value_or(true);
  }

  ojson to_json() const {
    ojson j;
    j["span"] = {span.first, span.second};
    j["zeros_q1"] = zeros_q1;
    j["zeros_q2"] = zeros_q2;
    j["separation_ok"] = separation_ok;
    j["envelope_q1_ok"] = envelope_q1_ok ? ojson(*envelope_q1_ok) : ojson(nullptr);
    j["envelope_q2_ok"] = envelope_q2_ok ? ojson(*envelope_q2_ok) : ojson(nullptr);
    j["pass"] = pass();
    return j;
  }
};

namespace detail {

inline ode::Trajectory<2> linear_solution(const CoefficientProfile& q, InitialData d,
                                          std::pair<double, double> span,
                                          const SolverTolerances& tol) {
  ode::SecondOrderIVP<1, 0> iv;
  iv.t_start = span.first;
  iv.t_end = span.second;
  iv.breakpoints = q.breakpoints();
  iv.y0 = {d.y0};
  iv.yp0 = {d.yp0};
  iv.rhs = [q](double t, const ode::State<1>& y, const ode::State<1>&) {
    return ode::State<1>{-q(t) * y[0]};
  };
  return ode::integrate(iv, tol);
}

}  // namespace detail

// Sturm comparison of y'' = -Q1 y against y'' = -Q2 y with Q1 >= Q2.
inline ComparisonReport sturm_compare(const CoefficientProfile& q1, const CoefficientProfile& q2,
                                      InitialData data, std::pair<double, double> span,
                                      const SolverTolerances& tol = {}) {
  if (!(span.second > span.first)) throw Error(ErrorCode::InvalidArgument, "empty span");
  {
    std::vector<double> ts;
    for (int i = 0; i <= 4000; ++i)
      ts.push_back(span.first + (span.second - span.first) * i / 4000.0);
    for (const auto* p : {&q1, &q2})
      for (double b : p->breakpoints())
        if (b >= span.first && b <= span.second) ts.push_back(b);
    for (double t : ts)
      if (q1(t) < q2(t) - 1e-12)
        throw Error(ErrorCode::OrderingViolated,
                    "Q1 < Q2 at t=" + std::to_string(t));
  }
  ComparisonReport rep;
  rep.span = span;
  const auto t1 = detail::linear_solution(q1, data, span, tol);
  const auto t2 = detail::linear_solution(q2, data, span, tol);
  rep.zeros_q1 = ode::find_zeros(t1, 0, span.first, span.second, tol.zero_bisect_tol);
  rep.zeros_q2 = ode::find_zeros(t2, 0, span.first, span.second, tol.zero_bisect_tol);
  const double slack = 1e-9;
  for (std::size_t i = 1; i < rep.zeros_q2.size(); ++i) {
    const double a = rep.zeros_q2[i - 1], b = rep.zeros_q2[i];
    const bool hit = std::any_of(rep.zeros_q1.begin(), rep.zeros_q1.end(),
                                 [&](double z) { return z >= a - slack && z <= b + slack; });
    if (!hit) rep.separation_ok = false;
  }

  auto envelope = [&](const CoefficientProfile& q,
                      const ode::Trajectory<2>& tr) -> std::optional<bool> {
    if (data.y0 != 1.0 || data.yp0 != 0.0) return std::nullopt;
    const auto smp = sample_profile(q, span.first, span.second, tr.t);
    if (smp.max > 0.0) return std::nullopt;
    const double k = std::sqrt(-smp.min);
    for (std::size_t i = 0; i < tr.t.size(); ++i) {
      const double y = tr.y[i][0];
      const double c = std::cosh(k * (tr.t[i] - span.first));
      if (y < 1.0 - 1e-9 || y > c * (1.0 + 1e-9)) return false;
    }
    return true;
  };
  rep.envelope_q1_ok = envelope(q1, t1);
  rep.envelope_q2_ok = envelope(q2, t2);
  return rep;
}

struct ReductionOfOrderReport {
  double max_deviation = 0.0;   // sup |y2 - direct (0,1) solution|
  double max_wronskian_error = 0.0;
  double max_residual = 0.0;    // sup |y2'' + Q y2|, y2'' by differencing y2'
  std::vector<double> t, y1, y2;

  ojson to_json() const {
    ojson j;
    j["max_deviation"] = max_deviation;
    j["max_wronskian_error"] = max_wronskian_error;
    j["max_residual"] = max_residual;
    return j;
  }
};

// Second solution y2 = y1 * int ds / y1^2 from y1 with data (1, 0).
// Requires y1 to stay away from zero on the span.
inline ReductionOfOrderReport reduction_of_order(const CoefficientProfile& q,
                                                 std::pair<double, double> span,
                                                 const SolverTolerances& tol = {}) {
  using P = ode::SecondOrderIVP<1, 1>;
  P iv;
  iv.t_start = span.first;
  iv.t_end = span.second;
  iv.breakpoints = q.breakpoints();
  iv.y0 = {1.0};
  iv.yp0 = {0.0};
  iv.rhs = [q](double t, const P::Vec& y, const P::Vec&) { return P::Vec{-q(t) * y[0]}; };
  iv.integrands[0] = [](double, const P::Vec& y, const P::Vec&) { return 1.0 / (y[0] * y[0]); };
  const auto tr = ode::integrate(iv, tol);
  if (tr.status != ode::Status::Completed)
    throw Error(ErrorCode::DomainError, "reduction_of_order: y1 integration failed");
  const auto direct = detail::linear_solution(q, {0.0, 1.0}, span, tol);

  auto y2p_at = [&](double t) {
    const auto x = tr.at(t);
    return x[1] * x[2] + 1.0 / x[0];
  };
  ReductionOfOrderReport rep;
  const auto bps = q.breakpoints();
  const double h = 1e-2;
  const int n = 600;
  for (int i = 0; i <= n; ++i) {
    const double t = span.first + (span.second - span.first) * i / n;
    const auto x = tr.at(t);
    if (std::abs(x[0]) < 1e-8)
      throw Error(ErrorCode::DomainError, "reduction_of_order: y1 vanishes on the span");
    const double y2 = x[0] * x[2];
    const double y2p = x[1] * x[2] + 1.0 / x[0];
    rep.t.push_back(t);
    rep.y1.push_back(x[0]);
    rep.y2.push_back(y2);
    rep.max_deviation = std::max(rep.max_deviation, std::abs(y2 - direct.at(t)[0]));
    rep.max_wronskian_error =
        std::max(rep.max_wronskian_error, std::abs(x[0] * y2p - x[1] * y2 - 1.0));
    const bool near_kink = std::any_of(bps.begin(), bps.end(),
                                       [&](double b) { return std::abs(b - t) < 2.5 * h; });
    if (t - 2 * h >= span.first && t + 2 * h <= span.second && !near_kink) {
      const double d2 = (y2p_at(t - 2 * h) - 8 * y2p_at(t - h) + 8 * y2p_at(t + h) -
                         y2p_at(t + 2 * h)) /
                        (12 * h);
      rep.max_residual = std::max(rep.max_residual, std::abs(d2 + q(t) * y2));
    }
  }
  return rep;
}

}  // namespace blowuplab
