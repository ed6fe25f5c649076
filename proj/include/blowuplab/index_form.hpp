#pragma once

// Stretch matrices Lambda = D eta^T D eta at the fixed points, the localized
// index form
//
//   I(v, v) = int <Lambda v', v'> + <omega0 x v, v'> dt
//
// in the (e_r, e_theta, e_z) frame, explicit trial variations, the search for
// negative-index intervals, and the conjugate-point diagnostics built on them.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "blowuplab/error.hpp"
#include "blowuplab/jacobi.hpp"
#include "blowuplab/scenario.hpp"

namespace blowuplab {

using Mat3 = std::array<std::array<double, 3>, 3>;
using Vec3 = std::array<double, 3>;

struct StretchMatrix {
  Mat3 entries{};
  Mat3 factor{};  // D eta, with entries = factor^T factor
  double time = 0.0;

  static double det3(const Mat3& m) {
    return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
           m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
           m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
  }

  // (det D eta)^2; the cofactor expansion of the entries cancels f^2 against
  // (b t)^2 once f is small
  double det() const {
    const double d = det3(factor);
    return d != 0.0 ? d * d : det3(entries);
  }

  Mat3 inverse() const {
    const auto& m = entries;
    const double d = det();
    if (d == 0.0) throw Error(ErrorCode::DomainError, "singular stretch matrix");
    Mat3 r;
    r[0][0] = (m[1][1] * m[2][2] - m[1][2] * m[2][1]) / d;
    r[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) / d;
    r[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) / d;
    r[1][0] = (m[1][2] * m[2][0] - m[1][0] * m[2][2]) / d;
    r[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) / d;
    r[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) / d;
    r[2][0] = (m[1][0] * m[2][1] - m[1][1] * m[2][0]) / d;
    r[2][1] = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) / d;
    r[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) / d;
    return r;
  }

  bool symmetric(double tol = 1e-14) const {
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < i; ++j)
        if (std::abs(entries[i][j] - entries[j][i]) > tol) return false;
    return true;
  }

  // Sylvester's criterion.
  bool positive_definite() const {
    const auto& m = entries;
    return m[0][0] > 0.0 && m[0][0] * m[1][1] - m[0][1] * m[1][0] > 0.0 && det() > 0.0;
  }

  double quadratic(const Vec3& v) const {
    double s = 0.0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) s += entries[i][j] * v[i] * v[j];
    return s;
  }

  // |D eta v|^2; equal to quadratic(v) but without the cancellation between
  // large off-diagonal terms near blowup.
  double factored_quadratic(const Vec3& v) const {
    double s = 0.0;
    for (int i = 0; i < 3; ++i) {
      const double r = factor[i][0] * v[0] + factor[i][1] * v[1] + factor[i][2] * v[2];
      s += r * r;
    }
    return s;
  }
};

// Lambda(t) from the Jacobian components f (radial) and g (vertical).
inline StretchMatrix stretch_from(Location loc, Parity par, const SwirlConstants& w, double f,
                                  double g, double t) {
  StretchMatrix m;
  m.time = t;
  auto& d = m.factor;
  d = Mat3{};
  d[0][0] = f;
  d[2][2] = g;
  if (loc == Location::Axis) {
    d[1][1] = f;
  } else if (par == Parity::EvenSwirl) {
    d[1][0] = w.b2 * t;
    d[1][1] = 1.0;
  } else {
    d[1][1] = 1.0;
    d[1][2] = w.b3 * t;
  }
  auto& e = m.entries;
  e = Mat3{};
  if (loc == Location::Axis) {
    e[0][0] = f * f;
    e[1][1] = f * f;
    e[2][2] = g * g;
  } else if (par == Parity::EvenSwirl) {
    const double bt = w.b2 * t;
    e[0][0] = f * f + bt * bt;
    e[0][1] = e[1][0] = bt;
    e[1][1] = 1.0;
    e[2][2] = g * g;
  } else {
    const double bt = w.b3 * t;
    e[0][0] = f * f;
    e[1][1] = 1.0;
    e[1][2] = e[2][1] = bt;
    e[2][2] = bt * bt + g * g;
  }
  return m;
}

inline StretchMatrix build_stretch(const JacobiSolution& sol, double t) {
  const auto p = sol.at(t);
  return stretch_from(sol.location, sol.parity, sol.swirl, p.f, p.g, t);
}

inline StretchMatrix build_stretch(const JacobiSolution& sol, const FixedPointScenario& s, double t) {
  const auto p = sol.at(t);
  return stretch_from(s.location, s.parity, s.swirl, p.f, p.g, t);
}

// Initial vorticity direction times magnitude at the fixed point.
inline Vec3 initial_vorticity(Location loc, Parity par, const SwirlConstants& w) {
  if (loc == Location::Axis) return par == Parity::EvenSwirl ? Vec3{0, 0, 2.0 * w.b0} : Vec3{0, 0, 0};
  if (par == Parity::EvenSwirl) return Vec3{0, 0, w.b1 + w.b2};
  return Vec3{-w.b3, 0, 0};
}

inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

inline double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

// Variation v = f e_r + g e_theta + h e_z sampled on a grid with its time
// derivative and quadrature weights. The grid is nondecreasing; a repeated
// node separates panels, across which the derivative may jump. A panel is
// uniform in t, or uniform in ln(T - t) for panels accumulating at a pole T.
struct VariationField {
  std::vector<double> t, f, g, h, fd, gd, hd, w;
  bool endpoint_zero = true;

  // Returns (f, g, h, f', g', h') at t.
  using Eval = std::function<std::array<double, 6>(double)>;

  struct Panel {
    double t0 = 0.0;
    double t1 = 0.0;
    Eval eval;
    std::optional<double> log_pole;
  };

  static VariationField from_panels(const std::vector<Panel>& panels, int nodes_per_unit,
                                    int min_per_panel = 64) {
    VariationField v;
    for (const auto& p : panels) {
      if (!(p.t1 > p.t0)) throw Error(ErrorCode::InvalidArgument, "empty variation panel");
      double x0 = p.t0, x1 = p.t1;
      if (p.log_pole) {
        if (!(p.t1 < *p.log_pole)) throw Error(ErrorCode::InvalidArgument, "panel reaches the pole");
        x0 = std::log(*p.log_pole - p.t0);
        x1 = std::log(*p.log_pole - p.t1);
      }
      int n = std::max(min_per_panel,
                       static_cast<int>(std::ceil(nodes_per_unit * std::abs(x1 - x0))));
      if (n % 2) ++n;
      const double hx = (x1 - x0) / n;
      for (int i = 0; i <= n; ++i) {
        const double xi = x0 + hx * i;
        double t = p.log_pole ? *p.log_pole - std::exp(xi) : xi;
        if (i == 0) t = p.t0;
        if (i == n) t = p.t1;
        // Simpson weight in x times |dt/dx|.
        const double sw = std::abs(hx) / 3.0 * (i == 0 || i == n ? 1.0 : (i % 2 ? 4.0 : 2.0));
        v.w.push_back(p.log_pole ? sw * (*p.log_pole - t) : sw);
        const auto x = p.eval(t);
        v.t.push_back(t);
        v.f.push_back(x[0]);
        v.g.push_back(x[1]);
        v.h.push_back(x[2]);
        v.fd.push_back(x[3]);
        v.gd.push_back(x[4]);
        v.hd.push_back(x[5]);
      }
    }
    return v;
  }

  static VariationField from_function(double t0, double t1, const Eval& eval, int nodes_per_unit,
                                      int min_per_panel = 64) {
    return from_panels({Panel{t0, t1, eval, std::nullopt}}, nodes_per_unit, min_per_panel);
  }

  // Derivatives by fourth-order finite differences within each panel.
  static VariationField from_values(std::vector<double> t, std::vector<double> f,
                                    std::vector<double> g, std::vector<double> h,
                                    bool endpoint_zero = true) {
    const std::size_t n = t.size();
    if (f.size() != n || g.size() != n || h.size() != n)
      throw Error(ErrorCode::InvalidArgument, "variation series lengths differ");
    VariationField v;
    v.t = std::move(t);
    v.f = std::move(f);
    v.g = std::move(g);
    v.h = std::move(h);
    v.endpoint_zero = endpoint_zero;
    v.fd.assign(n, 0.0);
    v.gd.assign(n, 0.0);
    v.hd.assign(n, 0.0);
    for (const auto& [a, b] : v.panel_ranges()) {
      const std::size_t m = b - a + 1;
      if (m < 5) throw Error(ErrorCode::InvalidArgument, "panel needs at least 5 nodes");
      const double dt = (v.t[b] - v.t[a]) / static_cast<double>(m - 1);
      auto diff = [&](const std::vector<double>& y, std::vector<double>& d) {
        for (std::size_t i = a; i <= b; ++i) {
          if (i >= a + 2 && i + 2 <= b)
            d[i] = (y[i - 2] - 8 * y[i - 1] + 8 * y[i + 1] - y[i + 2]) / (12 * dt);
          else if (i < a + 2)
            d[i] = (-25 * y[i] + 48 * y[i + 1] - 36 * y[i + 2] + 16 * y[i + 3] - 3 * y[i + 4]) /
                   (12 * dt);
          else
            d[i] = (25 * y[i] - 48 * y[i - 1] + 36 * y[i - 2] - 16 * y[i - 3] + 3 * y[i - 4]) /
                   (12 * dt);
        }
      };
      diff(v.f, v.fd);
      diff(v.g, v.gd);
      diff(v.h, v.hd);
    }
    v.w = simpson_weights(v);
    return v;
  }

  // Composite Simpson weights per uniform panel; an odd interval count ends
  // with a three-point rule on the last interval.
  static std::vector<double> simpson_weights(const VariationField& v) {
    std::vector<double> w(v.t.size(), 0.0);
    for (const auto& [a, b] : v.panel_ranges()) {
      const std::size_t m = b - a;
      if (m == 0) continue;
      const double dt = (v.t[b] - v.t[a]) / static_cast<double>(m);
      if (m == 1) {
        w[a] += 0.5 * dt;
        w[b] += 0.5 * dt;
        continue;
      }
      std::size_t i = a;
      for (; i + 2 <= b; i += 2) {
        w[i] += dt / 3.0;
        w[i + 1] += 4.0 * dt / 3.0;
        w[i + 2] += dt / 3.0;
      }
      if (i < b) {
        w[i - 1] -= dt / 12.0;
        w[i] += 8.0 * dt / 12.0;
        w[i + 1] += 5.0 * dt / 12.0;
      }
    }
    return w;
  }

  // Index ranges [first, last] of the panels.
  std::vector<std::pair<std::size_t, std::size_t>> panel_ranges() const {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    if (t.empty()) return out;
    std::size_t a = 0;
    for (std::size_t i = 1; i < t.size(); ++i) {
      if (t[i] < t[i - 1]) throw Error(ErrorCode::NonMonotoneTimes, "variation grid decreases");
      if (t[i] == t[i - 1]) {  // panel junction
        out.emplace_back(a, i - 1);
        a = i;
      }
    }
    out.emplace_back(a, t.size() - 1);
    return out;
  }

  VariationField scaled(double c) const {
    VariationField v = *this;
    for (auto* s : {&v.f, &v.g, &v.h, &v.fd, &v.gd, &v.hd})
      for (double& x : *s) x *= c;
    return v;
  }

  double sup_norm() const {
    double m = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i)
      m = std::max({m, std::abs(f[i]), std::abs(g[i]), std::abs(h[i])});
    return m;
  }

  static VariationField zero(double t0, double t1, int n = 64) {
    return from_function(
        t0, t1, [](double) { return std::array<double, 6>{}; }, 0, n);
  }
};

struct IndexFormResult {
  double value = 0.0;
  double kinetic_term = 0.0;
  double rotation_term = 0.0;
  bool decomposition_valid = false;
  std::size_t nodes = 0;

  nlohmann::ordered_json to_json() const {
    return {{"value", value},
            {"kinetic_term", kinetic_term},
            {"rotation_term", rotation_term},
            {"decomposition_valid", decomposition_valid},
            {"nodes", nodes}};
  }
};

namespace detail {

inline double simpson(const VariationField& v, const std::vector<double>& y) {
  if (v.w.size() != v.t.size())
    throw Error(ErrorCode::InvalidArgument, "variation field has no quadrature weights");
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += v.w[i] * y[i];
  return s;
}

}  // namespace detail

// Quadrature of the localized index form over the variation grid.
inline IndexFormResult index_form(const VariationField& v, const JacobiSolution& sol,
                                  const FixedPointScenario& s,
                                  std::optional<std::pair<double, double>> interval = {}) {
  if (v.t.size() < 2) throw Error(ErrorCode::InvalidArgument, "variation grid too small");
  if (interval && (std::abs(interval->first - v.t.front()) > 1e-12 ||
                   std::abs(interval->second - v.t.back()) > 1e-12))
    throw Error(ErrorCode::InvalidArgument, "variation grid does not span the interval");
  const double scale = std::max(1.0, v.sup_norm());
  const double etol = 1e-9 * scale;
  for (std::size_t i : {std::size_t{0}, v.t.size() - 1})
    if (std::abs(v.f[i]) > etol || std::abs(v.g[i]) > etol || std::abs(v.h[i]) > etol)
      throw Error(ErrorCode::EndpointNonzero,
                  "variation does not vanish at t=" + std::to_string(v.t[i]));
  if (v.t.front() < sol.t_begin() || v.t.back() > sol.t_last())
    throw Error(ErrorCode::DomainError, "variation interval outside the solution window");

  const Vec3 w0 = initial_vorticity(s.location, s.parity, s.swirl);
  std::vector<double> kin(v.t.size()), rot(v.t.size()), tot(v.t.size());
  for (std::size_t i = 0; i < v.t.size(); ++i) {
    const auto L = build_stretch(sol, s, v.t[i]);
    const Vec3 vd{v.fd[i], v.gd[i], v.hd[i]};
    const Vec3 vv{v.f[i], v.g[i], v.h[i]};
    kin[i] = L.factored_quadratic(vd);
    rot[i] = dot(cross(w0, vv), vd);
    tot[i] = kin[i] + rot[i];
  }
  IndexFormResult r;
  r.kinetic_term = detail::simpson(v, kin);
  r.rotation_term = detail::simpson(v, rot);
  r.value = detail::simpson(v, tot);
  r.nodes = v.t.size();
  r.decomposition_valid =
      std::abs(r.value - (r.kinetic_term + r.rotation_term)) <=
      1e-12 * std::max({1.0, std::abs(r.kinetic_term), std::abs(r.rotation_term)});
  return r;
}

// ---------------------------------------------------------------------------
// Trial variations

// Inverse of the winding integral by bisection: the t with winding(t) = target.
inline double time_at_winding(const JacobiSolution& sol, double target) {
  const auto& W = sol.winding_integral;
  if (target <= W.front()) return sol.grid.front();
  if (target >= W.back()) return sol.grid.back();
  const auto it = std::lower_bound(W.begin(), W.end(), target);
  const std::size_t j = static_cast<std::size_t>(it - W.begin());
  double lo = sol.grid[j - 1], hi = sol.grid[j];
  for (int k = 0; k < 200 && hi - lo > 1e-15 * std::max(1.0, hi); ++k) {
    const double mid = 0.5 * (lo + hi);
    if (sol.at(mid).winding < target)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

// Axis, even swirl: f a sine in the winding time s = int dt / alpha^2,
// g' = k - w f / alpha^2 with k fixed by g(t2) = 0, h = 0 (w = 2 b0).
inline VariationField axis_sine_trial(const JacobiSolution& sol, const FixedPointScenario& s,
                                      double t1, double t2, int m, int nodes_per_unit,
                                      int min_per_panel = 64) {
  const double w = initial_vorticity(s.location, s.parity, s.swirl)[2];
  const double s1 = sol.at(t1).winding;
  const double Ls = sol.at(t2).winding - s1;
  if (!(Ls > 0.0)) throw Error(ErrorCode::InvalidArgument, "empty rescaled interval");
  const double om = m * M_PI / Ls;
  const double amp = Ls / (m * M_PI);
  const double k = w * amp * (1.0 - std::cos(m * M_PI)) / (t2 - t1);
  auto eval = [&sol, s1, om, amp, k, w, t1, t2](double t) {
    const auto p = sol.at(t);
    const double a2 = p.f * p.f;
    const double x = om * (p.winding - s1);
    double f = std::sin(x);
    double g = k * (t - t1) - w * amp * (1.0 - std::cos(x));
    if (t == t1 || t == t2) f = g = 0.0;  // exact endpoint values
    const double fd = std::cos(x) * om / a2;
    const double gd = k - w * std::sin(x) / a2;
    return std::array<double, 6>{f, g, 0.0, fd, gd, 0.0};
  };
  return VariationField::from_function(t1, t2, eval, nodes_per_unit, min_per_panel);
}

// Reduced axis form k^2 int alpha^2 + int alpha^2 f'^2 - w^2 f^2 / alpha^2
// for the sine trial, on the same nodes.
inline double axis_reduced_index(const JacobiSolution& sol, const FixedPointScenario& s,
                                 const VariationField& v) {
  const double w = initial_vorticity(s.location, s.parity, s.swirl)[2];
  const double k = v.gd.front() + w * v.f.front() / std::pow(sol.at(v.t.front()).f, 2);
  std::vector<double> y(v.t.size());
  for (std::size_t i = 0; i < v.t.size(); ++i) {
    const double a2 = std::pow(sol.at(v.t[i]).f, 2);
    y[i] = k * k * a2 + a2 * v.fd[i] * v.fd[i] - w * w * v.f[i] * v.f[i] / a2;
  }
  return detail::simpson(v, y);
}

// Log-oscillator f = u^{-1/2} cos(beta ln u + phi), u = T - t, beta = psi/2.
struct LogOscillator {
  double T = 1.0;
  double beta = 1.0;
  double phi = 0.0;

  double theta(double t) const { return beta * std::log(T - t) + phi; }
  double f(double t) const { return std::cos(theta(t)) / std::sqrt(T - t); }
  double fdot(double t) const {
    const double u = T - t;
    const double th = theta(t);
    return (0.5 * std::cos(th) + beta * std::sin(th)) / (u * std::sqrt(u));
  }
  // G with dG/dt = -f, in closed form.
  double G(double t) const {
    const double x = std::log(T - t);
    const std::complex<double> c(0.5, beta);
    return std::real(std::exp(c * x + std::complex<double>(0.0, phi)) / c);
  }
  double integral(double a, double b) const { return G(a) - G(b); }
  // Zero of cos(theta) with index n: theta = pi/2 + n pi.
  double zero(long n) const { return T - std::exp((M_PI / 2 + n * M_PI - phi) / beta); }
};

// Boundary, even swirl: f built from log-oscillator lobes on [t_a, ..., t_end]
// with per-lobe weights, g = k (t - t1) - b1 int f - b2 t f, h = 0.
inline VariationField boundary_log_trial(const FixedPointScenario& s, const LogOscillator& lo,
                                         const std::vector<double>& edges,
                                         const std::vector<double>& weights, int nodes_per_unit,
                                         int min_per_panel = 64) {
  const double b1 = s.swirl.b1, b2 = s.swirl.b2;
  const double t1 = edges.front(), t2 = edges.back();
  std::vector<double> cum{0.0};
  for (std::size_t i = 0; i + 1 < edges.size(); ++i)
    cum.push_back(cum.back() + weights[i] * lo.integral(edges[i], edges[i + 1]));
  const double k = b1 * cum.back() / (t2 - t1);
  std::vector<VariationField::Panel> panels;
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
    const double a = edges[i], b = edges[i + 1], c = weights[i], base = cum[i];
    panels.push_back({a, b, [=, &lo](double t) {
                        const bool end = t == a || t == b;
                        const double f = end ? 0.0 : c * lo.f(t);
                        const double F = base + c * lo.integral(a, t);
                        const double fd = c * lo.fdot(t);
                        double g = k * (t - t1) - b1 * F - b2 * t * f;
                        if (t == t1 || t == t2) g = 0.0;
                        const double gd = k - b1 * f - b2 * (f + t * fd);
                        return std::array<double, 6>{f, g, 0.0, fd, gd, 0.0};
                      },
                      lo.T});
  }
  return VariationField::from_panels(panels, nodes_per_unit, min_per_panel);
}

// Reduced boundary form k^2 (t2 - t1) + int alpha^2 f'^2 - b1 (b1 + b2) f^2.
inline double boundary_reduced_index(const JacobiSolution& sol, const FixedPointScenario& s,
                                     const VariationField& v) {
  const double b1 = s.swirl.b1, b2 = s.swirl.b2;
  const double t1 = v.t.front(), t2 = v.t.back();
  const double k = v.gd.front() + b1 * v.f.front() + b2 * (v.f.front() + t1 * v.fd.front());
  std::vector<double> y(v.t.size());
  for (std::size_t i = 0; i < v.t.size(); ++i) {
    const double a2 = std::pow(sol.at(v.t[i]).f, 2);
    y[i] = a2 * v.fd[i] * v.fd[i] - b1 * (b1 + b2) * v.f[i] * v.f[i];
  }
  return k * k * (t2 - t1) + detail::simpson(v, y);
}

// Boundary, odd swirl: h a sine, g = -b3 t h, f = 0. This makes the
// (g, h) block of the form a perfect square plus int g_z^2 h'^2.
inline VariationField boundary_odd_trial(const FixedPointScenario& s, double t1, double t2, int m,
                                         int nodes_per_unit, int min_per_panel = 64) {
  const double b3 = s.swirl.b3;
  const double om = m * M_PI / (t2 - t1);
  auto eval = [=](double t) {
    const double x = om * (t - t1);
    double h = std::sin(x);
    if (t == t1 || t == t2) h = 0.0;
    const double hd = om * std::cos(x);
    return std::array<double, 6>{0.0, -b3 * t * h, h, 0.0, -b3 * (h + t * hd), hd};
  };
  return VariationField::from_function(t1, t2, eval, nodes_per_unit, min_per_panel);
}

// Random endpoint-vanishing field: each component a random sine series.
inline VariationField random_trial_field(std::mt19937_64& rng, double t1, double t2,
                                         int modes = 4, int nodes = 400) {
  auto unit = [&rng] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
  std::array<std::vector<double>, 3> c;
  for (auto& comp : c)
    for (int j = 0; j < modes; ++j) comp.push_back((2.0 * unit() - 1.0) / (j + 1));
  const double L = t2 - t1;
  auto eval = [c, t1, t2, L, modes](double t) {
    std::array<double, 6> out{};
    for (int k = 0; k < 3; ++k)
      for (int j = 0; j < modes; ++j) {
        const double om = (j + 1) * M_PI / L;
        out[k] += (t == t1 || t == t2) ? 0.0 : c[k][j] * std::sin(om * (t - t1));
        out[3 + k] += c[k][j] * om * std::cos(om * (t - t1));
      }
    return out;
  };
  return VariationField::from_function(t1, t2, eval, 0, nodes);
}

// ---------------------------------------------------------------------------
// Conjugate-point search

enum class TrialFamily { SineInRescaledTime, LogOscillator };

inline const char* to_string(TrialFamily f) {
  return f == TrialFamily::SineInRescaledTime ? "SineInRescaledTime" : "LogOscillator";
}

struct LogParams {
  std::optional<double> zeta;  // zeta^2 = 4 b1 (b1 + b2) when absent
  std::optional<double> q;     // |alpha_r'(T)|, estimated from the solution when absent
  std::optional<double> psi;   // sqrt(zeta^2 / q^2 - 1) when absent
  std::vector<double> phases{0.0};
  std::vector<double> detune{0.1, 0.25};  // trial frequency psi (1 - delta)
  std::optional<double> T;           // blowup time, from the solution when absent
};

struct ConjugateSearchParams {
  std::vector<int> mode_counts{1, 2, 3, 4};
  TrialFamily family = TrialFamily::SineInRescaledTime;
  std::optional<LogParams> log_params;
  bool mean_zero = true;
  double tol_negative = 1e-8;
  double t_start = 0.0;
  double refine_tol = 1e-7;
  std::size_t max_intervals = 256;
};

struct NegativeInterval {
  double t1 = 0.0;
  double t2 = 0.0;
  double value = 0.0;
};

struct ConjugateReport {
  std::vector<NegativeInterval> intervals;
  double gap_sum = 0.0;
  bool none_found = true;
  nlohmann::ordered_json diagnostics = nlohmann::ordered_json::object();

  std::optional<NegativeInterval> first() const {
    if (intervals.empty()) return std::nullopt;
    return intervals.front();
  }

  // Chain endpoints of the detected intervals, in increasing order.
  std::vector<double> times() const {
    std::vector<double> out;
    for (const auto& iv : intervals) {
      out.push_back(iv.t1);
      out.push_back(iv.t2);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json iv = nlohmann::ordered_json::array();
    for (const auto& i : intervals) iv.push_back({i.t1, i.t2, i.value});
    nlohmann::ordered_json d = diagnostics;
    d["none_found"] = none_found;
    return {{"intervals", iv}, {"gap_sum", gap_sum}, {"diagnostics", d}};
  }
};

// Lower bound sum 2 / (t_{n+1} - t_n) on the integrated curvature.
inline double curvature_gap_sum(const std::vector<double>& times) {
  double s = 0.0;
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (!(times[i] > times[i - 1]))
      throw Error(ErrorCode::NonMonotoneTimes, "conjugate times must be strictly increasing");
    s += 2.0 / (times[i] - times[i - 1]);
  }
  return s;
}

namespace detail {

struct Refined {
  double value = 0.0;
  bool converged = false;
  std::size_t nodes = 0;
};

// Doubles the node density until successive values agree to `tol`.
template <class Make>
Refined refine_index(const Make& make, const JacobiSolution& sol, const FixedPointScenario& s,
                     int ppu, double tol) {
  int min_nodes = 64;
  double prev = index_form(make(ppu, min_nodes), sol, s).value;
  for (int it = 0; it < 12; ++it) {
    ppu *= 2;
    min_nodes *= 2;
    const auto v = make(ppu, min_nodes);
    const double cur = index_form(v, sol, s).value;
    if (std::abs(cur - prev) < tol) return {cur, true, v.t.size()};
    prev = cur;
  }
  return {prev, false, 0};
}

}  // namespace detail

inline ConjugateReport find_conjugate(const JacobiSolution& sol, const FixedPointScenario& s,
                                      const ConjugateSearchParams& params = {}) {
  using ojson = nlohmann::ordered_json;
  ConjugateReport rep;
  const int ppu = s.tolerances.quad_points_per_unit;
  const double t_lo = std::max(params.t_start, sol.t_begin());
  const double t_hi = sol.t_last();
  rep.diagnostics["window"] = {t_lo, t_hi};
  rep.diagnostics["location"] = to_string(s.location);
  rep.diagnostics["parity"] = to_string(s.parity);

  auto accept = [&](double t1, double t2, double value) {
    rep.intervals.push_back({t1, t2, value});
  };

  const bool axis_still =
      s.location == Location::Axis && initial_vorticity(s.location, s.parity, s.swirl)[2] == 0.0;
  if (s.parity == Parity::OddSwirl || axis_still) {
    // No curve-shortening variation is expected; run the odd trial family
    // (or the axis sine family) over nested intervals as a record.
    rep.diagnostics["family"] =
        s.parity == Parity::OddSwirl ? "OddSquare" : to_string(TrialFamily::SineInRescaledTime);
    double most_negative = std::numeric_limits<double>::infinity();
    std::size_t trials = 0;
    for (int j = 1; j <= 8; ++j) {
      const double t2 = t_lo + (t_hi - t_lo) * j / 8.0;
      for (int m : params.mode_counts) {
        const auto v = s.location == Location::Boundary
                           ? boundary_odd_trial(s, t_lo, t2, m, ppu)
                           : VariationField::from_function(
                                 t_lo, t2,
                                 [=](double t) {
                                   const double om = m * M_PI / (t2 - t_lo);
                                   const double x = om * (t - t_lo);
                                   const double f = (t == t_lo || t == t2) ? 0.0 : std::sin(x);
                                   return std::array<double, 6>{f, 0, 0, om * std::cos(x), 0, 0};
                                 },
                                 ppu);
        const double I = index_form(v, sol, s).value;
        most_negative = std::min(most_negative, I);
        ++trials;
        if (I < -params.tol_negative) accept(t_lo, t2, I);
      }
    }
    rep.diagnostics["trials"] = trials;
    rep.diagnostics["min_value"] = most_negative;
  } else if (s.location == Location::Axis) {
    if (params.family != TrialFamily::SineInRescaledTime)
      throw Error(ErrorCode::InvalidArgument, "axis search uses the SineInRescaledTime family");
    const double w = initial_vorticity(s.location, s.parity, s.swirl)[2];
    const double ds = (M_PI / std::abs(w)) / 8.0;
    const double s_end = sol.winding_integral.back();
    rep.diagnostics["family"] = to_string(TrialFamily::SineInRescaledTime);
    rep.diagnostics["rotation_coefficient"] = w;
    rep.diagnostics["rescaled_step"] = ds;
    rep.diagnostics["rescaled_length_total"] = s_end - sol.at(t_lo).winding;
    std::size_t trials = 0;
    double t1 = t_lo;
    while (rep.intervals.size() < params.max_intervals) {
      const double s1 = sol.at(t1).winding;
      bool found = false;
      for (int j = 1; s1 + j * ds <= s_end && !found; ++j) {
        const double t2 = std::min(time_at_winding(sol, s1 + j * ds), t_hi);
        if (!(t2 > t1)) continue;
        for (int m : params.mode_counts) {
          auto make = [&](int n, int mn) { return axis_sine_trial(sol, s, t1, t2, m, n, mn); };
          ++trials;
          if (index_form(make(ppu, 64), sol, s).value >= -params.tol_negative) continue;
          const auto r = detail::refine_index(make, sol, s, ppu, params.refine_tol);
          if (r.converged && r.value < -params.tol_negative) {
            accept(t1, t2, r.value);
            t1 = t2;
            found = true;
            break;
          }
        }
      }
      if (!found) break;
    }
    rep.diagnostics["trials"] = trials;
  } else {
    if (params.family != TrialFamily::LogOscillator)
      throw Error(ErrorCode::InvalidArgument, "boundary search uses the LogOscillator family");
    const LogParams lp = params.log_params.value_or(LogParams{});
    const double b1 = s.swirl.b1, b2 = s.swirl.b2;
    const double zeta2 = lp.zeta ? *lp.zeta * *lp.zeta : 4.0 * b1 * (b1 + b2);
    double q = 0.0;
    if (lp.q) {
      q = *lp.q;
      rep.diagnostics["q_source"] = "params";
    } else {
      q = std::abs(sol.fp.back());
      rep.diagnostics["q_source"] = "solution f' at last grid point";
    }
    double T = 0.0;
    if (lp.T) {
      T = *lp.T;
      rep.diagnostics["T_source"] = "params";
    } else if (sol.blowup_time) {
      T = *sol.blowup_time;
      rep.diagnostics["T_source"] = "solution blowup time";
    } else {
      T = sol.t_last();
      rep.diagnostics["T_source"] = "solution window end";
    }
    rep.diagnostics["family"] = to_string(TrialFamily::LogOscillator);
    rep.diagnostics["zeta2"] = zeta2;
    rep.diagnostics["q"] = q;
    rep.diagnostics["T"] = T;
    if (!(q > 0.0) || !(zeta2 > q * q)) {
      rep.diagnostics["reason"] = "zeta^2 <= q^2: no oscillatory minimizer";
    } else {
      const double psi_ref = std::sqrt(zeta2 / (q * q) - 1.0);
      if (lp.psi && std::abs(*lp.psi * *lp.psi - psi_ref * psi_ref) > 1e-9 * (1 + psi_ref * psi_ref))
        throw Error(ErrorCode::InvalidArgument, "psi^2 must equal zeta^2/q^2 - 1");
      const double psi = lp.psi.value_or(psi_ref);
      rep.diagnostics["psi"] = psi;
      std::vector<NegativeInterval> best;
      ojson tried = ojson::array();
      for (double delta : lp.detune)
        for (double phi : lp.phases) {
          LogOscillator lo{T, 0.5 * psi * (1.0 - delta), phi};
          std::vector<NegativeInterval> found;
          const int lobes = params.mean_zero ? 2 : 1;
          // First lobe edge at or after t_lo.
          long n = static_cast<long>(
              std::floor((lo.beta * std::log(T - t_lo) + phi - M_PI / 2) / M_PI));
          while (found.size() < params.max_intervals) {
            std::vector<double> edges;
            for (int j = 0; j <= lobes; ++j) edges.push_back(lo.zero(n - j));
            if (edges.back() > t_hi || !(edges.front() >= t_lo)) break;
            std::vector<double> weights{1.0};
            if (lobes == 2)
              weights.push_back(-lo.integral(edges[0], edges[1]) / lo.integral(edges[1], edges[2]));
            auto make = [&](int nn, int mn) {
              return boundary_log_trial(s, lo, edges, weights, nn, mn);
            };
            const auto r = detail::refine_index(make, sol, s, ppu, params.refine_tol);
            if (r.converged && r.value < -params.tol_negative)
              found.push_back({edges.front(), edges.back(), r.value});
            n -= lobes;
          }
          tried.push_back({{"detune", delta}, {"phase", phi}, {"negative", found.size()}});
          if (found.size() > best.size()) best = found;
        }
      rep.diagnostics["trials"] = tried;
      for (const auto& iv : best) accept(iv.t1, iv.t2, iv.value);
    }
  }

  rep.none_found = rep.intervals.empty();
  rep.gap_sum = curvature_gap_sum(rep.times());
  return rep;
}

// ---------------------------------------------------------------------------
// Diagnostics

struct DiagnosticSeries {
  std::vector<double> t, delta_p, cumulative, xi;
  double integral = 0.0;
  double sup_xi2 = 0.0;
  double poincare_constant = 0.0;
  bool poincare_ok = false;
  bool divergence_trend = false;

  nlohmann::ordered_json summary() const {
    return {{"integral", integral},
            {"sup_xi2", sup_xi2},
            {"poincare_constant", poincare_constant},
            {"poincare_ok", poincare_ok},
            {"divergence_trend", divergence_trend}};
  }
};

namespace detail {

// Mean of a series over the last fifth and over the fifth before it.
inline std::pair<double, double> fifth_means(const std::vector<double>& t,
                                             const std::vector<double>& y) {
  const double a = t.front(), b = t.back(), L = b - a;
  double s1 = 0, s2 = 0;
  int n1 = 0, n2 = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] >= a + 0.8 * L) {
      s1 += y[i];
      ++n1;
    } else if (t[i] >= a + 0.6 * L) {
      s2 += y[i];
      ++n2;
    }
  }
  return {n1 ? s1 / n1 : 0.0, n2 ? s2 / n2 : 0.0};
}

}  // namespace detail

// Delta P = -2 (f'/f)^2 at the odd-swirl boundary point, its running integral,
// xi = ln f, and the one-sided Poincare bound int Delta P <= -(2/T) sup xi^2
// on a window of length T (xi vanishes at the start).
inline DiagnosticSeries laplacian_identity_odd(const JacobiSolution& sol, double tol = 1e-8) {
  DiagnosticSeries d;
  for (double f : sol.f)
    if (!(f > 0.0)) throw Error(ErrorCode::NonpositiveF, "f must stay positive on the window");
  auto dp = [&](double t) {
    const auto p = sol.at(t);
    if (!(p.f > 0.0)) throw Error(ErrorCode::NonpositiveF, "f must stay positive on the window");
    const double r = p.fp / p.f;
    return -2.0 * r * r;
  };
  // running integral as its own ODE, read back through dense output
  ode::FirstOrderIVP<1> iv;
  iv.t_start = sol.t_begin();
  iv.t_end = sol.t_last();
  iv.rhs = [&dp](double t, const ode::State<1>&) { return ode::State<1>{dp(t)}; };
  SolverTolerances qt;
  qt.abs_tol = 1e-13;
  qt.rel_tol = 1e-12;
  std::optional<ode::Trajectory<1>> running;
  if (iv.t_end > iv.t_start) running = ode::integrate<1>(iv, qt);
  double cum = 0.0;
  for (std::size_t i = 0; i < sol.size(); ++i) {
    const double t = sol.grid[i];
    const double r = sol.fp[i] / sol.f[i];
    if (running) cum = running->at(t)[0];
    d.t.push_back(t);
    d.delta_p.push_back(-2.0 * r * r);
    d.cumulative.push_back(cum);
    const double xi = std::log(sol.f[i]);
    d.xi.push_back(xi);
    d.sup_xi2 = std::max(d.sup_xi2, xi * xi);
  }
  d.integral = cum;
  const double T = sol.t_last() - sol.t_begin();
  d.poincare_constant = 2.0 / T;
  d.poincare_ok = d.integral <= -d.poincare_constant * d.sup_xi2 + tol;
  std::vector<double> abs_dp(d.delta_p.size());
  std::transform(d.delta_p.begin(), d.delta_p.end(), abs_dp.begin(),
                 [](double x) { return std::abs(x); });
  const auto [f_last, f_prev] = detail::fifth_means(sol.grid, sol.f);
  const auto [p_last, p_prev] = detail::fifth_means(sol.grid, abs_dp);
  d.divergence_trend = f_last > f_prev && p_last > p_prev;
  return d;
}

enum class AlignmentAxis { R = 0, Theta = 1, Z = 2 };

// Lambda_33 / (Lambda^11 + Lambda^22) in the frame whose third vector is
// `axis`; upper indices are entries of the inverse.
inline double alignment_integrand(const StretchMatrix& L, AlignmentAxis axis) {
  const int k = static_cast<int>(axis);
  const int i = (k + 1) % 3, j = (k + 2) % 3;
  const auto inv = L.inverse();
  return L.entries[k][k] / (inv[i][i] + inv[j][j]);
}

struct FredholmReport {
  std::vector<double> t, integrand, cumulative, inv11, inv22;
  double integral = 0.0;
  double ratio = 0.0;  // int Lambda^11 / int Lambda^22
  bool integrand_increasing = false;
  bool ratio_trend_up = false;
  AlignmentAxis axis = AlignmentAxis::Z;

  nlohmann::ordered_json to_json() const {
    return {{"axis", axis == AlignmentAxis::Z ? "e_z" : axis == AlignmentAxis::R ? "e_r" : "e_theta"},
            {"integral", integral},
            {"ratio", ratio},
            {"integrand_increasing", integrand_increasing},
            {"ratio_trend_up", ratio_trend_up},
            {"final_integrand", integrand.empty() ? 0.0 : integrand.back()}};
  }
};

// Both quantities whose finiteness decides between conjugate sequences and
// vorticity alignment, evaluated on the solution window.
inline FredholmReport fredholm_diagnostics(const JacobiSolution& sol, const FixedPointScenario& s) {
  const Vec3 w0 = initial_vorticity(s.location, s.parity, s.swirl);
  if (dot(w0, w0) == 0.0) throw Error(ErrorCode::ZeroVorticity, "omega0 vanishes");
  FredholmReport r;
  r.axis = w0[0] != 0.0 ? AlignmentAxis::R : AlignmentAxis::Z;
  const int k = static_cast<int>(r.axis);
  const int i1 = (k + 1) % 3, i2 = (k + 2) % 3;
  auto eval = [&](double t, double& a11, double& a22) {
    const auto L = build_stretch(sol, s, t);
    const auto inv = L.inverse();
    a11 = inv[i1][i1];
    a22 = inv[i2][i2];
    return L.entries[k][k] / (a11 + a22);
  };
  ode::FirstOrderIVP<3> iv;
  iv.t_start = sol.t_begin();
  iv.t_end = sol.t_last();
  iv.rhs = [&eval](double t, const ode::State<3>&) {
    double a11, a22;
    const double y = eval(t, a11, a22);
    return ode::State<3>{y, a11, a22};
  };
  SolverTolerances qt;
  qt.abs_tol = 1e-13;
  qt.rel_tol = 1e-12;
  std::optional<ode::Trajectory<3>> running;
  if (iv.t_end > iv.t_start) running = ode::integrate<3>(iv, qt);
  double cum = 0.0, c11 = 0.0, c22 = 0.0;
  std::vector<double> ratios;
  for (std::size_t n = 0; n < sol.size(); ++n) {
    const double t = sol.grid[n];
    double a11, a22;
    const double y = eval(t, a11, a22);
    if (running) {
      const auto x = running->at(t);
      cum = x[0];
      c11 = x[1];
      c22 = x[2];
    }
    r.t.push_back(t);
    r.integrand.push_back(y);
    r.cumulative.push_back(cum);
    r.inv11.push_back(a11);
    r.inv22.push_back(a22);
    ratios.push_back(c22 > 0.0 ? c11 / c22 : 1.0);
  }
  r.integral = cum;
  r.ratio = ratios.back();
  const auto [y_last, y_prev] = detail::fifth_means(r.t, r.integrand);
  const auto [q_last, q_prev] = detail::fifth_means(r.t, ratios);
  r.integrand_increasing = y_last > y_prev;
  r.ratio_trend_up = q_last > q_prev;
  return r;
}

}  // namespace blowuplab
