#pragma once

// Prescribed scalar coefficients of time: pressure-Hessian components along a
// fixed-point trajectory. They are inputs to the models, never solved for.

#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "blowuplab/error.hpp"

namespace blowuplab {

class CoefficientProfile {
 public:
  struct Constant {
    double value = 0.0;
    bool operator==(const Constant&) const = default;
  };

  // Linear interpolation between knots, constant extrapolation outside.
  struct PiecewiseLinear {
    std::vector<std::pair<double, double>> knots;
    bool operator==(const PiecewiseLinear&) const = default;
  };

  // F(t) = H(s) / (T - t)^2 with log-time s = -ln(T - t); `inner` is H.
  struct PoleScaled {
    double T = 1.0;
    std::shared_ptr<const CoefficientProfile> inner;
    bool operator==(const PoleScaled& o) const {
      if (T != o.T) return false;
      if (!inner || !o.inner) return inner == o.inner;
      return *inner == *o.inner;
    }
  };

  // A constant together with the band [lower, upper] it is declared to lie in.
  struct BandConstant {
    double lower = 0.0;
    double upper = 0.0;
    double value = 0.0;
    bool operator==(const BandConstant&) const = default;
  };

  using Kind = std::variant<Constant, PiecewiseLinear, PoleScaled, BandConstant>;

  CoefficientProfile() : kind_(Constant{0.0}) {}
  explicit CoefficientProfile(Kind kind, std::string description = {})
      : kind_(std::move(kind)), description_(std::move(description)) {}

  static CoefficientProfile constant(double value, std::string description = {}) {
    return CoefficientProfile(Constant{value}, std::move(description));
  }
  static CoefficientProfile piecewise_linear(std::vector<std::pair<double, double>> knots,
                                             std::string description = {}) {
    return CoefficientProfile(PiecewiseLinear{std::move(knots)}, std::move(description));
  }
  static CoefficientProfile pole_scaled(double T, CoefficientProfile inner,
                                        std::string description = {}) {
    return CoefficientProfile(
        PoleScaled{T, std::make_shared<const CoefficientProfile>(std::move(inner))},
        std::move(description));
  }
  static CoefficientProfile band(double lower, double upper, double value,
                                 std::string description = {}) {
    return CoefficientProfile(BandConstant{lower, upper, value}, std::move(description));
  }

  const Kind& kind() const { return kind_; }
  const std::string& description() const { return description_; }

  template <class T>
  bool is() const { return std::holds_alternative<T>(kind_); }
  template <class T>
  const T& as() const { return std::get<T>(kind_); }

  double operator()(double t) const { return value(t); }

  double value(double t) const {
    return std::visit(
        [t](const auto& k) -> double {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, Constant>) {
            return k.value;
          } else if constexpr (std::is_same_v<K, BandConstant>) {
            return k.value;
          } else if constexpr (std::is_same_v<K, PiecewiseLinear>) {
            return pl_value(k, t);
          } else {
            const double u = pole_distance(k, t);
            return k.inner->value(-std::log(u)) / (u * u);
          }
        },
        kind_);
  }

  // Right derivative d/dt. At a knot the slope of the segment to its right.
  double slope(double t) const {
    return std::visit(
        [t](const auto& k) -> double {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, Constant> || std::is_same_v<K, BandConstant>) {
            return 0.0;
          } else if constexpr (std::is_same_v<K, PiecewiseLinear>) {
            return pl_slope(k, t);
          } else {
            const double u = pole_distance(k, t);
            const double s = -std::log(u);
            // dF/dt = (H'(s) + 2 H(s)) / u^3, since ds/dt = 1/u.
            return (k.inner->slope(s) + 2.0 * k.inner->value(s)) / (u * u * u);
          }
        },
        kind_);
  }

  // Times where the slope is discontinuous. Integrators step onto these.
  std::vector<double> breakpoints() const {
    return std::visit(
        [](const auto& k) -> std::vector<double> {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, PiecewiseLinear>) {
            std::vector<double> out;
            out.reserve(k.knots.size());
            for (const auto& kn : k.knots) out.push_back(kn.first);
            return out;
          } else if constexpr (std::is_same_v<K, PoleScaled>) {
            std::vector<double> out;
            if (!k.inner) return out;
            for (double s : k.inner->breakpoints()) out.push_back(k.T - std::exp(-s));
            return out;
          } else {
            return {};
          }
        },
        kind_);
  }

  // Exclusive upper end of the evaluation domain, if finite.
  std::optional<double> domain_end() const {
    if (const auto* p = std::get_if<PoleScaled>(&kind_)) return p->T;
    return std::nullopt;
  }

  // Violated invariants, empty when the profile is usable.
  std::vector<std::string> problems() const {
    std::vector<std::string> out;
    std::visit(
        [&out](const auto& k) {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, Constant>) {
            if (!std::isfinite(k.value)) out.emplace_back("constant value is not finite");
          } else if constexpr (std::is_same_v<K, BandConstant>) {
            if (!std::isfinite(k.value) || !std::isfinite(k.lower) || !std::isfinite(k.upper))
              out.emplace_back("band values are not finite");
            else if (k.lower > k.upper)
              out.emplace_back("band lower bound exceeds upper bound");
            else if (k.value < k.lower || k.value > k.upper)
              out.emplace_back("band value lies outside [lower, upper]");
          } else if constexpr (std::is_same_v<K, PiecewiseLinear>) {
            if (k.knots.empty()) out.emplace_back("piecewise-linear profile has no knots");
            for (std::size_t i = 0; i < k.knots.size(); ++i) {
              if (!std::isfinite(k.knots[i].first) || !std::isfinite(k.knots[i].second))
                out.emplace_back("piecewise-linear knot " + std::to_string(i) + " is not finite");
              if (i > 0 && !(k.knots[i].first > k.knots[i - 1].first))
                out.emplace_back("piecewise-linear knots are not strictly increasing at index " +
                                 std::to_string(i));
            }
          } else {
            if (!(k.T > 0.0) || !std::isfinite(k.T))
              out.emplace_back("pole-scaled profile requires T > 0");
            if (!k.inner) {
              out.emplace_back("pole-scaled profile has no inner profile");
            } else {
              for (auto& p : k.inner->problems()) out.push_back("inner: " + p);
            }
          }
        },
        kind_);
    return out;
  }

  bool operator==(const CoefficientProfile& o) const {
    return kind_ == o.kind_ && description_ == o.description_;
  }

 private:
  static double pl_value(const PiecewiseLinear& k, double t) {
    if (k.knots.empty())
      throw Error(ErrorCode::DomainError, "piecewise-linear profile has no knots");
    if (t <= k.knots.front().first) return k.knots.front().second;
    if (t >= k.knots.back().first) return k.knots.back().second;
    auto it = std::upper_bound(k.knots.begin(), k.knots.end(), t,
                               [](double x, const auto& kn) { return x < kn.first; });
    const auto& b = *it;
    const auto& a = *(it - 1);
    const double w = (t - a.first) / (b.first - a.first);
    return a.second + w * (b.second - a.second);
  }

  static double pl_slope(const PiecewiseLinear& k, double t) {
    if (k.knots.size() < 2) return 0.0;
    if (t < k.knots.front().first || t >= k.knots.back().first) return 0.0;
    auto it = std::upper_bound(k.knots.begin(), k.knots.end(), t,
                               [](double x, const auto& kn) { return x < kn.first; });
    const auto& b = *it;
    const auto& a = *(it - 1);
    return (b.second - a.second) / (b.first - a.first);
  }

  static double pole_distance(const PoleScaled& k, double t) {
    const double u = k.T - t;
    if (!(u > 0.0))
      throw Error(ErrorCode::DomainError,
                  "pole-scaled profile evaluated at t=" + std::to_string(t) +
                      " >= T=" + std::to_string(k.T));
    if (!k.inner) throw Error(ErrorCode::DomainError, "pole-scaled profile has no inner profile");
    return u;
  }

  Kind kind_;
  std::string description_;
};

}  // namespace blowuplab
