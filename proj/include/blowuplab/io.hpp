#pragma once

// Scenario files (JSON, strict: unknown keys are rejected) and the CSV
// trajectory writers. Doubles are written with 17 significant digits so that
// every CSV value parses back to the same bits.

#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "blowuplab/jacobi.hpp"
#include "blowuplab/ode.hpp"
#include "blowuplab/scenario.hpp"

namespace blowuplab {

using ojson = nlohmann::ordered_json;

inline std::string fmt17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

// ---------------------------------------------------------------------------
// JSON reading helpers. Paths are JSON pointers into the document.

namespace json_detail {

[[noreturn]] inline void fail(const std::string& path, const std::string& msg) {
  throw Error(ErrorCode::ParseError, (path.empty() ? std::string("/") : path) + ": " + msg);
}

inline void only_keys(const ojson& j, const std::string& path, std::set<std::string> allowed) {
  if (!j.is_object()) fail(path, "expected an object");
  for (const auto& [k, _] : j.items())
    if (!allowed.count(k)) fail(path, "unknown field '" + k + "'");
}

inline double number(const ojson& j, const std::string& path) {
  if (!j.is_number()) fail(path, "expected a number");
  return j.get<double>();
}

inline double number_at(const ojson& j, const std::string& path, const char* key, double dflt) {
  return j.contains(key) ? number(j.at(key), path + "/" + key) : dflt;
}

inline double required_number(const ojson& j, const std::string& path, const char* key) {
  if (!j.contains(key)) fail(path, std::string("missing field '") + key + "'");
  return number(j.at(key), path + "/" + key);
}

inline std::string text(const ojson& j, const std::string& path) {
  if (!j.is_string()) fail(path, "expected a string");
  return j.get<std::string>();
}

}  // namespace json_detail

// ---------------------------------------------------------------------------
// CoefficientProfile

inline ojson profile_to_json(const CoefficientProfile& p) {
  ojson j;
  std::visit(
      [&j](const auto& k) {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, CoefficientProfile::Constant>) {
          j["kind"] = "constant";
          j["value"] = k.value;
        } else if constexpr (std::is_same_v<K, CoefficientProfile::PiecewiseLinear>) {
          j["kind"] = "piecewise_linear";
          j["knots"] = ojson::array();
          for (const auto& [t, v] : k.knots) j["knots"].push_back({t, v});
        } else if constexpr (std::is_same_v<K, CoefficientProfile::PoleScaled>) {
          j["kind"] = "pole_scaled";
          j["T"] = k.T;
          j["inner"] = k.inner ? profile_to_json(*k.inner) : ojson();
        } else {
          j["kind"] = "band";
          j["lower"] = k.lower;
          j["upper"] = k.upper;
          j["value"] = k.value;
        }
      },
      p.kind());
  if (!p.description().empty()) j["description"] = p.description();
  return j;
}

// A bare number is shorthand for a constant profile.
inline CoefficientProfile profile_from_json(const ojson& j, const std::string& path = "") {
  using namespace json_detail;
  if (j.is_number()) return CoefficientProfile::constant(j.get<double>());
  if (!j.is_object()) fail(path, "expected a profile object or a number");
  if (!j.contains("kind")) fail(path, "missing field 'kind'");
  const std::string kind = text(j.at("kind"), path + "/kind");
  std::string desc;
  if (j.contains("description")) desc = text(j.at("description"), path + "/description");

  if (kind == "constant") {
    only_keys(j, path, {"kind", "value", "description"});
    return CoefficientProfile::constant(required_number(j, path, "value"), desc);
  }
  if (kind == "band") {
    only_keys(j, path, {"kind", "lower", "upper", "value", "description"});
    return CoefficientProfile::band(required_number(j, path, "lower"),
                                    required_number(j, path, "upper"),
                                    required_number(j, path, "value"), desc);
  }
  if (kind == "piecewise_linear") {
    only_keys(j, path, {"kind", "knots", "description"});
    if (!j.contains("knots") || !j.at("knots").is_array()) fail(path + "/knots", "expected an array");
    std::vector<std::pair<double, double>> knots;
    const auto& arr = j.at("knots");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string p = path + "/knots/" + std::to_string(i);
      if (!arr[i].is_array() || arr[i].size() != 2) fail(p, "expected [t, value]");
      knots.emplace_back(number(arr[i][0], p + "/0"), number(arr[i][1], p + "/1"));
    }
    return CoefficientProfile::piecewise_linear(std::move(knots), desc);
  }
  if (kind == "pole_scaled") {
    only_keys(j, path, {"kind", "T", "inner", "description"});
    if (!j.contains("inner")) fail(path, "missing field 'inner'");
    return CoefficientProfile::pole_scaled(required_number(j, path, "T"),
                                           profile_from_json(j.at("inner"), path + "/inner"), desc);
  }
  fail(path + "/kind", "unknown profile kind '" + kind + "'");
}

// ---------------------------------------------------------------------------
// FixedPointScenario

inline ojson scenario_to_json(const FixedPointScenario& s) {
  ojson j;
  j["location"] = to_string(s.location);
  j["parity"] = to_string(s.parity);
  j["swirl"] = {{"b0", s.swirl.b0}, {"b1", s.swirl.b1}, {"b2", s.swirl.b2}, {"b3", s.swirl.b3}};
  j["a0"] = s.a0;
  j["c0z"] = s.c0z;
  j["pressure_rr"] = profile_to_json(s.pressure_rr);
  if (s.constraint_mode())
    j["pressure_zz"] = "constraint";
  else if (s.trace_mode())
    j["pressure_zz"] = "trace";
  else
    j["pressure_zz"] = profile_to_json(*s.zz_profile());
  j["t_end"] = s.t_end;
  const auto& t = s.tolerances;
  j["tolerances"] = {{"rel_tol", t.rel_tol},
                     {"abs_tol", t.abs_tol},
                     {"f_stop", t.f_stop},
                     {"zero_bisect_tol", t.zero_bisect_tol},
                     {"quad_points_per_unit", t.quad_points_per_unit}};
  return j;
}

// Missing optional fields take defaults: parity even, swirl zero, a0 = 0,
// constant-zero P_rr, constraint-mode P_zz, default tolerances, and c0z equal
// to the constraint-compatible value (-2 f'(0) on the axis, -f'(0) on the
// boundary).
inline FixedPointScenario scenario_from_json(const ojson& j, const std::string& path = "") {
  using namespace json_detail;
  only_keys(j, path,
            {"location", "parity", "swirl", "a0", "c0z", "pressure_rr", "pressure_zz", "t_end",
             "tolerances"});
  FixedPointScenario s;
  if (!j.contains("location")) fail(path, "missing field 'location'");
  const std::string loc = text(j.at("location"), path + "/location");
  if (loc == "axis")
    s.location = Location::Axis;
  else if (loc == "boundary")
    s.location = Location::Boundary;
  else
    fail(path + "/location", "expected \"axis\" or \"boundary\"");

  if (j.contains("parity")) {
    const std::string par = text(j.at("parity"), path + "/parity");
    if (par == "even")
      s.parity = Parity::EvenSwirl;
    else if (par == "odd")
      s.parity = Parity::OddSwirl;
    else
      fail(path + "/parity", "expected \"even\" or \"odd\"");
  }

  if (j.contains("swirl")) {
    const auto& w = j.at("swirl");
    const std::string p = path + "/swirl";
    only_keys(w, p, {"b0", "b1", "b2", "b3"});
    s.swirl = {number_at(w, p, "b0", 0.0), number_at(w, p, "b1", 0.0), number_at(w, p, "b2", 0.0),
               number_at(w, p, "b3", 0.0)};
  }

  s.a0 = number_at(j, path, "a0", 0.0);
  s.c0z = number_at(j, path, "c0z",
                    s.location == Location::Axis ? -2.0 * s.fp0() : -s.fp0());
  if (j.contains("pressure_rr")) s.pressure_rr = profile_from_json(j.at("pressure_rr"), path + "/pressure_rr");
  if (j.contains("pressure_zz")) {
    const auto& z = j.at("pressure_zz");
    if (z.is_string()) {
      const std::string mode = z.get<std::string>();
      if (mode == "constraint")
        s.pressure_zz = ZzFromConstraint{};
      else if (mode == "trace")
        s.pressure_zz = ZzFromTrace{};
      else
        fail(path + "/pressure_zz", "expected \"constraint\", \"trace\" or a profile");
    } else {
      s.pressure_zz = profile_from_json(z, path + "/pressure_zz");
    }
  }
  s.t_end = required_number(j, path, "t_end");

  if (j.contains("tolerances")) {
    const auto& t = j.at("tolerances");
    const std::string p = path + "/tolerances";
    only_keys(t, p, {"rel_tol", "abs_tol", "f_stop", "zero_bisect_tol", "quad_points_per_unit"});
    auto& tol = s.tolerances;
    tol.rel_tol = number_at(t, p, "rel_tol", tol.rel_tol);
    tol.abs_tol = number_at(t, p, "abs_tol", tol.abs_tol);
    tol.f_stop = number_at(t, p, "f_stop", tol.f_stop);
    tol.zero_bisect_tol = number_at(t, p, "zero_bisect_tol", tol.zero_bisect_tol);
    if (t.contains("quad_points_per_unit")) {
      const auto& q = t.at("quad_points_per_unit");
      if (!q.is_number_integer()) fail(p + "/quad_points_per_unit", "expected an integer");
      tol.quad_points_per_unit = q.get<int>();
    }
  }
  return s;
}

// Parses JSON text; syntax errors carry nlohmann's line/column position.
inline ojson parse_json_text(const std::string& text, const std::string& source = "<input>") {
  try {
    return ojson::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::ParseError, source + ": " + e.what());
  }
}

inline FixedPointScenario parse_scenario(const std::string& text) {
  return scenario_from_json(parse_json_text(text));
}

inline std::string serialize_scenario(const FixedPointScenario& s) {
  return scenario_to_json(s).dump(2);
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::ParseError, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------
// CSV

// Second-order trajectory: `t,y...,yp...,integrals...,event`. Event rows are
// merged in time order and labelled with the event name.
template <std::size_t N>
void write_trajectory_csv(std::ostream& os, const ode::Trajectory<N>& tr, std::size_t m,
                          const std::vector<std::string>& names = {}) {
  auto name = [&](std::size_t i, const std::string& dflt) {
    return i < names.size() ? names[i] : dflt;
  };
  os << "t";
  for (std::size_t i = 0; i < N; ++i) {
    std::string d = i < m ? "y" + std::to_string(i)
                   : i < 2 * m ? "yp" + std::to_string(i - m)
                               : "int" + std::to_string(i - 2 * m);
    os << ',' << name(i, d);
  }
  os << ",event\n";
  auto row = [&](double t, const ode::State<N>& y, const std::string& ev) {
    os << fmt17(t);
    for (double v : y) os << ',' << fmt17(v);
    os << ',' << ev << '\n';
  };
  std::size_t e = 0;
  for (std::size_t i = 0; i < tr.t.size(); ++i) {
    while (e < tr.events.size() && tr.events[e].t <= tr.t[i]) {
      row(tr.events[e].t, tr.events[e].y, tr.events[e].name);
      ++e;
    }
    row(tr.t[i], tr.y[i], "");
  }
  for (; e < tr.events.size(); ++e) row(tr.events[e].t, tr.events[e].y, tr.events[e].name);
}

inline void write_jacobi_csv(std::ostream& os, const JacobiSolution& sol) {
  os << "t,f,g,fp,gp,f_integral,forcing_work,winding,vorticity_int,constraint_res,event\n";
  for (std::size_t i = 0; i < sol.size(); ++i) {
    os << fmt17(sol.grid[i]) << ',' << fmt17(sol.f[i]) << ',' << fmt17(sol.g[i]) << ','
       << fmt17(sol.fp[i]) << ',' << fmt17(sol.gp[i]) << ',' << fmt17(sol.f_integral[i]) << ','
       << fmt17(sol.forcing_work[i]) << ',' << fmt17(sol.winding_integral[i]) << ','
       << fmt17(sol.vorticity_integral[i]) << ',' << fmt17(sol.constraint_residual[i]) << ','
       << (i < sol.event.size() ? sol.event[i] : std::string()) << '\n';
  }
}

inline std::string jacobi_csv(const JacobiSolution& sol) {
  std::ostringstream ss;
  write_jacobi_csv(ss, sol);
  return ss.str();
}

}  // namespace blowuplab
