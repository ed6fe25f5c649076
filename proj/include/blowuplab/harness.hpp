#pragma once

// Batch runner behind the CLI. A config lists named scenarios, each with a
// task (which model or checker to run) and optional expectations on the
// metrics that task reports. Outputs per scenario: <name>.report.json and,
// where a solution exists, <name>.trajectory.csv; plus summary.csv (run) or
// sweep.csv (sweep).

#include <array>
#include <atomic>
#include <cerrno>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <mutex>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "blowuplab/criteria.hpp"
#include "blowuplab/index_form.hpp"
#include "blowuplab/io.hpp"
#include "blowuplab/jacobi.hpp"

namespace blowuplab::harness {

// Anything wrong with the config itself; maps to exit status 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

constexpr int kExitOk = 0;
constexpr int kExitExpectation = 1;
constexpr int kExitConfig = 2;

struct Entry {
  std::string name;
  ojson scenario_json;  // normalized
  FixedPointScenario scenario;
  ojson task = ojson::object();
  ojson expect = ojson::object();
};

struct Config {
  std::uint64_t seed = 0;
  std::string seed_source = "default";
  std::vector<Entry> entries;
};

inline const std::vector<std::string>& task_kinds() {
  static const std::vector<std::string> k{
      "model",           "sign_criterion", "quarter_threshold", "rotation_blowup",
      "monotone_pressure", "oracle",       "conjugate_search",  "odd_positivity",
      "laplacian_odd",   "fredholm"};
  return k;
}

namespace detail {

inline Entry make_entry(std::string name, const ojson& scenario, const ojson& task,
                        const ojson& expect, const std::string& path) {
  Entry e;
  e.name = std::move(name);
  try {
    e.scenario = scenario_from_json(scenario, path + "/scenario");
  } catch (const Error& err) {
    throw ConfigError(err.what());
  }
  if (auto rep = validate_scenario(e.scenario); !rep.ok())
    throw ConfigError(path + "/scenario: invalid scenario: " + rep.joined());
  e.scenario_json = scenario_to_json(e.scenario);
  e.task = task;
  e.expect = expect;
  return e;
}

}  // namespace detail

inline Config parse_config(const std::string& text, const std::string& source = "<config>") {
  ojson j;
  try {
    j = parse_json_text(text, source);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  auto fail = [&](const std::string& path, const std::string& msg) {
    throw ConfigError(source + ": " + path + ": " + msg);
  };
  if (!j.is_object()) fail("/", "expected an object");
  for (const auto& [k, _] : j.items())
    if (k != "seed" && k != "scenarios") fail("/", "unknown field '" + k + "'");
  Config c;
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned()) fail("/seed", "expected a non-negative integer");
    c.seed = j["seed"].get<std::uint64_t>();
    c.seed_source = "config";
  }
  if (!j.contains("scenarios") || !j["scenarios"].is_array() || j["scenarios"].empty())
    fail("/scenarios", "expected a non-empty array");
  std::set<std::string> names;
  for (std::size_t i = 0; i < j["scenarios"].size(); ++i) {
    const auto& s = j["scenarios"][i];
    const std::string path = "/scenarios/" + std::to_string(i);
    if (!s.is_object()) fail(path, "expected an object");
    for (const auto& [k, _] : s.items())
      if (k != "name" && k != "scenario" && k != "task" && k != "expect")
        fail(path, "unknown field '" + k + "'");
    if (!s.contains("name") || !s["name"].is_string()) fail(path + "/name", "expected a string");
    const std::string name = s["name"];
    if (name.empty() || name.find_first_of("/\\") != std::string::npos)
      fail(path + "/name", "names must be non-empty and free of path separators");
    if (!names.insert(name).second) fail(path + "/name", "duplicate name '" + name + "'");
    if (!s.contains("scenario")) fail(path, "missing field 'scenario'");
    ojson task = s.value("task", ojson{{"kind", "model"}});
    if (!task.is_object() || !task.contains("kind") || !task["kind"].is_string())
      fail(path + "/task", "expected an object with a string 'kind'");
    const std::string kind = task["kind"];
    if (std::find(task_kinds().begin(), task_kinds().end(), kind) == task_kinds().end())
      fail(path + "/task/kind", "unknown task kind '" + kind + "'");
    ojson expect = s.value("expect", ojson::object());
    if (!expect.is_object()) fail(path + "/expect", "expected an object");
    try {
      c.entries.push_back(detail::make_entry(name, s["scenario"], task, expect, path));
    } catch (const ConfigError& e) {
      throw ConfigError(source + ": " + e.what());
    }
  }
  if (const char* env = std::getenv("BLOWUPLAB_SEED"); env && *env) {
    char* end = nullptr;
    errno = 0;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (errno || *end || env[0] == '-') throw ConfigError("BLOWUPLAB_SEED is not a non-negative integer");
    c.seed = v;
    c.seed_source = "env";
  }
  return c;
}

inline Config load_config(const std::string& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return parse_config(text, path);
}

// ---------------------------------------------------------------------------
// Tasks

struct TaskOutput {
  ojson result = ojson::object();
  ojson metrics = ojson::object();
  std::optional<std::string> trajectory_csv;
  std::optional<std::string> diagnostic_csv;
};

namespace detail {

inline ojson opt(const std::optional<double>& v) { return v ? ojson(*v) : ojson(nullptr); }

inline ojson solution_metrics(const JacobiSolution& sol, const FixedPointScenario& s) {
  double res = 0.0, df = 0.0, dg = 0.0, pzz = 0.0, det = 0.0;
  const bool even = s.parity == Parity::EvenSwirl;
  for (std::size_t i = 0; i < sol.size(); ++i) {
    res = std::max(res, std::abs(sol.constraint_residual[i]));
    df = std::max(df, std::abs(sol.f[i] - 1.0));
    dg = std::max(dg, std::abs(sol.g[i] - 1.0));
    if (even && sol.f[i] > 0.0)
      pzz = std::max(pzz, std::abs(trace_pzz(s.location, s.swirl, s.pressure_rr(sol.grid[i]),
                                             sol.f[i], sol.fp[i])));
    if (sol.f[i] > 0.0 && sol.g[i] > 0.0)
      det = std::max(det, std::abs(build_stretch(sol, s, sol.grid[i]).det() - 1.0));
  }
  ojson m;
  m["terminated"] = blowuplab::to_string(sol.terminated);
  m["t_last"] = sol.t_last();
  m["first_zero_f"] = opt(sol.first_zero_f);
  m["first_zero_g"] = opt(sol.first_zero_g);
  m["blowup_time"] = opt(sol.blowup_time);
  m["f_last"] = sol.f.back();
  m["g_last"] = sol.g.back();
  m["winding_last"] = sol.winding_integral.back();
  m["vorticity_integral_last"] = sol.vorticity_integral.back();
  m["max_constraint_residual"] = res;
  m["max_abs_f_minus_1"] = df;
  m["max_abs_g_minus_1"] = dg;
  if (even) m["max_abs_pzz_trace"] = pzz;
  m["max_det_error"] = det;
  return m;
}

inline ojson criterion_metrics(const CriterionReport& r) {
  ojson m;
  m["verdict"] = to_string(r.verdict);
  m["pass"] = r.pass();
  m["observed"] = opt(r.observed);
  m["predicted_bound"] = opt(r.predicted_bound);
  for (const auto& [k, v] : r.diagnostics.items())
    if (v.is_primitive() && !m.contains(k)) m[k] = v;
  return m;
}

inline LinearTarget g_target(const FixedPointScenario& s) {
  return s.location == Location::Axis ? LinearTarget::GAxis : LinearTarget::GBoundary;
}

inline double number_or(const ojson& task, const char* key, double dflt) {
  if (!task.contains(key)) return dflt;
  if (!task[key].is_number()) throw ConfigError(std::string("task field '") + key + "' must be a number");
  return task[key].get<double>();
}

inline void check_task_keys(const ojson& task, std::set<std::string> allowed) {
  allowed.insert("kind");
  for (const auto& [k, _] : task.items())
    if (!allowed.count(k)) throw ConfigError("unknown task field '" + k + "'");
}

inline std::vector<double> number_list(const ojson& task, const char* key, std::vector<double> dflt) {
  if (!task.contains(key)) return dflt;
  if (!task[key].is_array()) throw ConfigError(std::string("task field '") + key + "' must be an array");
  std::vector<double> out;
  for (const auto& v : task[key]) {
    if (!v.is_number()) throw ConfigError(std::string("task field '") + key + "' must hold numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

inline ConjugateSearchParams conjugate_params(const ojson& task) {
  check_task_keys(task, {"family", "mode_counts", "mean_zero", "tol_negative", "t_start", "zeta",
                         "q", "psi", "phases", "detune", "T"});
  ConjugateSearchParams p;
  if (task.contains("family")) {
    const auto& f = task["family"];
    if (f == "SineInRescaledTime")
      p.family = TrialFamily::SineInRescaledTime;
    else if (f == "LogOscillator")
      p.family = TrialFamily::LogOscillator;
    else
      throw ConfigError("task family must be SineInRescaledTime or LogOscillator");
  }
  if (task.contains("mode_counts")) {
    p.mode_counts.clear();
    for (double m : number_list(task, "mode_counts", {})) p.mode_counts.push_back(static_cast<int>(m));
  }
  if (task.contains("mean_zero")) {
    if (!task["mean_zero"].is_boolean()) throw ConfigError("task field 'mean_zero' must be a boolean");
    p.mean_zero = task["mean_zero"];
  }
  p.tol_negative = number_or(task, "tol_negative", p.tol_negative);
  p.t_start = number_or(task, "t_start", p.t_start);
  if (p.family == TrialFamily::LogOscillator) {
    LogParams lp;
    if (task.contains("zeta")) lp.zeta = number_or(task, "zeta", 0.0);
    if (task.contains("q")) lp.q = number_or(task, "q", 0.0);
    if (task.contains("psi")) lp.psi = number_or(task, "psi", 0.0);
    if (task.contains("T")) lp.T = number_or(task, "T", 0.0);
    lp.phases = number_list(task, "phases", lp.phases);
    lp.detune = number_list(task, "detune", lp.detune);
    p.log_params = lp;
  }
  return p;
}

inline std::string series_csv(const DiagnosticSeries& d) {
  std::ostringstream os;
  os << "t,delta_p,cumulative,xi\n";
  for (std::size_t i = 0; i < d.t.size(); ++i)
    os << fmt17(d.t[i]) << ',' << fmt17(d.delta_p[i]) << ',' << fmt17(d.cumulative[i]) << ','
       << fmt17(d.xi[i]) << '\n';
  return os.str();
}

}  // namespace detail

// Runs one task. Library errors propagate as Error; malformed task fields
// raise ConfigError.
inline TaskOutput run_task(const Entry& e, std::uint64_t seed) {
  using namespace detail;
  const auto& s = e.scenario;
  const std::string kind = e.task["kind"];
  TaskOutput out;
  auto keep = [&](const JacobiSolution& sol) { out.trajectory_csv = jacobi_csv(sol); };

  if (kind == "model") {
    check_task_keys(e.task, {"which"});
    JacobiSolution sol;
    const std::string which = e.task.value("which", "auto");
    if (which == "auto")
      sol = run_model(s);
    else if (which == "g_axis")
      sol = run_linear(s, LinearTarget::GAxis);
    else if (which == "g_boundary")
      sol = run_linear(s, LinearTarget::GBoundary);
    else if (which == "f_odd")
      sol = run_linear(s, LinearTarget::FOdd);
    else
      throw ConfigError("task which must be auto, g_axis, g_boundary or f_odd");
    out.metrics = solution_metrics(sol, s);
    out.result = {{"message", sol.message}};
    keep(sol);
  } else if (kind == "sign_criterion") {
    check_task_keys(e.task, {"branch"});
    const std::string branch = e.task.value("branch", s.zz_profile() ? "g" : "f");
    if (branch != "g" && branch != "f") throw ConfigError("task branch must be g or f");
    const JacobiSolution sol = branch == "g" ? run_linear(s, g_target(s)) : run_model(s);
    const auto r = check_sign_criterion(sol, s);
    out.result = r.to_json();
    out.metrics = criterion_metrics(r);
    keep(sol);
  } else if (kind == "quarter_threshold") {
    check_task_keys(e.task, {"s_length"});
    const auto r = check_quarter_threshold(s, number_or(e.task, "s_length", 50.0));
    out.result = r.to_json();
    out.metrics = criterion_metrics(r);
  } else if (kind == "rotation_blowup") {
    check_task_keys(e.task, {});
    const auto r = check_rotation_blowup(s);
    out.result = r.to_json();
    out.metrics = criterion_metrics(r);
    keep(run_boundary_even(s));
  } else if (kind == "monotone_pressure") {
    check_task_keys(e.task, {});
    const auto r = check_monotone_pressure(s);
    out.result = r.to_json();
    out.metrics = criterion_metrics(r);
    out.metrics["first_zero"] = opt(r.observed);
    if (r.verdict != Verdict::HypothesisNotMet)
      keep(s.zz_profile() ? run_linear(s, g_target(s)) : run_linear(s, LinearTarget::FOdd));
  } else if (kind == "oracle") {
    check_task_keys(e.task, {});
    if (s.location != Location::Axis || s.parity != Parity::EvenSwirl)
      throw ConfigError("oracle task needs an axis even-swirl scenario");
    const auto sol = run_axis_even(s);
    const auto orc = central_force_oracle(s.swirl.b0, s.pressure_rr, s.t_end, s.fp0(), s.tolerances);
    const double hi = std::min(sol.t_last(), orc.t_last());
    double diff = 0.0;
    for (std::size_t i = 0; i < sol.size() && sol.grid[i] <= hi; ++i)
      diff = std::max(diff, std::abs(sol.f[i] - orc.at(sol.grid[i]).f));
    double drift = 0.0;
    if (orc.planar)
      for (double l : orc.planar->angular_momentum) drift = std::max(drift, std::abs(l - s.swirl.b0));
    out.metrics = solution_metrics(sol, s);
    out.metrics["max_abs_f_minus_rho"] = diff;
    out.metrics["max_angular_momentum_drift"] = drift;
    out.result = {{"window", {0.0, hi}}, {"max_abs_f_minus_rho", diff},
                  {"max_angular_momentum_drift", drift}};
    keep(sol);
  } else if (kind == "conjugate_search") {
    const auto params = conjugate_params(e.task);
    const auto sol = run_model(s);
    const auto r = find_conjugate(sol, s, params);
    out.result = r.to_json();
    out.metrics = {{"intervals", r.intervals.size()},
                   {"none_found", r.none_found},
                   {"gap_sum", r.gap_sum},
                   {"first_t1", r.first() ? ojson(r.first()->t1) : ojson(nullptr)},
                   {"first_t2", r.first() ? ojson(r.first()->t2) : ojson(nullptr)},
                   {"first_value", r.first() ? ojson(r.first()->value) : ojson(nullptr)}};
    keep(sol);
  } else if (kind == "odd_positivity") {
    check_task_keys(e.task, {"trials", "modes", "nodes"});
    if (s.parity != Parity::OddSwirl) throw ConfigError("odd_positivity needs an odd-swirl scenario");
    const int trials = static_cast<int>(number_or(e.task, "trials", 1000));
    const int modes = static_cast<int>(number_or(e.task, "modes", 4));
    const int nodes = static_cast<int>(number_or(e.task, "nodes", 400));
    const auto sol = run_model(s);
    std::mt19937_64 rng(seed);
    const double lo = sol.t_begin(), hi = sol.t_last();
    double min_v = std::numeric_limits<double>::infinity();
    int negative = 0, done = 0;
    ojson argmin;
    for (int i = 0; i < trials; ++i) {
      const double a = lo + (hi - lo) * static_cast<double>(rng() >> 11) * 0x1p-53;
      const double b = lo + (hi - lo) * static_cast<double>(rng() >> 11) * 0x1p-53;
      const double t1 = std::min(a, b), t2 = std::max(a, b);
      if (t2 - t1 < 1e-3 * (hi - lo)) continue;
      const auto v = random_trial_field(rng, t1, t2, modes, nodes);
      const double val = index_form(v, sol, s).value;
      ++done;
      if (val < -1e-9) ++negative;
      if (val < min_v) {
        min_v = val;
        argmin = {t1, t2};
      }
    }
    out.metrics = {{"trials", done}, {"negative", negative}, {"min_value", min_v}};
    out.result = {{"seed", seed}, {"trials", done}, {"negative", negative},
                  {"min_value", min_v}, {"argmin_window", argmin}};
    keep(sol);
  } else if (kind == "laplacian_odd") {
    check_task_keys(e.task, {});
    const auto sol = run_model(s);
    const auto d = laplacian_identity_odd(sol);
    out.result = d.summary();
    out.metrics = d.summary();
    out.diagnostic_csv = series_csv(d);
    keep(sol);
  } else if (kind == "fredholm") {
    check_task_keys(e.task, {});
    const auto sol = run_model(s);
    const auto r = fredholm_diagnostics(sol, s);
    out.result = r.to_json();
    out.metrics = r.to_json();
    keep(sol);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Expectations. Each key names a metric; the value is a literal (equality),
// {"value": v, "tol": t}, {"max": v}, {"min": v}, or a combination of these.

struct Check {
  std::string metric;
  bool ok = false;
  std::string detail;
};

inline std::vector<Check> check_expectations(const ojson& expect, const ojson& metrics) {
  std::vector<Check> out;
  for (const auto& [name, spec] : expect.items()) {
    Check c{name, false, {}};
    if (!metrics.contains(name)) {
      c.detail = "metric not reported";
      out.push_back(c);
      continue;
    }
    const auto& m = metrics[name];
    if (!spec.is_object()) {
      c.ok = (spec.is_number() && m.is_number()) ? spec.get<double>() == m.get<double>() : spec == m;
      c.detail = "expected " + spec.dump() + ", got " + m.dump();
    } else {
      for (const auto& [k, _] : spec.items())
        if (k != "value" && k != "tol" && k != "max" && k != "min")
          throw ConfigError("expectation '" + name + "': unknown key '" + k + "'");
      if (!m.is_number()) {
        c.detail = "metric is " + m.dump() + ", not a number";
        out.push_back(c);
        continue;
      }
      const double x = m.get<double>();
      c.ok = true;
      std::string d = "got " + fmt17(x);
      if (spec.contains("value")) {
        const double v = spec["value"].get<double>();
        const double tol = spec.value("tol", 0.0);
        c.ok &= std::abs(x - v) <= tol;
        d += ", want " + fmt17(v) + " +- " + fmt17(tol);
      }
      if (spec.contains("max")) {
        c.ok &= x <= spec["max"].get<double>();
        d += ", want <= " + fmt17(spec["max"].get<double>());
      }
      if (spec.contains("min")) {
        c.ok &= x >= spec["min"].get<double>();
        d += ", want >= " + fmt17(spec["min"].get<double>());
      }
      c.detail = d;
    }
    out.push_back(c);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Execution

struct Outcome {
  std::string name;
  std::string task;
  bool pass = false;
  bool config_error = false;
  std::string error;
  ojson metrics = ojson::object();
  ojson report;
  TaskOutput output;
};

inline Outcome execute(const Entry& e, std::uint64_t seed) {
  Outcome o;
  o.name = e.name;
  o.task = e.task["kind"];
  ojson checks = ojson::array();
  try {
    o.output = run_task(e, seed);
    o.metrics = o.output.metrics;
    const auto cs = check_expectations(e.expect, o.metrics);
    o.pass = true;
    for (const auto& c : cs) {
      o.pass &= c.ok;
      checks.push_back({{"metric", c.metric}, {"ok", c.ok}, {"detail", c.detail}});
    }
  } catch (const ConfigError& err) {
    o.config_error = true;
    o.error = err.what();
  } catch (const std::exception& err) {
    o.error = err.what();
  }
  o.report = {{"name", e.name},
              {"task", e.task},
              {"seed", seed},
              {"scenario", e.scenario_json},
              {"result", o.output.result},
              {"metrics", o.metrics},
              {"expectations", checks},
              {"pass", o.pass}};
  if (!o.error.empty()) o.report["error"] = o.error;
  return o;
}

inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    if (!out) throw std::runtime_error("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline void write_outputs(const std::filesystem::path& dir, const std::string& stem, const Outcome& o) {
  write_atomic(dir / (stem + ".report.json"), o.report.dump(2) + "\n");
  if (o.output.trajectory_csv) write_atomic(dir / (stem + ".trajectory.csv"), *o.output.trajectory_csv);
  if (o.output.diagnostic_csv) write_atomic(dir / (stem + ".diagnostic.csv"), *o.output.diagnostic_csv);
}

// Runs fn(i) for i in [0, n) on up to `jobs` threads.
inline void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, jobs)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  for (auto& t : pool) t.join();
}

struct RunOptions {
  std::string config;
  std::string out_dir;
  int jobs = 1;
  std::optional<double> tol;
};

struct SweepOptions {
  std::string config;
  std::string out_dir;
  std::string param;
  std::string values;
  int jobs = 1;
  std::optional<double> tol;
};

namespace detail {

inline void apply_tol(Config& c, const std::optional<double>& tol) {
  if (!tol) return;
  if (!(*tol > 0.0)) throw ConfigError("--tol must be positive");
  for (auto& e : c.entries) {
    e.scenario.tolerances.rel_tol = *tol;
    e.scenario_json = scenario_to_json(e.scenario);
  }
}

inline std::uint64_t entry_seed(std::uint64_t base, std::size_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(base), static_cast<std::uint32_t>(base >> 32),
                    static_cast<std::uint32_t>(index)};
  std::array<std::uint32_t, 2> w{};
  seq.generate(w.begin(), w.end());
  return (static_cast<std::uint64_t>(w[0]) << 32) | w[1];
}

inline std::vector<std::pair<std::string, double>> parse_values(const std::string& csv) {
  std::vector<std::pair<std::string, double>> out;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    const auto a = tok.find_first_not_of(" \t");
    if (a == std::string::npos) continue;
    tok = tok.substr(a, tok.find_last_not_of(" \t") - a + 1);
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(tok, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != tok.size() || !std::isfinite(v)) throw ConfigError("--values: not a number: '" + tok + "'");
    out.emplace_back(tok, v);
  }
  if (out.empty()) throw ConfigError("--values: empty range");
  return out;
}

// Sets a numeric field of the normalized scenario JSON (dotted path such as
// "a0", "swirl.b0" or "pressure_rr.inner.value"); "task.<key>" targets the
// task object instead.
inline void set_param(Entry& e, const std::string& param, double value) {
  const bool on_task = param.rfind("task.", 0) == 0;
  ojson* node = on_task ? &e.task : &e.scenario_json;
  std::string rest = on_task ? param.substr(5) : param;
  std::stringstream ss(rest);
  std::string key;
  std::vector<std::string> keys;
  while (std::getline(ss, key, '.')) keys.push_back(key);
  if (keys.empty()) throw ConfigError("unknown parameter '" + param + "'");
  for (std::size_t i = 0; i < keys.size(); ++i) {
    if (!node->is_object() || !node->contains(keys[i]))
      throw ConfigError("unknown parameter '" + param + "' for scenario " + e.name);
    node = &(*node)[keys[i]];
  }
  if (!node->is_number()) throw ConfigError("parameter '" + param + "' is not numeric");
  if (node->is_number_integer())
    *node = static_cast<std::int64_t>(std::llround(value));
  else
    *node = value;
  if (!on_task) {
    try {
      e.scenario = scenario_from_json(e.scenario_json);
    } catch (const Error& err) {
      throw ConfigError(err.what());
    }
    if (auto rep = validate_scenario(e.scenario); !rep.ok())
      throw ConfigError(e.name + " with " + param + "=" + fmt17(value) + ": " + rep.joined());
    e.scenario_json = scenario_to_json(e.scenario);
  }
}

inline std::string csv_cell(const ojson& v) {
  if (v.is_null()) return "";
  if (v.is_number_float()) return fmt17(v.get<double>());
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

inline ojson first_zero_of(const ojson& m) {
  for (const char* k : {"first_zero", "observed", "first_zero_g", "first_zero_f"})
    if (m.contains(k) && !m[k].is_null()) return m[k];
  return nullptr;
}

}  // namespace detail

// `run`: executes every scenario and writes reports plus summary.csv.
inline int run(const RunOptions& opt, std::ostream& log) {
  Config cfg;
  try {
    cfg = load_config(opt.config);
    detail::apply_tol(cfg, opt.tol);
  } catch (const ConfigError& e) {
    log << "config error: " << e.what() << "\n";
    return kExitConfig;
  }
  const std::filesystem::path dir(opt.out_dir);
  std::filesystem::create_directories(dir);
  std::vector<Outcome> results(cfg.entries.size());
  std::mutex io;
  parallel_for(cfg.entries.size(), opt.jobs, [&](std::size_t i) {
    auto o = execute(cfg.entries[i], detail::entry_seed(cfg.seed, i));
    std::lock_guard<std::mutex> lk(io);
    write_outputs(dir, o.name, o);
    results[i] = std::move(o);
  });

  std::ostringstream csv;
  csv << "name,task,pass,verdict,first_zero,predicted_bound,error\n";
  std::size_t passed = 0;
  bool config_error = false;
  for (const auto& o : results) {
    passed += o.pass;
    config_error |= o.config_error;
    auto cell = [&](const char* k) {
      return o.metrics.contains(k) ? detail::csv_cell(o.metrics[k]) : std::string();
    };
    std::string err = o.error;
    for (char& c : err)
      if (c == ',' || c == '\n') c = ';';
    csv << o.name << ',' << o.task << ',' << (o.pass ? "PASS" : "FAIL") << ',' << cell("verdict")
        << ',' << detail::csv_cell(detail::first_zero_of(o.metrics)) << ',' << cell("predicted_bound")
        << ',' << err << '\n';
    log << (o.pass ? "PASS " : "FAIL ") << o.name;
    if (!o.error.empty()) log << ": " << o.error;
    log << "\n";
  }
  write_atomic(dir / "summary.csv", csv.str());
  log << "summary: " << passed << "/" << results.size() << " PASS (seed " << cfg.seed << ", "
      << cfg.seed_source << ")\n";
  if (config_error) return kExitConfig;
  return passed == results.size() ? kExitOk : kExitExpectation;
}

// `sweep`: one report per (scenario, value) plus sweep.csv.
inline int sweep(const SweepOptions& opt, std::ostream& log) {
  Config cfg;
  std::vector<std::pair<std::string, double>> values;
  std::vector<Entry> points;
  std::vector<std::string> stems, labels;
  std::vector<std::size_t> base_index;
  try {
    cfg = load_config(opt.config);
    detail::apply_tol(cfg, opt.tol);
    values = detail::parse_values(opt.values);
    if (opt.param.empty()) throw ConfigError("--param is empty");
    for (std::size_t i = 0; i < cfg.entries.size(); ++i)
      for (const auto& [label, v] : values) {
        Entry e = cfg.entries[i];
        detail::set_param(e, opt.param, v);
        stems.push_back(e.name + "@" + opt.param + "=" + label);
        labels.push_back(label);
        base_index.push_back(i);
        points.push_back(std::move(e));
      }
  } catch (const ConfigError& e) {
    log << "config error: " << e.what() << "\n";
    return kExitConfig;
  }
  const std::filesystem::path dir(opt.out_dir);
  std::filesystem::create_directories(dir);
  std::vector<Outcome> results(points.size());
  std::mutex io;
  parallel_for(points.size(), opt.jobs, [&](std::size_t i) {
    auto o = execute(points[i], detail::entry_seed(cfg.seed, base_index[i]));
    o.report["sweep"] = {{"parameter", opt.param}, {"value", values[i % values.size()].second}};
    std::lock_guard<std::mutex> lk(io);
    write_outputs(dir, stems[i], o);
    results[i] = std::move(o);
  });

  std::ostringstream csv;
  csv << "parameter,value,scenario,first_zero,bound,pass,verdict\n";
  std::size_t passed = 0;
  bool config_error = false;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& o = results[i];
    passed += o.pass;
    config_error |= o.config_error;
    const auto& m = o.metrics;
    // A criterion's own verdict when there is one, else the expectations.
    const bool ok = m.contains("pass") && m["pass"].is_boolean() ? m["pass"].get<bool>() : o.pass;
    csv << opt.param << ',' << labels[i] << ',' << o.name << ','
        << detail::csv_cell(detail::first_zero_of(m)) << ','
        << (m.contains("predicted_bound") ? detail::csv_cell(m["predicted_bound"]) : "") << ','
        << (ok ? "PASS" : "FAIL") << ','
        << (m.contains("verdict") ? detail::csv_cell(m["verdict"]) : "") << '\n';
    log << (o.pass ? "PASS " : "FAIL ") << stems[i];
    if (!o.error.empty()) log << ": " << o.error;
    log << "\n";
  }
  write_atomic(dir / "sweep.csv", csv.str());
  log << "sweep: " << passed << "/" << results.size() << " PASS\n";
  if (config_error) return kExitConfig;
  return passed == results.size() ? kExitOk : kExitExpectation;
}

}  // namespace blowuplab::harness
