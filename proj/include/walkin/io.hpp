#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <istream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "walkin/equilibrium.hpp"
#include "walkin/metrics.hpp"
#include "walkin/optimizer.hpp"
#include "walkin/params.hpp"
#include "walkin/schedule.hpp"
#include "walkin/verification.hpp"

namespace walkin {

inline constexpr const char* kVersion = "0.1.0";

using json = nlohmann::json;

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

// JSON has no NaN; it is written as null and read back as NaN.
inline json number(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

inline double number(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

inline std::vector<double> numbers(const json& j) {
  std::vector<double> out;
  for (const auto& v : j) out.push_back(number(v));
  return out;
}

}  // namespace detail

inline void to_json(json& j, const ModelParams& p) {
  j = json{{"lambda", p.lambda}, {"mu", p.mu}, {"horizon", p.horizon}, {"delta", p.delta}, {"trunc_mass", p.trunc_mass}};
}

inline void from_json(const json& j, ModelParams& p) {
  p.lambda = j.at("lambda").get<double>();
  p.mu = j.at("mu").get<double>();
  p.horizon = j.at("horizon").get<double>();
  p.delta = j.at("delta").get<double>();
  p.trunc_mass = j.at("trunc_mass").get<double>();
}

inline void to_json(json& j, const SolveConfig& c) {
  j = json{{"atom_bisect_tol", c.atom_bisect_tol}, {"cdf_tol", c.cdf_tol}, {"max_outer_iters", c.max_outer_iters},
           {"support_slack", c.support_slack}, {"early_arrivals", c.early_arrivals}};
}

inline void from_json(const json& j, SolveConfig& c) {
  c.atom_bisect_tol = j.at("atom_bisect_tol").get<double>();
  c.cdf_tol = j.at("cdf_tol").get<double>();
  c.max_outer_iters = j.at("max_outer_iters").get<int>();
  c.support_slack = j.at("support_slack").get<double>();
  c.early_arrivals = j.at("early_arrivals").get<bool>();
}

inline void to_json(json& j, const SolveDiagnostics& d) {
  json trace = json::array();
  for (const auto& [x, f] : d.trace) trace.push_back({x, f});
  j = json{{"cdf_terminal", d.cdf_terminal}, {"shed_mass", d.shed_mass}, {"iterations", d.iterations},
           {"method", d.method}, {"trace", std::move(trace)}};
}

inline void from_json(const json& j, SolveDiagnostics& d) {
  d.cdf_terminal = j.at("cdf_terminal").get<double>();
  d.shed_mass = j.at("shed_mass").get<double>();
  d.iterations = j.at("iterations").get<int>();
  d.method = j.at("method").get<std::string>();
  d.trace.clear();
  for (const auto& p : j.at("trace")) d.trace.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
}

/// Grid rows are [t, f, F, E_w].
inline void to_json(json& j, const EquilibriumResult& r) {
  json grid = json::array();
  for (const auto& g : r.grid) grid.push_back({g.t, g.density, g.cdf, g.expected_wait});
  j = json{{"params", r.params},
           {"schedule", r.schedule.times()},
           {"early", r.early},
           {"atom", r.atom},
           {"support_start", r.support_start},
           {"equilibrium_wait", r.equilibrium_wait},
           {"grid", std::move(grid)},
           {"diagnostics", r.diagnostics}};
}

inline void from_json(const json& j, EquilibriumResult& r) {
  r.params = j.at("params").get<ModelParams>();
  r.schedule = Schedule(j.at("schedule").get<std::vector<double>>(), r.params.horizon);
  r.early = j.at("early").get<bool>();
  r.atom = j.at("atom").get<double>();
  r.support_start = j.at("support_start").get<double>();
  r.equilibrium_wait = j.at("equilibrium_wait").get<double>();
  r.grid.clear();
  for (const auto& g : j.at("grid")) {
    r.grid.push_back({g.at(0).get<double>(), g.at(1).get<double>(), g.at(2).get<double>(), g.at(3).get<double>()});
  }
  r.diagnostics = j.at("diagnostics").get<SolveDiagnostics>();
}

inline void to_json(json& j, const VerificationReport& v) {
  j = json{{"reference", v.reference},
           {"max_support_deviation", v.max_support_deviation},
           {"min_offsupport_margin", v.min_offsupport_margin},
           {"support_points", v.support_points},
           {"offsupport_points", v.offsupport_points},
           {"atoms_after_open", v.atoms_after_open},
           {"atoms_total", v.atoms_total},
           {"early", v.early},
           {"gap_violations", v.gap_violations},
           {"cdf_monotone", v.cdf_monotone},
           {"density_nonnegative", v.density_nonnegative},
           {"cdf_terminal", v.cdf_terminal},
           {"recomputed_wait", v.recomputed_wait},
           {"passed", v.passed()}};
}

inline void from_json(const json& j, VerificationReport& v) {
  v.reference = j.at("reference").get<double>();
  v.max_support_deviation = j.at("max_support_deviation").get<double>();
  v.min_offsupport_margin = j.at("min_offsupport_margin").get<double>();
  v.support_points = j.at("support_points").get<std::size_t>();
  v.offsupport_points = j.at("offsupport_points").get<std::size_t>();
  v.atoms_after_open = j.at("atoms_after_open").get<std::size_t>();
  v.atoms_total = j.at("atoms_total").get<std::size_t>();
  v.early = j.at("early").get<bool>();
  v.gap_violations = j.at("gap_violations").get<std::vector<double>>();
  v.cdf_monotone = j.at("cdf_monotone").get<bool>();
  v.density_nonnegative = j.at("density_nonnegative").get<bool>();
  v.cdf_terminal = j.at("cdf_terminal").get<double>();
  v.recomputed_wait = j.at("recomputed_wait").get<std::vector<double>>();
}

inline void to_json(json& j, const Estimate& e) {
  j = json{{"mean", detail::number(e.mean)}, {"std_error", detail::number(e.std_error)},
           {"half_width", detail::number(e.half_width)}};
}

inline void from_json(const json& j, Estimate& e) {
  e.mean = detail::number(j.at("mean"));
  e.std_error = detail::number(j.at("std_error"));
  e.half_width = detail::number(j.at("half_width"));
}

inline void to_json(json& j, const CostBreakdown& c) {
  json ci = {{"phi_s", c.phi_s_mc.half_width}, {"e_w", c.e_w_mc.half_width}, {"e_i", c.e_i_mc.half_width}};
  j = json{{"lambda", c.lambda},
           {"phi_s", c.phi_s},
           {"per_customer", c.per_customer},
           {"e_w", c.e_w},
           {"e_i", c.e_i},
           {"ci_halfwidths", std::move(ci)},
           {"monte_carlo",
            {{"phi_s", c.phi_s_mc},
             {"per_customer", c.per_customer_mc},
             {"e_w", c.e_w_mc},
             {"e_i", c.e_i_mc},
             {"overtime", c.overtime_mc},
             {"queue_length", c.queue_length_mc},
             {"walkins", c.walkins_mc}}},
           {"max_conservation_error", c.max_conservation_error},
           {"replications", c.replications},
           {"seed", c.seed},
           {"phi", {{"0.1", c.phi(0.1)}, {"0.5", c.phi(0.5)}, {"0.9", c.phi(0.9)}}}};
}

inline void from_json(const json& j, CostBreakdown& c) {
  c.lambda = j.at("lambda").get<double>();
  c.phi_s = j.at("phi_s").get<double>();
  c.per_customer = j.at("per_customer").get<std::vector<double>>();
  c.e_w = j.at("e_w").get<double>();
  c.e_i = j.at("e_i").get<double>();
  const auto& mc = j.at("monte_carlo");
  c.phi_s_mc = mc.at("phi_s").get<Estimate>();
  c.per_customer_mc = mc.at("per_customer").get<std::vector<Estimate>>();
  c.e_w_mc = mc.at("e_w").get<Estimate>();
  c.e_i_mc = mc.at("e_i").get<Estimate>();
  c.overtime_mc = mc.at("overtime").get<Estimate>();
  c.queue_length_mc = mc.at("queue_length").get<Estimate>();
  c.walkins_mc = mc.at("walkins").get<Estimate>();
  c.max_conservation_error = j.at("max_conservation_error").get<double>();
  c.replications = j.at("replications").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
}

inline void to_json(json& j, const SimulationConfig& s) {
  j = json{{"replications", s.replications}, {"seed", s.seed}, {"batch_size", s.batch_size}};
}

inline void from_json(const json& j, SimulationConfig& s) {
  s.replications = j.at("replications").get<std::size_t>();
  s.seed = j.at("seed").get<std::uint64_t>();
  s.batch_size = j.at("batch_size").get<std::size_t>();
}

inline void to_json(json& j, const DEConfig& c) {
  j = json{{"population", c.population},
           {"weight", c.weight},
           {"crossover", c.crossover},
           {"max_iterations", c.max_iterations},
           {"window", c.window},
           {"tolerance", c.tolerance},
           {"seed", c.seed},
           {"initial", c.initial ? json(*c.initial) : json(nullptr)},
           {"eval_replications", c.eval_replications},
           {"final_replications", c.final_replications}};
}

inline void from_json(const json& j, DEConfig& c) {
  c.population = j.at("population").get<std::size_t>();
  c.weight = j.at("weight").get<double>();
  c.crossover = j.at("crossover").get<double>();
  c.max_iterations = j.at("max_iterations").get<std::size_t>();
  c.window = j.at("window").get<std::size_t>();
  c.tolerance = j.at("tolerance").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  if (j.at("initial").is_null()) {
    c.initial.reset();
  } else {
    c.initial = j.at("initial").get<std::vector<double>>();
  }
  c.eval_replications = j.at("eval_replications").get<std::size_t>();
  c.final_replications = j.at("final_replications").get<std::size_t>();
}

/// Optimization output: {lambda, gamma, config, best_schedule, phi_star, iterations, trace, ...}.
struct OptimizationRecord {
  std::string method;  // "de" or "grid"
  double lambda = 0.0;
  double gamma = 0.0;
  json config;
  std::vector<double> best_schedule;
  double phi_star = 0.0;
  double phi_in_loop = 0.0;
  std::size_t iterations = 0;
  bool converged = true;
  std::vector<std::pair<std::size_t, double>> trace;
  CostBreakdown cost;
};

inline void to_json(json& j, const OptimizationRecord& r) {
  json trace = json::array();
  for (const auto& [it, v] : r.trace) trace.push_back({it, detail::number(v)});
  j = json{{"method", r.method},           {"lambda", r.lambda},
           {"gamma", r.gamma},             {"config", r.config},
           {"best_schedule", r.best_schedule}, {"phi_star", r.phi_star},
           {"phi_in_loop", r.phi_in_loop}, {"iterations", r.iterations},
           {"converged", r.converged},     {"trace", std::move(trace)},
           {"cost", r.cost}};
}

inline void from_json(const json& j, OptimizationRecord& r) {
  r.method = j.at("method").get<std::string>();
  r.lambda = j.at("lambda").get<double>();
  r.gamma = j.at("gamma").get<double>();
  r.config = j.at("config");
  r.best_schedule = j.at("best_schedule").get<std::vector<double>>();
  r.phi_star = j.at("phi_star").get<double>();
  r.phi_in_loop = j.at("phi_in_loop").get<double>();
  r.iterations = j.at("iterations").get<std::size_t>();
  r.converged = j.at("converged").get<bool>();
  r.trace.clear();
  for (const auto& p : j.at("trace")) r.trace.emplace_back(p.at(0).get<std::size_t>(), detail::number(p.at(1)));
  r.cost = j.at("cost").get<CostBreakdown>();
}

/// One parsed line of a sweep CSV.
struct SweepCsvRow {
  double spacing = 0.0;
  std::vector<double> schedule;
  double phi_s = 0.0;
  double e_w = 0.0;
  double e_i = 0.0;
  std::vector<double> phi;
};

inline double parse_csv_number(const std::string& s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw IoError("bad number in CSV: " + s);
  return v;
}

inline std::vector<SweepCsvRow> read_sweep_csv(std::istream& in, std::vector<std::string>* header = nullptr) {
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty sweep CSV");
  std::vector<std::string> cols;
  {
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) cols.push_back(c);
  }
  if (cols.size() < 5 || cols[0] != "delta" || cols[1] != "schedule") throw IoError("unexpected sweep CSV header");
  if (header) *header = cols;
  std::vector<SweepCsvRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto q1 = line.find('"');
    const auto q2 = line.find('"', q1 + 1);
    if (q1 == std::string::npos || q2 == std::string::npos) throw IoError("sweep CSV row without quoted schedule");
    SweepCsvRow r;
    r.spacing = parse_csv_number(line.substr(0, q1 - 1));
    r.schedule = parse_time_list(line.substr(q1 + 1, q2 - q1 - 1));
    std::vector<double> rest;
    std::stringstream ss(line.substr(q2 + 2));
    std::string c;
    while (std::getline(ss, c, ',')) rest.push_back(parse_csv_number(c));
    if (rest.size() != cols.size() - 2) throw IoError("sweep CSV row has the wrong number of fields");
    r.phi_s = rest[0];
    r.e_w = rest[1];
    r.e_i = rest[2];
    r.phi.assign(rest.begin() + 3, rest.end());
    rows.push_back(std::move(r));
  }
  return rows;
}

/// Record of how an output file was produced; written next to it as <out>.manifest.json.
struct RunManifest {
  std::string command;
  std::vector<std::string> argv;
  json parameters;
  std::string version = kVersion;
  std::string timestamp;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::uint64_t seed = 0;
};

inline void to_json(json& j, const RunManifest& m) {
  j = json{{"command", m.command}, {"argv", m.argv},       {"parameters", m.parameters}, {"version", m.version},
           {"timestamp", m.timestamp}, {"inputs", m.inputs}, {"outputs", m.outputs},       {"seed", m.seed}};
}

inline void from_json(const json& j, RunManifest& m) {
  m.command = j.at("command").get<std::string>();
  m.argv = j.at("argv").get<std::vector<std::string>>();
  m.parameters = j.at("parameters");
  m.version = j.at("version").get<std::string>();
  m.timestamp = j.at("timestamp").get<std::string>();
  m.inputs = j.at("inputs").get<std::vector<std::string>>();
  m.outputs = j.at("outputs").get<std::vector<std::string>>();
  m.seed = j.at("seed").get<std::uint64_t>();
}

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline std::string manifest_path(const std::string& output) { return output + ".manifest.json"; }

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_json(const std::filesystem::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

inline json read_json(const std::filesystem::path& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw IoError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

}  // namespace walkin
