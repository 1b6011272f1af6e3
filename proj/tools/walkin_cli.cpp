#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "walkin/equilibrium.hpp"
#include "walkin/errors.hpp"
#include "walkin/io.hpp"
#include "walkin/metrics.hpp"
#include "walkin/optimizer.hpp"
#include "walkin/schedule.hpp"
#include "walkin/verification.hpp"

namespace fs = std::filesystem;
using namespace walkin;

namespace {

enum Exit { kOk = 0, kUsage = 2, kNonConvergence = 3, kInfeasible = 4, kIo = 5 };

struct ModelFlags {
  std::string schedule;
  ModelParams params;
  bool early = false;
  bool precise = false;

  void add(CLI::App* app, bool with_schedule) {
    if (with_schedule) app->add_option("--schedule", schedule, "appointment times, e.g. 1,3,5");
    app->add_option("--lambda", params.lambda, "mean number of walk-ins")->capture_default_str();
    app->add_option("--mu", params.mu, "service rate")->capture_default_str();
    app->add_option("--horizon", params.horizon, "end of the day T")->capture_default_str();
    app->add_option("--delta", params.delta, "grid step")->capture_default_str();
    app->add_option("--trunc-mass", params.trunc_mass, "Poisson mass kept by the walk-in truncation")
        ->capture_default_str();
    app->add_flag("--early-arrivals", early, "allow walk-ins to queue before opening");
    app->add_flag("--precise", precise, "tight F(T) and atom tolerances");
  }

  SolveConfig config() const {
    SolveConfig c = precise ? SolveConfig::precise() : SolveConfig{};
    c.early_arrivals = early;
    return c;
  }
};

std::string default_out(const std::string& name) {
  const char* dir = std::getenv("WALKIN_OUT_DIR");
  return (fs::path(dir && *dir ? dir : ".") / name).string();
}

std::uint64_t resolve_seed(std::optional<std::uint64_t> seed) {
  if (seed) return *seed;
  std::random_device rd;
  return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

/// Parses "a:b:s" into a start, stop, step triple.
void parse_grid(const std::string& text, SweepSpec& spec) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ':')) {
    try {
      v.push_back(std::stod(part));
    } catch (const std::exception&) {
      throw CLI::ValidationError("--delta-grid", "expected start:stop:step");
    }
  }
  if (v.size() != 3) throw CLI::ValidationError("--delta-grid", "expected start:stop:step");
  spec.start = v[0];
  spec.stop = v[1];
  spec.step = v[2];
}

void write_with_manifest(const std::string& out, const std::string& content, const std::string& command,
                         const std::vector<std::string>& argv, json parameters, std::uint64_t seed,
                         std::vector<std::string> inputs = {}) {
  write_text(out, content);
  RunManifest m;
  m.command = command;
  m.argv = argv;
  m.parameters = std::move(parameters);
  m.timestamp = utc_timestamp();
  m.inputs = std::move(inputs);
  m.outputs = {out};
  m.seed = seed;
  write_json(manifest_path(out), m);
}

EquilibriumResult load_equilibrium(const std::string& path) {
  const json j = read_json(path);
  return (j.contains("equilibrium") ? j.at("equilibrium") : j).get<EquilibriumResult>();
}

int run(std::vector<std::string> args) {
  CLI::App app{"Equilibrium walk-in arrivals with scheduled priority customers", "walkin_cli"};
  app.require_subcommand(1);
  unsigned threads = 1;
  app.add_option("--threads", threads, "worker cap; results do not depend on it")->capture_default_str();

  // solve
  auto* solve_cmd = app.add_subcommand("solve", "compute the equilibrium arrival distribution");
  ModelFlags solve_flags;
  solve_flags.add(solve_cmd, true);
  std::string solve_out;
  solve_cmd->add_option("--out", solve_out, "output JSON path");

  // sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "equal-spacing sweep of social costs to CSV");
  ModelFlags sweep_flags;
  sweep_flags.precise = true;
  sweep_flags.add(sweep_cmd, false);
  std::string pattern = "both";
  std::string grid = "0.1:5:0.1";
  std::vector<double> gammas;
  std::size_t sweep_reps = 100000;
  std::optional<std::uint64_t> sweep_seed;
  std::string sweep_out;
  sweep_cmd->add_option("--pattern", pattern, "front | back | both")
      ->check(CLI::IsMember({"front", "back", "both"}))
      ->capture_default_str();
  sweep_cmd->add_option("--delta-grid", grid, "start:stop:step")->capture_default_str();
  sweep_cmd->add_option("--gamma", gammas, "weights (default 0.1,0.5,0.9)")->delimiter(',');
  sweep_cmd->add_option("--replications", sweep_reps, "days simulated per schedule")->capture_default_str();
  sweep_cmd->add_option("--seed", sweep_seed, "simulation seed (drawn and recorded when absent)");
  sweep_cmd->add_option("--out", sweep_out, "output CSV path");

  // optimize
  auto* opt_cmd = app.add_subcommand("optimize", "search a schedule minimizing the social cost");
  ModelFlags opt_flags;
  opt_flags.precise = true;
  opt_flags.add(opt_cmd, false);
  std::string method = "de";
  double gamma = 0.5;
  std::size_t appointments = 3;
  DEConfig de;
  std::optional<std::uint64_t> opt_seed;
  std::string init;
  std::string opt_grid = "0.1:5:0.1";
  std::string opt_out;
  opt_cmd->add_option("--method", method, "de | grid")->check(CLI::IsMember({"de", "grid"}))->capture_default_str();
  opt_cmd->add_option("--gamma", gamma, "weight on waiting versus idle time")->capture_default_str();
  opt_cmd->add_option("--appointments", appointments, "number of scheduled customers")->capture_default_str();
  opt_cmd->add_option("--population", de.population, "DE population (0 = 15 per appointment)")->capture_default_str();
  opt_cmd->add_option("--weight", de.weight, "DE differential weight")->capture_default_str();
  opt_cmd->add_option("--crossover", de.crossover, "DE crossover rate")->capture_default_str();
  opt_cmd->add_option("--max-iterations", de.max_iterations, "DE generation cap")->capture_default_str();
  opt_cmd->add_option("--window", de.window, "generations without change that stop DE")->capture_default_str();
  opt_cmd->add_option("--tolerance", de.tolerance, "objective change counted as no change")->capture_default_str();
  opt_cmd->add_option("--eval-replications", de.eval_replications, "days per in-loop evaluation")
      ->capture_default_str();
  opt_cmd->add_option("--replications", de.final_replications, "days for the final evaluation")
      ->capture_default_str();
  opt_cmd->add_option("--init", init, "schedule injected into the initial population");
  opt_cmd->add_option("--delta-grid", opt_grid, "spacing grid for --method grid")->capture_default_str();
  opt_cmd->add_option("--seed", opt_seed, "seed (drawn and recorded when absent)");
  opt_cmd->add_option("--out", opt_out, "output JSON path");

  // simulate
  auto* sim_cmd = app.add_subcommand("simulate", "Monte-Carlo costs under a solved equilibrium");
  ModelFlags sim_flags;
  sim_flags.precise = true;
  sim_flags.add(sim_cmd, true);
  std::string sim_input;
  SimulationConfig sim;
  std::optional<std::uint64_t> sim_seed;
  std::string sim_out;
  sim_cmd->add_option("--input", sim_input, "equilibrium JSON from solve (otherwise solves from flags)");
  sim_cmd->add_option("--replications", sim.replications, "simulated days")->capture_default_str();
  sim_cmd->add_option("--batch-size", sim.batch_size, "days per batch for confidence intervals")
      ->capture_default_str();
  sim_cmd->add_option("--seed", sim_seed, "seed (drawn and recorded when absent)");
  sim_cmd->add_option("--out", sim_out, "output JSON path");

  // verify
  auto* verify_cmd = app.add_subcommand("verify", "check the equilibrium conditions of a solve output");
  std::string verify_input;
  std::string verify_out;
  double support_tol = 0.02;
  double margin_tol = 1e-3;
  verify_cmd->add_option("--input", verify_input, "equilibrium JSON")->required();
  verify_cmd->add_option("--support-tol", support_tol, "on-support relative deviation allowed")->capture_default_str();
  verify_cmd->add_option("--margin-tol", margin_tol, "off-support relative margin allowed")->capture_default_str();
  verify_cmd->add_option("--out", verify_out, "output JSON path");

  // replay
  auto* replay_cmd = app.add_subcommand("replay", "rerun the command recorded in a manifest");
  std::string manifest;
  std::string replay_out;
  replay_cmd->add_option("--manifest", manifest, "manifest JSON")->required();
  replay_cmd->add_option("--out", replay_out, "write to this path instead of the recorded one");

  std::vector<std::string> reversed(args.rbegin(), args.rend() - 1);
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*solve_cmd) {
      if (solve_flags.schedule.empty() && !solve_cmd->count("--schedule")) {
        throw CLI::RequiredError("--schedule");
      }
      const Schedule sched = parse_schedule(solve_flags.schedule, solve_flags.params.horizon);
      const SolveConfig cfg = solve_flags.config();
      const EquilibriumResult r = solve(sched, solve_flags.params, cfg);
      const VerificationReport v = verify_equilibrium(r);
      const std::string out = solve_out.empty() ? default_out("solve.json") : solve_out;
      json doc = {{"equilibrium", r}, {"verification", v}};
      write_with_manifest(out, doc.dump(2) + "\n", "solve", args,
                          {{"params", solve_flags.params}, {"config", cfg}, {"schedule", sched.times()}}, 0);
      std::cout << "p_e = " << r.atom << ", t0 = " << r.support_start << ", E_w = " << r.equilibrium_wait
                << ", F(T) = " << r.diagnostics.cdf_terminal << " -> " << out << "\n";
      return kOk;
    }

    if (*sweep_cmd) {
      SweepSpec spec;
      parse_grid(grid, spec);
      if (pattern == "front") spec.patterns = {SpacingPattern::front};
      if (pattern == "back") spec.patterns = {SpacingPattern::back};
      if (!gammas.empty()) spec.gammas = gammas;
      SimulationConfig sc;
      sc.replications = sweep_reps;
      sc.seed = resolve_seed(sweep_seed);
      sc.threads = threads;
      const auto rows = sweep_equal_spacing(spec, sweep_flags.params, sweep_flags.config(), sc);
      std::ostringstream csv;
      write_sweep_csv(csv, rows, spec.gammas);
      const std::string out = sweep_out.empty() ? default_out("sweep.csv") : sweep_out;
      write_with_manifest(out, csv.str(), "sweep", args,
                          {{"params", sweep_flags.params},
                           {"config", sweep_flags.config()},
                           {"pattern", pattern},
                           {"delta_grid", grid},
                           {"gammas", spec.gammas},
                           {"simulation", sc}},
                          sc.seed);
      std::size_t failed = 0;
      for (const auto& r : rows) {
        if (!r.ok()) {
          ++failed;
          std::cerr << "row " << format_schedule(r.schedule) << " failed: " << r.error << "\n";
        }
      }
      std::cout << rows.size() << " rows -> " << out << "\n";
      return failed == 0 ? kOk : kNonConvergence;
    }

    if (*opt_cmd) {
      const std::uint64_t seed = resolve_seed(opt_seed);
      OptimizationRecord rec;
      rec.method = method;
      rec.lambda = opt_flags.params.lambda;
      rec.gamma = gamma;
      const SolveConfig cfg = opt_flags.config();
      if (!(gamma >= 0.0 && gamma <= 1.0)) throw DomainError("gamma must lie in [0,1]");
      if (method == "de") {
        de.seed = seed;
        de.threads = threads;
        if (!init.empty()) de.initial = parse_time_list(init);
        const DEResult r = optimize_de(opt_flags.params, gamma, appointments, de, cfg);
        rec.config = de;
        rec.best_schedule = r.best_schedule;
        rec.phi_star = r.phi_star;
        rec.phi_in_loop = r.phi_in_loop;
        rec.iterations = r.iterations;
        rec.converged = r.converged;
        rec.trace = r.trace;
        rec.cost = r.final_cost;
      } else {
        SweepSpec spec;
        parse_grid(opt_grid, spec);
        spec.appointments = appointments;
        spec.gammas = {gamma};
        SimulationConfig sc;
        sc.replications = de.final_replications;
        sc.seed = seed;
        sc.threads = threads;
        const auto rows = sweep_equal_spacing(spec, opt_flags.params, cfg, sc);
        const SweepRow* best = best_row(rows, 0);
        if (!best) throw Infeasible("no equally spaced schedule could be evaluated");
        rec.config = {{"delta_grid", opt_grid}, {"simulation", sc}};
        rec.best_schedule = best->schedule;
        rec.phi_star = best->phi[0];
        rec.phi_in_loop = best->phi[0];
        rec.iterations = rows.size();
        for (std::size_t i = 0; i < rows.size(); ++i) rec.trace.emplace_back(i, rows[i].ok() ? rows[i].phi[0] : std::nan(""));
        rec.cost = *best->cost;
      }
      if (!std::isfinite(rec.phi_star)) throw NonConvergence("best schedule could not be evaluated");
      const std::string out = opt_out.empty() ? default_out("optimize.json") : opt_out;
      write_with_manifest(out, json(rec).dump(2) + "\n", "optimize", args,
                          {{"params", opt_flags.params}, {"config", cfg}, {"method", method}, {"gamma", gamma}},
                          seed);
      std::cout << "best " << format_schedule(rec.best_schedule) << ", Phi = " << rec.phi_star << " -> " << out
                << "\n";
      return rec.converged ? kOk : kNonConvergence;
    }

    if (*sim_cmd) {
      EquilibriumResult r;
      std::vector<std::string> inputs;
      if (!sim_input.empty()) {
        r = load_equilibrium(sim_input);
        inputs.push_back(sim_input);
      } else {
        if (sim_flags.schedule.empty()) throw CLI::RequiredError("--schedule or --input");
        r = solve(parse_schedule(sim_flags.schedule, sim_flags.params.horizon), sim_flags.params, sim_flags.config());
      }
      sim.seed = resolve_seed(sim_seed);
      sim.threads = threads;
      const CostBreakdown c = simulate(r, sim);
      const std::string out = sim_out.empty() ? default_out("simulate.json") : sim_out;
      write_with_manifest(out, json(c).dump(2) + "\n", "simulate", args,
                          {{"params", r.params}, {"schedule", r.schedule.times()}, {"simulation", sim}}, sim.seed,
                          inputs);
      std::cout << "Phi_s = " << c.phi_s << ", E_w = " << c.e_w << " (MC " << c.e_w_mc.mean << "), E_I = " << c.e_i
                << " (MC " << c.e_i_mc.mean << ") -> " << out << "\n";
      return kOk;
    }

    if (*verify_cmd) {
      const EquilibriumResult r = load_equilibrium(verify_input);
      const VerificationReport v = verify_equilibrium(r);
      const bool ok = v.passed(support_tol, margin_tol);
      const std::string out = verify_out.empty() ? default_out("verify.json") : verify_out;
      json doc = v;
      doc["passed"] = ok;
      write_with_manifest(out, doc.dump(2) + "\n", "verify", args,
                          {{"support_tol", support_tol}, {"margin_tol", margin_tol}}, 0, {verify_input});
      std::cout << "max on-support deviation " << v.max_support_deviation << ", min off-support margin "
                << v.min_offsupport_margin << (ok ? " -> pass" : " -> FAIL") << "\n";
      return ok ? kOk : kNonConvergence;
    }

    if (*replay_cmd) {
      RunManifest m = read_json(manifest).get<RunManifest>();
      std::vector<std::string> again = m.argv;
      if (!replay_out.empty()) {
        bool replaced = false;
        for (std::size_t i = 0; i + 1 < again.size(); ++i) {
          if (again[i] == "--out") {
            again[i + 1] = replay_out;
            replaced = true;
          }
        }
        if (!replaced) {
          again.push_back("--out");
          again.push_back(replay_out);
        }
      }
      // A seed drawn at run time is pinned so the rerun reproduces the same numbers.
      const bool has_seed = std::find(again.begin(), again.end(), "--seed") != again.end();
      if (!has_seed && (m.command == "sweep" || m.command == "optimize" || m.command == "simulate")) {
        again.push_back("--seed");
        again.push_back(std::to_string(m.seed));
      }
      return run(again);
    }
  } catch (const CLI::Error& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const InvalidSchedule& e) {
    std::cerr << "invalid schedule: " << e.what() << "\n";
    return kUsage;
  } catch (const DomainError& e) {
    std::cerr << "invalid argument: " << e.what() << "\n";
    return kUsage;
  } catch (const Infeasible& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return kInfeasible;
  } catch (const NonConvergence& e) {
    std::cerr << "no convergence: " << e.what() << "\n";
    return kNonConvergence;
  } catch (const DegenerateState& e) {
    std::cerr << "degenerate state: " << e.what() << "\n";
    return kNonConvergence;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kIo;
  } catch (const json::exception& e) {
    std::cerr << "malformed input: " << e.what() << "\n";
    return kIo;
  }
  return kUsage;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  try {
    return run(args);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
