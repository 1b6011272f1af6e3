#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "walkin/equilibrium.hpp"
#include "walkin/errors.hpp"
#include "walkin/metrics.hpp"
#include "walkin/params.hpp"
#include "walkin/schedule.hpp"

namespace walkin {

/// Runs fn(i) for i in [0, n) on up to `threads` workers; results must be written by index.
inline void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn) {
  const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  }
}

enum class SpacingPattern { front, back };

inline const char* pattern_name(SpacingPattern p) { return p == SpacingPattern::front ? "front" : "back"; }

/// Equally spaced appointments: front (0, D, 2D, ...) or back (..., T - D, T). Empty when they do
/// not fit in [0, T].
inline std::optional<Schedule> equal_spacing(SpacingPattern pattern, double spacing, std::size_t appointments,
                                             double horizon) {
  if (appointments == 0 || !(spacing > 0.0)) return std::nullopt;
  const double span = spacing * static_cast<double>(appointments - 1);
  if (span > horizon * (1.0 + 1e-12)) return std::nullopt;
  std::vector<double> t(appointments);
  for (std::size_t i = 0; i < appointments; ++i) {
    const double off = std::round(spacing * static_cast<double>(i) * 1e10) / 1e10;
    t[i] = pattern == SpacingPattern::front ? off : std::round((horizon - span + off) * 1e10) / 1e10;
  }
  t.front() = std::max(0.0, t.front());
  t.back() = std::min(horizon, t.back());
  return Schedule(std::move(t), horizon);
}

struct SweepSpec {
  std::vector<SpacingPattern> patterns{SpacingPattern::front, SpacingPattern::back};
  double start = 0.1;
  double stop = 5.0;
  double step = 0.1;
  std::size_t appointments = 3;
  std::vector<double> gammas{0.1, 0.5, 0.9};

  void validate() const {
    if (patterns.empty()) throw DomainError("sweep needs at least one pattern");
    if (!(step > 0.0) || !(start > 0.0) || stop < start) throw DomainError("invalid spacing grid");
    if (appointments < 1) throw DomainError("sweep needs at least one appointment");
    for (double g : gammas) {
      if (!(g >= 0.0 && g <= 1.0)) throw DomainError("gamma must lie in [0,1]");
    }
  }

  /// Grid values start, start + step, ..., rounded to 1e-10 so that 0.1 * 3 prints as 0.3.
  std::vector<double> spacings() const {
    std::vector<double> out;
    const auto n = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9));
    for (std::size_t i = 0; i <= n; ++i) out.push_back(std::round((start + step * static_cast<double>(i)) * 1e10) / 1e10);
    return out;
  }
};

struct SweepRow {
  SpacingPattern pattern = SpacingPattern::front;
  double spacing = 0.0;
  std::vector<double> schedule;
  std::optional<CostBreakdown> cost;
  std::string error;
  std::vector<double> phi;  // one per gamma

  bool ok() const { return cost.has_value(); }
};

/// Solve + simulate for one schedule, the unit of work shared by the sweep and the optimizer.
inline CostBreakdown evaluate_schedule(const Schedule& schedule, const ModelParams& params, const SolveConfig& solve_cfg,
                                       const SimulationConfig& sim_cfg) {
  const EquilibriumResult eq = solve(schedule, params, solve_cfg);
  return simulate(eq, sim_cfg);
}

/// Every sweep point is simulated with the same seed, so neighbouring schedules share random numbers.
/// Spacings whose schedule does not fit in [0, T] are skipped.
inline std::vector<SweepRow> sweep_equal_spacing(const SweepSpec& spec, const ModelParams& params,
                                                 const SolveConfig& solve_cfg, const SimulationConfig& sim_cfg) {
  spec.validate();
  params.validate();
  std::vector<SweepRow> rows;
  for (SpacingPattern pat : spec.patterns) {
    for (double d : spec.spacings()) {
      auto sched = equal_spacing(pat, d, spec.appointments, params.horizon);
      if (!sched) continue;
      SweepRow row;
      row.pattern = pat;
      row.spacing = d;
      row.schedule = sched->times();
      rows.push_back(std::move(row));
    }
  }
  SimulationConfig inner = sim_cfg;
  inner.threads = 1;
  parallel_for(rows.size(), sim_cfg.threads, [&](std::size_t i) {
    SweepRow& row = rows[i];
    try {
      row.cost = evaluate_schedule(Schedule(row.schedule, params.horizon), params, solve_cfg, inner);
      for (double g : spec.gammas) row.phi.push_back(social_cost(*row.cost, g));
    } catch (const std::exception& e) {
      row.error = e.what();
      row.phi.assign(spec.gammas.size(), std::numeric_limits<double>::quiet_NaN());
    }
  });
  return rows;
}

/// Column label for a weight: 0.1 -> phi_g01, 0.25 -> phi_g025.
inline std::string gamma_column(double gamma) {
  std::string s = format_schedule(std::vector<double>{gamma});
  s.erase(std::remove(s.begin(), s.end(), '.'), s.end());
  return "phi_g" + s;
}

inline void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows, const std::vector<double>& gammas) {
  auto num = [](double x) {
    if (!std::isfinite(x)) return std::string("nan");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", x);
    return std::string(buf);
  };
  os << "delta,schedule,phi_s,e_w,e_i";
  for (double g : gammas) os << ',' << gamma_column(g);
  os << '\n';
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (const auto& r : rows) {
    os << num(r.spacing) << ",\"" << format_schedule(r.schedule) << "\"";
    os << ',' << num(r.ok() ? r.cost->phi_s : nan) << ',' << num(r.ok() ? r.cost->e_w : nan) << ','
       << num(r.ok() ? r.cost->e_i : nan);
    for (std::size_t g = 0; g < gammas.size(); ++g) os << ',' << num(g < r.phi.size() ? r.phi[g] : nan);
    os << '\n';
  }
}

/// Row with the smallest social cost at weight index g; nullptr when every row failed.
inline const SweepRow* best_row(const std::vector<SweepRow>& rows, std::size_t g) {
  const SweepRow* best = nullptr;
  for (const auto& r : rows) {
    if (!r.ok() || g >= r.phi.size()) continue;
    if (!best || r.phi[g] < best->phi[g]) best = &r;
  }
  return best;
}

struct DEConfig {
  std::size_t population = 0;  // 0 means 15 per appointment
  double weight = 0.8;
  double crossover = 0.9;
  std::size_t max_iterations = 200;
  std::size_t window = 10;
  double tolerance = 1e-4;
  std::uint64_t seed = 1;
  std::optional<std::vector<double>> initial;  // injected as population member 0
  std::size_t eval_replications = 10000;
  std::size_t final_replications = 1000000;
  unsigned threads = 1;

  std::size_t population_for(std::size_t appointments) const {
    return population > 0 ? population : 15 * appointments;
  }

  void validate(std::size_t appointments) const {
    if (population_for(appointments) < 4) throw DomainError("population must be at least 4");
    if (!(weight > 0.0 && weight < 2.0)) throw DomainError("differential weight must lie in (0,2)");
    if (!(crossover >= 0.0 && crossover <= 1.0)) throw DomainError("crossover rate must lie in [0,1]");
    if (window < 1) throw DomainError("convergence window must be at least 1");
    if (!(tolerance >= 0.0)) throw DomainError("tolerance must be nonnegative");
    if (eval_replications < 1 || final_replications < 1) throw DomainError("replications must be at least 1");
  }
};

/// Clip to [0, T], sort, then enforce a minimum gap: forward pass pushes right, backward pass pulls
/// back under T. Only violations beyond a relative epsilon move a point, so repair(repair(x)) == repair(x).
inline std::vector<double> repair_schedule(std::vector<double> x, double horizon, double min_gap) {
  if (x.empty()) return x;
  if (min_gap * static_cast<double>(x.size() - 1) > horizon) throw Infeasible("minimum gap does not fit in the horizon");
  const double eps = 1e-9 * std::max(min_gap, 1e-12);
  for (auto& v : x) v = std::clamp(std::isfinite(v) ? v : 0.0, 0.0, horizon);
  std::sort(x.begin(), x.end());
  for (std::size_t i = 1; i < x.size(); ++i) {
    if (x[i] < x[i - 1] + min_gap - eps) x[i] = x[i - 1] + min_gap;
  }
  if (x.back() > horizon) x.back() = horizon;
  for (std::size_t i = x.size() - 1; i-- > 0;) {
    if (x[i] > x[i + 1] - min_gap + eps) x[i] = x[i + 1] - min_gap;
  }
  if (x.front() < 0.0) x.front() = 0.0;
  return x;
}

struct DEResult {
  std::vector<double> best_schedule;
  double phi_star = 0.0;     // final re-evaluation
  double phi_in_loop = 0.0;  // incumbent objective at the in-loop replication count
  std::size_t iterations = 0;
  std::size_t evaluations = 0;
  bool converged = false;
  std::vector<std::pair<std::size_t, double>> trace;  // (iteration, incumbent objective)
  CostBreakdown final_cost;
};

/// Social cost of one schedule with the given settings; +inf when the solver fails.
inline double schedule_objective(const std::vector<double>& x, const ModelParams& params, double gamma,
                                 const SolveConfig& solve_cfg, const SimulationConfig& sim_cfg,
                                 CostBreakdown* out = nullptr) {
  try {
    CostBreakdown c = evaluate_schedule(Schedule(x, params.horizon), params, solve_cfg, sim_cfg);
    const double v = social_cost(c, gamma);
    if (out) *out = std::move(c);
    return v;
  } catch (const DomainError&) {
    throw;
  } catch (const std::exception&) {
    return std::numeric_limits<double>::infinity();
  }
}

/// DE/rand/1/bin over appointment vectors in [0, T]^M. All in-loop evaluations share one simulation
/// seed; trial vectors are drawn single-threaded before each generation is evaluated.
inline DEResult optimize_de(const ModelParams& params, double gamma, std::size_t appointments, const DEConfig& config,
                            const SolveConfig& solve_cfg = SolveConfig::precise()) {
  params.validate();
  if (appointments < 1) throw DomainError("optimization needs at least one appointment");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw DomainError("gamma must lie in [0,1]");
  config.validate(appointments);
  const std::size_t np = config.population_for(appointments);
  const std::size_t dim = appointments;
  const double horizon = params.horizon;
  const double gap = params.delta;

  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  SimulationConfig sim;
  sim.replications = config.eval_replications;
  sim.seed = config.seed;
  sim.threads = 1;

  DEResult res;
  auto evaluate_all = [&](const std::vector<std::vector<double>>& xs) {
    std::vector<double> f(xs.size());
    parallel_for(xs.size(), config.threads,
                 [&](std::size_t i) { f[i] = schedule_objective(xs[i], params, gamma, solve_cfg, sim); });
    res.evaluations += xs.size();
    return f;
  };

  std::vector<std::vector<double>> pop(np, std::vector<double>(dim));
  for (std::size_t i = 0; i < np; ++i) {
    for (auto& v : pop[i]) v = unif(rng) * horizon;
    if (i == 0 && config.initial) {
      if (config.initial->size() != dim) throw DomainError("initial schedule has the wrong number of appointments");
      pop[i] = *config.initial;
    }
    pop[i] = repair_schedule(std::move(pop[i]), horizon, gap);
  }
  std::vector<double> fit = evaluate_all(pop);
  auto best_index = [&] {
    return static_cast<std::size_t>(std::min_element(fit.begin(), fit.end()) - fit.begin());
  };
  double incumbent = fit[best_index()];
  res.trace.emplace_back(0, incumbent);

  std::size_t stable = 0;
  std::uniform_int_distribution<std::size_t> pick(0, np - 1);
  std::uniform_int_distribution<std::size_t> pick_dim(0, dim - 1);
  for (std::size_t it = 1; it <= config.max_iterations; ++it) {
    std::vector<std::vector<double>> trials(np);
    for (std::size_t i = 0; i < np; ++i) {
      std::size_t r1, r2, r3;
      do r1 = pick(rng); while (r1 == i);
      do r2 = pick(rng); while (r2 == i || r2 == r1);
      do r3 = pick(rng); while (r3 == i || r3 == r1 || r3 == r2);
      const std::size_t jrand = pick_dim(rng);
      std::vector<double> y = pop[i];
      for (std::size_t j = 0; j < dim; ++j) {
        if (j == jrand || unif(rng) < config.crossover) y[j] = pop[r1][j] + config.weight * (pop[r2][j] - pop[r3][j]);
      }
      trials[i] = repair_schedule(std::move(y), horizon, gap);
    }
    const std::vector<double> tf = evaluate_all(trials);
    for (std::size_t i = 0; i < np; ++i) {
      if (tf[i] <= fit[i]) {
        pop[i] = std::move(trials[i]);
        fit[i] = tf[i];
      }
    }
    const double now = fit[best_index()];
    res.trace.emplace_back(it, now);
    res.iterations = it;
    stable = std::abs(now - incumbent) <= config.tolerance ? stable + 1 : 0;
    incumbent = now;
    if (stable >= config.window) {
      res.converged = true;
      break;
    }
  }

  const std::size_t b = best_index();
  res.best_schedule = pop[b];
  res.phi_in_loop = fit[b];
  SimulationConfig fin = sim;
  fin.replications = config.final_replications;
  fin.threads = config.threads;
  res.phi_star = schedule_objective(res.best_schedule, params, gamma, solve_cfg, fin, &res.final_cost);
  return res;
}

}  // namespace walkin
