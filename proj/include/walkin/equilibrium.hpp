#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "walkin/distributions.hpp"
#include "walkin/dynamics.hpp"
#include "walkin/errors.hpp"
#include "walkin/params.hpp"
#include "walkin/schedule.hpp"
#include "walkin/waiting.hpp"

namespace walkin {

struct SolveConfig {
  double atom_bisect_tol = 0.01;  // bracket width on the atom size
  double cdf_tol = 0.005;         // accepted |F_e(T) - 1|
  int max_outer_iters = 200;
  double support_slack = 1e-6;    // relative slack in E_w(t) <= E_w comparisons
  bool early_arrivals = false;

  /// Tight settings for cost evaluation, where F_e(T) must sit at one for sampling to be unbiased.
  static SolveConfig precise(bool early = false) {
    SolveConfig c;
    c.atom_bisect_tol = 1e-6;
    c.cdf_tol = 1e-4;
    c.early_arrivals = early;
    return c;
  }

  bool operator==(const SolveConfig&) const = default;

  void validate() const {
    if (!(atom_bisect_tol > 0.0)) throw DomainError("atom bisection tolerance must be positive");
    if (!(cdf_tol > 0.0 && cdf_tol < 0.05)) throw DomainError("cdf tolerance must lie in (0, 0.05)");
    if (max_outer_iters < 1) throw DomainError("max_outer_iters must be positive");
    if (!(support_slack >= 0.0)) throw DomainError("support slack must be nonnegative");
  }
};

/// One node of the solved trajectory: density on [t, next node), cdf and E_w at t.
struct GridPoint {
  double t = 0.0;
  double density = 0.0;
  double cdf = 0.0;
  double expected_wait = 0.0;
};

struct SolveDiagnostics {
  double cdf_terminal = 0.0;
  double shed_mass = 0.0;
  int iterations = 0;
  std::string method;
  /// (searched parameter, F(T)) for every trial, in evaluation order.
  std::vector<std::pair<double, double>> trace;
};

struct EquilibriumResult {
  ModelParams params;
  Schedule schedule;
  bool early = false;
  double atom = 0.0;
  double support_start = 0.0;
  double equilibrium_wait = 0.0;
  std::vector<GridPoint> grid;
  SolveDiagnostics diagnostics;

  /// Mass of the continuous part, F(T) - atom.
  double continuous_mass() const { return diagnostics.cdf_terminal - atom; }
};

/// Node times on [a, b): a, a+delta, ... with a shorter residual step before b. `extra` is inserted
/// when it falls strictly inside.
inline std::vector<double> segment_nodes(double a, double b, double delta, std::optional<double> extra = {}) {
  std::vector<double> nodes;
  if (!(b > a)) return nodes;
  const double span = b - a;
  const auto steps = static_cast<std::size_t>(std::ceil(span / delta - 1e-9));
  nodes.reserve(steps + 1);
  for (std::size_t j = 0; j < steps; ++j) nodes.push_back(a + static_cast<double>(j) * delta);
  if (extra && *extra > a && *extra < b) {
    auto it = std::lower_bound(nodes.begin(), nodes.end(), *extra);
    if (it == nodes.end() || *it != *extra) nodes.insert(it, *extra);
  }
  return nodes;
}

namespace detail {

/// Which unknown a trial fixes.
struct TrialSpec {
  double atom = 0.0;                     // mass at 0 (no-early only)
  double start = 0.0;                    // t0: no arrivals before it; negative means early phase
  bool atom_reference = false;           // E_w reference from the atom formula instead of E_w(t0)
};

struct Trial {
  double cdf_terminal = 0.0;
  double reference = 0.0;
  double shed = 0.0;
  std::vector<GridPoint> grid;
};

class TrialRunner {
 public:
  TrialRunner(const Schedule& schedule, const ModelParams& params, const SolveConfig& config)
      : params_(params),
        config_(config),
        schedule_(schedule),
        aug_(schedule),
        truncation_(params.truncation()),
        top_(params.state_top(schedule.size())),
        table_(aug_, params.mu, params.table_size(schedule.size())) {}

  const AugmentedSchedule& augmented() const { return aug_; }
  const WaitTable& table() const { return table_; }
  std::size_t truncation() const { return truncation_; }
  std::size_t top() const { return top_; }

  Trial run(const TrialSpec& spec, bool record) const {
    Trial out;
    const double lambda = params_.lambda;
    const double mu = params_.mu;
    const double delta = params_.delta;
    double cdf = 0.0;
    std::optional<double> reference;
    StateVector state(top_, 0.0);

    if (spec.start < 0.0) {
      // Pre-opening: no departures, the state is Poisson(lambda F) and E_w(t) = -t + sum P_n w(n, 0).
      reference = -spec.start + opening_wait(table_, aug_, 0);
      auto nodes = segment_nodes(spec.start, 0.0, delta);
      for (std::size_t j = 0; j < nodes.size(); ++j) {
        const double t = nodes[j];
        const double next = j + 1 < nodes.size() ? nodes[j + 1] : 0.0;
        const double f = early_density(cdf, lambda, table_, aug_, truncation_);
        if (record) {
          const auto pois = poisson_pmf(lambda * cdf, truncation_ + 1);
          out.grid.push_back({t, f, cdf, early_expected_wait(t, pois, table_, aug_)});
        }
        cdf += f * (next - t);
      }
      const auto pois = poisson_pmf(lambda * cdf, truncation_ + 1);
      std::copy(pois.begin(), pois.end(), state.probs.begin());
    } else {
      const auto pois = poisson_pmf(lambda * spec.atom, truncation_ + 1);
      std::copy(pois.begin(), pois.end(), state.probs.begin());
      cdf = spec.atom;
      if (spec.atom_reference) {
        reference = atom_expected_wait(spec.atom, lambda, table_, aug_, truncation_);
      }
    }

    const double activation = spec.start > 0.0 ? spec.start : 0.0;
    const std::size_t m = aug_.appointments();
    WaitProfile profile;
    // Once entered, the support is kept while the density stays positive; a pre-opening support
    // carries into the segments that start at 0.
    bool on_support = spec.start < 0.0;
    for (std::size_t k = 0; k <= m; ++k) {
      if (k >= 1) state = apply_scheduled_arrival(std::move(state));
      const double a = aug_.point(k);
      const double b = aug_.point(k + 1);
      auto nodes = segment_nodes(a, b, delta, activation);
      if (k == m) nodes.push_back(b);  // terminal node at T
      double off_gap = -1.0;  // E_w - reference at the previous node when it sat off the support, else < 0
      if (a > 0.0) on_support = false;
      for (std::size_t j = 0; j < nodes.size(); ++j) {
        const double t = nodes[j];
        const bool terminal = k == m && j + 1 == nodes.size();
        const double next = j + 1 < nodes.size() ? nodes[j + 1] : b;
        state.clock = t;
        detail::fill_profile(table_, aug_, k, t, top_ + 2, profile, true);
        const auto terms = density_terms(state.probs, profile, lambda, mu);
        double ew = terms.expected_wait;
        double f = 0.0;
        const bool atom_node = t == 0.0 && spec.atom > 0.0;
        if (atom_node) {
          ew = *reference;
        } else if (t + 1e-12 >= activation) {
          if (!reference) reference = ew;
          const bool entering = ew <= *reference * (1.0 + config_.support_slack);
          if ((on_support || entering) && terms.denominator > 0.0) f = std::max(0.0, terms.density());
          on_support = f > 0.0;
        }
        if (record) out.grid.push_back({t, f, cdf, ew});
        if (terminal) break;
        const double h = next - t;
        // Re-entry after a gap falls between two nodes; crediting the crossed fraction of the
        // previous step keeps F(T) continuous in the search parameter.
        double credit = 0.0;
        if (f > 0.0 && off_gap > 0.0 && j > 0) {
          const double drop = off_gap - (ew - *reference);
          if (drop > 0.0) credit = (1.0 - std::clamp(off_gap / drop, 0.0, 1.0)) * (t - nodes[j - 1]);
        }
        off_gap = -1.0;
        if (f == 0.0 && reference && !atom_node && ew > *reference * (1.0 + config_.support_slack)) {
          off_gap = ew - *reference;
        }
        if (h > 0.0) {
          const double mass = f * (h + credit);
          cdf += mass;
          step_forward_inplace(state, mass / h, h, lambda, mu);
        }
      }
    }
    out.cdf_terminal = cdf;
    out.reference = reference.value_or(0.0);
    out.shed = state.shed;
    return out;
  }

 private:
  ModelParams params_;
  SolveConfig config_;
  Schedule schedule_;
  AugmentedSchedule aug_;
  std::size_t truncation_;
  std::size_t top_;
  WaitTable table_;
};

inline EquilibriumResult package(const Schedule& schedule, const ModelParams& params, bool early, double atom,
                                 double start, Trial&& trial, SolveDiagnostics diag) {
  EquilibriumResult r;
  r.params = params;
  r.schedule = schedule;
  r.early = early;
  r.atom = atom;
  r.support_start = start;
  r.equilibrium_wait = trial.reference;
  r.grid = std::move(trial.grid);
  diag.cdf_terminal = trial.cdf_terminal;
  diag.shed_mass = trial.shed;
  r.diagnostics = std::move(diag);
  return r;
}

inline void prepare(const Schedule& schedule, const ModelParams& params, const SolveConfig& config) {
  params.validate();
  config.validate();
  if (schedule.horizon() != params.horizon) throw InvalidSchedule("schedule horizon differs from model horizon");
}

inline EquilibriumResult atom_search(const Schedule& schedule, const ModelParams& params, const SolveConfig& config,
                                     const TrialRunner& runner, SolveDiagnostics diag) {
  double lo = 0.0;
  double hi = 1.0;
  std::optional<Trial> best;
  double best_p = 0.0;
  for (int it = 0; it < config.max_outer_iters; ++it) {
    const double p = 0.5 * (lo + hi);
    Trial trial = runner.run({p, 0.0, true}, true);
    ++diag.iterations;
    diag.trace.emplace_back(p, trial.cdf_terminal);
    const double miss = trial.cdf_terminal - 1.0;
    const bool done = std::abs(miss) <= config.cdf_tol && hi - lo <= config.atom_bisect_tol;
    if (!best || std::abs(miss) < std::abs(best->cdf_terminal - 1.0) || done) {
      best = std::move(trial);
      best_p = p;
    }
    if (done) return package(schedule, params, false, best_p, 0.0, std::move(*best), std::move(diag));
    if (miss > 0.0) {
      hi = p;
    } else {
      lo = p;
    }
    if (hi - lo < 1e-13) break;
  }
  throw NonConvergence("atom bisection did not reach |F(T) - 1| <= cdf_tol (best F(T) = " +
                       std::to_string(best ? best->cdf_terminal : 0.0) + ")");
}

}  // namespace detail

/// Atom at opening: bisects the atom size until the cdf ends at one.
inline EquilibriumResult solve_atom_case(const Schedule& schedule, const ModelParams& params,
                                         const SolveConfig& config = {}) {
  detail::prepare(schedule, params, config);
  detail::TrialRunner runner(schedule, params, config);
  SolveDiagnostics diag;
  diag.method = "atom";
  return detail::atom_search(schedule, params, config, runner, std::move(diag));
}

/// First appointment at time 0: either an atom (delegated) or a support start t0 >= 0 found by
/// bisection inside successive inter-appointment intervals.
inline EquilibriumResult solve_schedule_at_zero(const Schedule& schedule, const ModelParams& params,
                                                const SolveConfig& config = {}) {
  detail::prepare(schedule, params, config);
  if (!schedule.starts_at_zero()) throw InvalidSchedule("solve_schedule_at_zero needs an appointment at 0");
  detail::TrialRunner runner(schedule, params, config);
  SolveDiagnostics diag;
  diag.method = "start";

  detail::Trial first = runner.run({0.0, 0.0, false}, true);
  ++diag.iterations;
  diag.trace.emplace_back(0.0, first.cdf_terminal);
  if (std::abs(first.cdf_terminal - 1.0) <= config.cdf_tol) {
    return detail::package(schedule, params, false, 0.0, 0.0, std::move(first), std::move(diag));
  }
  if (first.cdf_terminal < 1.0) {
    diag.method = "start>atom";
    return detail::atom_search(schedule, params, config, runner, std::move(diag));
  }

  const auto& aug = runner.augmented();
  const std::size_t m = aug.appointments();
  for (std::size_t l = 1; l <= m; ++l) {
    double lo = aug.point(l);
    double hi = aug.point(l + 1);
    if (!(hi > lo)) continue;
    // F(T) decreases in t0; skip the interval when even its right end overshoots.
    const double probe = hi - 1e-9 * std::max(1.0, hi);
    detail::Trial right = runner.run({0.0, probe, false}, true);
    ++diag.iterations;
    diag.trace.emplace_back(probe, right.cdf_terminal);
    if (std::abs(right.cdf_terminal - 1.0) <= config.cdf_tol) {
      return detail::package(schedule, params, false, 0.0, probe, std::move(right), std::move(diag));
    }
    if (right.cdf_terminal > 1.0) continue;
    std::optional<detail::Trial> best;
    double best_t0 = lo;
    while (diag.iterations < config.max_outer_iters && hi - lo > 1e-12 * std::max(1.0, hi)) {
      const double t0 = 0.5 * (lo + hi);
      detail::Trial trial = runner.run({0.0, t0, false}, true);
      ++diag.iterations;
      diag.trace.emplace_back(t0, trial.cdf_terminal);
      const double miss = trial.cdf_terminal - 1.0;
      if (!best || std::abs(miss) < std::abs(best->cdf_terminal - 1.0)) {
        best = std::move(trial);
        best_t0 = t0;
      }
      if (std::abs(miss) <= config.cdf_tol) {
        return detail::package(schedule, params, false, 0.0, best_t0, std::move(*best), std::move(diag));
      }
      if (miss > 0.0) {
        lo = t0;
      } else {
        hi = t0;
      }
    }
    throw NonConvergence("support-start bisection stalled in interval " + std::to_string(l) +
                         " (best F(T) = " + std::to_string(best ? best->cdf_terminal : 0.0) + ")");
  }
  throw Infeasible("no support start t0 in [0, T] makes F(T) = 1");
}

/// No-early equilibrium, dispatching on whether an appointment sits at time 0.
inline EquilibriumResult solve_without_early(const Schedule& schedule, const ModelParams& params,
                                             const SolveConfig& config = {}) {
  return schedule.starts_at_zero() ? solve_schedule_at_zero(schedule, params, config)
                                   : solve_atom_case(schedule, params, config);
}

/// Early arrivals allowed: keeps the no-early solution when it has no atom, otherwise moves the
/// support start below zero until F(T) = 1.
inline EquilibriumResult solve_early(const Schedule& schedule, const ModelParams& params,
                                     const SolveConfig& config = {}) {
  detail::prepare(schedule, params, config);
  EquilibriumResult base = solve_without_early(schedule, params, config);
  if (base.atom == 0.0) {
    base.early = true;
    return base;
  }
  detail::TrialRunner runner(schedule, params, config);
  SolveDiagnostics diag;
  diag.method = "early";
  auto eval = [&](double t0) {
    detail::Trial trial = runner.run({0.0, t0, false}, true);
    ++diag.iterations;
    diag.trace.emplace_back(t0, trial.cdf_terminal);
    return trial;
  };

  double hi = 0.0;
  double lo = -1.0;
  detail::Trial at_lo = eval(lo);
  while (at_lo.cdf_terminal < 1.0 - config.cdf_tol) {
    if (diag.iterations >= config.max_outer_iters) throw NonConvergence("early bracket expansion did not reach F(T) >= 1");
    hi = lo;
    lo -= 1.0;
    at_lo = eval(lo);
  }
  if (std::abs(at_lo.cdf_terminal - 1.0) <= config.cdf_tol) {
    return detail::package(schedule, params, true, 0.0, lo, std::move(at_lo), std::move(diag));
  }
  std::optional<detail::Trial> best;
  double best_t0 = lo;
  while (diag.iterations < config.max_outer_iters && hi - lo > 1e-12) {
    const double t0 = 0.5 * (lo + hi);
    detail::Trial trial = eval(t0);
    const double miss = trial.cdf_terminal - 1.0;
    if (!best || std::abs(miss) < std::abs(best->cdf_terminal - 1.0)) {
      best = std::move(trial);
      best_t0 = t0;
    }
    if (std::abs(miss) <= config.cdf_tol) {
      return detail::package(schedule, params, true, 0.0, best_t0, std::move(*best), std::move(diag));
    }
    if (miss < 0.0) {
      hi = t0;
    } else {
      lo = t0;
    }
  }
  throw NonConvergence("early support-start bisection did not reach |F(T) - 1| <= cdf_tol");
}

/// Entry point honoring config.early_arrivals.
inline EquilibriumResult solve(const Schedule& schedule, const ModelParams& params, const SolveConfig& config = {}) {
  return config.early_arrivals ? solve_early(schedule, params, config) : solve_without_early(schedule, params, config);
}

}  // namespace walkin
