#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "walkin/dynamics.hpp"
#include "walkin/equilibrium.hpp"
#include "walkin/schedule.hpp"
#include "walkin/waiting.hpp"

namespace walkin {

/// The dynamics re-run under a result's own arrival profile, one entry per grid node.
struct Replay {
  std::vector<double> wait;        // E_w(t)
  std::vector<double> empty;       // P_0(t) at the node (after any appointment jump)
  std::vector<double> empty_end;   // P_0 at the end of the step leaving the node
};

/// Pre-opening nodes integrate the birth-death equations with departures switched off; the atom
/// (if any) is laid down at 0 before the scheduled customer at 0 joins ahead of it.
inline Replay replay(const EquilibriumResult& result) {
  Replay out;
  const auto& params = result.params;
  const AugmentedSchedule aug(result.schedule);
  const std::size_t m = aug.appointments();
  const std::size_t truncation = params.truncation();
  const std::size_t top = params.state_top(m);
  const WaitTable table(aug, params.mu, params.table_size(m));
  const auto& grid = result.grid;
  if (grid.empty()) return out;
  out.wait.reserve(grid.size());
  out.empty.reserve(grid.size());
  out.empty_end.reserve(grid.size());

  StateVector state = StateVector::empty(top, grid.front().t);
  std::size_t i = 0;
  for (; i < grid.size() && grid[i].t < 0.0; ++i) {
    const auto& g = grid[i];
    out.wait.push_back(early_expected_wait(g.t, state.probs, table, aug));
    out.empty.push_back(state.probs[0]);
    const double next = i + 1 < grid.size() ? std::min(grid[i + 1].t, 0.0) : 0.0;
    if (next > g.t) {
      state.clock = g.t;
      step_forward_inplace(state, g.density, next - g.t, params.lambda, params.mu,
                           std::numeric_limits<double>::infinity(), ServiceMode::closed);
    }
    out.empty_end.push_back(state.probs[0]);
  }
  if (i == 0) {
    const auto pois = poisson_pmf(params.lambda * result.atom, truncation + 1);
    std::fill(state.probs.begin(), state.probs.end(), 0.0);
    std::copy(pois.begin(), pois.end(), state.probs.begin());
  }

  std::size_t next_appointment = 1;
  WaitProfile profile;
  for (; i < grid.size(); ++i) {
    const auto& g = grid[i];
    while (next_appointment <= m && aug.point(next_appointment) <= g.t) {
      state = apply_scheduled_arrival(std::move(state));
      ++next_appointment;
    }
    state.clock = g.t;
    double ew = 0.0;
    if (g.t == 0.0 && result.atom > 0.0) {
      ew = atom_expected_wait(result.atom, params.lambda, table, aug, truncation);
    } else {
      detail::fill_profile(table, aug, aug.segment_of(g.t), g.t, top + 1, profile, false);
      for (std::size_t n = 0; n <= top; ++n) ew += state.probs[n] * profile.wait[n];
    }
    out.wait.push_back(ew);
    out.empty.push_back(state.probs[0]);
    if (i + 1 < grid.size()) {
      const double h = grid[i + 1].t - g.t;
      if (h > 0.0) step_forward_inplace(state, (grid[i + 1].cdf - g.cdf) / h, h, params.lambda, params.mu);
    }
    out.empty_end.push_back(state.probs[0]);
  }
  return out;
}

struct VerificationReport {
  double reference = 0.0;                // claimed equilibrium wait
  double max_support_deviation = 0.0;    // max |E_w(t) - E_w| / E_w where f > 0 (or atom)
  double min_offsupport_margin = 0.0;    // min (E_w(t) - E_w) / E_w where f = 0
  std::size_t support_points = 0;
  std::size_t offsupport_points = 0;
  std::size_t atoms_after_open = 0;      // point masses at t > 0
  std::size_t atoms_total = 0;           // point masses anywhere
  bool early = false;
  std::vector<double> gap_violations;    // appointment instants in (0, T) with f > 0 right after them
  bool cdf_monotone = true;
  bool density_nonnegative = true;
  double cdf_terminal = 0.0;
  std::vector<double> recomputed_wait;   // E_w(t) per grid node

  bool passed(double support_tol = 0.02, double margin_tol = 1e-3) const {
    return max_support_deviation <= support_tol && min_offsupport_margin >= -margin_tol && atoms_after_open == 0 &&
           (!early || atoms_total == 0) && gap_violations.empty() && cdf_monotone && density_nonnegative;
  }
};

/// Checks the equilibrium conditions on a replay: constant E_w on the support, no smaller E_w
/// off it, no atoms after opening (none at all with early arrivals), and a gap right after every
/// appointment inside (0, T).
inline VerificationReport verify_equilibrium(const EquilibriumResult& result) {
  VerificationReport rep;
  rep.reference = result.equilibrium_wait;
  rep.cdf_terminal = result.diagnostics.cdf_terminal;
  rep.early = result.early;
  if (result.atom > 0.0) ++rep.atoms_total;
  const auto& grid = result.grid;
  if (grid.empty()) return rep;

  const Replay rp = replay(result);
  rep.recomputed_wait = rp.wait;
  const double scale = rep.reference > 0.0 ? rep.reference : 1.0;
  double worst_dev = 0.0;
  double worst_margin = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < grid.size(); ++j) {
    const bool support = grid[j].density > 0.0 || (grid[j].t == 0.0 && result.atom > 0.0);
    if (support) {
      ++rep.support_points;
      worst_dev = std::max(worst_dev, std::abs(rp.wait[j] - rep.reference) / scale);
    } else {
      ++rep.offsupport_points;
      worst_margin = std::min(worst_margin, (rp.wait[j] - rep.reference) / scale);
    }
    if (grid[j].density < 0.0) rep.density_nonnegative = false;
    if (j > 0 && grid[j].cdf < grid[j - 1].cdf) rep.cdf_monotone = false;
  }

  const AugmentedSchedule aug(result.schedule);
  for (std::size_t a = 1; a <= aug.appointments(); ++a) {
    const double ta = aug.point(a);
    if (!(ta > 0.0 && ta < aug.horizon())) continue;
    auto it = std::lower_bound(grid.begin(), grid.end(), ta, [](const GridPoint& g, double t) { return g.t < t; });
    if (it != grid.end() && it->density > 0.0) rep.gap_violations.push_back(ta);
  }
  rep.max_support_deviation = worst_dev;
  rep.min_offsupport_margin = std::isfinite(worst_margin) ? worst_margin : 0.0;
  return rep;
}

/// Builds a result whose arrival profile is an arbitrary density on the solver grid (atom optional).
/// E_w reference is the wait at the first support node. Used for negative controls.
template <typename Density>
EquilibriumResult profile_result(const Schedule& schedule, const ModelParams& params, double atom, Density&& f) {
  EquilibriumResult r;
  r.params = params;
  r.schedule = schedule;
  r.atom = atom;
  const AugmentedSchedule aug(schedule);
  const std::size_t m = aug.appointments();
  double cdf = atom;
  for (std::size_t k = 0; k <= m; ++k) {
    auto nodes = segment_nodes(aug.point(k), aug.point(k + 1), params.delta);
    if (k == m) nodes.push_back(aug.point(k + 1));
    for (std::size_t j = 0; j < nodes.size(); ++j) {
      const double t = nodes[j];
      const double next = j + 1 < nodes.size() ? nodes[j + 1] : aug.point(k + 1);
      const double dens = f(t);
      r.grid.push_back({t, dens, cdf, 0.0});
      if (!(k == m && j + 1 == nodes.size())) cdf += dens * (next - t);
    }
  }
  r.diagnostics.cdf_terminal = cdf;
  r.diagnostics.method = "profile";
  const Replay rp = replay(r);
  for (std::size_t j = 0; j < r.grid.size(); ++j) r.grid[j].expected_wait = rp.wait[j];
  for (std::size_t j = 0; j < r.grid.size(); ++j) {
    if (r.grid[j].density > 0.0 || (j == 0 && atom > 0.0)) {
      r.equilibrium_wait = rp.wait[j];
      break;
    }
  }
  return r;
}

}  // namespace walkin
