#pragma once

#include <cstddef>

#include "walkin/distributions.hpp"
#include "walkin/errors.hpp"
#include "walkin/schedule.hpp"

namespace walkin {

/// Model frame: walk-in mean lambda, service rate mu, horizon T, grid step and truncation mass.
struct ModelParams {
  double lambda = 2.0;
  double mu = 1.0;
  double horizon = 5.0;
  double delta = 0.01;
  double trunc_mass = 0.999;

  void validate() const {
    if (!(lambda > 0.0)) throw DomainError("lambda must be positive");
    if (!(mu > 0.0)) throw DomainError("mu must be positive");
    if (!(horizon > 0.0)) throw DomainError("horizon must be positive");
    if (!(delta > 0.0) || delta > horizon) throw DomainError("grid step must lie in (0, T]");
    if (!(trunc_mass > 0.0 && trunc_mass < 1.0)) throw DomainError("truncation mass must lie in (0,1)");
  }

  /// Walk-in truncation level K.
  std::size_t truncation() const { return truncation_level(lambda, trunc_mass); }

  /// Top index of the state vector: K walk-ins, M scheduled, one slack.
  std::size_t state_top(std::size_t appointments) const { return truncation() + appointments + 1; }

  /// Wait-table size that keeps w(n+1, t) valid in every row for every state index.
  std::size_t table_size(std::size_t appointments) const { return state_top(appointments) + appointments + 2; }

  bool operator==(const ModelParams&) const = default;
};

}  // namespace walkin
