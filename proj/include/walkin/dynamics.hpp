#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "walkin/distributions.hpp"
#include "walkin/errors.hpp"
#include "walkin/schedule.hpp"
#include "walkin/waiting.hpp"

namespace walkin {

/// Truncated law of the number in system, P_0..P_top, at time `clock`.
struct StateVector {
  std::vector<double> probs;
  double clock = 0.0;
  double shed = 0.0;  // mass pushed past the top index so far

  StateVector() = default;
  StateVector(std::size_t top, double t) : probs(top + 1, 0.0), clock(t) {}

  static StateVector empty(std::size_t top, double t) {
    StateVector s(top, t);
    s.probs[0] = 1.0;
    return s;
  }

  std::size_t top() const noexcept { return probs.size() - 1; }
  double mass() const noexcept { return std::accumulate(probs.begin(), probs.end(), 0.0); }
};

enum class ServiceMode { running, closed };  // closed: before opening, no departures

/// One explicit Euler step of the birth-death equations with arrival intensity lambda*f.
/// Throws if the step would run past `segment_end`.
inline void step_forward_inplace(StateVector& s, double f, double delta, double lambda, double mu,
                                 double segment_end = std::numeric_limits<double>::infinity(),
                                 ServiceMode mode = ServiceMode::running) {
  if (!(delta > 0.0)) throw DomainError("step must be positive");
  if (!(f >= 0.0)) throw DomainError("arrival density must be nonnegative");
  if (s.clock + delta > segment_end + 1e-12 * std::max(1.0, std::abs(segment_end))) {
    throw ValidityError("Euler step crosses a segment boundary");
  }
  const double a = lambda * f;
  const double d = mode == ServiceMode::running ? mu : 0.0;
  auto& p = s.probs;
  const std::size_t top = p.size() - 1;
  double below = 0.0;  // old P_{n-1}
  for (std::size_t n = 0; n <= top; ++n) {
    const double cur = p[n];
    const double above = n < top ? p[n + 1] : 0.0;
    const double out_rate = n == 0 ? a : a + d;
    double next = cur + delta * (-out_rate * cur + a * below + d * above);
    if (next < 0.0) next = 0.0;
    below = cur;
    p[n] = next;
  }
  s.shed += delta * a * below;  // births out of the top state
  s.clock += delta;
}

inline StateVector step_forward(StateVector s, double f, double delta, double lambda, double mu,
                                double segment_end = std::numeric_limits<double>::infinity(),
                                ServiceMode mode = ServiceMode::running) {
  step_forward_inplace(s, f, delta, lambda, mu, segment_end, mode);
  return s;
}

/// A scheduled customer joins: P_{n+1} <- P_n. The displaced top entry is counted as shed.
inline StateVector apply_scheduled_arrival(StateVector s) {
  auto& p = s.probs;
  s.shed += p.back();
  std::rotate(p.rbegin(), p.rbegin() + 1, p.rend());
  p.front() = 0.0;
  return s;
}

/// Sums that make up E_w(t) and the equilibrium density at one instant.
struct DensityTerms {
  double expected_wait = 0.0;
  double numerator = 0.0;    // mu sum P_{n+1} dW_n - sum P_n dw_n/dt
  double denominator = 0.0;  // lambda sum P_n dW_n, dW_n = w(n+1) - w(n)

  double density() const { return numerator / denominator; }
};

inline DensityTerms density_terms(std::span<const double> probs, const WaitProfile& w, double lambda, double mu) {
  DensityTerms d;
  const std::size_t top = probs.size() - 1;
  for (std::size_t n = 0; n <= top; ++n) {
    const double gap = w.wait[n + 1] - w.wait[n];
    d.expected_wait += probs[n] * w.wait[n];
    d.denominator += probs[n] * gap;
    if (n + 1 <= top) d.numerator += mu * probs[n + 1] * gap;
    if (!w.rate.empty()) d.numerator -= probs[n] * w.rate[n];
  }
  d.denominator *= lambda;
  return d;
}

/// E_w(t) = sum_n P_n(t) w_k(n, t) for a walk-in arriving at the state's clock in segment k.
inline double expected_wait(const StateVector& s, const WaitTable& table, const AugmentedSchedule& schedule,
                            std::size_t k) {
  const auto w = wait_profile(table, schedule, k, s.clock, s.probs.size(), false);
  double e = 0.0;
  for (std::size_t n = 0; n < s.probs.size(); ++n) e += s.probs[n] * w.wait[n];
  return e;
}

/// Arrival density that keeps E_w(t) stationary. Negative values mean the instant is off the support;
/// clamping is left to the caller.
inline double equilibrium_density(const StateVector& s, const WaitTable& table, const AugmentedSchedule& schedule,
                                  std::size_t k, double lambda) {
  const auto w = wait_profile(table, schedule, k, s.clock, s.probs.size() + 1, true);
  const auto d = density_terms(s.probs, w, lambda, table.mu());
  if (!(d.denominator > 0.0)) throw DegenerateState("equilibrium density denominator vanished");
  return d.density();
}

/// w_{T,1{T(1)=0}}(n + 1{T(1)=0}, 0): wait from opening with n walk-ins ahead, plus the scheduled
/// customer at time 0 when there is one.
inline double opening_wait(const WaitTable& table, const AugmentedSchedule& schedule, std::size_t n) {
  const std::size_t z = schedule.zero_indicator();
  return table.at(z, n + z);
}

/// Expected wait of a tagged walk-in in an atom of mass p at time 0. The others in the atom number
/// Poisson(p lambda) and the tagged customer takes a uniform position among them.
inline double atom_expected_wait(double p, double lambda, const WaitTable& table, const AugmentedSchedule& schedule,
                                 std::size_t truncation) {
  if (!(p >= 0.0 && p <= 1.0)) throw DomainError("atom mass must lie in [0,1]");
  const auto pois = poisson_pmf(p * lambda, truncation + 1);
  // ahead[n] = sum_{i>=n} pois_i / (i+1)
  double tail = 0.0;
  double e = 0.0;
  for (std::size_t n = truncation + 1; n-- > 0;) {
    tail += pois[n] / static_cast<double>(n + 1);
    e += tail * opening_wait(table, schedule, n);
  }
  return e;
}

/// Density before opening given the cdf value F = F_e(t); the state then is Poisson(lambda F) up to K.
inline double early_density(double cdf, double lambda, const WaitTable& table, const AugmentedSchedule& schedule,
                            std::size_t truncation) {
  if (!(cdf >= 0.0)) throw DomainError("cdf value must be nonnegative");
  const auto pois = poisson_pmf(lambda * cdf, truncation + 1);
  double den = 0.0;
  for (std::size_t n = 0; n <= truncation; ++n) {
    den += (opening_wait(table, schedule, n + 1) - opening_wait(table, schedule, n)) * pois[n];
  }
  den *= lambda;
  if (!(den > 0.0)) throw DegenerateState("early density denominator vanished");
  return 1.0 / den;
}

/// E_w(t) for t < 0 under the pre-opening state law.
inline double early_expected_wait(double t, std::span<const double> probs, const WaitTable& table,
                                  const AugmentedSchedule& schedule) {
  double e = -t;
  for (std::size_t n = 0; n < probs.size(); ++n) e += probs[n] * opening_wait(table, schedule, n);
  return e;
}

}  // namespace walkin
