#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "walkin/errors.hpp"

namespace walkin {

namespace detail {

inline void require_time_and_rate(double t, double mu) {
  if (!(t >= 0.0)) throw DomainError("time must be nonnegative");
  if (!(mu > 0.0)) throw DomainError("service rate must be positive");
}

}  // namespace detail

/// Poisson weights e^{-mu t}(mu t)^i / i! for i = 0..count-1, by forward recurrence.
inline std::vector<double> poisson_weights(double t, double mu, std::size_t count) {
  detail::require_time_and_rate(t, mu);
  std::vector<double> w(count, 0.0);
  if (count == 0) return w;
  const double x = mu * t;
  w[0] = std::exp(-x);
  for (std::size_t i = 1; i < count; ++i) w[i] = w[i - 1] * x / static_cast<double>(i);
  return w;
}

/// Probability that exactly i services complete in time t at rate mu.
inline double poisson_weight(double t, std::size_t i, double mu) {
  detail::require_time_and_rate(t, mu);
  const double x = mu * t;
  double p = std::exp(-x);
  for (std::size_t j = 1; j <= i; ++j) p *= x / static_cast<double>(j);
  return p;
}

/// F_Erl(t; n, mu) = 1 - sum_{i<n} Pois(t; i).
inline double erlang_cdf(double t, std::size_t n, double mu) {
  detail::require_time_and_rate(t, mu);
  if (n < 1) throw DomainError("Erlang shape must be at least 1");
  const double x = mu * t;
  double term = std::exp(-x);
  double head = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    head += term;
    term *= x / static_cast<double>(i + 1);
  }
  const double v = 1.0 - head;
  return v < 0.0 ? 0.0 : v;
}

/// Erlang density mu * Pois(t; n-1).
inline double erlang_pdf(double t, std::size_t n, double mu) {
  if (n < 1) throw DomainError("Erlang shape must be at least 1");
  return mu * poisson_weight(t, n - 1, mu);
}

/// E(t; n, mu) = int_0^t x f_Erl(x; n, mu) dx, evaluated as (n/mu) F_Erl(t; n+1, mu).
inline double truncated_erlang_mean(double t, std::size_t n, double mu) {
  detail::require_time_and_rate(t, mu);
  if (n < 1) throw DomainError("Erlang shape must be at least 1");
  return static_cast<double>(n) / mu * erlang_cdf(t, n + 1, mu);
}

/// Smallest k with Poisson(lambda) cdf at k strictly above c.
inline std::size_t truncation_level(double lambda, double c) {
  if (!(lambda > 0.0)) throw DomainError("arrival rate must be positive");
  if (!(c > 0.0 && c < 1.0)) throw DomainError("truncation mass must lie in (0,1)");
  double term = std::exp(-lambda);
  double cdf = term;
  std::size_t k = 0;
  while (!(cdf > c)) {
    ++k;
    term *= lambda / static_cast<double>(k);
    cdf += term;
    if (term == 0.0 && !(cdf > c)) break;  // cdf saturated below c in floating point
  }
  return k;
}

/// Poisson(mean) pmf on 0..count-1 (zero mean gives the unit mass at 0).
inline std::vector<double> poisson_pmf(double mean, std::size_t count) {
  if (!(mean >= 0.0)) throw DomainError("Poisson mean must be nonnegative");
  std::vector<double> p(count, 0.0);
  if (count == 0) return p;
  p[0] = std::exp(-mean);
  for (std::size_t i = 1; i < count; ++i) p[i] = p[i - 1] * mean / static_cast<double>(i);
  return p;
}

}  // namespace walkin
