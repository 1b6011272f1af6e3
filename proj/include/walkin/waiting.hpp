#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "walkin/distributions.hpp"
#include "walkin/errors.hpp"
#include "walkin/schedule.hpp"

namespace walkin {

/// Expected wait of a walk-in who finds n customers ahead exactly at the start of segment k.
///
/// Row k is filled from row k+1 at argument n+1 (the next scheduled customer overtakes),
/// so the table is triangular: row k holds n = 0..n_max-(M-k). Reads outside that
/// region throw instead of returning zeros.
class WaitTable {
 public:
  WaitTable(const AugmentedSchedule& schedule, double mu, std::size_t n_max)
      : rows_(schedule.appointments() + 1), n_max_(n_max), mu_(mu), data_(rows_ * (n_max + 1), 0.0) {
    if (!(mu > 0.0)) throw DomainError("service rate must be positive");
    if (n_max < 1) throw DomainError("wait table needs n_max >= 1");
    if (n_max < rows_ - 1) throw DomainError("wait table too small for the number of appointments");
    const std::size_t m = rows_ - 1;
    for (std::size_t n = 0; n <= n_max; ++n) cell(m, n) = static_cast<double>(n) / mu;
    for (std::size_t k = m; k-- > 0;) {
      const double len = schedule.segment_length(k);
      const std::size_t top = row_limit(k);
      const auto pois = poisson_weights(len, mu, top + 1);
      double head = 0.0;  // sum_{i<=n} pois_i
      for (std::size_t n = 0; n <= top; ++n) {
        head += pois[n];
        if (n == 0) continue;
        double tail = 0.0;
        for (std::size_t i = 0; i < n; ++i) tail += pois[i] * (len + cell(k + 1, n - i + 1));
        const double erl = static_cast<double>(n) / mu * std::max(0.0, 1.0 - head);
        cell(k, n) = erl + tail;
      }
    }
  }

  std::size_t appointments() const noexcept { return rows_ - 1; }
  std::size_t n_max() const noexcept { return n_max_; }
  double mu() const noexcept { return mu_; }

  /// Largest valid n in row k.
  std::size_t row_limit(std::size_t k) const noexcept { return n_max_ - (rows_ - 1 - k); }
  bool valid(std::size_t k, std::size_t n) const noexcept { return k < rows_ && n <= row_limit(k); }

  double at(std::size_t k, std::size_t n) const {
    if (!valid(k, n)) {
      throw ValidityError("wait table read outside validity region (k=" + std::to_string(k) +
                          ", n=" + std::to_string(n) + ")");
    }
    return data_[k * (n_max_ + 1) + n];
  }

  /// Unchecked read for hot loops; callers guarantee validity.
  double operator()(std::size_t k, std::size_t n) const noexcept { return data_[k * (n_max_ + 1) + n]; }

 private:
  double& cell(std::size_t k, std::size_t n) { return data_[k * (n_max_ + 1) + n]; }

  std::size_t rows_;
  std::size_t n_max_;
  double mu_;
  std::vector<double> data_;
};

inline WaitTable build_wait_table(const AugmentedSchedule& schedule, double mu, std::size_t n_max) {
  return WaitTable(schedule, mu, n_max);
}

/// w_k(n, t) and its time derivative for n = 0..count-1 at one instant.
struct WaitProfile {
  std::vector<double> wait;
  std::vector<double> rate;
};

namespace detail {

inline void check_segment(const WaitTable& table, const AugmentedSchedule& s, std::size_t k, double t) {
  if (table.appointments() != s.appointments()) throw ValidityError("wait table built for another schedule");
  if (!s.contains(k, t)) {
    throw ValidityError("time " + std::to_string(t) + " is not inside segment " + std::to_string(k));
  }
}

// Fills out.wait/out.rate for n < count; assumes count-1 is valid in row k.
inline void fill_profile(const WaitTable& table, const AugmentedSchedule& s, std::size_t k, double t,
                         std::size_t count, WaitProfile& out, bool with_rate) {
  out.wait.assign(count, 0.0);
  out.rate.assign(with_rate ? count : 0, 0.0);
  const double mu = table.mu();
  if (k == table.appointments()) {
    for (std::size_t n = 0; n < count; ++n) out.wait[n] = static_cast<double>(n) / mu;
    return;
  }
  const double tau = s.point(k + 1) - t;
  const auto pois = poisson_weights(tau, mu, count + 1);
  double head = 0.0;
  double head_prev = 0.0;  // sum_{i<n} pois_i
  for (std::size_t n = 0; n < count; ++n) {
    head += pois[n];
    if (n > 0) {
      double tail = 0.0;
      double slope = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double carry = tau + table(k + 1, n - i + 1);
        tail += pois[i] * carry;
        if (with_rate) slope += (i ? pois[i - 1] - pois[i] : -pois[0]) * carry;
      }
      out.wait[n] = static_cast<double>(n) / mu * std::max(0.0, 1.0 - head) + tail;
      if (with_rate) {
        // d/dt = -d/dtau; dE/dtau = tau f_Erl(tau; n), d Pois_i/dtau = mu (Pois_{i-1} - Pois_i)
        out.rate[n] = -(tau * mu * pois[n - 1] + head_prev + mu * slope);
      }
    }
    head_prev = head;
  }
}

}  // namespace detail

/// Expected wait of a walk-in arriving at t in segment k with n customers ahead.
inline double wait_given_queue(const WaitTable& table, const AugmentedSchedule& s, std::size_t k, std::size_t n,
                               double t) {
  detail::check_segment(table, s, k, t);
  if (!table.valid(k, n)) throw ValidityError("queue length outside the wait table's validity region");
  if (n == 0) return 0.0;
  WaitProfile p;
  detail::fill_profile(table, s, k, t, n + 1, p, false);
  return p.wait[n];
}

/// Time derivative of wait_given_queue inside a segment.
inline double wait_time_derivative(const WaitTable& table, const AugmentedSchedule& s, std::size_t k, std::size_t n,
                                   double t) {
  detail::check_segment(table, s, k, t);
  if (!table.valid(k, n)) throw ValidityError("queue length outside the wait table's validity region");
  if (n == 0 || k == table.appointments()) return 0.0;
  WaitProfile p;
  detail::fill_profile(table, s, k, t, n + 1, p, true);
  return p.rate[n];
}

/// Whole profile n = 0..count-1; used by the state-vector routines.
inline WaitProfile wait_profile(const WaitTable& table, const AugmentedSchedule& s, std::size_t k, double t,
                                std::size_t count, bool with_rate = true) {
  detail::check_segment(table, s, k, t);
  if (count == 0 || !table.valid(k, count - 1)) {
    throw ValidityError("profile length exceeds the wait table's validity region");
  }
  WaitProfile p;
  detail::fill_profile(table, s, k, t, count, p, with_rate);
  return p;
}

}  // namespace walkin
