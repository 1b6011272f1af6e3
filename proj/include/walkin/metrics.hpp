#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <thread>
#include <vector>

#include "walkin/equilibrium.hpp"
#include "walkin/errors.hpp"
#include "walkin/schedule.hpp"
#include "walkin/verification.hpp"

namespace walkin {

/// SplitMix64; one independent stream per (seed, replication).
class StreamEngine {
 public:
  using result_type = std::uint64_t;

  StreamEngine(std::uint64_t seed, std::uint64_t stream) : state_(mix(seed) ^ mix(stream + 0x632be59bd9b4e019ULL)) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix(state_);
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
};

struct SimulationConfig {
  std::size_t replications = 10000;
  std::uint64_t seed = 1;
  std::size_t batch_size = 1000;
  unsigned threads = 1;
  bool track_queue = false;

  void validate() const {
    if (replications < 1) throw DomainError("replications must be at least 1");
    if (batch_size < 1) throw DomainError("batch size must be at least 1");
  }
};

/// One simulated day.
struct DayOutcome {
  double walkin_wait_sum = 0.0;
  std::size_t walkins = 0;
  std::vector<double> scheduled_wait;  // W_m in schedule order
  double idle = 0.0;                   // server idle time inside [0, T]
  double busy = 0.0;                   // server busy time inside [0, T]
  double overtime = 0.0;               // work past T
  double queue_area = 0.0;             // integral of the number waiting (not in service)
  double first_arrival = 0.0;
  double last_departure = 0.0;
};

/// Runs one day for given walk-in arrival times (sorted, ties in queue order); `service()` draws one
/// service time. Scheduled customers overtake waiting walk-ins but never interrupt a service, and
/// nobody is served before 0.
template <typename Service>
  requires std::invocable<Service&>
DayOutcome simulate_day_with(std::span<const double> walkins, const Schedule& schedule, Service&& service,
                             bool track_queue = false) {
  DayOutcome day;
  const auto& sched = schedule.times();
  const double horizon = schedule.horizon();
  const std::size_t m = sched.size();
  const std::size_t n = walkins.size();
  day.walkins = n;
  day.scheduled_wait.assign(m, 0.0);

  std::vector<double> starts;
  if (track_queue) starts.reserve(n + m);

  double clock = 0.0;
  std::size_t is = 0;
  std::size_t iw = 0;
  auto idle_until = [&](double until) {
    const double a = std::min(clock, horizon);
    const double b = std::min(until, horizon);
    if (b > a) day.idle += b - a;
  };
  while (is < m || iw < n) {
    const bool sched_ready = is < m && sched[is] <= clock;
    const bool walk_ready = iw < n && walkins[iw] <= clock;
    if (!sched_ready && !walk_ready) {
      double next = std::numeric_limits<double>::infinity();
      if (is < m) next = sched[is];
      if (iw < n) next = std::min(next, walkins[iw]);
      idle_until(next);
      clock = next;
      continue;
    }
    double arrival = 0.0;
    if (sched_ready) {
      arrival = sched[is];
      day.scheduled_wait[is] = clock - arrival;
      ++is;
    } else {
      arrival = walkins[iw];
      day.walkin_wait_sum += clock - arrival;
      ++iw;
    }
    if (track_queue) starts.push_back(clock);
    const double start = clock;
    clock += service();
    const double busy_end = std::min(clock, horizon);
    if (busy_end > start) day.busy += busy_end - std::max(start, 0.0);
  }
  idle_until(horizon);
  day.last_departure = clock;
  day.overtime = std::max(0.0, clock - horizon);

  if (track_queue) {
    // Sweep arrivals (+1) and service starts (-1) to integrate the queue length.
    std::vector<std::pair<double, int>> events;
    events.reserve(2 * (n + m));
    for (double t : walkins) events.emplace_back(t, +1);
    for (double t : sched) events.emplace_back(t, +1);
    for (double t : starts) events.emplace_back(t, -1);
    std::sort(events.begin(), events.end());
    double last = events.empty() ? 0.0 : events.front().first;
    long q = 0;
    for (const auto& [t, d] : events) {
      day.queue_area += static_cast<double>(q) * (t - last);
      last = t;
      q += d;
    }
    day.first_arrival = events.empty() ? 0.0 : events.front().first;
  }
  return day;
}

/// Exponential(mu) service times drawn from `rng`.
template <typename Engine>
DayOutcome simulate_day(std::span<const double> walkins, const Schedule& schedule, double mu, Engine& rng,
                        bool track_queue = false) {
  std::exponential_distribution<double> service(mu);
  return simulate_day_with(walkins, schedule, [&] { return service(rng); }, track_queue);
}

/// Samples arrival times from a solved profile: the first node carries the atom (or nothing),
/// the cdf is linear between nodes and renormalised by F(T).
class ArrivalSampler {
 public:
  explicit ArrivalSampler(const EquilibriumResult& result) {
    if (result.grid.empty()) throw DomainError("arrival profile has an empty grid");
    times_.reserve(result.grid.size());
    cdf_.reserve(result.grid.size());
    const double total = result.grid.back().cdf;
    if (!(total > 0.0)) throw DomainError("arrival profile carries no mass");
    for (const auto& g : result.grid) {
      times_.push_back(g.t);
      cdf_.push_back(g.cdf / total);
    }
  }

  double operator()(double u) const {
    if (u < cdf_.front()) return times_.front();
    auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    if (it == cdf_.end()) return times_.back();
    const std::size_t j = static_cast<std::size_t>(it - cdf_.begin());
    const double f0 = cdf_[j - 1];
    const double f1 = cdf_[j];
    const double w = f1 > f0 ? (u - f0) / (f1 - f0) : 0.0;
    return times_[j - 1] + w * (times_[j] - times_[j - 1]);
  }

 private:
  std::vector<double> times_;
  std::vector<double> cdf_;
};

/// Point estimate and 95% batch-means half-width.
struct Estimate {
  double mean = 0.0;
  double std_error = 0.0;
  double half_width = 0.0;
};

struct CostBreakdown {
  double lambda = 0.0;
  double phi_s = 0.0;                  // simulated total scheduled wait
  std::vector<double> per_customer;    // simulated W_m
  double e_w = 0.0;                    // equilibrium walk-in wait (solver)
  double e_i = 0.0;                    // expected idle time (numeric integral)
  // Monte-Carlo side
  Estimate phi_s_mc;
  std::vector<Estimate> per_customer_mc;
  Estimate e_w_mc;
  Estimate e_i_mc;
  Estimate overtime_mc;
  Estimate queue_length_mc;            // mean over days of the queue-length integral
  Estimate walkins_mc;
  double max_conservation_error = 0.0; // max |idle + busy - T| over days
  std::size_t replications = 0;
  std::uint64_t seed = 0;

  double phi(double gamma) const { return gamma * (phi_s + lambda * e_w) + (1.0 - gamma) * e_i; }
};

/// Weighted social cost gamma (Phi_s + lambda E_w) + (1 - gamma) E_I.
inline double social_cost(const CostBreakdown& b, double gamma) {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw DomainError("gamma must lie in [0,1]");
  return b.phi(gamma);
}

/// Expected idle time on [0, T]: trapezoid integral of P_0 over the solved trajectory.
inline double idle_time_numeric(const EquilibriumResult& result) {
  const auto rp = replay(result);
  const auto& grid = result.grid;
  double idle = 0.0;
  for (std::size_t j = 0; j + 1 < grid.size(); ++j) {
    if (grid[j].t < 0.0) continue;
    const double h = grid[j + 1].t - grid[j].t;
    idle += 0.5 * (rp.empty[j] + rp.empty_end[j]) * h;
  }
  return idle;
}

namespace detail {

struct BatchSums {
  double walkin_wait = 0.0;
  double walkins = 0.0;
  double idle = 0.0;
  double overtime = 0.0;
  double queue_area = 0.0;
  double conservation = 0.0;
  std::vector<double> scheduled;
};

inline Estimate batch_estimate(const std::vector<double>& batch_means) {
  Estimate e;
  const std::size_t b = batch_means.size();
  if (b == 0) return e;
  double s = 0.0;
  for (double x : batch_means) s += x;
  e.mean = s / static_cast<double>(b);
  if (b > 1) {
    double ss = 0.0;
    for (double x : batch_means) ss += (x - e.mean) * (x - e.mean);
    const double var = ss / static_cast<double>(b - 1);
    e.std_error = std::sqrt(var / static_cast<double>(b));
    e.half_width = 1.96 * e.std_error;
  }
  return e;
}

}  // namespace detail

/// Discrete-event Monte Carlo of whole days under the solved arrival profile. Each replication has
/// its own random stream derived from (seed, index); batches are reduced in index order, so the
/// result does not depend on the thread count.
inline CostBreakdown simulate(const EquilibriumResult& result, const SimulationConfig& config) {
  config.validate();
  if (result.grid.empty()) throw DomainError("simulate needs a solved equilibrium");
  const ModelParams& params = result.params;
  const Schedule& schedule = result.schedule;
  const std::size_t m = schedule.size();
  const ArrivalSampler sampler(result);
  const double horizon = schedule.horizon();

  const std::size_t batches = (config.replications + config.batch_size - 1) / config.batch_size;
  std::vector<detail::BatchSums> sums(batches);

  auto run_batch = [&](std::size_t b) {
    detail::BatchSums& bs = sums[b];
    bs.scheduled.assign(m, 0.0);
    const std::size_t lo = b * config.batch_size;
    const std::size_t hi = std::min(config.replications, lo + config.batch_size);
    std::vector<double> arrivals;
    for (std::size_t r = lo; r < hi; ++r) {
      StreamEngine rng(config.seed, r);
      std::poisson_distribution<int> count(params.lambda);
      std::uniform_real_distribution<double> unif(0.0, 1.0);
      const int n = count(rng);
      arrivals.resize(static_cast<std::size_t>(n));
      for (auto& a : arrivals) a = sampler(unif(rng));
      std::stable_sort(arrivals.begin(), arrivals.end());
      const DayOutcome day = simulate_day(std::span<const double>(arrivals), schedule, params.mu, rng,
                                          config.track_queue);
      bs.walkin_wait += day.walkin_wait_sum;
      bs.walkins += static_cast<double>(day.walkins);
      bs.idle += day.idle;
      bs.overtime += day.overtime;
      bs.queue_area += day.queue_area;
      bs.conservation = std::max(bs.conservation, std::abs(day.idle + day.busy - horizon));
      for (std::size_t i = 0; i < m; ++i) bs.scheduled[i] += day.scheduled_wait[i];
    }
  };

  const unsigned threads = std::max(1u, std::min<unsigned>(config.threads, static_cast<unsigned>(batches)));
  if (threads == 1) {
    for (std::size_t b = 0; b < batches; ++b) run_batch(b);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < threads; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t b = w; b < batches; b += threads) run_batch(b);
      });
    }
  }

  CostBreakdown out;
  out.lambda = params.lambda;
  out.replications = config.replications;
  out.seed = config.seed;
  std::vector<double> ew, ei, ot, qa, nw, ps;
  std::vector<std::vector<double>> wm(m);
  for (std::size_t b = 0; b < batches; ++b) {
    const auto& bs = sums[b];
    const double reps = static_cast<double>(std::min(config.replications, (b + 1) * config.batch_size) -
                                            b * config.batch_size);
    // Each walk-in's expected wait is E_w, so E[sum of walk-in waits] = lambda E_w.
    ew.push_back(bs.walkin_wait / reps / params.lambda);
    ei.push_back(bs.idle / reps);
    ot.push_back(bs.overtime / reps);
    qa.push_back(bs.queue_area / reps);
    nw.push_back(bs.walkins / reps);
    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      wm[i].push_back(bs.scheduled[i] / reps);
      total += bs.scheduled[i] / reps;
    }
    ps.push_back(total);
    out.max_conservation_error = std::max(out.max_conservation_error, bs.conservation);
  }
  out.e_w_mc = detail::batch_estimate(ew);
  out.e_i_mc = detail::batch_estimate(ei);
  out.overtime_mc = detail::batch_estimate(ot);
  out.queue_length_mc = detail::batch_estimate(qa);
  out.walkins_mc = detail::batch_estimate(nw);
  out.phi_s_mc = detail::batch_estimate(ps);
  for (std::size_t i = 0; i < m; ++i) {
    out.per_customer_mc.push_back(detail::batch_estimate(wm[i]));
    out.per_customer.push_back(out.per_customer_mc.back().mean);
  }
  out.phi_s = out.phi_s_mc.mean;
  out.e_w = result.equilibrium_wait;
  out.e_i = idle_time_numeric(result);
  return out;
}

}  // namespace walkin
