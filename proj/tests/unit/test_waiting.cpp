#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "walkin/errors.hpp"
#include "walkin/waiting.hpp"

using namespace walkin;

namespace {

// Tagged customer at the start of segment k with n ahead; scheduled customers arriving before its
// service starts join ahead of it.
double tagged_wait(const AugmentedSchedule& a, std::size_t k, std::size_t n, double mu, std::mt19937_64& rng) {
  std::exponential_distribution<double> service(mu);
  const double start = a.point(k);
  double clock = start;
  std::size_t next = k + 1;
  std::size_t ahead = n;
  while (ahead > 0) {
    clock += service(rng);
    --ahead;
    while (next <= a.appointments() && a.point(next) <= clock) {
      ++ahead;
      ++next;
    }
  }
  return clock - start;
}

}  // namespace

TEST(WaitTable, TerminalRowIsPlainQueue) {
  const AugmentedSchedule a(Schedule({}, 5.0));
  const WaitTable w(a, 2.0, 6);
  EXPECT_DOUBLE_EQ(w.at(0, 3), 1.5);
}

TEST(WaitTable, NobodyAheadMeansNoWait) {
  const AugmentedSchedule a(Schedule({1.0, 3.0, 5.0}, 5.0));
  const WaitTable w(a, 1.0, 12);
  for (std::size_t k = 0; k <= 3; ++k) EXPECT_EQ(w.at(k, 0), 0.0);
}

TEST(WaitTable, SingleAppointmentClosedForm) {
  const AugmentedSchedule a(Schedule({1.0}, 5.0));
  const WaitTable w(a, 1.0, 6);
  const double e = std::exp(-1.0);
  EXPECT_NEAR(w.at(0, 1), (1.0 - 2.0 * e) + e * 3.0, 1e-14);

  std::mt19937_64 rng(5);
  const int reps = 400000;
  double s = 0.0, ss = 0.0;
  for (int r = 0; r < reps; ++r) {
    const double x = tagged_wait(a, 0, 1, 1.0, rng);
    s += x;
    ss += x * x;
  }
  const double mean = s / reps;
  const double se = std::sqrt((ss / reps - mean * mean) / reps);
  EXPECT_LE(std::abs(mean - w.at(0, 1)), 3.0 * se);
}

TEST(WaitTable, RandomCellsAgreeWithTaggedSimulation) {
  const AugmentedSchedule a(Schedule({0.5, 1.2, 3.0, 4.1}, 5.0));
  const WaitTable w(a, 1.3, 14);
  std::mt19937_64 rng(17);
  const std::pair<std::size_t, std::size_t> cells[] = {{0, 3}, {1, 6}, {2, 2}, {3, 9}};
  for (auto [k, n] : cells) {
    const int reps = 200000;
    double s = 0.0, ss = 0.0;
    for (int r = 0; r < reps; ++r) {
      const double x = tagged_wait(a, k, n, 1.3, rng);
      s += x;
      ss += x * x;
    }
    const double mean = s / reps;
    const double se = std::sqrt((ss / reps - mean * mean) / reps);
    EXPECT_LE(std::abs(mean - w.at(k, n)), 3.0 * se) << "k=" << k << " n=" << n;
  }
}

TEST(WaitTable, ReadsOutsideValidityThrow) {
  const AugmentedSchedule a(Schedule({1.0, 3.0}, 5.0));
  const WaitTable w(a, 1.0, 10);
  EXPECT_EQ(w.row_limit(2), 10u);
  EXPECT_EQ(w.row_limit(0), 8u);
  EXPECT_NO_THROW(w.at(0, 8));
  EXPECT_THROW(w.at(0, 9), ValidityError);
  EXPECT_THROW(w.at(3, 0), ValidityError);
}

TEST(WaitGivenQueue, Examples) {
  const AugmentedSchedule a(Schedule({1.0, 3.0, 4.5}, 5.0));
  const WaitTable w(a, 2.0, 12);
  EXPECT_EQ(wait_given_queue(w, a, 1, 0, 2.0), 0.0);
  EXPECT_DOUBLE_EQ(wait_given_queue(w, a, 3, 4, 4.9), 2.0);
  EXPECT_EQ(wait_time_derivative(w, a, 0, 0, 0.3), 0.0);
  EXPECT_EQ(wait_time_derivative(w, a, 3, 5, 4.7), 0.0);
  EXPECT_THROW(wait_given_queue(w, a, 0, 1, 2.0), ValidityError);
}

TEST(WaitGivenQueue, LimitAtAppointmentAddsOnePosition) {
  const AugmentedSchedule a(Schedule({1.0, 3.0, 4.5}, 5.0));
  const WaitTable w(a, 1.0, 14);
  for (std::size_t k = 0; k < 3; ++k) {
    for (std::size_t n = 1; n < 8; ++n) {
      const double left = wait_given_queue(w, a, k, n, a.point(k + 1) - 1e-6);
      const double right = wait_given_queue(w, a, k + 1, n + 1, a.point(k + 1));
      EXPECT_NEAR(left, right, 1e-4) << "k=" << k << " n=" << n;
    }
  }
}

TEST(WaitGivenQueue, StartOfSegmentMatchesTable) {
  const AugmentedSchedule a(Schedule({1.0, 3.0, 4.5}, 5.0));
  const WaitTable w(a, 1.0, 14);
  for (std::size_t k = 0; k <= 3; ++k) {
    for (std::size_t n = 0; n <= 8; ++n) EXPECT_NEAR(wait_given_queue(w, a, k, n, a.point(k)), w.at(k, n), 1e-12);
  }
}

TEST(WaitGivenQueue, MonotoneInQueueAndBounded) {
  const AugmentedSchedule a(Schedule({0.7, 2.2, 3.9}, 5.0));
  const WaitTable w(a, 1.4, 16);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rep = 0; rep < 300; ++rep) {
    const std::size_t k = static_cast<std::size_t>(u(rng) * 4) % 4;
    const double t = a.point(k) + u(rng) * std::max(0.0, std::min(a.point(k + 1), 5.0) - a.point(k)) * 0.999;
    double prev = 0.0;
    for (std::size_t n = 1; n <= w.row_limit(k); ++n) {
      const double x = wait_given_queue(w, a, k, n, t);
      EXPECT_GT(x, prev);
      const double future = static_cast<double>(a.appointments() - k);
      EXPECT_LE(x, (static_cast<double>(n) + future) / 1.4 + 1e-12);
      prev = x;
    }
  }
}

TEST(WaitTimeDerivative, MatchesFiniteDifferences) {
  const AugmentedSchedule a(Schedule({0.6, 1.9, 3.3, 4.4}, 5.0));
  const WaitTable w(a, 1.0, 18);
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double h = 1e-5;
  int checked = 0;
  while (checked < 1000) {
    const std::size_t k = static_cast<std::size_t>(u(rng) * 4);
    const double a0 = a.point(k), a1 = a.point(k + 1);
    const double t = a0 + h + u(rng) * (a1 - a0 - 2 * h);
    const std::size_t n = 1 + static_cast<std::size_t>(u(rng) * (w.row_limit(k) - 1));
    const double fd = (wait_given_queue(w, a, k, n, t + h) - wait_given_queue(w, a, k, n, t - h)) / (2 * h);
    const double d = wait_time_derivative(w, a, k, n, t);
    EXPECT_NEAR(d, fd, 1e-4 * std::max(std::abs(fd), 1e-2)) << "k=" << k << " n=" << n << " t=" << t;
    ++checked;
  }
}
