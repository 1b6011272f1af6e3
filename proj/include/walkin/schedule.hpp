#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <iomanip>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "walkin/errors.hpp"

namespace walkin {

/// Appointment instants of M scheduled customers on [0, T], strictly increasing.
class Schedule {
 public:
  Schedule() = default;

  Schedule(std::vector<double> times, double horizon) : times_(std::move(times)), horizon_(horizon) {
    if (!(horizon_ > 0.0) || !std::isfinite(horizon_)) throw InvalidSchedule("horizon must be positive");
    for (std::size_t i = 0; i < times_.size(); ++i) {
      const double t = times_[i];
      if (!std::isfinite(t) || t < 0.0 || t > horizon_) {
        throw InvalidSchedule("appointment outside [0, T]");
      }
      if (i > 0 && !(times_[i - 1] < t)) {
        throw InvalidSchedule("appointments must be strictly increasing");
      }
    }
  }

  std::size_t size() const noexcept { return times_.size(); }
  double horizon() const noexcept { return horizon_; }
  const std::vector<double>& times() const noexcept { return times_; }
  bool starts_at_zero() const noexcept { return !times_.empty() && times_.front() == 0.0; }

  bool operator==(const Schedule&) const = default;

 private:
  std::vector<double> times_;
  double horizon_ = 1.0;
};

/// The schedule padded with 0 and T. Segment k is [point(k), point(k+1)), k = 0..M.
class AugmentedSchedule {
 public:
  explicit AugmentedSchedule(const Schedule& s) : horizon_(s.horizon()) {
    points_.reserve(s.size() + 2);
    points_.push_back(0.0);
    points_.insert(points_.end(), s.times().begin(), s.times().end());
    points_.push_back(s.horizon());
  }

  /// Number of scheduled customers M.
  std::size_t appointments() const noexcept { return points_.size() - 2; }
  std::size_t segments() const noexcept { return points_.size() - 1; }
  double point(std::size_t k) const { return points_.at(k); }
  const std::vector<double>& points() const noexcept { return points_; }
  double horizon() const noexcept { return horizon_; }
  double segment_length(std::size_t k) const { return points_.at(k + 1) - points_.at(k); }

  /// 1 when a scheduled customer sits at time 0, else 0.
  std::size_t zero_indicator() const noexcept { return appointments() > 0 && points_[1] == 0.0 ? 1 : 0; }

  /// Segment containing t: point(k) <= t < point(k+1); t = T maps to the last segment.
  std::size_t segment_of(double t) const {
    if (t < 0.0 || t > horizon_) throw ValidityError("time outside [0, T]");
    const std::size_t m = appointments();
    if (t >= points_[m]) return m;
    auto it = std::upper_bound(points_.begin() + 1, points_.begin() + static_cast<std::ptrdiff_t>(m) + 1, t);
    return static_cast<std::size_t>(it - points_.begin()) - 1;
  }

  bool contains(std::size_t k, double t) const {
    if (k > appointments()) return false;
    if (k == appointments()) return t >= points_[k] && t <= horizon_;
    return t >= points_[k] && t < points_[k + 1];
  }

 private:
  std::vector<double> points_;
  double horizon_;
};

/// Parses "1,3,5" (whitespace tolerated). An empty or blank string yields no appointments.
inline std::vector<double> parse_time_list(std::string_view text) {
  std::vector<double> out;
  std::string buf(text);
  if (buf.find_first_not_of(" \t") == std::string::npos) return out;
  if (buf.back() == ',') throw InvalidSchedule("trailing comma in time list");
  std::stringstream ss(buf);
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto b = item.find_first_not_of(" \t");
    auto e = item.find_last_not_of(" \t");
    if (b == std::string::npos) throw InvalidSchedule("empty entry in time list");
    std::string token = item.substr(b, e - b + 1);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
    if (ec != std::errc() || ptr != token.data() + token.size()) {
      throw InvalidSchedule("malformed number '" + token + "' in time list");
    }
    out.push_back(v);
  }
  return out;
}

inline Schedule parse_schedule(std::string_view text, double horizon) {
  return Schedule(parse_time_list(text), horizon);
}

/// Shortest round-tripping decimal form, comma separated.
inline std::string format_schedule(const std::vector<double>& times) {
  std::string out;
  char buf[64];
  for (std::size_t i = 0; i < times.size(); ++i) {
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, times[i]);
    if (i) out += ',';
    out.append(buf, ptr);
  }
  return out;
}

inline std::string format_schedule(const Schedule& s) { return format_schedule(s.times()); }

}  // namespace walkin
