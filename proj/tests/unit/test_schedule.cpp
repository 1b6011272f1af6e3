#include <gtest/gtest.h>

#include "walkin/errors.hpp"
#include "walkin/schedule.hpp"

using namespace walkin;

TEST(Schedule, AcceptsIncreasingTimesInsideHorizon) {
  const Schedule s({0.0, 2.0, 5.0}, 5.0);
  EXPECT_EQ(s.size(), 3u);
  EXPECT_TRUE(s.starts_at_zero());
  EXPECT_FALSE(Schedule({1.0}, 5.0).starts_at_zero());
  EXPECT_EQ(Schedule({}, 5.0).size(), 0u);
}

TEST(Schedule, RejectsInvalidTimes) {
  EXPECT_THROW(Schedule({5.0, 1.0, 3.0}, 5.0), InvalidSchedule);
  EXPECT_THROW(Schedule({1.0, 1.0}, 5.0), InvalidSchedule);
  EXPECT_THROW(Schedule({-0.1, 1.0}, 5.0), InvalidSchedule);
  EXPECT_THROW(Schedule({1.0, 5.5}, 5.0), InvalidSchedule);
}

TEST(ParseSchedule, RoundTripsThroughFormat) {
  EXPECT_EQ(parse_time_list("1,3,5"), (std::vector<double>{1, 3, 5}));
  EXPECT_EQ(parse_time_list(" 0 , 0.5, 0.8 "), (std::vector<double>{0, 0.5, 0.8}));
  EXPECT_TRUE(parse_time_list("  ").empty());
  EXPECT_THROW(parse_time_list("1,,3"), InvalidSchedule);
  EXPECT_THROW(parse_time_list("1,3,"), InvalidSchedule);
  EXPECT_THROW(parse_time_list("1,x"), InvalidSchedule);
  EXPECT_THROW(parse_schedule("5,1,3", 5.0), InvalidSchedule);
  EXPECT_EQ(format_schedule(std::vector<double>{0, 0.6, 1.2}), "0,0.6,1.2");
  const std::vector<double> odd{0.1 + 0.2, 1.0 / 3.0};
  EXPECT_EQ(parse_time_list(format_schedule(odd)), odd);
}

TEST(AugmentedSchedule, PointsAndSegments) {
  const AugmentedSchedule a(Schedule({1.0, 3.0, 5.0}, 5.0));
  EXPECT_EQ(a.appointments(), 3u);
  EXPECT_EQ(a.points(), (std::vector<double>{0, 1, 3, 5, 5}));
  EXPECT_DOUBLE_EQ(a.segment_length(3), 0.0);
  EXPECT_EQ(a.zero_indicator(), 0u);
  EXPECT_EQ(a.segment_of(0.0), 0u);
  EXPECT_EQ(a.segment_of(0.99), 0u);
  EXPECT_EQ(a.segment_of(1.0), 1u);
  EXPECT_EQ(a.segment_of(4.0), 2u);
  EXPECT_EQ(a.segment_of(5.0), 3u);

  const AugmentedSchedule z(Schedule({0.0, 2.0}, 5.0));
  EXPECT_EQ(z.zero_indicator(), 1u);
  EXPECT_EQ(z.segment_of(0.0), 1u);
}
