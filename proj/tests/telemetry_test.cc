#include <gtest/gtest.h>

#include <sstream>

#include "bofx/error.h"
#include "bofx/telemetry.h"
#include "support/toy.h"

namespace bofx {
namespace {

std::string header() {
  std::string h = "time";
  for (Mnemonic m : kAllChannels) h += "," + std::string(to_string(m));
  return h + "\n";
}

std::string row(double t, double v) {
  std::string r = format_double(t);
  for (std::size_t c = 0; c < kNumChannels; ++c) r += "," + format_double(v);
  return r + "\n";
}

ValidityLimits wide_limits(double max = 1000.0) {
  std::array<ChannelLimits, kNumChannels> l;
  l.fill({-1000.0, max});
  return ValidityLimits(l);
}

TEST(ParseCsv, ThreeRows) {
  std::istringstream in(header() + row(0, 1) + row(10, 2) + row(20, 3));
  const RawLog raw = parse_csv(in, "w");
  for (Mnemonic m : kAllChannels) EXPECT_EQ(raw.channel(m).size(), 3u);
}

TEST(ParseCsv, MissingColumnNamesIt) {
  std::string h = "time";
  for (Mnemonic m : kAllChannels)
    if (m != Mnemonic::GASA) h += "," + std::string(to_string(m));
  std::istringstream in(h + "\n");
  try {
    parse_csv(in, "w");
    FAIL() << "expected a schema error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kSchema);
    EXPECT_NE(std::string(e.what()).find("GASA"), std::string::npos);
  }
}

TEST(ParseCsv, EmptyCellSkipsOnlyThatChannel) {
  std::string r2 = "10,";  // HKLA is the first channel column
  for (std::size_t c = 1; c < kNumChannels; ++c) r2 += ",2";
  std::istringstream in(header() + row(0, 1) + r2 + "\n" + row(20, 3));
  const RawLog raw = parse_csv(in, "w");
  EXPECT_EQ(raw.channel(Mnemonic::HKLA).size(), 2u);
  EXPECT_EQ(raw.channel(Mnemonic::WOB).size(), 3u);
}

TEST(ParseCsv, NonIncreasingTimeIsFormatError) {
  std::istringstream in(header() + row(10, 1) + row(10, 2));
  try {
    parse_csv(in, "w");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kFormat);
  }
}

TEST(ParseTime, IsoAndEpoch) {
  EXPECT_DOUBLE_EQ(parse_time("2021-01-01T00:00:00Z"), 1609459200.0);
  EXPECT_DOUBLE_EQ(parse_time("2021-01-01T00:00:10.5Z"), 1609459210.5);
  EXPECT_DOUBLE_EQ(parse_time("1609459200"), 1609459200.0);
}

TEST(Clean, ConstantChannelIsIdentity) {
  std::istringstream in(header() + row(0, 4) + row(10, 4) + row(20, 4));
  const TelemetryLog log = clean(parse_csv(in, "w"), wide_limits());
  ASSERT_EQ(log.size(), 3u);
  for (Mnemonic m : kAllChannels)
    for (double v : log.channel(m)) EXPECT_EQ(v, 4.0);
}

TEST(Clean, ClipThenFill) {
  RawLog raw;
  raw.well_id = "w";
  for (Mnemonic m : kAllChannels) raw.channel(m) = {{0, 5}, {10, 5}, {20, 5}};
  raw.channel(Mnemonic::HKLA) = {{0, 5}, {10, 999999}, {20, 7}};
  const TelemetryLog log = clean(raw, wide_limits(1000.0));
  const auto h = log.channel(Mnemonic::HKLA);
  ASSERT_EQ(h.size(), 3u);
  EXPECT_EQ(h[0], 5.0);
  EXPECT_EQ(h[1], 5.0);
  EXPECT_EQ(h[2], 7.0);
}

TEST(Clean, LastObservationCarriedForward) {
  RawLog raw;
  raw.well_id = "w";
  for (Mnemonic m : kAllChannels) raw.channel(m) = {{0, 1}, {25, 2}};
  const TelemetryLog log = clean(raw, wide_limits());
  ASSERT_EQ(log.size(), 3u);  // t = 0, 10, 20
  for (Mnemonic m : kAllChannels) {
    EXPECT_EQ(log.channel(m)[1], 1.0);
    EXPECT_EQ(log.channel(m)[2], 1.0);
  }
}

TEST(Clean, RoundTripsCleanLogs) {
  const auto log = testing::make_log(50, [](Mnemonic m, std::size_t i) { return double(index_of(m)) + 0.5 * i; });
  const TelemetryLog again = clean(to_raw(log), wide_limits());
  ASSERT_EQ(again.size(), log.size());
  for (Mnemonic m : kAllChannels)
    for (std::size_t i = 0; i < log.size(); ++i) EXPECT_EQ(again.channel(m)[i], log.channel(m)[i]);
}

TEST(Window, FullHour) {
  const auto log = testing::make_log(360, [](Mnemonic, std::size_t i) { return double(i); });
  const Segment s = window(log, log.end_time());
  EXPECT_EQ(s.begin_index(), 0u);
  EXPECT_EQ(s.end_index(), 360u);
}

TEST(Window, TooLittleHistory) {
  const auto log = testing::make_log(720, [](Mnemonic, std::size_t) { return 0.0; });
  try {
    window(log, log.start_time() + 1800.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kWindow);
  }
}

TEST(Window, NinetyMinutesIntoTwoHours) {
  const auto log = testing::make_log(720, [](Mnemonic, std::size_t i) { return double(i); });
  const Segment s = window(log, log.start_time() + 90 * 60.0);
  EXPECT_EQ(s.begin_index(), 180u);
  EXPECT_EQ(s.channel(Mnemonic::HKLA).front(), 180.0);
  EXPECT_EQ(s.channel(Mnemonic::HKLA).back(), 539.0);
}

TEST(Limits, DefaultsContainTypicalValues) {
  const auto l = ValidityLimits::defaults();
  EXPECT_TRUE(l.contains(Mnemonic::HKLA, 100.0));
  EXPECT_FALSE(l.contains(Mnemonic::HKLA, 1e9));
}

TEST(Names, RoundTrip) {
  for (Mnemonic m : kAllChannels) EXPECT_EQ(parse_mnemonic(to_string(m)), m);
  for (AccidentType t : kAllAccidentTypes) EXPECT_EQ(parse_accident_type(to_string(t)), t);
  EXPECT_FALSE(parse_mnemonic("XYZ"));
}

}  // namespace
}  // namespace bofx
