#include <gtest/gtest.h>

#include <algorithm>
#include <map>

#include "jvs/stats.h"
#include "support.h"

namespace jvs {
namespace {

TEST(Stats, DailyUpdateTableTotal) {
  // One production day, in millions.
  std::vector<CounterRecord> recs = {{0, UpdateKind::kAttributeUpdate, 315},
                                     {0, UpdateKind::kImageAddition, 521},
                                     {0, UpdateKind::kImageDeletion, 141}};
  UpdateStats s = aggregate_stats(recs);
  EXPECT_EQ(s.total(), 977u);
  EXPECT_NE(format_stats(s).find("total\t977\n"), std::string::npos);
}

TEST(Stats, ZeroCounters) {
  EXPECT_EQ(aggregate_stats({}).total(), 0u);
  std::vector<CounterRecord> zeros = {{3, UpdateKind::kImageAddition, 0}};
  EXPECT_EQ(aggregate_stats(zeros).total(), 0u);
}

TEST(Stats, MatchesNaiveAccumulator) {
  SplitMix64 rng(12);
  std::vector<CounterRecord> recs;
  std::map<int, std::array<std::uint64_t, 4>> naive;
  std::array<std::uint64_t, 4> totals{};
  for (int i = 0; i < 5000; ++i) {
    CounterRecord r{static_cast<int>(rng.below(24)), static_cast<UpdateKind>(rng.below(4)),
                    rng.below(1000000)};
    recs.push_back(r);
    naive[r.hour][static_cast<int>(r.kind)] += r.count;
    totals[static_cast<int>(r.kind)] += r.count;
  }
  UpdateStats s = aggregate_stats(recs);
  EXPECT_EQ(s.totals.attribute_updates, totals[0]);
  EXPECT_EQ(s.totals.image_additions, totals[1]);
  EXPECT_EQ(s.totals.image_deletions, totals[2]);
  EXPECT_EQ(s.totals.reused_additions, totals[3]);
  EXPECT_EQ(s.total(), totals[0] + totals[1] + totals[2]);
  for (const auto& [hour, c] : naive) {
    const UpdateCounts& h = s.hourly.at(hour);
    EXPECT_EQ(h.attribute_updates, c[0]);
    EXPECT_EQ(h.image_additions, c[1]);
    EXPECT_EQ(h.image_deletions, c[2]);
    EXPECT_EQ(h.reused_additions, c[3]);
  }
}

TEST(Stats, CounterLogRoundTrip) {
  std::vector<CounterRecord> recs = {{5, UpdateKind::kReusedAddition, 7},
                                     {23, UpdateKind::kImageDeletion, 2}};
  std::string text = "# hour kind count\n";
  for (const auto& r : recs) text += format_counter_record(r) + "\n";
  auto back = parse_counter_log(text);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].hour, 5);
  EXPECT_EQ(back[0].kind, UpdateKind::kReusedAddition);
  EXPECT_EQ(back[1].count, 2u);
  std::string out = format_stats(aggregate_stats(back));
  EXPECT_NE(out.find("hour.05.reused_addition\t7\n"), std::string::npos);
  EXPECT_NE(out.find("hour.23.image_deletion\t2\n"), std::string::npos);
}

TEST(Stats, CounterLogErrorsNameLine) {
  for (const char* bad : {"24\timage_addition\t1", "1\tcolour\t1", "1\timage_addition",
                          "1\timage_addition\t-4"}) {
    std::string text = std::string("0\timage_addition\t1\n") + bad + "\n";
    try {
      parse_counter_log(text);
      FAIL() << bad;
    } catch (const Error& e) {
      EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
    }
  }
}

TEST(Stats, IndexerCountersBecomeRecords) {
  IndexerCounters c;
  c.attribute_updates = 4;
  c.image_additions = 6;
  c.reused_additions = 5;
  c.image_deletions = 2;
  UpdateStats s = aggregate_stats(counter_records(c, 8));
  EXPECT_EQ(s.total(), 12u);
  EXPECT_EQ(s.hourly.at(8).reused_additions, 5u);
}

TEST(Latency, NearestRankPercentiles) {
  std::vector<double> xs;
  for (int i = 1; i <= 100; ++i) xs.push_back(101 - i);
  LatencySummary s = summarize(xs);
  EXPECT_EQ(s.count, 100u);
  EXPECT_EQ(s.p50, 50.0);
  EXPECT_EQ(s.p90, 90.0);
  EXPECT_EQ(s.p99, 99.0);
  EXPECT_EQ(s.max, 100.0);
  EXPECT_DOUBLE_EQ(s.mean, 50.5);
  EXPECT_EQ(summarize({}).count, 0u);
  EXPECT_EQ(summarize({3.0}).p99, 3.0);
}

TEST(Latency, PercentilesAreOrdered) {
  SplitMix64 rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> xs(1 + rng.below(500));
    for (auto& x : xs) x = rng.uniform() * 100;
    LatencySummary s = summarize(xs);
    ASSERT_LE(s.p50, s.p90);
    ASSERT_LE(s.p90, s.p99);
    ASSERT_LE(s.p99, s.max);
  }
}

TEST(Report, KeyValueLines) {
  BenchReport r;
  r.queries_issued = 3;
  std::string text = format_report(r);
  EXPECT_NE(text.find("queries_issued\t3\n"), std::string::npos);
  EXPECT_EQ(text.find("update_throughput"), std::string::npos);
  r.updates_ran = true;
  EXPECT_NE(format_report(r).find("update_latency.p99_ms\t"), std::string::npos);
}

}  // namespace
}  // namespace jvs
