#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "jvs/indexer.h"

namespace jvs {

enum class UpdateKind : std::uint8_t {
  kAttributeUpdate,
  kImageAddition,
  kImageDeletion,
  kReusedAddition,  // subset of additions; not part of the total
};

struct UpdateCounts {
  std::uint64_t attribute_updates = 0;
  std::uint64_t image_additions = 0;
  std::uint64_t image_deletions = 0;
  std::uint64_t reused_additions = 0;

  std::uint64_t total() const noexcept {
    return attribute_updates + image_additions + image_deletions;
  }
  void add(UpdateKind kind, std::uint64_t n);
  bool operator==(const UpdateCounts&) const = default;
};

/// Daily update table with an hourly breakdown.
struct UpdateStats {
  UpdateCounts totals;
  std::map<int, UpdateCounts> hourly;  // hour of day -> counts

  std::uint64_t total() const noexcept { return totals.total(); }
};

/// One counter-log line: hour<TAB>kind<TAB>count, kind one of
/// attribute_update | image_addition | image_deletion | reused_addition.
struct CounterRecord {
  int hour = 0;
  UpdateKind kind = UpdateKind::kAttributeUpdate;
  std::uint64_t count = 0;
};

UpdateStats aggregate_stats(std::span<const CounterRecord> records);

/// Strict: throws naming the line number on malformed input.
std::vector<CounterRecord> parse_counter_log(std::string_view text);
std::string format_counter_record(const CounterRecord& r);

/// Counter records describing an indexer's accounting within one hour.
std::vector<CounterRecord> counter_records(const IndexerCounters& c, int hour);

/// key<TAB>value lines: total, per-kind totals, then hour.HH.<kind> lines.
std::string format_stats(const UpdateStats& stats);

struct LatencySummary {
  std::size_t count = 0;
  double mean = 0, p50 = 0, p90 = 0, p99 = 0, max = 0;
};

/// Nearest-rank percentiles, so p50 <= p90 <= p99 <= max always holds.
LatencySummary summarize(std::vector<double> samples);

struct BenchReport {
  double duration_s = 0;
  std::uint64_t queries_issued = 0;
  std::uint64_t queries_succeeded = 0;
  std::uint64_t degraded = 0;
  double throughput_qps = 0;
  LatencySummary latency_ms;
  bool updates_ran = false;
  std::uint64_t updates_applied = 0;
  double update_throughput = 0;
  LatencySummary update_latency_ms;
};

std::string format_report(const BenchReport& r);

}  // namespace jvs
