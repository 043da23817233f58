#include "jvs/stats.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "jvs/common.h"

namespace jvs {

namespace {

constexpr const char* kind_name(UpdateKind k) {
  switch (k) {
    case UpdateKind::kAttributeUpdate:
      return "attribute_update";
    case UpdateKind::kImageAddition:
      return "image_addition";
    case UpdateKind::kImageDeletion:
      return "image_deletion";
    case UpdateKind::kReusedAddition:
      return "reused_addition";
  }
  return "?";
}

UpdateKind parse_kind(std::string_view s) {
  for (auto k : {UpdateKind::kAttributeUpdate, UpdateKind::kImageAddition,
                 UpdateKind::kImageDeletion, UpdateKind::kReusedAddition}) {
    if (s == kind_name(k)) return k;
  }
  throw Error("unknown counter kind '" + std::string(s) + "'");
}

template <typename T>
T parse_number(std::string_view s, const char* what) {
  T v{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) {
    throw Error(std::string("bad ") + what + " '" + std::string(s) + "'");
  }
  return v;
}

std::string fixed(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

void append_counts(std::string& out, const std::string& prefix,
                   const UpdateCounts& c) {
  out += prefix + "total\t" + std::to_string(c.total()) + "\n";
  out += prefix + "attribute_update\t" + std::to_string(c.attribute_updates) + "\n";
  out += prefix + "image_addition\t" + std::to_string(c.image_additions) + "\n";
  out += prefix + "image_deletion\t" + std::to_string(c.image_deletions) + "\n";
  out += prefix + "reused_addition\t" + std::to_string(c.reused_additions) + "\n";
}

void append_latency(std::string& out, const std::string& prefix,
                    const LatencySummary& s) {
  out += prefix + "mean_ms\t" + fixed(s.mean) + "\n";
  out += prefix + "p50_ms\t" + fixed(s.p50) + "\n";
  out += prefix + "p90_ms\t" + fixed(s.p90) + "\n";
  out += prefix + "p99_ms\t" + fixed(s.p99) + "\n";
  out += prefix + "max_ms\t" + fixed(s.max) + "\n";
}

}  // namespace

void UpdateCounts::add(UpdateKind kind, std::uint64_t n) {
  switch (kind) {
    case UpdateKind::kAttributeUpdate:
      attribute_updates += n;
      break;
    case UpdateKind::kImageAddition:
      image_additions += n;
      break;
    case UpdateKind::kImageDeletion:
      image_deletions += n;
      break;
    case UpdateKind::kReusedAddition:
      reused_additions += n;
      break;
  }
}

UpdateStats aggregate_stats(std::span<const CounterRecord> records) {
  UpdateStats s;
  for (const auto& r : records) {
    s.totals.add(r.kind, r.count);
    s.hourly[r.hour].add(r.kind, r.count);
  }
  return s;
}

std::vector<CounterRecord> parse_counter_log(std::string_view text) {
  std::vector<CounterRecord> out;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    ++line_no;
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty() || line.front() == '#') continue;
    try {
      auto t1 = line.find('\t');
      auto t2 = t1 == std::string_view::npos ? t1 : line.find('\t', t1 + 1);
      if (t2 == std::string_view::npos) throw Error("expected 3 columns");
      CounterRecord r;
      r.hour = parse_number<int>(line.substr(0, t1), "hour");
      if (r.hour < 0 || r.hour > 23) throw Error("hour outside 0..23");
      r.kind = parse_kind(line.substr(t1 + 1, t2 - t1 - 1));
      r.count = parse_number<std::uint64_t>(line.substr(t2 + 1), "count");
      out.push_back(r);
    } catch (const Error& e) {
      throw Error("counter log line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::string format_counter_record(const CounterRecord& r) {
  return std::to_string(r.hour) + "\t" + kind_name(r.kind) + "\t" +
         std::to_string(r.count);
}

std::vector<CounterRecord> counter_records(const IndexerCounters& c, int hour) {
  return {{hour, UpdateKind::kAttributeUpdate, c.attribute_updates},
          {hour, UpdateKind::kImageAddition, c.image_additions},
          {hour, UpdateKind::kImageDeletion, c.image_deletions},
          {hour, UpdateKind::kReusedAddition, c.reused_additions}};
}

std::string format_stats(const UpdateStats& stats) {
  std::string out;
  append_counts(out, "", stats.totals);
  for (const auto& [hour, counts] : stats.hourly) {
    char prefix[16];
    std::snprintf(prefix, sizeof(prefix), "hour.%02d.", hour);
    append_counts(out, prefix, counts);
  }
  return out;
}

LatencySummary summarize(std::vector<double> samples) {
  LatencySummary s;
  s.count = samples.size();
  if (samples.empty()) return s;
  std::sort(samples.begin(), samples.end());
  auto rank = [&](double p) {
    auto idx = static_cast<std::size_t>(
        std::ceil(p * static_cast<double>(samples.size())));
    return samples[std::clamp<std::size_t>(idx, 1, samples.size()) - 1];
  };
  s.mean = std::accumulate(samples.begin(), samples.end(), 0.0) /
           static_cast<double>(samples.size());
  s.p50 = rank(0.50);
  s.p90 = rank(0.90);
  s.p99 = rank(0.99);
  s.max = samples.back();
  return s;
}

std::string format_report(const BenchReport& r) {
  std::string out;
  out += "duration_s\t" + fixed(r.duration_s) + "\n";
  out += "queries_issued\t" + std::to_string(r.queries_issued) + "\n";
  out += "queries_succeeded\t" + std::to_string(r.queries_succeeded) + "\n";
  out += "degraded\t" + std::to_string(r.degraded) + "\n";
  out += "throughput_qps\t" + fixed(r.throughput_qps) + "\n";
  append_latency(out, "latency.", r.latency_ms);
  if (r.updates_ran) {
    out += "updates_applied\t" + std::to_string(r.updates_applied) + "\n";
    out += "update_throughput\t" + fixed(r.update_throughput) + "\n";
    append_latency(out, "update_latency.", r.update_latency_ms);
  }
  return out;
}

}  // namespace jvs
