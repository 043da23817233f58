#include "jvs/bench.h"

#include <atomic>
#include <chrono>
#include <mutex>
#include <thread>

#include <sys/resource.h>
#include <unistd.h>

#include "jvs/common.h"

namespace jvs {

namespace {

using Clock = std::chrono::steady_clock;

constexpr std::uint64_t kAttributeShare = 315;
constexpr std::uint64_t kAdditionShare = 521;
constexpr std::uint64_t kRemovalShare = 141;
constexpr std::uint64_t kReusedOfAdditions = 513;

}  // namespace

std::vector<FeatureVector> make_query_set(std::span<const FeatureVector> base,
                                          std::size_t count, double sigma,
                                          std::uint64_t seed) {
  if (base.empty()) throw Error("query set needs at least one base vector");
  SplitMix64 rng(seed);
  std::vector<FeatureVector> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const auto& src = base[rng.below(base.size())].components();
    std::vector<float> v(src.size());
    for (std::size_t d = 0; d < v.size(); ++d) {
      v[d] = static_cast<float>(src[d] + sigma * rng.gaussian());
    }
    out.emplace_back(std::move(v));
  }
  return out;
}

UpdateStreamGenerator::UpdateStreamGenerator(std::uint64_t seed,
                                             std::uint64_t first_new_product,
                                             std::string url_prefix)
    : rng_(seed), next_product_(first_new_product), url_prefix_(std::move(url_prefix)) {}

void UpdateStreamGenerator::track(const UpdateMessage& add) {
  if (add.kind != MessageKind::kProductAdd) return;
  if (products_.count(add.product_id) != 0) return;
  products_[add.product_id] = {add, live_.size(), true};
  live_.push_back(add.product_id);
  if (add.product_id >= next_product_) next_product_ = add.product_id + 1;
}

void UpdateStreamGenerator::move_to(std::uint64_t id, bool live) {
  Product& p = products_.at(id);
  auto& from = p.live ? live_ : removed_;
  auto& to = live ? live_ : removed_;
  std::uint64_t last = from.back();
  from[p.slot] = last;
  products_.at(last).slot = p.slot;
  from.pop_back();
  p.slot = to.size();
  p.live = live;
  to.push_back(id);
}

std::uint64_t UpdateStreamGenerator::pick(const std::vector<std::uint64_t>& from) {
  return from[rng_.below(from.size())];
}

UpdateMessage UpdateStreamGenerator::new_product() {
  std::uint64_t id = next_product_++;
  std::vector<std::string> urls;
  std::size_t images = 1 + rng_.below(3);
  for (std::size_t i = 0; i < images; ++i) {
    urls.push_back(url_prefix_ + std::to_string(id) + "/" + std::to_string(i) + ".jpg");
  }
  UpdateMessage m = UpdateMessage::add(id, rng_.below(10000), rng_.below(5000),
                                       100 + rng_.below(100000), std::move(urls));
  products_[id] = {m, live_.size(), true};
  live_.push_back(id);
  return m;
}

UpdateMessage UpdateStreamGenerator::next() {
  const std::uint64_t total = kAttributeShare + kAdditionShare + kRemovalShare;
  std::uint64_t roll = rng_.below(total);
  if (roll < kAttributeShare && !live_.empty()) {
    std::uint64_t id = pick(live_);
    static constexpr AttributeField kFields[] = {
        AttributeField::kSales, AttributeField::kPraise, AttributeField::kPrice};
    AttributeField f = kFields[rng_.below(3)];
    return UpdateMessage::update(id, {{f, rng_.below(100000)}});
  }
  if (roll >= kAttributeShare + kAdditionShare && !live_.empty()) {
    std::uint64_t id = pick(live_);
    move_to(id, false);
    return UpdateMessage::remove(id);
  }
  bool reuse = !removed_.empty() && rng_.below(kAdditionShare) < kReusedOfAdditions;
  if (reuse) {
    std::uint64_t id = pick(removed_);
    move_to(id, true);
    return products_.at(id).add;
  }
  return new_product();
}

std::size_t query_slot(std::uint64_t seed, std::size_t user, std::size_t i,
                       std::size_t set_size) {
  SplitMix64 rng(seed ^ (0x9e3779b97f4a7c15ULL * (user + 1)));
  std::size_t start = rng.below(set_size);
  return (start + i * 7919) % set_size;
}

BenchReport run_bench(const Workload& workload,
                      std::span<const FeatureVector> queries, const QueryFn& query,
                      const UpdateFn& apply, UpdateStreamGenerator* stream,
                      BenchTrace* trace) {
  if (workload.users == 0) throw Error("bench needs at least one user");
  if (queries.empty()) throw Error("bench needs a non-empty query set");

  std::atomic<bool> stop{false};
  std::vector<std::vector<double>> latencies(workload.users);
  std::vector<std::vector<std::size_t>> issued(workload.users);
  std::vector<std::uint64_t> ok(workload.users, 0), degraded(workload.users, 0);
  std::vector<double> update_latencies;
  std::uint64_t updates = 0;

  const auto start = Clock::now();
  const auto end = start + std::chrono::duration_cast<Clock::duration>(
                               std::chrono::duration<double>(workload.seconds));

  std::vector<std::thread> clients;
  for (std::size_t u = 0; u < workload.users; ++u) {
    clients.emplace_back([&, u] {
      const std::size_t cap = workload.queries_per_user;
      for (std::size_t i = 0; cap != 0 ? i < cap : Clock::now() < end; ++i) {
        std::size_t slot = query_slot(workload.seed, u, i, queries.size());
        issued[u].push_back(slot);
        auto t0 = Clock::now();
        try {
          PartialResult r = query(queries[slot]);
          ++ok[u];
          if (r.degraded()) ++degraded[u];
        } catch (const std::exception&) {
        }
        latencies[u].push_back(
            std::chrono::duration<double, std::milli>(Clock::now() - t0).count());
      }
    });
  }

  std::thread updater;
  const bool with_updates = workload.update_rate > 0 && apply && stream != nullptr;
  if (with_updates) {
    updater = std::thread([&] {
      // The stream is offered load: keep it on schedule when query threads
      // saturate the CPU. Best effort; needs CAP_SYS_NICE.
      setpriority(PRIO_PROCESS, static_cast<id_t>(::gettid()), -10);
      const auto period = std::chrono::duration<double>(1.0 / workload.update_rate);
      for (std::uint64_t i = 0;; ++i) {
        auto due = start + std::chrono::duration_cast<Clock::duration>(period * i);
        if (due >= end || stop.load()) break;
        std::this_thread::sleep_until(due);
        UpdateMessage m = stream->next();
        auto t0 = Clock::now();
        apply(m);
        update_latencies.push_back(
            std::chrono::duration<double, std::milli>(Clock::now() - t0).count());
        ++updates;
      }
    });
  }

  for (auto& t : clients) t.join();
  stop = true;
  if (updater.joinable()) updater.join();
  const double elapsed = std::chrono::duration<double>(Clock::now() - start).count();

  BenchReport r;
  r.duration_s = elapsed;
  std::vector<double> all;
  for (std::size_t u = 0; u < workload.users; ++u) {
    r.queries_issued += issued[u].size();
    r.queries_succeeded += ok[u];
    r.degraded += degraded[u];
    all.insert(all.end(), latencies[u].begin(), latencies[u].end());
  }
  r.throughput_qps = elapsed > 0 ? static_cast<double>(r.queries_succeeded) / elapsed : 0;
  r.latency_ms = summarize(std::move(all));
  if (with_updates) {
    r.updates_ran = true;
    r.updates_applied = updates;
    r.update_throughput = elapsed > 0 ? static_cast<double>(updates) / elapsed : 0;
    r.update_latency_ms = summarize(std::move(update_latencies));
  }
  if (trace != nullptr) trace->issued = std::move(issued);
  return r;
}

}  // namespace jvs
