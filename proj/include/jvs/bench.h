#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "jvs/message.h"
#include "jvs/search.h"
#include "jvs/stats.h"

namespace jvs {

struct Workload {
  std::size_t users = 16;
  double seconds = 5.0;
  std::size_t k = 10;
  std::size_t nprobe = 1;
  double update_rate = 0.0;  // messages per second; 0 disables the stream
  std::size_t queries_per_user = 0;  // when set, each user stops after this many
  std::uint64_t seed = 1;
};

/// Indexed vectors picked by seed and perturbed by N(0, sigma^2) noise, so
/// each query's true neighbourhood is known.
std::vector<FeatureVector> make_query_set(std::span<const FeatureVector> base,
                                          std::size_t count, double sigma,
                                          std::uint64_t seed);

/// Produces a product-event stream mixed like the production day:
/// 315 : 521 : 141 attribute updates : additions : removals, with 513 of
/// every 521 additions re-listing a previously removed product.
class UpdateStreamGenerator {
 public:
  UpdateStreamGenerator(std::uint64_t seed, std::uint64_t first_new_product,
                        std::string url_prefix);

  /// Makes the generator aware of a product already in the index.
  void track(const UpdateMessage& add);
  UpdateMessage next();

  std::size_t live_products() const noexcept { return live_.size(); }
  std::size_t removed_products() const noexcept { return removed_.size(); }

 private:
  struct Product {
    UpdateMessage add;
    std::size_t slot;  // position in live_ or removed_
    bool live;
  };
  void move_to(std::uint64_t id, bool live);
  std::uint64_t pick(const std::vector<std::uint64_t>& from);
  UpdateMessage new_product();

  SplitMix64 rng_;
  std::uint64_t next_product_;
  std::string url_prefix_;
  std::unordered_map<std::uint64_t, Product> products_;
  std::vector<std::uint64_t> live_;
  std::vector<std::uint64_t> removed_;
};

using QueryFn = std::function<PartialResult(const FeatureVector&)>;
using UpdateFn = std::function<void(const UpdateMessage&)>;

/// Per-user list of query-set positions actually issued.
struct BenchTrace {
  std::vector<std::vector<std::size_t>> issued;
};

/// Position of the i-th query issued by `user`; a pure function of the seed.
std::size_t query_slot(std::uint64_t seed, std::size_t user, std::size_t i,
                       std::size_t set_size);

/// Runs `users` closed-loop query clients for `seconds`, plus a paced update
/// stream when update_rate > 0 and both `apply` and `stream` are given.
BenchReport run_bench(const Workload& workload,
                      std::span<const FeatureVector> queries,
                      const QueryFn& query, const UpdateFn& apply = {},
                      UpdateStreamGenerator* stream = nullptr,
                      BenchTrace* trace = nullptr);

}  // namespace jvs
