#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <variant>
#include <vector>

#include "jvs/core.h"
#include "jvs/feature_store.h"
#include "jvs/indexer.h"
#include "jvs/message.h"

namespace jvs {

/// hash64(url) mod partitions.
PartitionId partition_of(std::string_view url, std::size_t partitions);

/// Splits messages across partitions by url hash. ADDs carry only the urls
/// that hash to each partition; UPDATE/REMOVE go to the partitions known to
/// hold the product, or to all of them when the product was never seen.
class MessageRouter {
 public:
  explicit MessageRouter(std::size_t partitions);
  std::vector<std::pair<PartitionId, UpdateMessage>> route(
      const UpdateMessage& msg);
  std::size_t partitions() const noexcept { return partitions_; }
  /// Records that `partition` holds images of `product_id`, e.g. after a
  /// snapshot load.
  void place(std::uint64_t product_id, PartitionId partition);

 private:
  std::size_t partitions_;
  std::unordered_map<std::uint64_t, std::vector<bool>> placement_;
};

struct RankWeights {
  double sim = 1.0;
  double sales = 0.0;
  double praise = 0.0;
  double price = 0.0;
};

/// sim/(1+d) + sales*ln(1+sales) + praise*ln(1+praise) - price*ln(1+price)
double rank_score(const SearchHit& hit, const RankWeights& w);

/// Sets each hit's score and orders by descending score, ties by hit_less.
std::vector<SearchHit> rank(std::vector<SearchHit> hits, const RankWeights& w);

/// Scans the nprobe nearest lists of one partition, skipping invalid images,
/// and returns the k nearest sorted by hit_less with attribute snapshots.
std::vector<SearchHit> searcher_query(const IndexPartition& partition,
                                      std::span<const float> query,
                                      std::size_t k, std::size_t nprobe);

struct PartialResult {
  std::vector<SearchHit> hits;
  std::vector<PartitionId> missing;  // partitions with no answering replica
  bool degraded() const noexcept { return !missing.empty(); }
};

class SearcherEndpoint {
 public:
  virtual ~SearcherEndpoint() = default;
  virtual std::vector<SearchHit> search(const FeatureVector& query,
                                        std::size_t k, std::size_t nprobe) = 0;
};

class LocalSearcher : public SearcherEndpoint {
 public:
  explicit LocalSearcher(std::shared_ptr<const IndexPartition> partition)
      : partition_(std::move(partition)) {}
  std::vector<SearchHit> search(const FeatureVector& query, std::size_t k,
                                std::size_t nprobe) override {
    return searcher_query(*partition_, query.view(), k, nprobe);
  }

 private:
  std::shared_ptr<const IndexPartition> partition_;
};

using Replicas = std::vector<std::shared_ptr<SearcherEndpoint>>;

/// Fans a query out to one replica of each owned partition and merges.
class Broker {
 public:
  static constexpr std::chrono::milliseconds kDefaultDeadline{500};

  Broker(std::map<PartitionId, Replicas> partitions,
         std::chrono::milliseconds deadline = kDefaultDeadline);

  /// Throws when no partition answered.
  PartialResult query(const FeatureVector& q, std::size_t k,
                      std::size_t nprobe);
  std::vector<PartitionId> partitions() const;

 private:
  std::map<PartitionId, Replicas> partitions_;
  std::chrono::milliseconds deadline_;
  std::atomic<std::size_t> rotation_{0};
};

class BrokerEndpoint {
 public:
  virtual ~BrokerEndpoint() = default;
  virtual PartialResult search(const FeatureVector& query, std::size_t k,
                               std::size_t nprobe) = 0;
  virtual std::vector<PartitionId> partitions() const = 0;
};

class LocalBroker : public BrokerEndpoint {
 public:
  explicit LocalBroker(std::shared_ptr<Broker> broker)
      : broker_(std::move(broker)) {}
  PartialResult search(const FeatureVector& q, std::size_t k,
                       std::size_t nprobe) override {
    return broker_->query(q, k, nprobe);
  }
  std::vector<PartitionId> partitions() const override {
    return broker_->partitions();
  }

 private:
  std::shared_ptr<Broker> broker_;
};

struct QueryRequest {
  std::variant<FeatureVector, std::string> query;  // vector or image url
  std::size_t k = 10;
  std::size_t nprobe = 1;
  RankWeights weights;
};

/// Front tier: featurizes url queries, fans out to every broker, merges and
/// ranks.
class Blender {
 public:
  static constexpr std::chrono::milliseconds kDefaultDeadline{1500};

  /// `store` may be null, in which case url queries always call the provider.
  Blender(std::vector<std::shared_ptr<BrokerEndpoint>> brokers,
          std::shared_ptr<FeatureProvider> provider,
          std::shared_ptr<FeatureStore> store = nullptr,
          std::chrono::milliseconds deadline = kDefaultDeadline);

  /// Throws when every broker failed.
  PartialResult query(const QueryRequest& request);

 private:
  FeatureVector featurize(const QueryRequest& request);

  std::vector<std::shared_ptr<BrokerEndpoint>> brokers_;
  std::shared_ptr<FeatureProvider> provider_;
  std::shared_ptr<FeatureStore> store_;
  std::chrono::milliseconds deadline_;
};

}  // namespace jvs
