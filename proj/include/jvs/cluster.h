#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "jvs/config.h"
#include "jvs/feature_store.h"
#include "jvs/indexer.h"
#include "jvs/message.h"
#include "jvs/quantizer.h"
#include "jvs/search.h"

namespace jvs {

struct ClusterOptions {
  std::size_t dim = 128;
  std::size_t n_lists = 0;  // 0: default_n_lists(distinct training urls)
  std::size_t max_iters = 25;
  std::uint64_t kmeans_seed = 1;
  std::size_t train_sample = 100000;
  std::size_t partitions = 1;
  std::size_t brokers = 1;
  std::size_t list_capacity = InvertedIndex::kDefaultCapacity;
  std::chrono::milliseconds broker_deadline = Broker::kDefaultDeadline;
  std::chrono::milliseconds blender_deadline = Blender::kDefaultDeadline;

  /// Reads index.*, topology.partitions and search.deadline_ms.
  static ClusterOptions from_config(const Config& config);
};

/// Single zero centroid; lets an empty index accept messages and queries.
std::shared_ptr<const Codebook> placeholder_codebook(std::size_t dim);

/// Extracts every distinct ADD url once (through the store of the partition
/// owning it), samples up to train_sample features and trains the codebook.
/// An empty log yields the placeholder codebook.
std::shared_ptr<const Codebook> train_from_log(
    std::span<const UpdateMessage> log,
    std::span<const std::shared_ptr<FeatureStore>> stores,
    FeatureProvider& provider, const ClusterOptions& options,
    TrainTrace* trace = nullptr);

/// All three tiers in one process: P partitions, B brokers each owning the
/// partitions p with p % B == b, and one blender.
class LocalCluster {
 public:
  /// Trains the codebook and full-builds every partition from the log.
  static std::unique_ptr<LocalCluster> build(
      std::span<const UpdateMessage> log,
      std::shared_ptr<FeatureProvider> provider, const ClusterOptions& options,
      TrainTrace* trace = nullptr);
  /// Restores partitions from <dir>/partition-<p>.
  static std::unique_ptr<LocalCluster> load(
      const std::string& dir, std::shared_ptr<FeatureProvider> provider,
      const ClusterOptions& options);

  /// Writes <dir>/partition-<p>/ for every partition.
  void save(const std::string& dir) const;

  PartialResult query(const QueryRequest& request);
  /// Routes one message and applies it to every partition it touches.
  std::vector<std::pair<PartitionId, Ack>> apply(const UpdateMessage& msg);

  std::size_t partitions() const noexcept { return partitions_.size(); }
  IndexPartition& partition(PartitionId p) { return *partitions_.at(p); }
  const std::shared_ptr<IndexPartition>& partition_ptr(PartitionId p) const {
    return partitions_.at(p);
  }
  Blender& blender() { return *blender_; }
  const std::shared_ptr<const Codebook>& codebook() const noexcept {
    return codebook_;
  }

 private:
  LocalCluster(std::vector<std::shared_ptr<IndexPartition>> partitions,
               std::shared_ptr<const Codebook> codebook, MessageRouter router,
               std::shared_ptr<FeatureProvider> provider,
               const ClusterOptions& options);

  std::vector<std::shared_ptr<IndexPartition>> partitions_;
  std::shared_ptr<const Codebook> codebook_;
  std::mutex writer_mu_;
  MessageRouter router_;
  std::shared_ptr<Blender> blender_;
};

std::string partition_dir(const std::string& data_dir, PartitionId p);

}  // namespace jvs
