#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "jvs/core.h"
#include "jvs/feature_store.h"
#include "jvs/forward_index.h"
#include "jvs/inverted_index.h"
#include "jvs/message.h"
#include "jvs/quantizer.h"
#include "jvs/vector_store.h"

namespace jvs {

/// product -> images and url -> image. Touched only by the indexing
/// activity (or at quiescence).
class ProductRegistry {
 public:
  struct Product {
    std::vector<ImageIndex> images;
    bool available = true;
  };

  const Product* find(std::uint64_t product_id) const;
  Product* find(std::uint64_t product_id);
  Product& insert(std::uint64_t product_id);
  std::optional<ImageIndex> image_of(const std::string& url) const;
  void register_url(const std::string& url, ImageIndex image);

  std::size_t products() const noexcept { return products_.size(); }
  const std::unordered_map<std::uint64_t, Product>& all() const noexcept {
    return products_;
  }
  std::size_t urls() const noexcept { return urls_.size(); }

 private:
  std::unordered_map<std::uint64_t, Product> products_;
  std::unordered_map<std::string, ImageIndex> urls_;
};

/// Snapshot of the indexer's per-kind accounting. Image counts are per
/// image, message counts per message.
struct IndexerCounters {
  std::uint64_t messages = 0;
  std::uint64_t attribute_updates = 0;   // images touched by updates
  std::uint64_t image_additions = 0;     // images (re)listed by ADD
  std::uint64_t reused_additions = 0;    // of which restored without extraction
  std::uint64_t image_deletions = 0;     // images delisted by REMOVE
  std::uint64_t dropped_messages = 0;    // unknown product
  std::uint64_t malformed_messages = 0;
  std::uint64_t failed_images = 0;       // extraction failure or duplicate url
};

enum class Ack { kApplied, kDropped, kMalformed };

/// One searcher's index partition: forward index with validity bitmap,
/// inverted lists, the vector working set, and the product registry. One
/// indexing activity applies messages; any number of queries read
/// concurrently.
class IndexPartition {
 public:
  struct Options {
    PartitionId partition_id = 0;
    std::size_t list_capacity = InvertedIndex::kDefaultCapacity;
    ForwardIndex::Options forward;
  };

  IndexPartition(std::shared_ptr<const Codebook> codebook,
                 std::shared_ptr<FeatureStore> store,
                 std::shared_ptr<FeatureProvider> provider,
                 const Options& options);
  IndexPartition(const IndexPartition&) = delete;
  IndexPartition& operator=(const IndexPartition&) = delete;

  // Indexing activity only.
  Ack handle_message(const UpdateMessage& msg);
  Ack handle_update(std::uint64_t product_id,
                    std::span<const AttributeChange> changes);
  Ack handle_insert(std::uint64_t product_id, const ProductAttributes& attrs,
                    std::span<const std::string> urls);
  Ack handle_delete(std::uint64_t product_id);

  /// Rewrites the attribute buffer to hold only current urls. Quiescent only.
  void compact();

  const ForwardIndex& forward() const noexcept { return *forward_; }
  const InvertedIndex& inverted() const noexcept { return *inverted_; }
  const VectorStore& vectors() const noexcept { return *vectors_; }
  const Codebook& codebook() const noexcept { return *codebook_; }
  const std::shared_ptr<const Codebook>& codebook_ptr() const noexcept {
    return codebook_;
  }
  const ProductRegistry& registry() const noexcept { return registry_; }
  FeatureStore& store() const noexcept { return *store_; }
  const std::shared_ptr<FeatureProvider>& provider() const noexcept {
    return provider_;
  }
  PartitionId partition_id() const noexcept { return options_.partition_id; }
  IndexerCounters counters() const noexcept;

  /// Writes codebook.jvsc, forward.jvsf, inverted.jvsi and features.jvsk
  /// into `dir`.
  void save(const std::string& dir) const;
  /// Restores a saved partition; the registry is rebuilt from the forward
  /// index and vectors are reloaded from the feature store.
  static std::unique_ptr<IndexPartition> load(
      const std::string& dir, std::shared_ptr<FeatureProvider> provider,
      const Options& options);

 private:
  struct AtomicCounters {
    std::atomic<std::uint64_t> messages{0};
    std::atomic<std::uint64_t> attribute_updates{0};
    std::atomic<std::uint64_t> image_additions{0};
    std::atomic<std::uint64_t> reused_additions{0};
    std::atomic<std::uint64_t> image_deletions{0};
    std::atomic<std::uint64_t> dropped_messages{0};
    std::atomic<std::uint64_t> malformed_messages{0};
    std::atomic<std::uint64_t> failed_images{0};
  };
  static void bump(std::atomic<std::uint64_t>& c, std::uint64_t by = 1) {
    c.fetch_add(by, std::memory_order_relaxed);
  }
  void set_product_validity(ProductRegistry::Product& p, bool valid);

  std::shared_ptr<const Codebook> codebook_;
  std::shared_ptr<FeatureStore> store_;
  std::shared_ptr<FeatureProvider> provider_;
  Options options_;
  std::unique_ptr<ForwardIndex> forward_;
  std::unique_ptr<InvertedIndex> inverted_;
  std::unique_ptr<VectorStore> vectors_;
  ProductRegistry registry_;
  AtomicCounters counters_;
};

/// Builds a partition from a message log by running every message through
/// the real-time handlers in order, then compacting.
std::unique_ptr<IndexPartition> full_build(
    std::span<const UpdateMessage> log, std::shared_ptr<FeatureStore> store,
    std::shared_ptr<FeatureProvider> provider,
    std::shared_ptr<const Codebook> codebook,
    const IndexPartition::Options& options = {});

struct ReplayReport {
  std::size_t applied = 0;
  std::vector<double> latency_ms;  // receipt -> applied, per message
};

using AckCallback =
    std::function<void(const UpdateMessage&, Ack, std::size_t seq, double latency_ms)>;

/// Drains `source` into the partition one message at a time.
ReplayReport replay(IndexPartition& partition, MessageSource& source,
                    const AckCallback& on_ack = {});

}  // namespace jvs
