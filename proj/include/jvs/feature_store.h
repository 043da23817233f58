#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "jvs/core.h"

namespace jvs {

/// Source of image features. Implementations may throw to signal that an
/// image could not be processed.
class FeatureProvider {
 public:
  virtual ~FeatureProvider() = default;
  virtual std::size_t dim() const = 0;
  virtual FeatureVector extract(std::string_view url) = 0;
};

/// Deterministic stand-in for a CNN: SplitMix64 seeded with
/// hash64(url) ^ seed, `dim` draws uniform in [-1, 1), L2-normalized.
FeatureVector synthetic_extract(std::string_view url, std::size_t dim,
                                std::uint64_t seed);

class SyntheticProvider : public FeatureProvider {
 public:
  SyntheticProvider(std::size_t dim, std::uint64_t seed)
      : dim_(dim), seed_(seed) {}
  std::size_t dim() const override { return dim_; }
  FeatureVector extract(std::string_view url) override {
    invocations_.fetch_add(1, std::memory_order_relaxed);
    return synthetic_extract(url, dim_, seed_);
  }
  std::size_t invocations() const noexcept {
    return invocations_.load(std::memory_order_relaxed);
  }

 private:
  std::size_t dim_;
  std::uint64_t seed_;
  std::atomic<std::size_t> invocations_{0};
};

struct FeatureRecord {
  std::string url;
  FeatureVector feature;
  std::int64_t extracted_at = 0;  // seconds

  bool operator==(const FeatureRecord&) const = default;
};

struct ExtractionCounter {
  std::uint64_t total_extractions = 0;
  std::uint64_t cache_hits = 0;
};

/// url -> feature map that lets the indexer reuse earlier extractions.
class FeatureStore {
 public:
  using Clock = std::function<std::int64_t()>;

  struct Lookup {
    FeatureVector feature;
    bool cache_hit;
  };

  explicit FeatureStore(std::size_t dim, Clock clock = {});
  FeatureStore(const FeatureStore&) = delete;
  FeatureStore& operator=(const FeatureStore&) = delete;

  /// Returns the stored feature, or invokes the provider once and stores its
  /// result. Provider errors propagate and leave the store unchanged.
  Lookup get_or_extract(std::string_view url, FeatureProvider& provider);

  std::optional<FeatureVector> find(std::string_view url) const;
  /// Inserts or replaces a record as-is.
  void put(FeatureRecord record);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const;
  ExtractionCounter counters() const noexcept;
  /// All records, ordered by url.
  std::vector<FeatureRecord> records() const;

  /// "JVSK" file: D, record count, then url / timestamp / components.
  std::string serialize() const;
  static std::unique_ptr<FeatureStore> deserialize(std::string_view data);
  void persist(const std::string& path) const;
  static std::unique_ptr<FeatureStore> load(const std::string& path);

 private:
  struct Entry {
    FeatureVector feature;
    std::int64_t extracted_at;
  };
  struct StringHash {
    using is_transparent = void;
    std::size_t operator()(std::string_view s) const noexcept {
      return std::hash<std::string_view>{}(s);
    }
  };

  std::size_t dim_;
  Clock clock_;
  mutable std::shared_mutex mu_;
  std::unordered_map<std::string, Entry, StringHash, std::equal_to<>> records_;
  std::atomic<std::uint64_t> extractions_{0};
  std::atomic<std::uint64_t> hits_{0};
};

}  // namespace jvs
