#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace jvs {

/// Sequential per-partition image number; the n-th appended image gets n-1.
using ImageIndex = std::uint64_t;
using PartitionId = std::uint32_t;
using ListId = std::uint32_t;

constexpr std::size_t kDefaultDim = 128;

/// Fixed-dimension feature of one image. Components are always finite.
class FeatureVector {
 public:
  FeatureVector() = default;
  explicit FeatureVector(std::vector<float> components);
  FeatureVector(std::initializer_list<float> components);

  std::size_t dim() const noexcept { return components_.size(); }
  std::span<const float> view() const noexcept { return components_; }
  const std::vector<float>& components() const noexcept { return components_; }
  float operator[](std::size_t i) const { return components_[i]; }

  bool operator==(const FeatureVector&) const = default;

 private:
  std::vector<float> components_;
};

struct ProductAttributes {
  std::uint64_t product_id = 0;
  std::uint64_t sales = 0;
  std::uint64_t praise = 0;
  std::uint64_t price = 0;  // minor currency units
  std::string url;

  bool operator==(const ProductAttributes&) const = default;
};

struct SearchHit {
  ImageIndex image_index = 0;
  PartitionId partition_id = 0;
  double distance = 0.0;
  double score = 0.0;
  ProductAttributes attributes;
};

/// Global total order on hits: (distance, partition_id, image_index).
inline bool hit_less(const SearchHit& a, const SearchHit& b) noexcept {
  if (a.distance != b.distance) return a.distance < b.distance;
  if (a.partition_id != b.partition_id) return a.partition_id < b.partition_id;
  return a.image_index < b.image_index;
}

/// Squared L2 distance accumulated in double. Four interleaved partial sums
/// are combined in a fixed order, so the result does not depend on how the
/// compiler vectorizes the loop. Throws on dimension mismatch.
double squared_distance(std::span<const float> a, std::span<const float> b);

/// Same as squared_distance without the dimension check; callers guarantee
/// a.size() == b.size().
double squared_distance_unchecked(const float* a, const float* b,
                                  std::size_t dim) noexcept;

double euclidean_distance(std::span<const float> a, std::span<const float> b);
inline double euclidean_distance(const FeatureVector& a,
                                 const FeatureVector& b) {
  return euclidean_distance(a.view(), b.view());
}

/// Merges per-source lists (each sorted by hit_less) into the global k best.
std::vector<SearchHit> merge_top_k(
    std::span<const std::vector<SearchHit>> partials, std::size_t k);

}  // namespace jvs
