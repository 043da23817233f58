#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "jvs/core.h"

namespace jvs {

/// N k-means centroids defining the inverted lists. Immutable once built.
class Codebook {
 public:
  Codebook() = default;
  /// `centroids` holds n_lists * dim values, row-major.
  Codebook(std::size_t dim, std::vector<float> centroids,
           std::uint64_t seed = 0, double sse = 0.0);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t n_lists() const noexcept { return n_lists_; }
  bool trained() const noexcept { return n_lists_ > 0; }
  std::uint64_t seed() const noexcept { return seed_; }
  double sse() const noexcept { return sse_; }

  std::span<const float> centroid(ListId id) const {
    return {centroids_.data() + static_cast<std::size_t>(id) * dim_, dim_};
  }
  const std::vector<float>& data() const noexcept { return centroids_; }

  /// Nearest centroid; ties go to the lowest index.
  ListId assign(std::span<const float> feature) const;
  ListId assign(const FeatureVector& f) const { return assign(f.view()); }

  /// The `nprobe` nearest centroids, ascending by (distance, index).
  std::vector<ListId> nearest_lists(std::span<const float> feature,
                                    std::size_t nprobe) const;

  /// "JVSC" snapshot: magic, version, D and N (u32 BE), then N*D f32 LE.
  std::string serialize() const;
  static Codebook deserialize(std::string_view data);
  void save(const std::string& path) const;
  static Codebook load(const std::string& path);

 private:
  void check_dim(std::size_t d) const;

  std::size_t dim_ = 0;
  std::size_t n_lists_ = 0;
  std::vector<float> centroids_;
  std::uint64_t seed_ = 0;
  double sse_ = 0.0;
};

struct TrainOptions {
  std::size_t n_lists = 0;
  std::uint64_t seed = 0;
  std::size_t max_iters = 25;
};

/// Per-iteration record of a training run, for inspection and tests.
struct TrainTrace {
  std::vector<double> sse;  // after each assignment step
  std::size_t iterations = 0;
  bool converged = false;
  std::size_t repaired_clusters = 0;
};

/// Lloyd's algorithm with k-means++ seeding. Bit-deterministic for fixed
/// inputs. Throws when samples are empty, dimensions disagree, or n_lists
/// exceeds the number of distinct samples.
Codebook train(std::span<const FeatureVector> samples,
               const TrainOptions& options, TrainTrace* trace = nullptr);

/// max(1, round(sqrt(n))).
std::size_t default_n_lists(std::size_t dataset_size);

/// min(cap, n) distinct indices in [0, n), ascending, chosen uniformly by seed.
std::vector<std::size_t> training_sample(std::size_t n, std::size_t cap,
                                         std::uint64_t seed);

}  // namespace jvs
