#include "jvs/quantizer.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "jvs/common.h"

namespace jvs {

namespace {

constexpr std::uint8_t kCodebookVersion = 1;

std::size_t count_distinct(std::span<const FeatureVector> samples) {
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  auto less = [&](std::size_t a, std::size_t b) {
    return samples[a].components() < samples[b].components();
  };
  std::sort(order.begin(), order.end(), less);
  std::size_t distinct = order.empty() ? 0 : 1;
  for (std::size_t i = 1; i < order.size(); ++i) {
    if (samples[order[i - 1]] != samples[order[i]]) ++distinct;
  }
  return distinct;
}

struct Nearest {
  ListId id;
  double d2;
};

Nearest nearest_centroid(const float* x, const std::vector<float>& centroids,
                         std::size_t n_lists, std::size_t dim) {
  Nearest best{0, std::numeric_limits<double>::infinity()};
  for (std::size_t c = 0; c < n_lists; ++c) {
    double d2 = squared_distance_unchecked(x, centroids.data() + c * dim, dim);
    if (d2 < best.d2) best = {static_cast<ListId>(c), d2};
  }
  return best;
}

// k-means++: each further centre is drawn with probability proportional to
// its squared distance from the nearest centre chosen so far.
std::vector<float> seed_centroids(const std::vector<float>& points,
                                  std::size_t n, std::size_t dim,
                                  std::size_t k, SplitMix64& rng) {
  std::vector<float> centroids(k * dim);
  std::size_t first = rng.below(n);
  std::copy_n(points.data() + first * dim, dim, centroids.data());

  std::vector<double> min_d2(n);
  for (std::size_t i = 0; i < n; ++i) {
    min_d2[i] = squared_distance_unchecked(points.data() + i * dim,
                                           centroids.data(), dim);
  }
  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (double d : min_d2) total += d;
    double target = rng.uniform() * total;
    std::size_t pick = n;
    std::size_t last_positive = n;
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (min_d2[i] <= 0.0) continue;
      last_positive = i;
      acc += min_d2[i];
      if (acc > target) {
        pick = i;
        break;
      }
    }
    if (pick == n) pick = last_positive;  // rounding at the upper end
    float* dst = centroids.data() + c * dim;
    std::copy_n(points.data() + pick * dim, dim, dst);
    for (std::size_t i = 0; i < n; ++i) {
      double d2 = squared_distance_unchecked(points.data() + i * dim, dst, dim);
      if (d2 < min_d2[i]) min_d2[i] = d2;
    }
  }
  return centroids;
}

}  // namespace

Codebook::Codebook(std::size_t dim, std::vector<float> centroids,
                   std::uint64_t seed, double sse)
    : dim_(dim), centroids_(std::move(centroids)), seed_(seed), sse_(sse) {
  if (dim_ == 0) {
    if (!centroids_.empty()) throw Error("codebook with dim 0");
    return;
  }
  if (centroids_.size() % dim_ != 0) {
    throw Error("codebook data size is not a multiple of dim");
  }
  for (float v : centroids_) {
    if (!std::isfinite(v)) throw Error("codebook centroid is not finite");
  }
  n_lists_ = centroids_.size() / dim_;
}

void Codebook::check_dim(std::size_t d) const {
  if (!trained()) throw Error("codebook is not trained");
  if (d != dim_) {
    throw Error("dimension mismatch: codebook " + std::to_string(dim_) +
                ", feature " + std::to_string(d));
  }
}

ListId Codebook::assign(std::span<const float> feature) const {
  check_dim(feature.size());
  return nearest_centroid(feature.data(), centroids_, n_lists_, dim_).id;
}

std::vector<ListId> Codebook::nearest_lists(std::span<const float> feature,
                                            std::size_t nprobe) const {
  check_dim(feature.size());
  if (nprobe < 1 || nprobe > n_lists_) {
    throw Error("nprobe " + std::to_string(nprobe) + " outside [1, " +
                std::to_string(n_lists_) + "]");
  }
  std::vector<double> d2(n_lists_);
  for (std::size_t c = 0; c < n_lists_; ++c) {
    d2[c] = squared_distance_unchecked(feature.data(),
                                       centroids_.data() + c * dim_, dim_);
  }
  std::vector<ListId> ids(n_lists_);
  std::iota(ids.begin(), ids.end(), ListId{0});
  std::partial_sort(ids.begin(), ids.begin() + static_cast<long>(nprobe),
                    ids.end(), [&](ListId a, ListId b) {
                      if (d2[a] != d2[b]) return d2[a] < d2[b];
                      return a < b;
                    });
  ids.resize(nprobe);
  return ids;
}

std::string Codebook::serialize() const {
  std::string out = "JVSC";
  out.push_back(static_cast<char>(kCodebookVersion));
  bytes::put_u32_be(out, static_cast<std::uint32_t>(dim_));
  bytes::put_u32_be(out, static_cast<std::uint32_t>(n_lists_));
  for (float v : centroids_) bytes::put_f32_le(out, v);
  return out;
}

Codebook Codebook::deserialize(std::string_view data) {
  bytes::Reader in(data);
  in.expect_magic("JVSC");
  std::size_t at = in.offset();
  if (in.u8() != kCodebookVersion) {
    throw FormatError("unsupported codebook version", at);
  }
  std::uint32_t dim = in.u32_be();
  std::uint32_t n = in.u32_be();
  if (dim == 0 && n != 0) throw FormatError("codebook with dim 0", in.offset());
  std::vector<float> centroids;
  centroids.reserve(std::min<std::size_t>(std::size_t{dim} * n, data.size()));
  for (std::size_t i = 0; i < std::size_t{dim} * n; ++i) {
    centroids.push_back(in.f32_le());
  }
  in.expect_end();
  return Codebook(dim, std::move(centroids));
}

void Codebook::save(const std::string& path) const {
  write_file_atomic(path, serialize());
}

Codebook Codebook::load(const std::string& path) {
  return deserialize(read_file(path));
}

Codebook train(std::span<const FeatureVector> samples,
               const TrainOptions& options, TrainTrace* trace) {
  if (samples.empty()) throw Error("k-means: no training samples");
  if (options.n_lists == 0) throw Error("k-means: n_lists must be positive");
  if (options.max_iters == 0) throw Error("k-means: max_iters must be positive");
  const std::size_t dim = samples.front().dim();
  if (dim == 0) throw Error("k-means: zero-dimensional samples");
  for (const auto& s : samples) {
    if (s.dim() != dim) throw Error("k-means: samples differ in dimension");
  }
  const std::size_t distinct = count_distinct(samples);
  if (options.n_lists > distinct) {
    throw Error("k-means: n_lists " + std::to_string(options.n_lists) +
                " exceeds " + std::to_string(distinct) + " distinct samples");
  }

  const std::size_t n = samples.size();
  const std::size_t k = options.n_lists;
  std::vector<float> points(n * dim);
  for (std::size_t i = 0; i < n; ++i) {
    std::copy(samples[i].components().begin(), samples[i].components().end(),
              points.begin() + static_cast<long>(i * dim));
  }

  SplitMix64 rng(options.seed);
  std::vector<float> centroids = seed_centroids(points, n, dim, k, rng);

  TrainTrace local;
  TrainTrace& t = trace != nullptr ? *trace : local;
  t = TrainTrace{};

  constexpr ListId kUnassigned = std::numeric_limits<ListId>::max();
  std::vector<ListId> assignment(n, kUnassigned);
  std::vector<double> point_d2(n);
  std::vector<std::size_t> counts(k);
  std::vector<double> sums(k * dim);

  for (std::size_t iter = 0; iter < options.max_iters; ++iter) {
    std::size_t changes = 0;
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      Nearest best = nearest_centroid(points.data() + i * dim, centroids, k, dim);
      if (best.id != assignment[i]) ++changes;
      assignment[i] = best.id;
      point_d2[i] = best.d2;
      ++counts[best.id];
    }

    // Empty clusters take over the point currently farthest from its
    // centroid, drawn only from clusters that can spare one.
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] != 0) continue;
      std::size_t far = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (counts[assignment[i]] < 2) continue;
        if (far == n || point_d2[i] > point_d2[far]) far = i;
      }
      --counts[assignment[far]];
      std::copy_n(points.data() + far * dim, dim, centroids.data() + c * dim);
      assignment[far] = static_cast<ListId>(c);
      point_d2[far] = 0.0;
      counts[c] = 1;
      ++changes;
      ++t.repaired_clusters;
    }

    double sse = 0.0;
    for (double d : point_d2) sse += d;
    t.sse.push_back(sse);
    t.iterations = iter + 1;
    if (changes == 0) {
      t.converged = true;
      break;
    }

    std::fill(sums.begin(), sums.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      double* dst = sums.data() + assignment[i] * dim;
      const float* src = points.data() + i * dim;
      for (std::size_t d = 0; d < dim; ++d) dst[d] += src[d];
    }
    for (std::size_t c = 0; c < k; ++c) {
      for (std::size_t d = 0; d < dim; ++d) {
        centroids[c * dim + d] = static_cast<float>(
            sums[c * dim + d] / static_cast<double>(counts[c]));
      }
    }
  }

  double sse = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sse += nearest_centroid(points.data() + i * dim, centroids, k, dim).d2;
  }
  return Codebook(dim, std::move(centroids), options.seed, sse);
}

std::size_t default_n_lists(std::size_t dataset_size) {
  auto n = static_cast<std::size_t>(
      std::llround(std::sqrt(static_cast<double>(dataset_size))));
  return std::max<std::size_t>(1, n);
}

std::vector<std::size_t> training_sample(std::size_t n, std::size_t cap,
                                         std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  if (cap >= n) return idx;
  SplitMix64 rng(seed);
  for (std::size_t i = 0; i < cap; ++i) {
    std::size_t j = i + rng.below(n - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(cap);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace jvs
