#include "jvs/core.h"

#include <cmath>
#include <queue>

#include "jvs/common.h"

namespace jvs {

namespace {

void check_finite(const std::vector<float>& v) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) {
      throw Error("feature component " + std::to_string(i) + " is not finite");
    }
  }
}

}  // namespace

FeatureVector::FeatureVector(std::vector<float> components)
    : components_(std::move(components)) {
  check_finite(components_);
}

FeatureVector::FeatureVector(std::initializer_list<float> components)
    : components_(components) {
  check_finite(components_);
}

double squared_distance_unchecked(const float* a, const float* b,
                                  std::size_t dim) noexcept {
  double acc0 = 0.0, acc1 = 0.0, acc2 = 0.0, acc3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= dim; i += 4) {
    double d0 = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    double d1 = static_cast<double>(a[i + 1]) - static_cast<double>(b[i + 1]);
    double d2 = static_cast<double>(a[i + 2]) - static_cast<double>(b[i + 2]);
    double d3 = static_cast<double>(a[i + 3]) - static_cast<double>(b[i + 3]);
    acc0 += d0 * d0;
    acc1 += d1 * d1;
    acc2 += d2 * d2;
    acc3 += d3 * d3;
  }
  double tail = 0.0;
  for (; i < dim; ++i) {
    double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    tail += d * d;
  }
  return ((acc0 + acc1) + (acc2 + acc3)) + tail;
}

double squared_distance(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) {
    throw Error("dimension mismatch: " + std::to_string(a.size()) + " vs " +
                std::to_string(b.size()));
  }
  return squared_distance_unchecked(a.data(), b.data(), a.size());
}

double euclidean_distance(std::span<const float> a, std::span<const float> b) {
  return std::sqrt(squared_distance(a, b));
}

std::vector<SearchHit> merge_top_k(
    std::span<const std::vector<SearchHit>> partials, std::size_t k) {
  struct Cursor {
    std::size_t source;
    std::size_t pos;
  };
  auto greater = [&](const Cursor& x, const Cursor& y) {
    return hit_less(partials[y.source][y.pos], partials[x.source][x.pos]);
  };
  std::priority_queue<Cursor, std::vector<Cursor>, decltype(greater)> heap(
      greater);
  for (std::size_t s = 0; s < partials.size(); ++s) {
    if (!partials[s].empty()) heap.push({s, 0});
  }

  std::vector<SearchHit> out;
  while (out.size() < k && !heap.empty()) {
    Cursor c = heap.top();
    heap.pop();
    out.push_back(partials[c.source][c.pos]);
    if (c.pos + 1 < partials[c.source].size()) heap.push({c.source, c.pos + 1});
  }
  return out;
}

}  // namespace jvs
