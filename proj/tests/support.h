#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include <unistd.h>

#include "jvs/common.h"
#include "jvs/core.h"

namespace jvs::test {

inline std::vector<FeatureVector> random_vectors(std::size_t n, std::size_t dim,
                                                 std::uint64_t seed) {
  SplitMix64 rng(seed);
  std::vector<FeatureVector> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<float> v(dim);
    for (auto& x : v) x = static_cast<float>(rng.uniform() * 2.0 - 1.0);
    out.emplace_back(std::move(v));
  }
  return out;
}

/// Squared distance by the textbook loop, in long double.
inline long double naive_sq(std::span<const float> a, std::span<const float> b) {
  long double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    long double d = static_cast<long double>(a[i]) - b[i];
    s += d * d;
  }
  return s;
}

/// Indices of the k nearest by full sort, ties to the lower index.
inline std::vector<std::size_t> brute_force_knn(const std::vector<FeatureVector>& data,
                                                std::span<const float> q, std::size_t k,
                                                const std::vector<bool>* live = nullptr) {
  std::vector<std::pair<double, std::size_t>> all;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (live != nullptr && !(*live)[i]) continue;
    all.emplace_back(euclidean_distance(data[i].view(), q), i);
  }
  std::sort(all.begin(), all.end());
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < std::min(k, all.size()); ++i) out.push_back(all[i].second);
  return out;
}

/// Fresh empty directory under the system temp dir.
inline std::string temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() /
           ("jvs-test-" + name + "-" + std::to_string(::getpid()));
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p.string();
}

}  // namespace jvs::test

#include "jvs/message.h"

namespace jvs::test {

/// Random product event log: new products, re-adds, attribute updates and
/// removals, plus a sprinkling of messages about unknown products.
inline std::vector<UpdateMessage> random_log(std::size_t n, std::uint64_t seed,
                                             const std::string& url_prefix = "http://img/") {
  SplitMix64 rng(seed);
  std::vector<std::uint64_t> known;
  std::uint64_t next_pid = 1;
  std::vector<UpdateMessage> out;
  static constexpr AttributeField kFields[] = {AttributeField::kSales, AttributeField::kPraise,
                                               AttributeField::kPrice, AttributeField::kAvailable};
  while (out.size() < n) {
    std::uint64_t roll = rng.below(100);
    if (known.empty() || roll < 45) {
      std::uint64_t pid = next_pid++;
      std::vector<std::string> urls;
      std::size_t images = 1 + rng.below(3);
      for (std::size_t i = 0; i < images; ++i) {
        urls.push_back(url_prefix + std::to_string(pid) + "/" + std::to_string(i) + ".jpg");
      }
      out.push_back(UpdateMessage::add(pid, rng.below(1000), rng.below(500),
                                       1 + rng.below(10000), std::move(urls)));
      known.push_back(pid);
    } else if (roll < 55) {
      std::uint64_t pid = known[rng.below(known.size())];
      out.push_back(UpdateMessage::add(pid, rng.below(1000), rng.below(500), 1 + rng.below(10000),
                                       {url_prefix + std::to_string(pid) + "/0.jpg"}));
    } else if (roll < 80) {
      std::uint64_t pid = known[rng.below(known.size())];
      AttributeField f = kFields[rng.below(4)];
      std::uint64_t v = f == AttributeField::kAvailable ? rng.below(2) : rng.below(100000);
      out.push_back(UpdateMessage::update(pid, {{f, v}}));
    } else if (roll < 97) {
      out.push_back(UpdateMessage::remove(known[rng.below(known.size())]));
    } else {
      out.push_back(UpdateMessage::remove(1000000 + rng.below(1000)));
    }
  }
  return out;
}

}  // namespace jvs::test
