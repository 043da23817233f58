#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "jvs/quantizer.h"
#include "support.h"

namespace jvs {
namespace {

struct Blobs {
  std::vector<FeatureVector> points;
  std::vector<std::vector<double>> means;  // empirical mean of each blob
};

Blobs make_blobs(std::size_t per_blob, std::uint64_t seed) {
  const std::vector<std::vector<float>> centers = {
      {10, 10, 0}, {-10, 10, 0}, {10, -10, 5}, {-10, -10, -5}};
  SplitMix64 rng(seed);
  Blobs b;
  for (const auto& c : centers) {
    std::vector<double> sum(c.size(), 0.0);
    for (std::size_t i = 0; i < per_blob; ++i) {
      std::vector<float> v(c.size());
      for (std::size_t d = 0; d < c.size(); ++d) {
        v[d] = static_cast<float>(c[d] + 0.1 * rng.gaussian());
        sum[d] += v[d];
      }
      b.points.emplace_back(std::move(v));
    }
    for (auto& s : sum) s /= static_cast<double>(per_blob);
    b.means.push_back(sum);
  }
  return b;
}

TEST(Train, RecoversWellSeparatedBlobMeans) {
  Blobs b = make_blobs(200, 1);
  TrainTrace trace;
  Codebook cb = train(b.points, {4, 42, 50}, &trace);
  ASSERT_EQ(cb.n_lists(), 4u);
  EXPECT_TRUE(trace.converged);
  std::set<ListId> matched;
  for (const auto& mean : b.means) {
    std::vector<float> m(mean.begin(), mean.end());
    ListId l = cb.assign(m);
    matched.insert(l);
    for (std::size_t d = 0; d < m.size(); ++d) {
      EXPECT_NEAR(cb.centroid(l)[d], mean[d], 1e-4);
    }
  }
  EXPECT_EQ(matched.size(), 4u);
}

TEST(Train, SseIsNonIncreasing) {
  auto pts = test::random_vectors(2000, 8, 3);
  TrainTrace trace;
  train(pts, {30, 5, 40}, &trace);
  ASSERT_FALSE(trace.sse.empty());
  for (std::size_t i = 1; i < trace.sse.size(); ++i) {
    EXPECT_LE(trace.sse[i], trace.sse[i - 1] * (1 + 1e-12)) << i;
  }
}

TEST(Train, BitDeterministicForFixedSeed) {
  auto pts = test::random_vectors(1500, 16, 4);
  Codebook a = train(pts, {20, 9, 25});
  Codebook b = train(pts, {20, 9, 25});
  EXPECT_EQ(a.data(), b.data());
  Codebook c = train(pts, {20, 10, 25});
  EXPECT_NE(a.data(), c.data());
}

TEST(Train, AsManyListsAsDistinctPointsWithDuplicates) {
  std::vector<FeatureVector> pts;
  for (int rep = 0; rep < 5; ++rep) {
    pts.push_back(FeatureVector{0, 0});
    pts.push_back(FeatureVector{1, 0});
    pts.push_back(FeatureVector{0, 1});
  }
  TrainTrace trace;
  Codebook cb = train(pts, {3, 1, 10}, &trace);
  std::set<std::vector<float>> cents;
  for (ListId l = 0; l < 3; ++l) {
    cents.insert(std::vector<float>(cb.centroid(l).begin(), cb.centroid(l).end()));
  }
  EXPECT_EQ(cents.size(), 3u);
  EXPECT_EQ(trace.sse.back(), 0.0);
}

TEST(Train, RejectsBadInput) {
  std::vector<FeatureVector> none;
  EXPECT_THROW(train(none, {1, 0, 5}), Error);
  std::vector<FeatureVector> two = {FeatureVector{1, 2}, FeatureVector{1, 2}};
  EXPECT_THROW(train(two, {2, 0, 5}), Error);  // one distinct point
  std::vector<FeatureVector> mixed = {FeatureVector{1, 2}, FeatureVector{1, 2, 3}};
  EXPECT_THROW(train(mixed, {1, 0, 5}), Error);
  auto pts = test::random_vectors(10, 2, 1);
  EXPECT_THROW(train(pts, {0, 0, 5}), Error);
}

TEST(Codebook, AssignMatchesBruteForceArgmin) {
  auto pts = test::random_vectors(3000, 12, 8);
  Codebook cb = train(pts, {40, 2, 20});
  auto queries = test::random_vectors(300, 12, 99);
  for (const auto& q : queries) {
    ListId best = 0;
    long double best_d = test::naive_sq(q.view(), cb.centroid(0));
    for (ListId l = 1; l < cb.n_lists(); ++l) {
      long double d = test::naive_sq(q.view(), cb.centroid(l));
      if (d < best_d) {
        best_d = d;
        best = l;
      }
    }
    ASSERT_EQ(cb.assign(q), best);
  }
}

TEST(Codebook, TiesGoToLowestIndex) {
  Codebook cb(1, {1.0f, -1.0f, 1.0f});
  EXPECT_EQ(cb.assign(std::vector<float>{0.0f}), 0u);
  EXPECT_EQ(cb.assign(std::vector<float>{5.0f}), 0u);
  auto lists = cb.nearest_lists(std::vector<float>{0.0f}, 3);
  EXPECT_EQ(lists, (std::vector<ListId>{0, 1, 2}));
}

TEST(Codebook, NearestListsMatchFullSort) {
  auto pts = test::random_vectors(2000, 6, 12);
  Codebook cb = train(pts, {25, 4, 20});
  for (const auto& q : test::random_vectors(100, 6, 13)) {
    std::vector<std::pair<double, ListId>> all;
    for (ListId l = 0; l < cb.n_lists(); ++l) {
      all.emplace_back(squared_distance(q.view(), cb.centroid(l)), l);
    }
    std::sort(all.begin(), all.end());
    for (std::size_t nprobe : {1u, 3u, 25u}) {
      auto got = cb.nearest_lists(q.view(), nprobe);
      ASSERT_EQ(got.size(), nprobe);
      for (std::size_t i = 0; i < nprobe; ++i) ASSERT_EQ(got[i], all[i].second);
    }
  }
}

TEST(Codebook, NprobeOutOfRange) {
  Codebook cb(2, {0, 0, 1, 1});
  EXPECT_THROW(cb.nearest_lists(std::vector<float>{0, 0}, 0), Error);
  EXPECT_THROW(cb.nearest_lists(std::vector<float>{0, 0}, 3), Error);
  EXPECT_THROW(cb.assign(std::vector<float>{0, 0, 0}), Error);
}

TEST(Codebook, SnapshotRoundTrip) {
  auto pts = test::random_vectors(500, 5, 2);
  Codebook cb = train(pts, {7, 1, 10});
  std::string blob = cb.serialize();
  EXPECT_EQ(blob.substr(0, 4), "JVSC");
  Codebook back = Codebook::deserialize(blob);
  EXPECT_EQ(back.dim(), 5u);
  EXPECT_EQ(back.n_lists(), 7u);
  EXPECT_EQ(back.data(), cb.data());

  std::string dir = test::temp_dir("codebook");
  cb.save(dir + "/c.jvsc");
  EXPECT_EQ(Codebook::load(dir + "/c.jvsc").data(), cb.data());
}

TEST(Codebook, CorruptSnapshotsFail) {
  Codebook cb(2, {0, 0, 1, 1});
  std::string blob = cb.serialize();
  EXPECT_THROW(Codebook::deserialize(blob.substr(0, blob.size() - 1)), FormatError);
  EXPECT_THROW(Codebook::deserialize(blob + "x"), FormatError);
  std::string bad = blob;
  bad[0] = 'X';
  EXPECT_THROW(Codebook::deserialize(bad), FormatError);
}

TEST(Sampling, DistinctAscendingDeterministic) {
  auto a = training_sample(1000, 100, 5);
  ASSERT_EQ(a.size(), 100u);
  EXPECT_TRUE(std::is_sorted(a.begin(), a.end()));
  EXPECT_EQ(std::set<std::size_t>(a.begin(), a.end()).size(), 100u);
  EXPECT_LT(a.back(), 1000u);
  EXPECT_EQ(a, training_sample(1000, 100, 5));
  EXPECT_EQ(training_sample(10, 100, 5).size(), 10u);
}

TEST(Sampling, DefaultListCount) {
  EXPECT_EQ(default_n_lists(0), 1u);
  EXPECT_EQ(default_n_lists(10000), 100u);
  EXPECT_EQ(default_n_lists(100000), 316u);
}

}  // namespace
}  // namespace jvs
