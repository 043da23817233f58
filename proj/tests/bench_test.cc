#include <gtest/gtest.h>

#include <mutex>
#include <set>

#include "jvs/bench.h"
#include "support.h"

namespace jvs {
namespace {

TEST(QuerySet, PerturbsIndexedVectorsDeterministically) {
  auto base = test::random_vectors(50, 8, 1);
  auto a = make_query_set(base, 200, 0.05, 7);
  auto b = make_query_set(base, 200, 0.05, 7);
  ASSERT_EQ(a.size(), 200u);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, make_query_set(base, 200, 0.05, 8));
  // Each query lies near some base vector; noise std is 0.05 per component.
  for (const auto& q : a) {
    double best = 1e9;
    for (const auto& v : base) best = std::min(best, euclidean_distance(q, v));
    EXPECT_LT(best, 0.05 * std::sqrt(8.0) * 4);
  }
  auto exact = make_query_set(base, 10, 0.0, 3);
  for (const auto& q : exact) {
    EXPECT_NE(std::find(base.begin(), base.end(), q), base.end());
  }
  EXPECT_THROW(make_query_set({}, 1, 0.1, 1), Error);
}

TEST(UpdateStream, MixFollowsDailyProportions) {
  UpdateStreamGenerator gen(5, 1, "gen://");
  for (std::uint64_t p = 1; p <= 2000; ++p) gen.track(UpdateMessage::add(p, 0, 0, 1, {"t" + std::to_string(p)}));
  std::size_t updates = 0, adds = 0, removes = 0, readds = 0;
  std::set<std::uint64_t> removed;
  const std::size_t n = 50000;
  for (std::size_t i = 0; i < n; ++i) {
    UpdateMessage m = gen.next();
    switch (m.kind) {
      case MessageKind::kAttributeUpdate: ++updates; break;
      case MessageKind::kProductAdd:
        ++adds;
        if (removed.erase(m.product_id)) ++readds;
        break;
      case MessageKind::kProductRemove:
        ++removes;
        removed.insert(m.product_id);
        break;
    }
  }
  EXPECT_NEAR(static_cast<double>(updates) / n, 315.0 / 977, 0.01);
  EXPECT_NEAR(static_cast<double>(adds) / n, 521.0 / 977, 0.01);
  EXPECT_NEAR(static_cast<double>(removes) / n, 141.0 / 977, 0.01);
  // Re-adds are bounded by the removal pool; nearly all of it is drawn.
  EXPECT_GT(static_cast<double>(readds), 0.9 * static_cast<double>(removes));
}

TEST(UpdateStream, RemovesOnlyLiveProductsAndReaddsRemovedOnes) {
  UpdateStreamGenerator gen(9, 1, "gen://");
  std::set<std::uint64_t> live;
  std::set<std::uint64_t> removed;
  for (int i = 0; i < 5000; ++i) {
    UpdateMessage m = gen.next();
    if (m.kind == MessageKind::kProductRemove) {
      ASSERT_TRUE(live.erase(m.product_id)) << m.product_id;
      removed.insert(m.product_id);
    } else if (m.kind == MessageKind::kProductAdd) {
      ASSERT_FALSE(live.count(m.product_id));
      ASSERT_FALSE(m.images.empty());
      removed.erase(m.product_id);
      live.insert(m.product_id);
    } else {
      ASSERT_TRUE(live.count(m.product_id));
    }
  }
  EXPECT_EQ(gen.live_products(), live.size());
  EXPECT_EQ(gen.removed_products(), removed.size());
}

TEST(UpdateStream, SameSeedSameStream) {
  UpdateStreamGenerator a(3, 1, "x/"), b(3, 1, "x/");
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(a.next(), b.next());
}

TEST(Bench, EmptyIndexHundredQueries) {
  Workload w;
  w.users = 1;
  w.queries_per_user = 100;
  auto queries = test::random_vectors(10, 4, 1);
  BenchReport r = run_bench(w, queries, [](const FeatureVector&) { return PartialResult{}; });
  EXPECT_EQ(r.queries_issued, 100u);
  EXPECT_EQ(r.queries_succeeded, 100u);
  EXPECT_GT(r.throughput_qps, 0.0);
  EXPECT_FALSE(r.updates_ran);
  EXPECT_LE(r.latency_ms.p50, r.latency_ms.p90);
  EXPECT_LE(r.latency_ms.p90, r.latency_ms.p99);
  EXPECT_LE(r.latency_ms.p99, r.latency_ms.max);
}

TEST(Bench, FailuresAndDegradedResponsesAreCounted) {
  Workload w;
  w.users = 2;
  w.queries_per_user = 10;
  auto queries = test::random_vectors(4, 2, 1);
  std::atomic<int> n{0};
  BenchReport r = run_bench(w, queries, [&](const FeatureVector&) {
    int i = n.fetch_add(1);
    if (i % 4 == 0) throw Error("down");
    PartialResult p;
    if (i % 4 == 1) p.missing = {0};
    return p;
  });
  EXPECT_EQ(r.queries_issued, 20u);
  EXPECT_EQ(r.queries_succeeded, 15u);
  EXPECT_EQ(r.degraded, 5u);
}

TEST(Bench, IssuedSequenceIsAPureFunctionOfTheSeed) {
  auto queries = test::random_vectors(64, 3, 2);
  Workload w;
  w.users = 4;
  w.queries_per_user = 50;
  w.seed = 99;
  auto run = [&](std::vector<std::vector<std::size_t>>& log) {
    std::mutex mu;
    BenchTrace trace;
    run_bench(w, queries, [](const FeatureVector&) { return PartialResult{}; }, {}, nullptr,
              &trace);
    log = trace.issued;
  };
  std::vector<std::vector<std::size_t>> a, b;
  run(a);
  run(b);
  EXPECT_EQ(a, b);
  ASSERT_EQ(a.size(), 4u);
  for (std::size_t u = 0; u < 4; ++u) {
    for (std::size_t i = 0; i < a[u].size(); ++i) {
      EXPECT_EQ(a[u][i], query_slot(99, u, i, queries.size()));
    }
  }
  EXPECT_NE(a[0], a[1]);
}

TEST(Bench, UpdateStreamIsPaced) {
  Workload w;
  w.users = 1;
  w.seconds = 0.5;
  w.update_rate = 200;
  auto queries = test::random_vectors(4, 2, 1);
  UpdateStreamGenerator gen(1, 1, "p/");
  std::atomic<std::size_t> applied{0};
  BenchReport r = run_bench(
      w, queries, [](const FeatureVector&) { return PartialResult{}; },
      [&](const UpdateMessage&) { applied.fetch_add(1); }, &gen);
  EXPECT_TRUE(r.updates_ran);
  EXPECT_EQ(r.updates_applied, applied.load());
  EXPECT_NEAR(static_cast<double>(applied.load()), 100.0, 10.0);
}

}  // namespace
}  // namespace jvs
