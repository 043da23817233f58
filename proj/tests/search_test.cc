#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <thread>

#include "jvs/search.h"
#include "support.h"

namespace jvs {
namespace {

constexpr std::size_t kDim = 16;

struct Indexed {
  std::shared_ptr<SyntheticProvider> provider = std::make_shared<SyntheticProvider>(kDim, 4);
  std::shared_ptr<IndexPartition> part;
  std::vector<FeatureVector> vectors;  // by image index
  std::vector<bool> live;
};

Indexed build(std::size_t products, std::size_t n_lists, PartitionId pid = 0,
              std::uint64_t seed = 1) {
  Indexed ix;
  std::vector<UpdateMessage> log;
  for (std::uint64_t p = 1; p <= products; ++p) {
    log.push_back(UpdateMessage::add(p, p % 50, p % 7, 100 + p,
                                     {"s" + std::to_string(seed) + "/" + std::to_string(p)}));
  }
  std::vector<FeatureVector> feats;
  for (const auto& m : log) feats.push_back(ix.provider->extract(m.images[0].url));
  auto cb = std::make_shared<const Codebook>(train(feats, {n_lists, seed, 20}));
  IndexPartition::Options o;
  o.partition_id = pid;
  ix.part = full_build(log, std::make_shared<FeatureStore>(kDim), ix.provider, cb, o);
  for (ImageIndex i = 0; i < ix.part->forward().size(); ++i) {
    ix.vectors.push_back(*ix.part->store().find(ix.part->forward().get_entry(i).url));
    ix.live.push_back(true);
  }
  return ix;
}

TEST(Searcher, ExactModeMatchesBruteForce) {
  Indexed ix = build(2000, 20);
  for (const auto& q : test::random_vectors(50, kDim, 9)) {
    auto got = searcher_query(*ix.part, q.view(), 10, 20);
    auto want = test::brute_force_knn(ix.vectors, q.view(), 10);
    ASSERT_EQ(got.size(), want.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      EXPECT_EQ(got[i].image_index, want[i]);
      EXPECT_DOUBLE_EQ(got[i].distance, euclidean_distance(ix.vectors[want[i]].view(), q.view()));
      EXPECT_EQ(got[i].attributes, ix.part->forward().get_entry(want[i]));
    }
  }
}

TEST(Searcher, ProbedModeMatchesBruteForceOverProbedLists) {
  Indexed ix = build(2000, 20);
  for (const auto& q : test::random_vectors(30, kDim, 10)) {
    std::set<ImageIndex> probed;
    for (ListId l : ix.part->codebook().nearest_lists(q.view(), 3)) {
      for (ImageIndex i : ix.part->inverted().scan(l)) probed.insert(i);
    }
    std::vector<bool> mask(ix.vectors.size(), false);
    for (ImageIndex i : probed) mask[i] = true;
    auto want = test::brute_force_knn(ix.vectors, q.view(), 7, &mask);
    auto got = searcher_query(*ix.part, q.view(), 7, 3);
    ASSERT_EQ(got.size(), want.size());
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_EQ(got[i].image_index, want[i]);
  }
}

TEST(Searcher, SkipsInvalidImages) {
  Indexed ix = build(300, 5);
  for (std::uint64_t p = 1; p <= 300; p += 3) {
    ix.part->handle_message(UpdateMessage::remove(p));
    ix.live[*ix.part->registry().image_of("s1/" + std::to_string(p))] = false;
  }
  for (const auto& q : test::random_vectors(20, kDim, 11)) {
    auto got = searcher_query(*ix.part, q.view(), 15, 5);
    auto want = test::brute_force_knn(ix.vectors, q.view(), 15, &ix.live);
    ASSERT_EQ(got.size(), want.size());
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_EQ(got[i].image_index, want[i]);
  }
}

TEST(Searcher, EdgeCases) {
  Indexed ix = build(5, 2);
  FeatureVector q = test::random_vectors(1, kDim, 1)[0];
  EXPECT_EQ(searcher_query(*ix.part, q.view(), 100, 2).size(), 5u);
  EXPECT_THROW(searcher_query(*ix.part, q.view(), 0, 1), Error);
  EXPECT_THROW(searcher_query(*ix.part, q.view(), 1, 3), Error);
  std::vector<float> wrong(kDim + 1, 0.0f);
  EXPECT_THROW(searcher_query(*ix.part, wrong, 1, 1), Error);
}

TEST(Rank, FormulaMatchesHandComputation) {
  SearchHit h;
  h.distance = 0.5;
  h.attributes.sales = 9;
  h.attributes.praise = 3;
  h.attributes.price = 99;
  RankWeights w{2.0, 0.1, 0.2, 0.05};
  double expected = 2.0 / 1.5 + 0.1 * std::log(10.0) + 0.2 * std::log(4.0) - 0.05 * std::log(100.0);
  EXPECT_NEAR(rank_score(h, w), expected, 1e-12);
  EXPECT_DOUBLE_EQ(rank_score(h, RankWeights{}), 1.0 / 1.5);
}

TEST(Rank, OrdersByScoreThenHitOrder) {
  std::vector<SearchHit> hits(4);
  hits[0].distance = 1.0;
  hits[1].distance = 0.0;
  hits[2].distance = 1.0;
  hits[2].attributes.sales = 1000;
  hits[3].distance = 1.0;
  hits[3].image_index = 7;
  auto ranked = rank(hits, {1.0, 0.01, 0, 0});
  EXPECT_EQ(ranked[0].distance, 0.0);
  EXPECT_EQ(ranked[1].attributes.sales, 1000u);
  EXPECT_EQ(ranked[2].image_index, 0u);  // equal score, lower image first
  EXPECT_EQ(ranked[3].image_index, 7u);
  for (std::size_t i = 1; i < ranked.size(); ++i) EXPECT_GE(ranked[i - 1].score, ranked[i].score);
}

TEST(Router, PartitionOfUsesUrlHash) {
  EXPECT_EQ(partition_of("abc", 7), hash64("abc") % 7);
  EXPECT_EQ(partition_of("abc", 1), 0u);
  EXPECT_THROW(partition_of("abc", 0), Error);
}

TEST(Router, SplitsAddsAndFollowsProducts) {
  MessageRouter r(4);
  std::vector<std::string> urls;
  for (int i = 0; i < 20; ++i) urls.push_back("u" + std::to_string(i));
  auto routed = r.route(UpdateMessage::add(1, 0, 0, 1, urls));
  std::set<PartitionId> holders;
  std::size_t total = 0;
  for (const auto& [p, m] : routed) {
    holders.insert(p);
    for (const auto& img : m.images) EXPECT_EQ(partition_of(img.url, 4), p);
    total += m.images.size();
  }
  EXPECT_EQ(total, urls.size());
  std::set<PartitionId> removal;
  for (const auto& [p, m] : r.route(UpdateMessage::remove(1))) removal.insert(p);
  EXPECT_EQ(removal, holders);
  EXPECT_EQ(r.route(UpdateMessage::remove(2)).size(), 4u);  // unknown: broadcast
}

class FakeSearcher : public SearcherEndpoint {
 public:
  FakeSearcher(std::vector<SearchHit> hits, bool fail = false,
               std::chrono::milliseconds delay = {})
      : hits_(std::move(hits)), fail_(fail), delay_(delay) {}
  std::vector<SearchHit> search(const FeatureVector&, std::size_t k, std::size_t) override {
    calls.fetch_add(1);
    std::this_thread::sleep_for(delay_);
    if (fail_) throw Error("searcher down");
    std::vector<SearchHit> out = hits_;
    if (out.size() > k) out.resize(k);
    return out;
  }
  std::atomic<int> calls{0};

 private:
  std::vector<SearchHit> hits_;
  bool fail_;
  std::chrono::milliseconds delay_;
};

std::vector<SearchHit> hits_for(PartitionId p, std::initializer_list<double> ds) {
  std::vector<SearchHit> out;
  ImageIndex i = 0;
  for (double d : ds) {
    SearchHit h;
    h.partition_id = p;
    h.image_index = i++;
    h.distance = d;
    out.push_back(h);
  }
  return out;
}

TEST(Broker, MergesPartitions) {
  auto a = std::make_shared<FakeSearcher>(hits_for(0, {0.1, 0.4, 0.9}));
  auto b = std::make_shared<FakeSearcher>(hits_for(1, {0.2, 0.3}));
  Broker broker({{0, {a}}, {1, {b}}});
  FeatureVector q{0};
  PartialResult r = broker.query(q, 4, 1);
  EXPECT_FALSE(r.degraded());
  ASSERT_EQ(r.hits.size(), 4u);
  std::vector<double> ds;
  for (const auto& h : r.hits) ds.push_back(h.distance);
  EXPECT_EQ(ds, (std::vector<double>{0.1, 0.2, 0.3, 0.4}));
}

TEST(Broker, RetriesOnAlternateReplica) {
  auto down = std::make_shared<FakeSearcher>(hits_for(0, {}), true);
  auto up = std::make_shared<FakeSearcher>(hits_for(0, {0.5}));
  Broker broker({{0, {down, up}}}, std::chrono::milliseconds(200));
  FeatureVector q{0};
  for (int i = 0; i < 4; ++i) {
    PartialResult r = broker.query(q, 1, 1);
    EXPECT_FALSE(r.degraded());
    ASSERT_EQ(r.hits.size(), 1u);
  }
  EXPECT_GE(down->calls.load(), 1);
}

TEST(Broker, SlowPartitionIsReportedMissing) {
  auto fast = std::make_shared<FakeSearcher>(hits_for(0, {0.5}));
  auto slow = std::make_shared<FakeSearcher>(hits_for(1, {0.1}), false,
                                             std::chrono::milliseconds(400));
  Broker broker({{0, {fast}}, {1, {slow}}}, std::chrono::milliseconds(50));
  auto t0 = std::chrono::steady_clock::now();
  PartialResult r = broker.query(FeatureVector{0}, 5, 1);
  auto took = std::chrono::steady_clock::now() - t0;
  EXPECT_LT(took, std::chrono::milliseconds(300));
  EXPECT_TRUE(r.degraded());
  EXPECT_EQ(r.missing, (std::vector<PartitionId>{1}));
  ASSERT_EQ(r.hits.size(), 1u);
  EXPECT_EQ(r.hits[0].partition_id, 0u);
}

TEST(Broker, AllFailedThrows) {
  auto down = std::make_shared<FakeSearcher>(hits_for(0, {}), true);
  Broker broker({{0, {down}}, {1, {down}}});
  EXPECT_THROW(broker.query(FeatureVector{0}, 1, 1), Error);
  EXPECT_THROW(Broker(std::map<PartitionId, Replicas>{}), Error);
  EXPECT_THROW(Broker(std::map<PartitionId, Replicas>{{0, {}}}), Error);
}

class FakeBroker : public BrokerEndpoint {
 public:
  FakeBroker(PartialResult r, std::vector<PartitionId> parts, bool fail = false)
      : r_(std::move(r)), parts_(std::move(parts)), fail_(fail) {}
  PartialResult search(const FeatureVector& q, std::size_t, std::size_t) override {
    last_query = q;
    if (fail_) throw Error("broker down");
    return r_;
  }
  std::vector<PartitionId> partitions() const override { return parts_; }
  FeatureVector last_query;

 private:
  PartialResult r_;
  std::vector<PartitionId> parts_;
  bool fail_;
};

TEST(Blender, FeaturizesUrlsOnceAndRanks) {
  PartialResult a{hits_for(0, {0.3}), {}};
  PartialResult b{hits_for(1, {0.1, 0.2}), {}};
  auto ba = std::make_shared<FakeBroker>(a, std::vector<PartitionId>{0});
  auto bb = std::make_shared<FakeBroker>(b, std::vector<PartitionId>{1});
  auto provider = std::make_shared<SyntheticProvider>(kDim, 3);
  auto store = std::make_shared<FeatureStore>(kDim);
  Blender blender({ba, bb}, provider, store);
  QueryRequest req;
  req.query = std::string("http://q.jpg");
  req.k = 2;
  PartialResult r = blender.query(req);
  ASSERT_EQ(r.hits.size(), 2u);
  EXPECT_EQ(r.hits[0].distance, 0.1);
  EXPECT_DOUBLE_EQ(r.hits[0].score, 1.0 / 1.1);
  EXPECT_EQ(ba->last_query, synthetic_extract("http://q.jpg", kDim, 3));
  blender.query(req);
  EXPECT_EQ(provider->invocations(), 1u);
}

TEST(Blender, DegradesWhenABrokerFails) {
  PartialResult a{hits_for(0, {0.3}), {}};
  auto ok = std::make_shared<FakeBroker>(a, std::vector<PartitionId>{0});
  auto down = std::make_shared<FakeBroker>(PartialResult{}, std::vector<PartitionId>{1, 2}, true);
  Blender blender({ok, down}, nullptr);
  QueryRequest req;
  req.query = FeatureVector{0};
  PartialResult r = blender.query(req);
  EXPECT_EQ(r.missing, (std::vector<PartitionId>{1, 2}));
  EXPECT_EQ(r.hits.size(), 1u);

  Blender dead({down}, nullptr);
  EXPECT_THROW(dead.query(req), Error);
  req.query = std::string("needs-a-provider");
  EXPECT_THROW(blender.query(req), Error);
}

}  // namespace
}  // namespace jvs
