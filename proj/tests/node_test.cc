#include <gtest/gtest.h>

#include "jvs/node.h"
#include "support.h"

namespace jvs::node {
namespace {

constexpr std::size_t kDim = 8;

std::string ep(std::uint16_t port) { return "127.0.0.1:" + std::to_string(port); }

Config base_config(const std::string& data_dir, std::size_t partitions) {
  Config c;
  c.set("index.dim", std::to_string(kDim));
  c.set("topology.partitions", std::to_string(partitions));
  c.set("data.dir", data_dir);
  c.set("node.listen", "127.0.0.1:0");
  return c;
}

wire::Message ask(std::uint16_t port, const wire::Message& m) {
  return wire::call({"127.0.0.1", port}, m, std::chrono::seconds(5));
}

struct Topo {
  std::vector<std::unique_ptr<Node>> searchers;
  std::unique_ptr<Node> broker;
  std::unique_ptr<Node> blender;
};

Topo start_topology(const std::string& dir, std::size_t partitions) {
  Topo t;
  Config c = base_config(dir, partitions);
  for (std::size_t p = 0; p < partitions; ++p) {
    Config s = c;
    s.set("node.partition", std::to_string(p));
    t.searchers.push_back(start(Role::kSearcher, s));
    c.set("topology.searcher." + std::to_string(p), ep(t.searchers.back()->port()));
  }
  Config b = c;
  b.set("topology.broker.0", "127.0.0.1:1");  // own address is not needed to serve
  b.set("node.broker", "0");
  t.broker = start(Role::kBroker, b);
  c.set("topology.broker.0", ep(t.broker->port()));
  t.blender = start(Role::kBlender, c);
  return t;
}

TEST(Node, SearcherWithEmptyIndexAnswersPing) {
  Config c = base_config(test::temp_dir("node-empty"), 1);
  c.set("node.partition", "0");
  auto n = start(Role::kSearcher, c);
  EXPECT_EQ(ask(n->port(), wire::ping_message()).verb, "PONG");
  EXPECT_EQ(ask(n->port(), wire::Message{"BOGUS", {}}).verb, "ERROR");
}

TEST(Node, EmptyOneOneOneTopologyReturnsEmptyResult) {
  Topo t = start_topology(test::temp_dir("node-111"), 1);
  QueryRequest q;
  q.query = FeatureVector(std::vector<float>(kDim, 0.5f));
  q.k = 1;
  wire::Message reply = ask(t.blender->port(), wire::query_message(q));
  ASSERT_EQ(reply.verb, "RESULT") << reply.get("message").value_or("");
  PartialResult r = wire::parse_result(reply);
  EXPECT_TRUE(r.hits.empty());
  EXPECT_FALSE(r.degraded());
}

TEST(Node, TwoPartitionsEachContributeTheirOwnImages) {
  std::string dir = test::temp_dir("node-two");
  auto log = test::random_log(400, 21);
  auto provider = std::make_shared<SyntheticProvider>(kDim, 0);
  ClusterOptions o;
  o.dim = kDim;
  o.n_lists = 4;
  o.partitions = 2;
  LocalCluster::build(log, provider, o)->save(dir);

  Topo t = start_topology(dir, 2);
  std::set<PartitionId> seen;
  for (const auto& v : test::random_vectors(20, kDim, 3)) {
    QueryRequest q;
    q.query = v;
    q.k = 20;
    q.nprobe = 4;
    PartialResult r = wire::parse_result(ask(t.blender->port(), wire::query_message(q)));
    EXPECT_FALSE(r.degraded());
    ASSERT_EQ(r.hits.size(), 20u);
    for (const auto& h : r.hits) {
      EXPECT_EQ(partition_of(h.attributes.url, 2), h.partition_id) << h.attributes.url;
      seen.insert(h.partition_id);
    }
  }
  EXPECT_EQ(seen, (std::set<PartitionId>{0, 1}));

  // Url queries are featurized at the blender.
  QueryRequest q;
  q.query = log.front().images.front().url;
  q.k = 1;
  q.nprobe = 4;
  PartialResult r = wire::parse_result(ask(t.blender->port(), wire::query_message(q)));
  ASSERT_EQ(r.hits.size(), 1u);
  EXPECT_EQ(r.hits[0].attributes.url, log.front().images.front().url);
}

TEST(Node, UpdatesAreAcknowledgedAndVisible) {
  Topo t = start_topology(test::temp_dir("node-upd"), 1);
  auto& s = *t.searchers[0];
  UpdateMessage add = UpdateMessage::add(5, 1, 2, 3, {"http://n/5.jpg"});
  EXPECT_EQ(parse_ack(ask(s.port(), update_message(add))), Ack::kApplied);
  EXPECT_EQ(parse_ack(ask(s.port(), update_message(UpdateMessage::remove(6)))), Ack::kDropped);
  EXPECT_EQ(parse_ack(ask(s.port(), wire::Message{"UPDATE", {{"message", "# nothing"}}})),
            Ack::kMalformed);
  EXPECT_EQ(ask(s.port(), wire::Message{"UPDATE", {{"message", "ADD\tx"}}}).verb, "ERROR");

  QueryRequest q;
  q.query = synthetic_extract("http://n/5.jpg", kDim, 0);
  q.k = 1;
  PartialResult r = wire::parse_result(ask(t.blender->port(), wire::query_message(q)));
  ASSERT_EQ(r.hits.size(), 1u);
  EXPECT_EQ(r.hits[0].attributes.product_id, 5u);
  EXPECT_EQ(r.hits[0].attributes.price, 3u);
}

TEST(Node, SearcherReplaysConfiguredMessageLog) {
  std::string dir = test::temp_dir("node-replay");
  auto log = test::random_log(300, 2);
  std::string text;
  for (const auto& m : log) text += format_message(m) + "\n";
  write_file_atomic(dir + "/log.txt", text);
  Config c = base_config(dir, 2);
  c.set("node.partition", "1");
  c.set("node.message_log", dir + "/log.txt");
  auto n = start(Role::kSearcher, c);
  n->wait_replayed();
  const IndexPartition& part = n->searcher()->partition();
  EXPECT_GT(part.forward().size(), 0u);
  for (ImageIndex i = 0; i < part.forward().size(); ++i) {
    EXPECT_EQ(partition_of(part.forward().get_entry(i).url, 2), 1u);
  }
}

TEST(Node, BrokerReportsDeadSearcherAsDegraded) {
  Topo t = start_topology(test::temp_dir("node-dead"), 2);
  t.searchers[1]->stop();
  QueryRequest q;
  q.query = FeatureVector(std::vector<float>(kDim, 0.1f));
  PartialResult r = wire::parse_result(ask(t.blender->port(), wire::query_message(q)));
  EXPECT_EQ(r.missing, (std::vector<PartitionId>{1}));
}

TEST(Node, StartupErrorsNameTheKey) {
  auto expect_key = [](Role role, const Config& c, const std::string& key) {
    try {
      start(role, c);
      FAIL() << key;
    } catch (const Error& e) {
      EXPECT_NE(std::string(e.what()).find(key), std::string::npos) << e.what();
    }
  };
  Config c = base_config(test::temp_dir("node-bad"), 2);
  expect_key(Role::kSearcher, c, "node.partition");
  Config s = c;
  s.set("node.partition", "2");
  expect_key(Role::kSearcher, s, "node.partition");
  expect_key(Role::kBroker, c, "node.broker");
  expect_key(Role::kBlender, c, "topology.broker.0");
  Config b = c;
  b.set("node.broker", "0");
  b.set("topology.broker.0", "127.0.0.1:1");
  expect_key(Role::kBroker, b, "topology.searcher.0");
  Config l = c;
  l.set("node.listen", "localhost");
  l.set("node.partition", "0");
  expect_key(Role::kSearcher, l, "node.listen");
  EXPECT_THROW(parse_role("oracle"), Error);
}

TEST(Node, PortConflictIsAStartupError) {
  Config c = base_config(test::temp_dir("node-port"), 1);
  c.set("node.partition", "0");
  auto first = start(Role::kSearcher, c);
  c.set("node.listen", ep(first->port()));
  EXPECT_THROW(start(Role::kSearcher, c), Error);
}

}  // namespace
}  // namespace jvs::node
