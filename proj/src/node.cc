#include "jvs/node.h"

#include <filesystem>

#include "jvs/common.h"

namespace jvs::node {

namespace {

std::string reply(const wire::Message& m) { return wire::encode_payload(m); }

std::optional<std::string> ping_reply(const wire::Message& m) {
  if (m.verb == "PING") return reply(wire::Message{"PONG", {}});
  return std::nullopt;
}

const char* ack_name(Ack a) {
  switch (a) {
    case Ack::kApplied: return "applied";
    case Ack::kDropped: return "dropped";
    case Ack::kMalformed: return "malformed";
  }
  return "?";
}

std::chrono::milliseconds deadline_of(const Config& config,
                                      std::chrono::milliseconds fallback) {
  return std::chrono::milliseconds(config.get_uint("search.deadline_ms", fallback.count()));
}

wire::Endpoint listen_endpoint(const Config& config) {
  try {
    return wire::Endpoint::parse(config.require_string("node.listen"));
  } catch (const Error& e) {
    throw Error(std::string("config key node.listen: ") + e.what());
  }
}

}  // namespace

Role parse_role(std::string_view text) {
  if (text == "searcher") return Role::kSearcher;
  if (text == "broker") return Role::kBroker;
  if (text == "blender") return Role::kBlender;
  throw Error("unknown role '" + std::string(text) + "'");
}

const char* role_name(Role role) {
  switch (role) {
    case Role::kSearcher: return "searcher";
    case Role::kBroker: return "broker";
    case Role::kBlender: return "blender";
  }
  return "?";
}

wire::Message update_message(const UpdateMessage& msg) {
  return wire::Message{"UPDATE", {{"message", format_message(msg)}}};
}

Ack parse_ack(const wire::Message& msg) {
  if (msg.verb == "ERROR") {
    throw Error("remote error: " + std::string(msg.get("message").value_or("")));
  }
  if (msg.verb != "ACK") throw Error("expected ACK, got " + msg.verb);
  auto s = msg.require("status");
  if (s == "applied") return Ack::kApplied;
  if (s == "dropped") return Ack::kDropped;
  if (s == "malformed") return Ack::kMalformed;
  throw Error("bad ACK status '" + std::string(s) + "'");
}

Ack SearcherService::apply(const UpdateMessage& msg) {
  std::lock_guard lock(writer_mu_);
  return partition_->handle_message(msg);
}

std::string SearcherService::handle(std::string_view payload) {
  wire::Message m = wire::decode_payload(payload);
  if (auto r = ping_reply(m)) return *r;
  if (m.verb == "QUERY") {
    QueryRequest q = wire::parse_query(m);
    const auto* v = std::get_if<FeatureVector>(&q.query);
    if (v == nullptr) throw Error("searchers accept vector queries only");
    PartialResult r;
    r.hits = searcher_query(*partition_, v->view(), q.k, q.nprobe);
    return reply(wire::result_message(r));
  }
  if (m.verb == "UPDATE") {
    auto parsed = parse_message_line(m.require("message"));
    Ack a = parsed ? apply(*parsed) : Ack::kMalformed;
    return reply(wire::Message{"ACK", {{"status", ack_name(a)}}});
  }
  throw Error("unsupported verb " + m.verb);
}

std::string BrokerService::handle(std::string_view payload) {
  wire::Message m = wire::decode_payload(payload);
  if (auto r = ping_reply(m)) return *r;
  if (m.verb != "QUERY") throw Error("unsupported verb " + m.verb);
  QueryRequest q = wire::parse_query(m);
  const auto* v = std::get_if<FeatureVector>(&q.query);
  if (v == nullptr) throw Error("brokers accept vector queries only");
  return reply(wire::result_message(broker_->query(*v, q.k, q.nprobe)));
}

std::string BlenderService::handle(std::string_view payload) {
  wire::Message m = wire::decode_payload(payload);
  if (auto r = ping_reply(m)) return *r;
  if (m.verb != "QUERY") throw Error("unsupported verb " + m.verb);
  return reply(wire::result_message(blender_->query(wire::parse_query(m))));
}

Node::~Node() { stop(); }

void Node::wait_replayed() {
  if (replay_.joinable()) replay_.join();
}

void Node::stop() {
  if (server_) server_->stop();
  wait_replayed();
}

std::unique_ptr<Node> start(Role role, const Config& config) {
  auto node = std::unique_ptr<Node>(new Node());
  node->role_ = role;
  const wire::Endpoint listen = listen_endpoint(config);
  const std::size_t dim = config.get_uint("index.dim", 128);
  auto provider = std::make_shared<SyntheticProvider>(dim, config.get_uint("feature.seed", 0));
  wire::TcpServer::Handler handler;

  switch (role) {
    case Role::kSearcher: {
      ClusterOptions options = ClusterOptions::from_config(config);
      if (!config.has("node.partition")) throw Error("config key node.partition is required");
      const auto p = static_cast<PartitionId>(config.get_uint("node.partition", 0));
      if (p >= options.partitions) {
        throw Error("config key node.partition: " + std::to_string(p) +
                    " is not below topology.partitions");
      }
      IndexPartition::Options po;
      po.partition_id = p;
      po.list_capacity = options.list_capacity;
      std::shared_ptr<IndexPartition> partition;
      std::string dir = partition_dir(config.get_string("data.dir", "."), p);
      if (std::filesystem::exists(std::filesystem::path(dir) / "codebook.jvsc")) {
        partition = IndexPartition::load(dir, provider, po);
      } else {
        partition = std::make_shared<IndexPartition>(
            placeholder_codebook(dim), std::make_shared<FeatureStore>(dim), provider, po);
      }
      if (partition->codebook().dim() != dim) {
        throw Error("config key index.dim: snapshot in " + dir + " has dimension " +
                    std::to_string(partition->codebook().dim()));
      }
      node->searcher_ = std::make_shared<SearcherService>(partition);
      std::string log_path = config.get_string("node.message_log", "");
      if (!log_path.empty()) {
        MessageLog log = read_message_log(log_path);
        auto searcher = node->searcher_;
        node->replay_ = std::thread([searcher, log = std::move(log.messages),
                                     partitions = options.partitions, p] {
          MessageRouter router(partitions);
          for (const auto& msg : log) {
            for (auto& [dest, part] : router.route(msg)) {
              if (dest == p) searcher->apply(part);
            }
          }
        });
      }
      auto s = node->searcher_;
      handler = [s](std::string_view payload) { return s->handle(payload); };
      break;
    }
    case Role::kBroker: {
      Topology topo = Topology::from_config(config);
      if (!config.has("node.broker")) throw Error("config key node.broker is required");
      const std::size_t b = config.get_uint("node.broker", 0);
      if (b >= topo.brokers.size()) {
        throw Error("config key node.broker: no topology.broker." + std::to_string(b));
      }
      auto deadline = deadline_of(config, Broker::kDefaultDeadline);
      std::map<PartitionId, Replicas> owned;
      for (PartitionId p : topo.brokers[b].partitions) {
        if (topo.searchers[p].empty()) {
          throw Error("missing config key topology.searcher." + std::to_string(p));
        }
        for (const auto& ep : topo.searchers[p]) {
          owned[p].push_back(std::make_shared<wire::RemoteSearcher>(ep, deadline));
        }
      }
      node->broker_ = std::make_shared<BrokerService>(
          std::make_shared<Broker>(std::move(owned), deadline));
      auto s = node->broker_;
      handler = [s](std::string_view payload) { return s->handle(payload); };
      break;
    }
    case Role::kBlender: {
      Topology topo = Topology::from_config(config);
      if (topo.brokers.empty()) throw Error("missing config key topology.broker.0");
      std::vector<std::shared_ptr<BrokerEndpoint>> brokers;
      for (const auto& spec : topo.brokers) {
        brokers.push_back(std::make_shared<wire::RemoteBroker>(
            spec.endpoint, spec.partitions, Blender::kDefaultDeadline));
      }
      node->blender_ = std::make_shared<BlenderService>(std::make_shared<Blender>(
          std::move(brokers), provider, std::make_shared<FeatureStore>(dim)));
      auto s = node->blender_;
      handler = [s](std::string_view payload) { return s->handle(payload); };
      break;
    }
  }
  node->server_ = std::make_unique<wire::TcpServer>(listen, std::move(handler));
  node->server_->start();
  return node;
}

}  // namespace jvs::node
