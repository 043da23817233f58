#pragma once

#include <atomic>
#include <chrono>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>

#include "jvs/cluster.h"
#include "jvs/config.h"
#include "jvs/indexer.h"
#include "jvs/message.h"
#include "jvs/search.h"
#include "jvs/wire.h"

namespace jvs::node {

enum class Role { kSearcher, kBroker, kBlender };

Role parse_role(std::string_view text);
const char* role_name(Role role);

/// UPDATE carries one message-log line in its `message` field; the searcher
/// answers ACK with `status` applied|dropped|malformed once the message is
/// visible to queries.
wire::Message update_message(const UpdateMessage& msg);
Ack parse_ack(const wire::Message& msg);

/// Request handlers for each role, independent of the transport.
class SearcherService {
 public:
  explicit SearcherService(std::shared_ptr<IndexPartition> partition)
      : partition_(std::move(partition)) {}

  std::string handle(std::string_view payload);
  /// Serialized with UPDATE requests so the partition keeps one writer.
  Ack apply(const UpdateMessage& msg);
  IndexPartition& partition() { return *partition_; }

 private:
  std::shared_ptr<IndexPartition> partition_;
  std::mutex writer_mu_;
};

class BrokerService {
 public:
  explicit BrokerService(std::shared_ptr<Broker> broker) : broker_(std::move(broker)) {}
  std::string handle(std::string_view payload);

 private:
  std::shared_ptr<Broker> broker_;
};

class BlenderService {
 public:
  explicit BlenderService(std::shared_ptr<Blender> blender)
      : blender_(std::move(blender)) {}
  std::string handle(std::string_view payload);

 private:
  std::shared_ptr<Blender> blender_;
};

/// A started node: listening server plus, for searchers, the replay thread
/// consuming node.message_log.
class Node {
 public:
  ~Node();
  std::uint16_t port() const { return server_->port(); }
  Role role() const noexcept { return role_; }
  /// Blocks until the message log (if any) has been fully applied.
  void wait_replayed();
  SearcherService* searcher() { return searcher_.get(); }
  void stop();

 private:
  friend std::unique_ptr<Node> start(Role, const Config&);
  Role role_ = Role::kSearcher;
  std::shared_ptr<SearcherService> searcher_;
  std::shared_ptr<BrokerService> broker_;
  std::shared_ptr<BlenderService> blender_;
  std::unique_ptr<wire::TcpServer> server_;
  std::thread replay_;
};

/// Validates the config for `role`, loads state and starts serving on
/// node.listen. Throws naming the offending key on bad config, or when the
/// address is unavailable.
std::unique_ptr<Node> start(Role role, const Config& config);

}  // namespace jvs::node
