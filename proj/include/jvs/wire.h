#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include "jvs/core.h"
#include "jvs/search.h"

namespace jvs::wire {

struct Endpoint {
  std::string host;
  std::uint16_t port = 0;

  std::string str() const { return host + ":" + std::to_string(port); }
  /// "host:port"
  static Endpoint parse(std::string_view text);
  bool operator==(const Endpoint&) const = default;
};

/// Verb line followed by key<TAB>value lines. Keys may repeat.
struct Message {
  std::string verb;
  std::vector<std::pair<std::string, std::string>> fields;

  Message& add(std::string key, std::string value) {
    fields.emplace_back(std::move(key), std::move(value));
    return *this;
  }
  std::optional<std::string_view> get(std::string_view key) const;
  std::vector<std::string_view> get_all(std::string_view key) const;
  std::string_view require(std::string_view key) const;
};

std::string encode_payload(const Message& msg);
Message decode_payload(std::string_view payload);

/// 4-byte big-endian length prefix + payload.
std::string frame(std::string_view payload);

constexpr std::size_t kMaxFrameBytes = 64u << 20;

// Shortest round-trip decimal forms.
std::string format_double(double v);
std::string format_vector(std::span<const float> v);
FeatureVector parse_vector(std::string_view csv);

Message ping_message();
Message error_message(std::string_view what);
Message query_message(const FeatureVector& q, std::size_t k, std::size_t nprobe);
Message query_message(const QueryRequest& request);
QueryRequest parse_query(const Message& msg);
Message result_message(const PartialResult& result);
/// Throws Error carrying the remote message when `msg` is an ERROR.
PartialResult parse_result(const Message& msg);

/// One request/response exchange over a fresh connection. Throws on
/// connection failure, timeout or malformed frames.
std::string exchange(const Endpoint& to, std::string_view payload,
                     std::chrono::milliseconds timeout);
Message call(const Endpoint& to, const Message& request,
             std::chrono::milliseconds timeout);

/// Thread-per-connection server for the framed protocol. A connection may
/// carry several sequential exchanges.
class TcpServer {
 public:
  using Handler = std::function<std::string(std::string_view payload)>;

  /// Binds and listens immediately; port 0 picks an ephemeral port. Throws
  /// when the address is unavailable.
  TcpServer(const Endpoint& listen, Handler handler);
  TcpServer(const TcpServer&) = delete;
  TcpServer& operator=(const TcpServer&) = delete;
  ~TcpServer();

  void start();
  void stop();
  std::uint16_t port() const noexcept { return port_; }

 private:
  void accept_loop();
  void serve(int fd);

  Handler handler_;
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::atomic<bool> running_{false};
  std::thread acceptor_;
  std::mutex conn_mu_;
  std::vector<int> conn_fds_;
  std::vector<std::thread> workers_;
};

class RemoteSearcher : public SearcherEndpoint {
 public:
  RemoteSearcher(Endpoint ep, std::chrono::milliseconds timeout)
      : ep_(std::move(ep)), timeout_(timeout) {}
  std::vector<SearchHit> search(const FeatureVector& q, std::size_t k,
                                std::size_t nprobe) override;

 private:
  Endpoint ep_;
  std::chrono::milliseconds timeout_;
};

class RemoteBroker : public BrokerEndpoint {
 public:
  RemoteBroker(Endpoint ep, std::vector<PartitionId> partitions,
               std::chrono::milliseconds timeout)
      : ep_(std::move(ep)), partitions_(std::move(partitions)), timeout_(timeout) {}
  PartialResult search(const FeatureVector& q, std::size_t k,
                       std::size_t nprobe) override;
  std::vector<PartitionId> partitions() const override { return partitions_; }

 private:
  Endpoint ep_;
  std::vector<PartitionId> partitions_;
  std::chrono::milliseconds timeout_;
};

}  // namespace jvs::wire
