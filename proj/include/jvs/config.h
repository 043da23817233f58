#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "jvs/core.h"
#include "jvs/wire.h"

namespace jvs {

/// Flat `dotted.key = value` configuration. '#' starts a comment line.
/// Every key is checked against the known set so typos fail at startup.
class Config {
 public:
  static Config parse(std::string_view text);
  static Config load(const std::string& path);

  /// Overrides (or adds) a key; validates the name.
  void set(const std::string& key, const std::string& value);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  std::string get_string(const std::string& key, const std::string& fallback) const;
  std::string require_string(const std::string& key) const;
  std::uint64_t get_uint(const std::string& key, std::uint64_t fallback) const;
  double get_double(const std::string& key, double fallback) const;

  const std::map<std::string, std::string>& values() const noexcept {
    return values_;
  }

  static bool known_key(std::string_view key);

 private:
  std::map<std::string, std::string> values_;
};

/// Static deployment layout read from the topology.* keys:
///   topology.partitions = P
///   topology.searcher.<p> = host:port[,host:port...]   (replicas)
///   topology.broker.<b> = host:port
///   topology.broker.<b>.partitions = 0,1,...
///   topology.blender.<i> = host:port
struct Topology {
  struct BrokerSpec {
    wire::Endpoint endpoint;
    std::vector<PartitionId> partitions;
  };

  std::size_t partitions = 1;
  std::vector<std::vector<wire::Endpoint>> searchers;  // [partition][replica]
  std::vector<BrokerSpec> brokers;
  std::vector<wire::Endpoint> blenders;

  /// Throws naming the offending key when brokers do not cover every
  /// partition exactly once or an endpoint is missing.
  static Topology from_config(const Config& config);
};

}  // namespace jvs
