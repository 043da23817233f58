#include "jvs/config.h"

#include <algorithm>
#include <charconv>
#include <regex>

#include "jvs/common.h"

namespace jvs {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

const std::vector<std::string>& fixed_keys() {
  static const std::vector<std::string> keys = {
      "index.dim",          "index.n_lists",     "index.max_iters",
      "index.seed",         "index.list_capacity", "index.train_sample",
      "feature.seed",       "data.dir",          "node.listen",
      "node.partition",     "node.message_log",  "query.k",
      "query.nprobe",       "search.deadline_ms", "topology.partitions",
      "bench.sigma",        "bench.seed",        "bench.queries",
      "bench.k",            "bench.nprobe",      "node.broker",
  };
  return keys;
}

std::vector<PartitionId> parse_id_list(const std::string& key,
                                       std::string_view text) {
  std::vector<PartitionId> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find(',', start);
    if (end == std::string_view::npos) end = text.size();
    auto part = trim(text.substr(start, end - start));
    PartitionId v = 0;
    auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), v);
    if (part.empty() || ec != std::errc{} || ptr != part.data() + part.size()) {
      throw Error("config key " + key + ": bad partition id '" +
                  std::string(part) + "'");
    }
    out.push_back(v);
    start = end + 1;
  }
  return out;
}

}  // namespace

bool Config::known_key(std::string_view key) {
  const auto& keys = fixed_keys();
  if (std::find(keys.begin(), keys.end(), key) != keys.end()) return true;
  static const std::regex dynamic(
      R"(topology\.(searcher\.\d+|broker\.\d+|broker\.\d+\.partitions|blender\.\d+))");
  return std::regex_match(key.begin(), key.end(), dynamic);
}

Config Config::parse(std::string_view text) {
  Config c;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    ++line_no;
    auto line = trim(text.substr(start, end - start));
    start = end + 1;
    if (line.empty() || line.front() == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error("config line " + std::to_string(line_no) + ": expected key = value");
    }
    c.set(std::string(trim(line.substr(0, eq))),
          std::string(trim(line.substr(eq + 1))));
  }
  return c;
}

Config Config::load(const std::string& path) { return parse(read_file(path)); }

void Config::set(const std::string& key, const std::string& value) {
  if (!known_key(key)) throw Error("unknown config key " + key);
  values_[key] = value;
}

std::string Config::get_string(const std::string& key,
                               const std::string& fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

std::string Config::require_string(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end() || it->second.empty()) {
    throw Error("missing config key " + key);
  }
  return it->second;
}

std::uint64_t Config::get_uint(const std::string& key,
                               std::uint64_t fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const std::string& s = it->second;
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) {
    throw Error("config key " + key + ": expected a non-negative integer, got '" +
                s + "'");
  }
  return v;
}

double Config::get_double(const std::string& key, double fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const std::string& s = it->second;
  double v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) {
    throw Error("config key " + key + ": expected a number, got '" + s + "'");
  }
  return v;
}

Topology Topology::from_config(const Config& config) {
  Topology t;
  t.partitions = config.get_uint("topology.partitions", 1);
  if (t.partitions == 0) throw Error("config key topology.partitions must be positive");

  t.searchers.resize(t.partitions);
  std::map<std::size_t, BrokerSpec> brokers;
  std::map<std::size_t, wire::Endpoint> blenders;
  static const std::regex searcher_re(R"(topology\.searcher\.(\d+))");
  static const std::regex broker_re(R"(topology\.broker\.(\d+))");
  static const std::regex broker_parts_re(R"(topology\.broker\.(\d+)\.partitions)");
  static const std::regex blender_re(R"(topology\.blender\.(\d+))");

  for (const auto& [key, value] : config.values()) {
    std::smatch m;
    try {
      if (std::regex_match(key, m, searcher_re)) {
        std::size_t p = std::stoul(m[1]);
        if (p >= t.partitions) throw Error("partition out of range");
        std::size_t start = 0;
        while (start <= value.size()) {
          std::size_t end = value.find(',', start);
          if (end == std::string::npos) end = value.size();
          t.searchers[p].push_back(wire::Endpoint::parse(
              trim(std::string_view(value).substr(start, end - start))));
          start = end + 1;
        }
      } else if (std::regex_match(key, m, broker_parts_re)) {
        brokers[std::stoul(m[1])].partitions = parse_id_list(key, value);
      } else if (std::regex_match(key, m, broker_re)) {
        brokers[std::stoul(m[1])].endpoint = wire::Endpoint::parse(value);
      } else if (std::regex_match(key, m, blender_re)) {
        blenders[std::stoul(m[1])] = wire::Endpoint::parse(value);
      }
    } catch (const Error& e) {
      throw Error("config key " + key + ": " + e.what());
    }
  }

  std::vector<int> owner(t.partitions, -1);
  for (auto& [b, spec] : brokers) {
    std::string key = "topology.broker." + std::to_string(b);
    if (spec.endpoint.port == 0) throw Error("missing config key " + key);
    if (spec.partitions.empty()) {
      // A single broker with no explicit list owns everything.
      if (brokers.size() != 1) throw Error("missing config key " + key + ".partitions");
      for (PartitionId p = 0; p < t.partitions; ++p) spec.partitions.push_back(p);
    }
    for (PartitionId p : spec.partitions) {
      if (p >= t.partitions || owner[p] != -1) {
        throw Error("config key " + key + ".partitions: partition " +
                    std::to_string(p) + " is out of range or owned twice");
      }
      owner[p] = static_cast<int>(b);
    }
    t.brokers.push_back(spec);
  }
  if (!t.brokers.empty()) {
    for (PartitionId p = 0; p < t.partitions; ++p) {
      if (owner[p] == -1) {
        throw Error("config key topology.broker.*.partitions: partition " +
                    std::to_string(p) + " has no broker");
      }
    }
  }
  for (auto& [i, ep] : blenders) t.blenders.push_back(ep);
  return t;
}

}  // namespace jvs
