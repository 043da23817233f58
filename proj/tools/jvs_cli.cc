#include <algorithm>
#include <csignal>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "jvs/bench.h"
#include "jvs/cluster.h"
#include "jvs/common.h"
#include "jvs/config.h"
#include "jvs/node.h"
#include "jvs/stats.h"
#include "jvs/wire.h"

namespace {

using namespace jvs;

/// Pulls `--dotted.key value` pairs out of argv; they override config keys.
std::vector<std::pair<std::string, std::string>> take_overrides(
    std::vector<std::string>& args) {
  std::vector<std::pair<std::string, std::string>> out;
  std::vector<std::string> rest;
  for (std::size_t i = 0; i < args.size(); ++i) {
    const std::string& a = args[i];
    if (a.rfind("--", 0) == 0 && a.find('.') != std::string::npos) {
      std::string key = a.substr(2);
      std::string value;
      if (auto eq = key.find('='); eq != std::string::npos) {
        value = key.substr(eq + 1);
        key.resize(eq);
      } else if (i + 1 < args.size()) {
        value = args[++i];
      } else {
        throw Error("missing value for --" + key);
      }
      out.emplace_back(std::move(key), std::move(value));
    } else {
      rest.push_back(a);
    }
  }
  args = std::move(rest);
  return out;
}

Config load_config(const std::string& path,
                   const std::vector<std::pair<std::string, std::string>>& overrides) {
  Config c = path.empty() ? Config{} : Config::load(path);
  for (const auto& [k, v] : overrides) c.set(k, v);
  return c;
}

void print(const std::string& key, const std::string& value) {
  std::cout << key << '\t' << value << '\n';
}

wire::Endpoint blender_of(const Config& config) {
  Topology topo = Topology::from_config(config);
  if (topo.blenders.empty()) throw Error("config key topology.blender.0 is required");
  return topo.blenders.front();
}

int run_serve(const Config& config, const std::string& role_text) {
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  auto node = node::start(node::parse_role(role_text), config);
  print("role", node::role_name(node->role()));
  print("port", std::to_string(node->port()));
  std::cout.flush();
  int sig = 0;
  sigwait(&signals, &sig);
  node->stop();
  return 0;
}

int run_load(const Config& config, const std::string& log_path) {
  MessageLog log = read_message_log(log_path, /*strict=*/true);
  ClusterOptions options = ClusterOptions::from_config(config);
  auto provider = std::make_shared<SyntheticProvider>(options.dim,
                                                      config.get_uint("feature.seed", 0));
  auto cluster = LocalCluster::build(log.messages, provider, options);
  const std::string dir = config.get_string("data.dir", ".");
  cluster->save(dir);
  print("messages", std::to_string(log.messages.size()));
  print("partitions", std::to_string(cluster->partitions()));
  print("n_lists", std::to_string(cluster->codebook()->n_lists()));
  for (PartitionId p = 0; p < cluster->partitions(); ++p) {
    const IndexPartition& part = cluster->partition(p);
    const std::string key = "partition." + std::to_string(p);
    print(key + ".entries", std::to_string(part.forward().size()));
    print(key + ".valid", std::to_string(part.forward().valid_count()));
    print(key + ".products", std::to_string(part.registry().products()));
    print(key + ".dir", partition_dir(dir, p));
  }
  return 0;
}

int run_query(const Config& config, const std::string& url, const std::string& vector,
              std::size_t k, std::size_t nprobe) {
  if (url.empty() == vector.empty()) throw Error("give exactly one of --url or --vector");
  QueryRequest q;
  if (!url.empty()) {
    q.query = url;
  } else {
    q.query = wire::parse_vector(vector);
  }
  q.k = k;
  q.nprobe = nprobe;
  auto timeout = std::chrono::milliseconds(config.get_uint("search.deadline_ms", 500) * 4);
  PartialResult r = wire::parse_result(wire::call(blender_of(config), wire::query_message(q), timeout));
  print("count", std::to_string(r.hits.size()));
  print("degraded", r.degraded() ? "1" : "0");
  for (std::size_t i = 0; i < r.hits.size(); ++i) {
    const SearchHit& h = r.hits[i];
    const std::string key = "hit." + std::to_string(i + 1);
    print(key + ".url", h.attributes.url);
    print(key + ".product", std::to_string(h.attributes.product_id));
    print(key + ".partition", std::to_string(h.partition_id));
    print(key + ".image", std::to_string(h.image_index));
    print(key + ".distance", wire::format_double(h.distance));
    print(key + ".score", wire::format_double(h.score));
  }
  return 0;
}

int run_bench_cmd(const Config& config, std::size_t users, double seconds,
                  double update_rate) {
  ClusterOptions options = ClusterOptions::from_config(config);
  Topology topo = Topology::from_config(config);
  const std::string dir = config.get_string("data.dir", ".");
  auto provider = std::make_shared<SyntheticProvider>(options.dim,
                                                      config.get_uint("feature.seed", 0));
  Workload w;
  w.users = users;
  w.seconds = seconds;
  w.k = config.get_uint("bench.k", 10);
  w.nprobe = config.get_uint("bench.nprobe", config.get_uint("query.nprobe", 1));
  w.update_rate = update_rate;
  w.seed = config.get_uint("bench.seed", 1);

  // Query set and update stream are derived from the persisted snapshots.
  std::vector<FeatureVector> base;
  UpdateStreamGenerator stream(w.seed, 0, "bench://");
  for (PartitionId p = 0; p < options.partitions; ++p) {
    IndexPartition::Options po;
    po.partition_id = p;
    auto part = IndexPartition::load(partition_dir(dir, p), provider, po);
    for (const auto& rec : part->store().records()) base.push_back(rec.feature);
    for (const auto& [pid, product] : part->registry().all()) {
      if (!product.available || product.images.empty()) continue;
      ProductAttributes a = part->forward().get_entry(product.images.front());
      std::vector<std::string> urls;
      for (ImageIndex i : product.images) urls.push_back(part->forward().get_entry(i).url);
      stream.track(UpdateMessage::add(pid, a.sales, a.praise, a.price, std::move(urls)));
    }
  }
  if (base.empty()) {
    // Empty index: query with random unit vectors so the topology is still exercised.
    base.push_back(synthetic_extract("bench://empty", options.dim, w.seed));
  }
  auto queries = make_query_set(base, config.get_uint("bench.queries", 1000),
                                config.get_double("bench.sigma", 0.05), w.seed);

  const wire::Endpoint blender = blender_of(config);
  const auto timeout = std::chrono::milliseconds(config.get_uint("search.deadline_ms", 500) * 4);
  QueryFn query = [&](const FeatureVector& v) {
    return wire::parse_result(wire::call(blender, wire::query_message(v, w.k, w.nprobe), timeout));
  };
  MessageRouter router(options.partitions);
  UpdateFn apply = [&](const UpdateMessage& m) {
    for (auto& [p, part] : router.route(m)) {
      for (const auto& ep : topo.searchers[p]) {
        node::parse_ack(wire::call(ep, node::update_message(part), timeout));
      }
    }
  };
  // Fail fast on an unreachable topology.
  wire::call(blender, wire::ping_message(), timeout);
  BenchReport r = run_bench(w, queries, query, apply, &stream);
  std::cout << format_report(r);
  return 0;
}

int run_stats(const std::string& path) {
  auto records = parse_counter_log(read_file(path));
  std::cout << format_stats(aggregate_stats(records));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    std::vector<std::string> args(argv + 1, argv + argc);
    auto overrides = take_overrides(args);

    CLI::App app{"Real-time visual search index"};
    app.require_subcommand(1);
    std::string config_path, role, log_path, url, vector;
    std::size_t k = 10, nprobe = 1, users = 16;
    double seconds = 10, update_rate = 0;

    auto* serve = app.add_subcommand("serve", "Run a searcher, broker or blender node");
    serve->add_option("--role", role, "searcher | broker | blender")->required();
    serve->add_option("--config", config_path)->required();

    auto* load = app.add_subcommand("load", "Build and persist index snapshots from a message log");
    load->add_option("--config", config_path)->required();
    load->add_option("--log", log_path)->required();

    auto* query = app.add_subcommand("query", "Query the blender");
    query->add_option("--config", config_path)->required();
    query->add_option("--url", url);
    query->add_option("--vector", vector, "comma-separated floats");
    query->add_option("--k", k);
    query->add_option("--nprobe", nprobe);

    auto* bench = app.add_subcommand("bench", "Drive concurrent query load");
    bench->add_option("--config", config_path)->required();
    bench->add_option("--users", users);
    bench->add_option("--seconds", seconds);
    bench->add_option("--update-rate", update_rate, "update messages per second");

    auto* stats = app.add_subcommand("stats", "Aggregate an indexer counter log");
    stats->add_option("--log", log_path)->required();

    std::reverse(args.begin(), args.end());
    try {
      app.parse(args);
    } catch (const CLI::ParseError& e) {
      return app.exit(e);
    }

    if (*stats) return run_stats(log_path);
    Config config = load_config(config_path, overrides);
    if (*serve) return run_serve(config, role);
    if (*load) return run_load(config, log_path);
    if (*query) {
      if (query->count("--k") == 0) k = config.get_uint("query.k", k);
      if (query->count("--nprobe") == 0) nprobe = config.get_uint("query.nprobe", nprobe);
      return run_query(config, url, vector, k, nprobe);
    }
    if (*bench) return run_bench_cmd(config, users, seconds, update_rate);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
