#include "jvs/cluster.h"

#include <filesystem>
#include <unordered_set>

#include "jvs/common.h"

namespace jvs {

ClusterOptions ClusterOptions::from_config(const Config& config) {
  ClusterOptions o;
  o.dim = config.get_uint("index.dim", o.dim);
  o.n_lists = config.get_uint("index.n_lists", o.n_lists);
  o.max_iters = config.get_uint("index.max_iters", o.max_iters);
  o.kmeans_seed = config.get_uint("index.seed", o.kmeans_seed);
  o.train_sample = config.get_uint("index.train_sample", o.train_sample);
  o.list_capacity = config.get_uint("index.list_capacity", o.list_capacity);
  o.partitions = config.get_uint("topology.partitions", o.partitions);
  o.broker_deadline = std::chrono::milliseconds(
      config.get_uint("search.deadline_ms", o.broker_deadline.count()));
  if (o.dim == 0) throw Error("config key index.dim must be positive");
  if (o.partitions == 0) throw Error("config key topology.partitions must be positive");
  if (o.list_capacity == 0) throw Error("config key index.list_capacity must be positive");
  return o;
}

std::shared_ptr<const Codebook> placeholder_codebook(std::size_t dim) {
  return std::make_shared<const Codebook>(dim, std::vector<float>(dim, 0.0f));
}

std::shared_ptr<const Codebook> train_from_log(
    std::span<const UpdateMessage> log,
    std::span<const std::shared_ptr<FeatureStore>> stores,
    FeatureProvider& provider, const ClusterOptions& options,
    TrainTrace* trace) {
  std::unordered_set<std::string> seen;
  std::vector<FeatureVector> features;
  for (const auto& msg : log) {
    if (msg.kind != MessageKind::kProductAdd) continue;
    for (const auto& img : msg.images) {
      if (!seen.insert(img.url).second) continue;
      auto& store = *stores[partition_of(img.url, stores.size())];
      try {
        features.push_back(store.get_or_extract(img.url, provider).feature);
      } catch (const std::exception&) {
        // Failed images are skipped here and again by the indexer.
      }
    }
  }
  if (features.empty()) return placeholder_codebook(options.dim);

  std::vector<FeatureVector> sample;
  if (features.size() > options.train_sample) {
    for (std::size_t i : training_sample(features.size(), options.train_sample,
                                         options.kmeans_seed)) {
      sample.push_back(features[i]);
    }
  } else {
    sample = std::move(features);
  }
  TrainOptions t;
  t.n_lists = options.n_lists != 0 ? options.n_lists : default_n_lists(seen.size());
  t.seed = options.kmeans_seed;
  t.max_iters = options.max_iters;
  return std::make_shared<const Codebook>(train(sample, t, trace));
}

std::string partition_dir(const std::string& data_dir, PartitionId p) {
  return (std::filesystem::path(data_dir) / ("partition-" + std::to_string(p))).string();
}

LocalCluster::LocalCluster(std::vector<std::shared_ptr<IndexPartition>> partitions,
                           std::shared_ptr<const Codebook> codebook,
                           MessageRouter router,
                           std::shared_ptr<FeatureProvider> provider,
                           const ClusterOptions& options)
    : partitions_(std::move(partitions)),
      codebook_(std::move(codebook)),
      router_(std::move(router)) {
  const std::size_t n_brokers = std::max<std::size_t>(
      1, std::min(options.brokers, partitions_.size()));
  std::vector<std::map<PartitionId, Replicas>> owned(n_brokers);
  for (PartitionId p = 0; p < partitions_.size(); ++p) {
    owned[p % n_brokers][p] = {std::make_shared<LocalSearcher>(partitions_[p])};
  }
  std::vector<std::shared_ptr<BrokerEndpoint>> brokers;
  for (auto& o : owned) {
    brokers.push_back(std::make_shared<LocalBroker>(
        std::make_shared<Broker>(std::move(o), options.broker_deadline)));
  }
  blender_ = std::make_shared<Blender>(
      std::move(brokers), std::move(provider),
      std::make_shared<FeatureStore>(options.dim), options.blender_deadline);
}

std::unique_ptr<LocalCluster> LocalCluster::build(
    std::span<const UpdateMessage> log, std::shared_ptr<FeatureProvider> provider,
    const ClusterOptions& options, TrainTrace* trace) {
  if (provider->dim() != options.dim) throw Error("provider dimension differs from index.dim");
  std::vector<std::shared_ptr<FeatureStore>> stores;
  for (std::size_t p = 0; p < options.partitions; ++p) {
    stores.push_back(std::make_shared<FeatureStore>(options.dim));
  }
  auto codebook = train_from_log(log, stores, *provider, options, trace);

  MessageRouter router(options.partitions);
  std::vector<std::vector<UpdateMessage>> routed(options.partitions);
  for (const auto& msg : log) {
    for (auto& [p, part] : router.route(msg)) routed[p].push_back(std::move(part));
  }
  std::vector<std::shared_ptr<IndexPartition>> parts;
  for (PartitionId p = 0; p < options.partitions; ++p) {
    IndexPartition::Options po;
    po.partition_id = p;
    po.list_capacity = options.list_capacity;
    parts.push_back(full_build(routed[p], stores[p], provider, codebook, po));
  }
  return std::unique_ptr<LocalCluster>(new LocalCluster(
      std::move(parts), std::move(codebook), std::move(router), std::move(provider),
      options));
}

std::unique_ptr<LocalCluster> LocalCluster::load(
    const std::string& dir, std::shared_ptr<FeatureProvider> provider,
    const ClusterOptions& options) {
  MessageRouter router(options.partitions);
  std::vector<std::shared_ptr<IndexPartition>> parts;
  for (PartitionId p = 0; p < options.partitions; ++p) {
    IndexPartition::Options po;
    po.partition_id = p;
    po.list_capacity = options.list_capacity;
    std::shared_ptr<IndexPartition> part =
        IndexPartition::load(partition_dir(dir, p), provider, po);
    for (const auto& [pid, product] : part->registry().all()) router.place(pid, p);
    parts.push_back(std::move(part));
  }
  auto codebook = parts.front()->codebook_ptr();
  for (const auto& part : parts) {
    if (part->codebook().data() != codebook->data()) {
      throw Error("partitions in " + dir + " were trained with different codebooks");
    }
  }
  return std::unique_ptr<LocalCluster>(new LocalCluster(
      std::move(parts), std::move(codebook), std::move(router), std::move(provider),
      options));
}

void LocalCluster::save(const std::string& dir) const {
  for (PartitionId p = 0; p < partitions_.size(); ++p) {
    partitions_[p]->save(partition_dir(dir, p));
  }
}

PartialResult LocalCluster::query(const QueryRequest& request) {
  return blender_->query(request);
}

std::vector<std::pair<PartitionId, Ack>> LocalCluster::apply(const UpdateMessage& msg) {
  std::lock_guard lock(writer_mu_);
  std::vector<std::pair<PartitionId, Ack>> acks;
  for (auto& [p, part] : router_.route(msg)) {
    acks.emplace_back(p, partitions_[p]->handle_message(part));
  }
  return acks;
}

}  // namespace jvs
