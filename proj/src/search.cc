#include "jvs/search.h"

#include <algorithm>
#include <cmath>
#include <future>
#include <queue>
#include <thread>

#include "jvs/common.h"

namespace jvs {

namespace {

// Runs `fn` on its own detached thread. Unlike std::async, abandoning the
// future after a missed deadline does not block the caller.
template <typename F>
auto launch_detached(F fn) -> std::future<std::invoke_result_t<F>> {
  using R = std::invoke_result_t<F>;
  std::packaged_task<R()> task(std::move(fn));
  auto fut = task.get_future();
  std::thread(std::move(task)).detach();
  return fut;
}

template <typename T>
std::optional<T> await(std::future<T>& fut,
                       std::chrono::steady_clock::time_point deadline) {
  if (fut.wait_until(deadline) != std::future_status::ready) return std::nullopt;
  try {
    return fut.get();
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

}  // namespace

PartitionId partition_of(std::string_view url, std::size_t partitions) {
  if (partitions == 0) throw Error("partition count must be positive");
  return static_cast<PartitionId>(hash64(url) % partitions);
}

MessageRouter::MessageRouter(std::size_t partitions) : partitions_(partitions) {
  if (partitions_ == 0) throw Error("partition count must be positive");
}

std::vector<std::pair<PartitionId, UpdateMessage>> MessageRouter::route(
    const UpdateMessage& msg) {
  std::vector<std::pair<PartitionId, UpdateMessage>> out;
  auto known = placement_.find(msg.product_id);
  if (msg.kind == MessageKind::kProductAdd && known == placement_.end()) {
    std::vector<std::vector<ImageRef>> by_partition(partitions_);
    for (const auto& img : msg.images) {
      by_partition[partition_of(img.url, partitions_)].push_back(img);
    }
    auto& placed = placement_[msg.product_id];
    placed.resize(partitions_, false);
    for (PartitionId p = 0; p < partitions_; ++p) {
      if (by_partition[p].empty()) continue;
      placed[p] = true;
      UpdateMessage part = msg;
      part.images = std::move(by_partition[p]);
      out.emplace_back(p, std::move(part));
    }
    if (msg.images.empty()) {  // let a partition count it
      placed[0] = true;
      out.emplace_back(0, msg);
    }
    return out;
  }
  // A re-add goes where the product already lives; its urls are ignored
  // there just as on a single partition.
  for (PartitionId p = 0; p < partitions_; ++p) {
    if (known == placement_.end() || known->second[p]) out.emplace_back(p, msg);
  }
  return out;
}

void MessageRouter::place(std::uint64_t product_id, PartitionId partition) {
  if (partition >= partitions_) throw Error("partition out of range");
  auto& placed = placement_[product_id];
  placed.resize(partitions_, false);
  placed[partition] = true;
}

double rank_score(const SearchHit& hit, const RankWeights& w) {
  const auto& a = hit.attributes;
  return w.sim * (1.0 / (1.0 + hit.distance)) +
         w.sales * std::log1p(static_cast<double>(a.sales)) +
         w.praise * std::log1p(static_cast<double>(a.praise)) -
         w.price * std::log1p(static_cast<double>(a.price));
}

std::vector<SearchHit> rank(std::vector<SearchHit> hits, const RankWeights& w) {
  for (auto& h : hits) h.score = rank_score(h, w);
  std::sort(hits.begin(), hits.end(), [](const SearchHit& a, const SearchHit& b) {
    if (a.score != b.score) return a.score > b.score;
    return hit_less(a, b);
  });
  return hits;
}

std::vector<SearchHit> searcher_query(const IndexPartition& partition,
                                      std::span<const float> query,
                                      std::size_t k, std::size_t nprobe) {
  const Codebook& cb = partition.codebook();
  if (!cb.trained()) throw Error("searcher has no trained codebook");
  if (query.size() != cb.dim()) {
    throw Error("dimension mismatch: query " + std::to_string(query.size()) +
                ", index " + std::to_string(cb.dim()));
  }
  if (k == 0) throw Error("k must be positive");
  const std::vector<ListId> lists = cb.nearest_lists(query, nprobe);

  struct Candidate {
    double distance;
    ImageIndex image;
  };
  auto worse = [](const Candidate& a, const Candidate& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    return a.image < b.image;
  };
  // Max-heap on (distance, image): top is the current k-th best.
  std::priority_queue<Candidate, std::vector<Candidate>, decltype(worse)> best(
      worse);

  auto inv = partition.inverted().reader();
  auto fwd = partition.forward().reader();
  auto vec = partition.vectors().reader();
  const std::size_t dim = cb.dim();
  for (ListId l : lists) {
    for (ImageIndex id : inv.list(l)) {
      if (!fwd.is_valid(id)) continue;
      Candidate c{std::sqrt(squared_distance_unchecked(query.data(),
                                                       vec.row(id), dim)),
                  id};
      if (best.size() < k) {
        best.push(c);
      } else if (worse(c, best.top())) {
        best.pop();
        best.push(c);
      }
    }
  }

  std::vector<SearchHit> out(best.size());
  for (std::size_t i = out.size(); i-- > 0;) {
    const Candidate& c = best.top();
    out[i].image_index = c.image;
    out[i].partition_id = partition.partition_id();
    out[i].distance = c.distance;
    out[i].attributes = fwd.entry(c.image);
    best.pop();
  }
  return out;
}

Broker::Broker(std::map<PartitionId, Replicas> partitions,
               std::chrono::milliseconds deadline)
    : partitions_(std::move(partitions)), deadline_(deadline) {
  if (partitions_.empty()) throw Error("broker owns no partitions");
  for (const auto& [id, replicas] : partitions_) {
    if (replicas.empty()) {
      throw Error("partition " + std::to_string(id) + " has no replicas");
    }
  }
}

std::vector<PartitionId> Broker::partitions() const {
  std::vector<PartitionId> out;
  for (const auto& [id, replicas] : partitions_) out.push_back(id);
  return out;
}

PartialResult Broker::query(const FeatureVector& q, std::size_t k,
                            std::size_t nprobe) {
  using HitList = std::vector<SearchHit>;
  const std::size_t rot = rotation_.fetch_add(1, std::memory_order_relaxed);

  struct Attempt {
    PartitionId partition;
    const Replicas* replicas;
    std::future<HitList> fut;
  };
  auto launch = [&](const Replicas& replicas, std::size_t which) {
    std::shared_ptr<SearcherEndpoint> ep = replicas[which % replicas.size()];
    return launch_detached([ep, q, k, nprobe] { return ep->search(q, k, nprobe); });
  };

  std::vector<Attempt> first;
  for (const auto& [id, replicas] : partitions_) {
    first.push_back({id, &replicas, launch(replicas, rot)});
  }
  std::vector<HitList> partials;
  std::vector<Attempt> retries;
  PartialResult result;
  auto deadline = std::chrono::steady_clock::now() + deadline_;
  for (auto& a : first) {
    if (auto hits = await(a.fut, deadline)) {
      partials.push_back(std::move(*hits));
    } else if (a.replicas->size() > 1) {
      retries.push_back({a.partition, a.replicas, launch(*a.replicas, rot + 1)});
    } else {
      result.missing.push_back(a.partition);
    }
  }
  deadline = std::chrono::steady_clock::now() + deadline_;
  for (auto& a : retries) {
    if (auto hits = await(a.fut, deadline)) {
      partials.push_back(std::move(*hits));
    } else {
      result.missing.push_back(a.partition);
    }
  }
  if (result.missing.size() == partitions_.size()) {
    throw Error("broker: all partitions failed");
  }
  std::sort(result.missing.begin(), result.missing.end());
  result.hits = merge_top_k(partials, k);
  return result;
}

Blender::Blender(std::vector<std::shared_ptr<BrokerEndpoint>> brokers,
                 std::shared_ptr<FeatureProvider> provider,
                 std::shared_ptr<FeatureStore> store,
                 std::chrono::milliseconds deadline)
    : brokers_(std::move(brokers)),
      provider_(std::move(provider)),
      store_(std::move(store)),
      deadline_(deadline) {
  if (brokers_.empty()) throw Error("blender has no brokers");
}

FeatureVector Blender::featurize(const QueryRequest& request) {
  if (const auto* v = std::get_if<FeatureVector>(&request.query)) return *v;
  const auto& url = std::get<std::string>(request.query);
  if (store_) {
    if (!provider_) {
      if (auto f = store_->find(url)) return *f;
      throw Error("no feature for url " + url);
    }
    return store_->get_or_extract(url, *provider_).feature;
  }
  if (!provider_) throw Error("blender has no feature provider");
  return provider_->extract(url);
}

PartialResult Blender::query(const QueryRequest& request) {
  if (request.k == 0) throw Error("k must be positive");
  if (request.nprobe == 0) throw Error("nprobe must be positive");
  FeatureVector q = featurize(request);

  std::vector<std::future<PartialResult>> futs;
  for (const auto& b : brokers_) {
    std::shared_ptr<BrokerEndpoint> ep = b;
    futs.push_back(launch_detached(
        [ep, q, k = request.k, nprobe = request.nprobe] {
          return ep->search(q, k, nprobe);
        }));
  }
  PartialResult result;
  std::vector<std::vector<SearchHit>> partials;
  std::size_t failed = 0;
  auto deadline = std::chrono::steady_clock::now() + deadline_;
  for (std::size_t i = 0; i < futs.size(); ++i) {
    if (auto r = await(futs[i], deadline)) {
      partials.push_back(std::move(r->hits));
      result.missing.insert(result.missing.end(), r->missing.begin(),
                            r->missing.end());
    } else {
      ++failed;
      auto owned = brokers_[i]->partitions();
      result.missing.insert(result.missing.end(), owned.begin(), owned.end());
    }
  }
  if (failed == brokers_.size()) throw Error("blender: all brokers failed");
  std::sort(result.missing.begin(), result.missing.end());
  result.missing.erase(std::unique(result.missing.begin(), result.missing.end()),
                       result.missing.end());
  result.hits = rank(merge_top_k(partials, request.k), request.weights);
  return result;
}

}  // namespace jvs
