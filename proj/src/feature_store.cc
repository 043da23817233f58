#include "jvs/feature_store.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <mutex>

#include "jvs/common.h"

namespace jvs {

namespace {
constexpr std::uint8_t kStoreVersion = 1;

std::int64_t wall_clock_seconds() {
  return std::chrono::duration_cast<std::chrono::seconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}
}  // namespace

FeatureVector synthetic_extract(std::string_view url, std::size_t dim,
                                std::uint64_t seed) {
  if (dim == 0) throw Error("synthetic_extract: dim must be positive");
  SplitMix64 rng(hash64(url) ^ seed);
  std::vector<double> raw(dim);
  double norm2 = 0.0;
  for (auto& v : raw) {
    v = 2.0 * rng.uniform() - 1.0;
    norm2 += v * v;
  }
  double inv = norm2 > 0.0 ? 1.0 / std::sqrt(norm2) : 0.0;
  std::vector<float> out(dim);
  for (std::size_t i = 0; i < dim; ++i) {
    out[i] = static_cast<float>(raw[i] * inv);
  }
  return FeatureVector(std::move(out));
}

FeatureStore::FeatureStore(std::size_t dim, Clock clock)
    : dim_(dim), clock_(clock ? std::move(clock) : Clock(wall_clock_seconds)) {
  if (dim_ == 0) throw Error("feature store dim must be positive");
}

FeatureStore::Lookup FeatureStore::get_or_extract(std::string_view url,
                                                  FeatureProvider& provider) {
  if (url.empty()) throw Error("empty url");
  {
    std::shared_lock lock(mu_);
    if (auto it = records_.find(url); it != records_.end()) {
      hits_.fetch_add(1, std::memory_order_relaxed);
      return {it->second.feature, true};
    }
  }
  FeatureVector f = provider.extract(url);
  if (f.dim() != dim_) {
    throw Error("provider returned dim " + std::to_string(f.dim()) +
                ", store expects " + std::to_string(dim_));
  }
  extractions_.fetch_add(1, std::memory_order_relaxed);
  std::unique_lock lock(mu_);
  // A concurrent caller may have stored this url first; keep its result.
  auto [it, inserted] =
      records_.try_emplace(std::string(url), Entry{std::move(f), clock_()});
  return {it->second.feature, false};
}

std::optional<FeatureVector> FeatureStore::find(std::string_view url) const {
  std::shared_lock lock(mu_);
  if (auto it = records_.find(url); it != records_.end()) {
    return it->second.feature;
  }
  return std::nullopt;
}

void FeatureStore::put(FeatureRecord record) {
  if (record.feature.dim() != dim_) throw Error("record dimension mismatch");
  std::unique_lock lock(mu_);
  records_.insert_or_assign(std::move(record.url),
                            Entry{std::move(record.feature), record.extracted_at});
}

std::size_t FeatureStore::size() const {
  std::shared_lock lock(mu_);
  return records_.size();
}

ExtractionCounter FeatureStore::counters() const noexcept {
  return {extractions_.load(std::memory_order_relaxed),
          hits_.load(std::memory_order_relaxed)};
}

std::vector<FeatureRecord> FeatureStore::records() const {
  std::vector<FeatureRecord> out;
  {
    std::shared_lock lock(mu_);
    out.reserve(records_.size());
    for (const auto& [url, e] : records_) {
      out.push_back({url, e.feature, e.extracted_at});
    }
  }
  std::sort(out.begin(), out.end(),
            [](const auto& a, const auto& b) { return a.url < b.url; });
  return out;
}

std::string FeatureStore::serialize() const {
  auto recs = records();
  std::string out = "JVSK";
  out.push_back(static_cast<char>(kStoreVersion));
  bytes::put_u32_be(out, static_cast<std::uint32_t>(dim_));
  bytes::put_u64_be(out, recs.size());
  for (const auto& r : recs) {
    bytes::put_u32_be(out, static_cast<std::uint32_t>(r.url.size()));
    out += r.url;
    bytes::put_u64_be(out, static_cast<std::uint64_t>(r.extracted_at));
    for (float v : r.feature.components()) bytes::put_f32_le(out, v);
  }
  return out;
}

std::unique_ptr<FeatureStore> FeatureStore::deserialize(std::string_view data) {
  bytes::Reader in(data);
  in.expect_magic("JVSK");
  std::size_t at = in.offset();
  if (in.u8() != kStoreVersion) {
    throw FormatError("unsupported feature store version", at);
  }
  at = in.offset();
  std::uint32_t dim = in.u32_be();
  if (dim == 0) throw FormatError("feature store with dim 0", at);
  std::uint64_t count = in.u64_be();
  auto store = std::make_unique<FeatureStore>(dim);
  for (std::uint64_t i = 0; i < count; ++i) {
    std::size_t record_at = in.offset();
    std::uint32_t len = in.u32_be();
    std::string url(in.take(len));
    auto ts = static_cast<std::int64_t>(in.u64_be());
    std::vector<float> comps(dim);
    for (auto& c : comps) c = in.f32_le();
    for (float c : comps) {
      if (!std::isfinite(c)) throw FormatError("non-finite component", record_at);
    }
    if (store->records_.count(url) != 0) {
      throw FormatError("duplicate url " + url, record_at);
    }
    store->records_.emplace(std::move(url),
                            Entry{FeatureVector(std::move(comps)), ts});
  }
  in.expect_end();
  return store;
}

void FeatureStore::persist(const std::string& path) const {
  write_file_atomic(path, serialize());
}

std::unique_ptr<FeatureStore> FeatureStore::load(const std::string& path) {
  return deserialize(read_file(path));
}

}  // namespace jvs
