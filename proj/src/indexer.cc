#include "jvs/indexer.h"

#include <filesystem>

#include "jvs/common.h"

namespace jvs {

const ProductRegistry::Product* ProductRegistry::find(
    std::uint64_t product_id) const {
  auto it = products_.find(product_id);
  return it == products_.end() ? nullptr : &it->second;
}

ProductRegistry::Product* ProductRegistry::find(std::uint64_t product_id) {
  auto it = products_.find(product_id);
  return it == products_.end() ? nullptr : &it->second;
}

ProductRegistry::Product& ProductRegistry::insert(std::uint64_t product_id) {
  return products_[product_id];
}

std::optional<ImageIndex> ProductRegistry::image_of(
    const std::string& url) const {
  auto it = urls_.find(url);
  if (it == urls_.end()) return std::nullopt;
  return it->second;
}

void ProductRegistry::register_url(const std::string& url, ImageIndex image) {
  auto [it, inserted] = urls_.emplace(url, image);
  if (!inserted) throw Error("url already registered: " + url);
}

IndexPartition::IndexPartition(std::shared_ptr<const Codebook> codebook,
                               std::shared_ptr<FeatureStore> store,
                               std::shared_ptr<FeatureProvider> provider,
                               const Options& options)
    : codebook_(std::move(codebook)),
      store_(std::move(store)),
      provider_(std::move(provider)),
      options_(options) {
  if (!codebook_ || !codebook_->trained()) {
    throw Error("index partition requires a trained codebook");
  }
  if (!store_) throw Error("index partition requires a feature store");
  if (store_->dim() != codebook_->dim()) {
    throw Error("feature store and codebook disagree on dimension");
  }
  forward_ = std::make_unique<ForwardIndex>(options_.forward);
  inverted_ = std::make_unique<InvertedIndex>(codebook_->n_lists(),
                                              options_.list_capacity);
  vectors_ = std::make_unique<VectorStore>(codebook_->dim(),
                                           options_.forward.initial_entries);
}

IndexerCounters IndexPartition::counters() const noexcept {
  const auto& c = counters_;
  auto ld = [](const std::atomic<std::uint64_t>& a) {
    return a.load(std::memory_order_relaxed);
  };
  return {ld(c.messages),         ld(c.attribute_updates),
          ld(c.image_additions),  ld(c.reused_additions),
          ld(c.image_deletions),  ld(c.dropped_messages),
          ld(c.malformed_messages), ld(c.failed_images)};
}

Ack IndexPartition::handle_message(const UpdateMessage& msg) {
  bump(counters_.messages);
  if (msg.product_id == 0) {
    bump(counters_.malformed_messages);
    return Ack::kMalformed;
  }
  switch (msg.kind) {
    case MessageKind::kAttributeUpdate:
      return handle_update(msg.product_id, msg.changes);
    case MessageKind::kProductAdd: {
      std::vector<std::string> urls;
      urls.reserve(msg.images.size());
      for (const auto& img : msg.images) urls.push_back(img.url);
      return handle_insert(msg.product_id, msg.attributes, urls);
    }
    case MessageKind::kProductRemove:
      return handle_delete(msg.product_id);
  }
  bump(counters_.malformed_messages);
  return Ack::kMalformed;
}

void IndexPartition::set_product_validity(ProductRegistry::Product& p,
                                          bool valid) {
  for (ImageIndex i : p.images) forward_->set_validity(i, valid);
  p.available = valid;
}

Ack IndexPartition::handle_update(std::uint64_t product_id,
                                  std::span<const AttributeChange> changes) {
  ProductRegistry::Product* p = registry_.find(product_id);
  if (p == nullptr) {
    bump(counters_.dropped_messages);
    return Ack::kDropped;
  }
  for (const auto& ch : changes) {
    switch (ch.field) {
      case AttributeField::kSales:
      case AttributeField::kPraise:
      case AttributeField::kPrice: {
        NumericField f = ch.field == AttributeField::kSales ? NumericField::kSales
                         : ch.field == AttributeField::kPraise
                             ? NumericField::kPraise
                             : NumericField::kPrice;
        for (ImageIndex i : p->images) forward_->update_numeric(i, f, ch.value);
        break;
      }
      case AttributeField::kAvailable:
        set_product_validity(*p, ch.value != 0);
        break;
    }
  }
  bump(counters_.attribute_updates, p->images.size());
  return Ack::kApplied;
}

Ack IndexPartition::handle_insert(std::uint64_t product_id,
                                  const ProductAttributes& attrs,
                                  std::span<const std::string> urls) {
  if (urls.empty()) {
    bump(counters_.malformed_messages);
    return Ack::kMalformed;
  }

  if (ProductRegistry::Product* p = registry_.find(product_id)) {
    // Known product coming back: relist it and refresh attributes; its
    // features are already in place.
    for (ImageIndex i : p->images) {
      forward_->update_numeric(i, NumericField::kSales, attrs.sales);
      forward_->update_numeric(i, NumericField::kPraise, attrs.praise);
      forward_->update_numeric(i, NumericField::kPrice, attrs.price);
    }
    set_product_validity(*p, true);
    bump(counters_.image_additions, p->images.size());
    bump(counters_.reused_additions, p->images.size());
    return Ack::kApplied;
  }

  std::vector<ImageIndex> added;
  for (const auto& url : urls) {
    if (url.empty() || registry_.image_of(url)) {
      bump(counters_.failed_images);
      continue;
    }
    FeatureVector feature;
    try {
      feature = store_->get_or_extract(url, *provider_).feature;
    } catch (const std::exception&) {
      bump(counters_.failed_images);
      continue;
    }
    ProductAttributes a = attrs;
    a.product_id = product_id;
    a.url = url;
    // Attributes and vector become readable before the id is published in
    // its inverted list.
    ImageIndex idx = forward_->append_entry(a);
    if (vectors_->append(feature) != idx) {
      throw Error("vector store out of step with forward index");
    }
    inverted_->append(codebook_->assign(feature), idx);
    registry_.register_url(url, idx);
    added.push_back(idx);
  }
  if (added.empty()) {
    bump(counters_.dropped_messages);
    return Ack::kDropped;
  }
  auto& p = registry_.insert(product_id);
  p.images = std::move(added);
  p.available = true;
  bump(counters_.image_additions, p.images.size());
  return Ack::kApplied;
}

Ack IndexPartition::handle_delete(std::uint64_t product_id) {
  ProductRegistry::Product* p = registry_.find(product_id);
  if (p == nullptr) {
    bump(counters_.dropped_messages);
    return Ack::kDropped;
  }
  set_product_validity(*p, false);
  bump(counters_.image_deletions, p->images.size());
  return Ack::kApplied;
}

void IndexPartition::compact() { forward_ = forward_->compacted(); }

namespace {
constexpr const char* kCodebookFile = "codebook.jvsc";
constexpr const char* kForwardFile = "forward.jvsf";
constexpr const char* kInvertedFile = "inverted.jvsi";
constexpr const char* kFeaturesFile = "features.jvsk";

std::string join(const std::string& dir, const char* name) {
  return (std::filesystem::path(dir) / name).string();
}
}  // namespace

void IndexPartition::save(const std::string& dir) const {
  std::filesystem::create_directories(dir);
  codebook_->save(join(dir, kCodebookFile));
  forward_->save(join(dir, kForwardFile));
  inverted_->save(join(dir, kInvertedFile));
  store_->persist(join(dir, kFeaturesFile));
}

std::unique_ptr<IndexPartition> IndexPartition::load(
    const std::string& dir, std::shared_ptr<FeatureProvider> provider,
    const Options& options) {
  auto codebook =
      std::make_shared<const Codebook>(Codebook::load(join(dir, kCodebookFile)));
  std::shared_ptr<FeatureStore> store =
      FeatureStore::load(join(dir, kFeaturesFile));
  auto part = std::make_unique<IndexPartition>(codebook, store,
                                               std::move(provider), options);
  part->forward_ = ForwardIndex::load(join(dir, kForwardFile));
  part->inverted_ = InvertedIndex::load(join(dir, kInvertedFile),
                                        options.list_capacity);
  if (part->inverted_->n_lists() != codebook->n_lists()) {
    throw Error("inverted index has " +
                std::to_string(part->inverted_->n_lists()) +
                " lists, codebook has " + std::to_string(codebook->n_lists()));
  }

  auto fwd = part->forward_->reader();
  const std::size_t n = fwd.size();
  part->vectors_ = std::make_unique<VectorStore>(codebook->dim(), n);
  for (ImageIndex i = 0; i < n; ++i) {
    ProductAttributes a = fwd.entry(i);
    auto feature = store->find(a.url);
    if (!feature) throw Error("no stored feature for " + a.url);
    part->vectors_->append(*feature);
    part->registry_.register_url(a.url, i);
    auto& p = part->registry_.insert(a.product_id);
    if (p.images.empty()) p.available = false;
    p.images.push_back(i);
    if (fwd.is_valid(i)) p.available = true;
  }
  auto inv = part->inverted_->reader();
  for (ListId l = 0; l < part->inverted_->n_lists(); ++l) {
    for (ImageIndex i : inv.list(l)) {
      if (i >= n) throw Error("inverted list references unknown image");
    }
  }
  return part;
}

std::unique_ptr<IndexPartition> full_build(
    std::span<const UpdateMessage> log, std::shared_ptr<FeatureStore> store,
    std::shared_ptr<FeatureProvider> provider,
    std::shared_ptr<const Codebook> codebook,
    const IndexPartition::Options& options) {
  auto part = std::make_unique<IndexPartition>(
      std::move(codebook), std::move(store), std::move(provider), options);
  for (const auto& msg : log) part->handle_message(msg);
  part->compact();
  return part;
}

ReplayReport replay(IndexPartition& partition, MessageSource& source,
                    const AckCallback& on_ack) {
  ReplayReport report;
  while (auto received = source.next()) {
    Ack ack = partition.handle_message(received->message);
    double ms = std::chrono::duration<double, std::milli>(
                    std::chrono::steady_clock::now() - received->received)
                    .count();
    report.latency_ms.push_back(ms);
    if (on_ack) on_ack(received->message, ack, report.applied, ms);
    ++report.applied;
  }
  return report;
}

}  // namespace jvs
