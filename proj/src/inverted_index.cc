#include "jvs/inverted_index.h"

#include <algorithm>

#include "jvs/common.h"

namespace jvs {

namespace {
constexpr std::uint8_t kInvertedVersion = 1;
}

InvertedIndex::InvertedIndex(std::size_t n_lists, std::size_t initial_capacity)
    : n_lists_(n_lists),
      lists_(std::make_unique<std::atomic<ListBlock*>[]>(n_lists)),
      published_(std::make_unique<std::atomic<std::size_t>[]>(n_lists)) {
  if (initial_capacity == 0) throw Error("list capacity must be positive");
  for (std::size_t i = 0; i < n_lists_; ++i) {
    lists_[i].store(new ListBlock(initial_capacity), std::memory_order_relaxed);
    published_[i].store(0, std::memory_order_relaxed);
  }
}

InvertedIndex::~InvertedIndex() {
  for (std::size_t i = 0; i < n_lists_; ++i) {
    delete lists_[i].load(std::memory_order_relaxed);
  }
}

void InvertedIndex::check_list(ListId id) const {
  if (id >= n_lists_) {
    throw Error("list id " + std::to_string(id) + " out of range (" +
                std::to_string(n_lists_) + " lists)");
  }
}

void InvertedIndex::expand(ListId id) {
  check_list(id);
  ListBlock* old = lists_[id].load(std::memory_order_relaxed);
  const std::size_t n = published_[id].load(std::memory_order_relaxed);
  auto* next = new ListBlock(old->capacity * 2);
  // Old slots [0, n) are immutable, so the copy never races the readers.
  std::copy_n(old->slots.get(), n, next->slots.get());
  if (expansion_hook_) expansion_hook_(id);
  lists_[id].store(next, std::memory_order_seq_cst);
  domain_.retire([old] { delete old; });
  expansions_.fetch_add(1, std::memory_order_relaxed);
}

void InvertedIndex::append(ListId id, ImageIndex image) {
  check_list(id);
  const std::size_t n = published_[id].load(std::memory_order_relaxed);
  ListBlock* block = lists_[id].load(std::memory_order_relaxed);
  if (n == block->capacity) {
    // The triggering append waits for the new list to be installed.
    expand(id);
    block = lists_[id].load(std::memory_order_relaxed);
  }
  block->slots[n] = image;
  published_[id].store(n + 1, std::memory_order_release);
}

std::span<const ImageIndex> InvertedIndex::Reader::list(ListId id) const {
  index_->check_list(id);
  // Length first: any block loaded afterwards holds at least that prefix.
  std::size_t n = index_->published_[id].load(std::memory_order_acquire);
  const ListBlock* block = index_->lists_[id].load(std::memory_order_seq_cst);
  return {block->slots.get(), n};
}

std::vector<ImageIndex> InvertedIndex::scan(ListId id) const {
  auto r = reader();
  auto s = r.list(id);
  return {s.begin(), s.end()};
}

std::size_t InvertedIndex::published_length(ListId id) const {
  check_list(id);
  return published_[id].load(std::memory_order_acquire);
}

std::size_t InvertedIndex::capacity(ListId id) const {
  check_list(id);
  auto guard = domain_.pin();
  return lists_[id].load(std::memory_order_seq_cst)->capacity;
}

std::size_t InvertedIndex::total_len() const {
  std::size_t total = 0;
  for (std::size_t i = 0; i < n_lists_; ++i) {
    total += published_[i].load(std::memory_order_acquire);
  }
  return total;
}

std::string InvertedIndex::serialize() const {
  auto r = reader();
  std::string out = "JVSI";
  out.push_back(static_cast<char>(kInvertedVersion));
  bytes::put_u32_be(out, static_cast<std::uint32_t>(n_lists_));
  for (std::size_t i = 0; i < n_lists_; ++i) {
    auto ids = r.list(static_cast<ListId>(i));
    bytes::put_u64_be(out, ids.size());
    for (ImageIndex v : ids) bytes::put_u64_be(out, v);
  }
  return out;
}

std::unique_ptr<InvertedIndex> InvertedIndex::deserialize(
    std::string_view data, std::size_t initial_capacity) {
  bytes::Reader in(data);
  in.expect_magic("JVSI");
  std::size_t at = in.offset();
  if (in.u8() != kInvertedVersion) {
    throw FormatError("unsupported inverted-index version", at);
  }
  std::uint32_t n = in.u32_be();
  if (n > data.size() / 8 + 1) {
    throw FormatError("list count exceeds file size", in.offset());
  }
  auto out = std::make_unique<InvertedIndex>(n, initial_capacity);
  for (std::uint32_t l = 0; l < n; ++l) {
    std::uint64_t len = in.u64_be();
    if (len > (data.size() - in.offset()) / 8) {
      throw FormatError("list length exceeds file size", in.offset());
    }
    for (std::uint64_t j = 0; j < len; ++j) out->append(l, in.u64_be());
  }
  in.expect_end();
  return out;
}

void InvertedIndex::save(const std::string& path) const {
  write_file_atomic(path, serialize());
}

std::unique_ptr<InvertedIndex> InvertedIndex::load(
    const std::string& path, std::size_t initial_capacity) {
  return deserialize(read_file(path), initial_capacity);
}

}  // namespace jvs
