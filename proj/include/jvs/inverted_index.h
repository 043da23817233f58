#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "jvs/core.h"
#include "jvs/epoch.h"

namespace jvs {

/// N append-only inverted lists plus the auxiliary array of published
/// lengths.
///
/// Appends write the slot first and then publish the new length, so a reader
/// that loads the length sees only fully written slots. A full list is
/// replaced by one of twice the capacity: the contents are copied while the
/// old list keeps serving readers, the new list is installed, the pending
/// append lands in it, and the old list is retired to the epoch domain.
class InvertedIndex {
 public:
  static constexpr std::size_t kDefaultCapacity = 1024;

  /// Pinned read view; spans it hands out stay valid while it lives.
  class Reader {
   public:
    /// Prefix of the list's append log as of the length load.
    std::span<const ImageIndex> list(ListId id) const;

   private:
    friend class InvertedIndex;
    explicit Reader(const InvertedIndex* index)
        : index_(index), guard_(index->domain_.pin()) {}
    const InvertedIndex* index_;
    EpochDomain::Guard guard_;
  };

  explicit InvertedIndex(std::size_t n_lists,
                         std::size_t initial_capacity = kDefaultCapacity);
  InvertedIndex(const InvertedIndex&) = delete;
  InvertedIndex& operator=(const InvertedIndex&) = delete;
  ~InvertedIndex();

  /// Writer only.
  void append(ListId id, ImageIndex image);
  /// Writer only. Normally triggered by append on a full list.
  void expand(ListId id);

  Reader reader() const { return Reader(this); }
  std::vector<ImageIndex> scan(ListId id) const;

  std::size_t n_lists() const noexcept { return n_lists_; }
  std::size_t published_length(ListId id) const;
  std::size_t capacity(ListId id) const;
  std::size_t total_len() const;
  std::size_t expansions() const noexcept {
    return expansions_.load(std::memory_order_relaxed);
  }
  std::size_t pending_reclaim() const { return domain_.pending(); }
  std::size_t reclaim() { return domain_.reclaim(); }

  /// Test hook run after the copy into the new list finishes and before it
  /// is installed, while readers are still served by the old list.
  void set_expansion_hook(std::function<void(ListId)> hook) {
    expansion_hook_ = std::move(hook);
  }

  /// "JVSI" snapshot: N, then per list its length and ids (all BE).
  std::string serialize() const;
  static std::unique_ptr<InvertedIndex> deserialize(
      std::string_view data, std::size_t initial_capacity = kDefaultCapacity);
  void save(const std::string& path) const;
  static std::unique_ptr<InvertedIndex> load(
      const std::string& path, std::size_t initial_capacity = kDefaultCapacity);

 private:
  struct ListBlock {
    explicit ListBlock(std::size_t cap)
        : capacity(cap), slots(std::make_unique<ImageIndex[]>(cap)) {}
    std::size_t capacity;
    std::unique_ptr<ImageIndex[]> slots;
  };

  void check_list(ListId id) const;

  std::size_t n_lists_;
  EpochDomain domain_;
  std::unique_ptr<std::atomic<ListBlock*>[]> lists_;
  // Auxiliary position array: published element count per list.
  std::unique_ptr<std::atomic<std::size_t>[]> published_;
  std::atomic<std::size_t> expansions_{0};
  std::function<void(ListId)> expansion_hook_;
};

}  // namespace jvs
