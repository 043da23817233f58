#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>

#include "jvs/core.h"
#include "jvs/epoch.h"
#include "jvs/growable.h"

namespace jvs {

enum class NumericField { kProductId, kSales, kPraise, kPrice };

/// Per-image attribute storage with its validity bitmap.
///
/// Numeric attributes live in fixed-width slots; urls are appended to a
/// byte buffer and referenced by (offset, length). One writer mutates the
/// index; readers never block and observe each field either before or after
/// any single update.
class ForwardIndex {
 public:
  struct Options {
    std::size_t initial_entries = 4096;
    std::size_t initial_buffer_bytes = 64 * 1024;
  };

  /// Pinned read view. Blocks reachable through it stay alive until the
  /// view is destroyed.
  class Reader {
   public:
    std::size_t size() const noexcept { return index_->size(); }
    bool is_valid(ImageIndex i) const;
    std::uint64_t numeric(ImageIndex i, NumericField f) const;
    std::string url(ImageIndex i) const;
    ProductAttributes entry(ImageIndex i) const;

   private:
    friend class ForwardIndex;
    explicit Reader(const ForwardIndex* index)
        : index_(index), guard_(index->domain_.pin()) {}
    const ForwardIndex* index_;
    EpochDomain::Guard guard_;
  };

  ForwardIndex() : ForwardIndex(Options{}) {}
  explicit ForwardIndex(const Options& options);
  ForwardIndex(const ForwardIndex&) = delete;
  ForwardIndex& operator=(const ForwardIndex&) = delete;

  // Writer operations.
  ImageIndex append_entry(const ProductAttributes& attrs);
  void update_numeric(ImageIndex i, NumericField field, std::uint64_t value);
  void update_varlen(ImageIndex i, std::string_view url);
  void set_validity(ImageIndex i, bool valid);

  // Reader operations; each pins internally.
  Reader reader() const { return Reader(this); }
  bool is_valid(ImageIndex i) const { return reader().is_valid(i); }
  ProductAttributes get_entry(ImageIndex i) const { return reader().entry(i); }

  std::size_t size() const noexcept {
    return count_.load(std::memory_order_acquire);
  }
  std::size_t buffer_length() const noexcept {
    return buffer_len_.load(std::memory_order_acquire);
  }
  std::size_t entry_capacity() const noexcept { return slots_.capacity(); }
  std::size_t valid_count() const;

  /// Copy whose buffer holds only the current url of each entry. Must be
  /// called while no writer is active.
  std::unique_ptr<ForwardIndex> compacted() const;

  /// "JVSF" snapshot: entries with their current urls, then the bitmap.
  std::string serialize() const;
  static std::unique_ptr<ForwardIndex> deserialize(std::string_view data);
  void save(const std::string& path) const;
  static std::unique_ptr<ForwardIndex> load(const std::string& path);

  const EpochDomain& domain() const noexcept { return domain_; }

 private:
  struct Slot {
    std::uint64_t product_id;
    std::uint64_t sales;
    std::uint64_t praise;
    std::uint64_t price;
    std::uint64_t url_ref;  // offset << kLengthBits | length
  };
  static constexpr unsigned kLengthBits = 24;

  void check_index(ImageIndex i) const;
  std::uint64_t append_bytes(std::string_view bytes);
  static std::uint64_t* field_ptr(Slot& s, NumericField f);

  EpochDomain domain_;
  GrowableArray<Slot> slots_;
  GrowableArray<std::uint64_t> bitmap_;
  GrowableArray<char> buffer_;
  std::atomic<std::size_t> count_{0};
  std::atomic<std::size_t> buffer_len_{0};
};

}  // namespace jvs
