#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <memory>
#include <type_traits>

#include "jvs/epoch.h"

namespace jvs {

/// Contiguous array with one writer and lock-free readers.
///
/// Growth allocates a larger block, copies the live prefix, publishes the new
/// block and retires the old one through the epoch domain. Readers must hold
/// a guard of that domain while dereferencing reader_data().
template <typename T>
class GrowableArray {
  static_assert(std::is_trivially_copyable_v<T>);

 public:
  GrowableArray(EpochDomain& domain, std::size_t initial_capacity)
      : domain_(domain),
        current_(new Block(std::max<std::size_t>(initial_capacity, 1))) {}

  GrowableArray(const GrowableArray&) = delete;
  GrowableArray& operator=(const GrowableArray&) = delete;

  ~GrowableArray() { delete current_.load(std::memory_order_relaxed); }

  /// Writer only. Guarantees capacity >= needed; the first `live` elements
  /// are carried over. Returns the (possibly new) writable block.
  T* reserve(std::size_t needed, std::size_t live) {
    Block* cur = current_.load(std::memory_order_relaxed);
    if (needed <= cur->capacity) return cur->data.get();
    std::size_t cap = cur->capacity;
    while (cap < needed) cap *= 2;
    auto* next = new Block(cap);
    std::copy_n(cur->data.get(), live, next->data.get());
    current_.store(next, std::memory_order_seq_cst);
    domain_.retire([cur] { delete cur; });
    return next->data.get();
  }

  /// Writer only.
  T* writer_data() noexcept {
    return current_.load(std::memory_order_relaxed)->data.get();
  }

  /// Reader; valid while a guard of the owning domain is held.
  const T* reader_data() const noexcept {
    return current_.load(std::memory_order_seq_cst)->data.get();
  }
  T* reader_data_mutable() const noexcept {
    return current_.load(std::memory_order_seq_cst)->data.get();
  }

  std::size_t capacity() const noexcept {
    return current_.load(std::memory_order_acquire)->capacity;
  }

 private:
  struct Block {
    explicit Block(std::size_t cap)
        : capacity(cap), data(std::make_unique<T[]>(cap)) {}
    std::size_t capacity;
    std::unique_ptr<T[]> data;
  };

  EpochDomain& domain_;
  std::atomic<Block*> current_;
};

}  // namespace jvs
