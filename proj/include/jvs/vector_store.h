#pragma once

#include <atomic>
#include <cstddef>
#include <span>

#include "jvs/common.h"
#include "jvs/core.h"
#include "jvs/epoch.h"
#include "jvs/growable.h"

namespace jvs {

/// Searcher working set: row i holds the feature of image i, parallel to the
/// forward index. Same single-writer / lock-free-reader contract.
class VectorStore {
 public:
  class Reader {
   public:
    std::size_t size() const noexcept { return store_->size(); }
    /// Caller guarantees i < size() observed earlier.
    const float* row(ImageIndex i) const noexcept {
      return store_->data_.reader_data() + i * store_->dim_;
    }

   private:
    friend class VectorStore;
    explicit Reader(const VectorStore* s) : store_(s), guard_(s->domain_.pin()) {}
    const VectorStore* store_;
    EpochDomain::Guard guard_;
  };

  explicit VectorStore(std::size_t dim, std::size_t initial_rows = 4096)
      : dim_(dim), data_(domain_, dim * std::max<std::size_t>(initial_rows, 1)) {
    if (dim_ == 0) throw Error("vector store dim must be positive");
  }

  ImageIndex append(const FeatureVector& f) {
    if (f.dim() != dim_) throw Error("vector store dimension mismatch");
    std::size_t n = count_.load(std::memory_order_relaxed);
    float* dst = data_.reserve((n + 1) * dim_, n * dim_);
    std::copy(f.components().begin(), f.components().end(), dst + n * dim_);
    count_.store(n + 1, std::memory_order_release);
    return n;
  }

  Reader reader() const { return Reader(this); }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept {
    return count_.load(std::memory_order_acquire);
  }

 private:
  std::size_t dim_;
  EpochDomain domain_;
  GrowableArray<float> data_;
  std::atomic<std::size_t> count_{0};
};

}  // namespace jvs
