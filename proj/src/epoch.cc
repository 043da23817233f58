#include "jvs/epoch.h"

#include <functional>
#include <limits>
#include <thread>

namespace jvs {

EpochDomain::Guard::~Guard() {
  if (domain_ != nullptr) {
    domain_->slots_[slot_].epoch.store(0, std::memory_order_release);
  }
}

EpochDomain::~EpochDomain() {
  for (auto& r : retired_) r.deleter();
}

EpochDomain::Guard EpochDomain::pin() const {
  thread_local const std::size_t hint =
      std::hash<std::thread::id>{}(std::this_thread::get_id());
  for (;;) {
    std::uint64_t e = global_.load(std::memory_order_seq_cst);
    for (std::size_t i = 0; i < kSlots; ++i) {
      std::size_t s = (hint + i) % kSlots;
      std::uint64_t idle = 0;
      if (slots_[s].epoch.load(std::memory_order_relaxed) == 0 &&
          slots_[s].epoch.compare_exchange_strong(idle, e,
                                                  std::memory_order_seq_cst)) {
        return Guard(this, s);
      }
    }
    // More concurrent readers than slots; wait for one to leave.
    std::this_thread::yield();
  }
}

void EpochDomain::retire(std::function<void()> deleter) {
  std::uint64_t e = global_.fetch_add(1, std::memory_order_seq_cst);
  {
    std::lock_guard lock(retire_mu_);
    retired_.push_back({e, std::move(deleter)});
  }
  reclaim();
}

std::size_t EpochDomain::reclaim() {
  std::uint64_t oldest = std::numeric_limits<std::uint64_t>::max();
  for (const auto& slot : slots_) {
    std::uint64_t v = slot.epoch.load(std::memory_order_seq_cst);
    if (v != 0 && v < oldest) oldest = v;
  }
  std::vector<Retired> ready;
  {
    std::lock_guard lock(retire_mu_);
    auto keep = retired_.begin();
    for (auto it = retired_.begin(); it != retired_.end(); ++it) {
      // A reader announcing epoch v may hold anything retired at epoch >= v.
      if (it->epoch < oldest) {
        ready.push_back(std::move(*it));
      } else {
        *keep++ = std::move(*it);
      }
    }
    retired_.erase(keep, retired_.end());
  }
  for (auto& r : ready) r.deleter();
  return ready.size();
}

std::size_t EpochDomain::pending() const {
  std::lock_guard lock(retire_mu_);
  return retired_.size();
}

}  // namespace jvs
