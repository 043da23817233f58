#pragma once

#include <array>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <mutex>
#include <vector>

namespace jvs {

/// Epoch-based deferred reclamation for single-writer structures whose
/// readers never block.
///
/// A reader pins the domain for the duration of a read; while pinned, any
/// block it could have loaded stays alive. The writer unlinks a block
/// (publishes its replacement) and then retires it; the block is freed once
/// every pinned reader announced an epoch later than the retirement.
class EpochDomain {
 public:
  static constexpr std::size_t kSlots = 256;

  class Guard {
   public:
    Guard(Guard&& other) noexcept
        : domain_(other.domain_), slot_(other.slot_) {
      other.domain_ = nullptr;
    }
    Guard(const Guard&) = delete;
    Guard& operator=(const Guard&) = delete;
    Guard& operator=(Guard&&) = delete;
    ~Guard();

   private:
    friend class EpochDomain;
    Guard(const EpochDomain* domain, std::size_t slot)
        : domain_(domain), slot_(slot) {}
    const EpochDomain* domain_;
    std::size_t slot_;
  };

  EpochDomain() = default;
  EpochDomain(const EpochDomain&) = delete;
  EpochDomain& operator=(const EpochDomain&) = delete;
  ~EpochDomain();

  Guard pin() const;

  /// Schedules `deleter` to run once no pinned reader can still reach the
  /// unlinked object. The caller must have published the replacement first.
  void retire(std::function<void()> deleter);

  /// Runs every deleter that has become safe; returns how many ran.
  std::size_t reclaim();

  std::size_t pending() const;

 private:
  struct alignas(64) Slot {
    std::atomic<std::uint64_t> epoch{0};  // 0 = idle
  };
  struct Retired {
    std::uint64_t epoch;
    std::function<void()> deleter;
  };

  mutable std::array<Slot, kSlots> slots_{};
  std::atomic<std::uint64_t> global_{1};
  mutable std::mutex retire_mu_;
  std::vector<Retired> retired_;
};

}  // namespace jvs
