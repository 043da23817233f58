#pragma once

#include <cstddef>
#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace jvs {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a snapshot or store file cannot be decoded. Carries the byte
/// offset at which decoding failed.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::size_t offset)
      : Error(what + " at byte " + std::to_string(offset)), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

constexpr std::uint64_t kFnvOffsetBasis = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x00000100000001b3ULL;

/// FNV-1a 64-bit over the raw bytes of `s`.
constexpr std::uint64_t hash64(std::string_view s) noexcept {
  std::uint64_t h = kFnvOffsetBasis;
  for (char c : s) {
    h ^= static_cast<std::uint8_t>(c);
    h *= kFnvPrime;
  }
  return h;
}

/// SplitMix64 generator. Output is fully specified, so sequences are identical
/// on every platform (unlike the standard distributions).
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  std::uint64_t next() noexcept {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // [0, 1) with 53 bits of precision.
  double uniform() noexcept {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }

  // [0, n)
  std::uint64_t below(std::uint64_t n) noexcept {
    return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)) %
           n;
  }

  double gaussian() noexcept;

 private:
  std::uint64_t state_;
};

// Byte-level encoding helpers shared by the snapshot formats.
namespace bytes {

void put_u32_be(std::string& out, std::uint32_t v);
void put_u64_be(std::string& out, std::uint64_t v);
void put_f32_le(std::string& out, float v);

/// Bounds-checked sequential reader; every failure raises FormatError with
/// the current offset.
class Reader {
 public:
  explicit Reader(std::string_view data) : data_(data) {}

  void expect_magic(std::string_view magic);
  std::uint8_t u8();
  std::uint32_t u32_be();
  std::uint64_t u64_be();
  float f32_le();
  std::string_view take(std::size_t n);

  std::size_t offset() const noexcept { return pos_; }
  bool at_end() const noexcept { return pos_ == data_.size(); }
  void expect_end() const;

 private:
  void need(std::size_t n) const;

  std::string_view data_;
  std::size_t pos_ = 0;
};

}  // namespace bytes

std::string read_file(const std::string& path);
/// Writes to a temporary sibling then renames, so readers never see a
/// half-written snapshot.
void write_file_atomic(const std::string& path, std::string_view contents);

}  // namespace jvs
