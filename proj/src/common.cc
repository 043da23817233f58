#include "jvs/common.h"

#include <bit>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

namespace jvs {

double SplitMix64::gaussian() noexcept {
  // Box-Muller; u1 is shifted into (0, 1] so the log is finite.
  double u1 = 1.0 - uniform();
  double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

namespace bytes {

void put_u32_be(std::string& out, std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) {
    out.push_back(static_cast<char>((v >> shift) & 0xff));
  }
}

void put_u64_be(std::string& out, std::uint64_t v) {
  for (int shift = 56; shift >= 0; shift -= 8) {
    out.push_back(static_cast<char>((v >> shift) & 0xff));
  }
}

void put_f32_le(std::string& out, float v) {
  auto bits = std::bit_cast<std::uint32_t>(v);
  for (int shift = 0; shift < 32; shift += 8) {
    out.push_back(static_cast<char>((bits >> shift) & 0xff));
  }
}

void Reader::need(std::size_t n) const {
  if (data_.size() - pos_ < n) {
    throw FormatError("truncated input (need " + std::to_string(n) +
                          " bytes, have " +
                          std::to_string(data_.size() - pos_) + ")",
                      pos_);
  }
}

void Reader::expect_magic(std::string_view magic) {
  need(magic.size());
  if (data_.substr(pos_, magic.size()) != magic) {
    throw FormatError("bad magic, expected " + std::string(magic), pos_);
  }
  pos_ += magic.size();
}

std::uint8_t Reader::u8() {
  need(1);
  return static_cast<std::uint8_t>(data_[pos_++]);
}

std::uint32_t Reader::u32_be() {
  need(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v = (v << 8) | static_cast<std::uint8_t>(data_[pos_++]);
  }
  return v;
}

std::uint64_t Reader::u64_be() {
  need(8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    v = (v << 8) | static_cast<std::uint8_t>(data_[pos_++]);
  }
  return v;
}

float Reader::f32_le() {
  need(4);
  std::uint32_t bits = 0;
  for (int i = 0; i < 4; ++i) {
    bits |= static_cast<std::uint32_t>(
                static_cast<std::uint8_t>(data_[pos_++]))
            << (8 * i);
  }
  return std::bit_cast<float>(bits);
}

std::string_view Reader::take(std::size_t n) {
  need(n);
  auto out = data_.substr(pos_, n);
  pos_ += n;
  return out;
}

void Reader::expect_end() const {
  if (!at_end()) {
    throw FormatError("trailing bytes", pos_);
  }
}

}  // namespace bytes

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error("cannot open " + path);
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

void write_file_atomic(const std::string& path, std::string_view contents) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw Error("cannot open " + tmp + " for writing");
    }
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) {
      throw Error("short write to " + tmp);
    }
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace jvs
