#include "jvs/forward_index.h"

#include <atomic>

#include "jvs/common.h"

namespace jvs {

namespace {

constexpr std::uint8_t kForwardVersion = 1;
constexpr std::uint64_t kMaxUrlLength = (1ULL << 24) - 1;

std::uint64_t load_field(std::uint64_t& field) {
  return std::atomic_ref<std::uint64_t>(field).load(std::memory_order_acquire);
}

void store_field(std::uint64_t& field, std::uint64_t v) {
  std::atomic_ref<std::uint64_t>(field).store(v, std::memory_order_release);
}

}  // namespace

ForwardIndex::ForwardIndex(const Options& options)
    : slots_(domain_, options.initial_entries),
      bitmap_(domain_, (options.initial_entries + 63) / 64),
      buffer_(domain_, options.initial_buffer_bytes) {}

std::uint64_t* ForwardIndex::field_ptr(Slot& s, NumericField f) {
  switch (f) {
    case NumericField::kProductId:
      return &s.product_id;
    case NumericField::kSales:
      return &s.sales;
    case NumericField::kPraise:
      return &s.praise;
    case NumericField::kPrice:
      return &s.price;
  }
  throw Error("unknown numeric field");
}

void ForwardIndex::check_index(ImageIndex i) const {
  if (i >= size()) {
    throw Error("image index " + std::to_string(i) + " out of range (" +
                std::to_string(size()) + " entries)");
  }
}

std::uint64_t ForwardIndex::append_bytes(std::string_view bytes) {
  if (bytes.size() > kMaxUrlLength) throw Error("url too long");
  std::size_t off = buffer_len_.load(std::memory_order_relaxed);
  char* data = buffer_.reserve(off + bytes.size(), off);
  std::copy(bytes.begin(), bytes.end(), data + off);
  buffer_len_.store(off + bytes.size(), std::memory_order_release);
  return (static_cast<std::uint64_t>(off) << kLengthBits) | bytes.size();
}

ImageIndex ForwardIndex::append_entry(const ProductAttributes& attrs) {
  const std::size_t n = count_.load(std::memory_order_relaxed);
  std::uint64_t ref = append_bytes(attrs.url);

  Slot* slots = slots_.reserve(n + 1, n);
  Slot& s = slots[n];
  store_field(s.product_id, attrs.product_id);
  store_field(s.sales, attrs.sales);
  store_field(s.praise, attrs.praise);
  store_field(s.price, attrs.price);
  store_field(s.url_ref, ref);

  std::uint64_t* words = bitmap_.reserve(n / 64 + 1, (n + 63) / 64);
  std::atomic_ref<std::uint64_t>(words[n / 64])
      .fetch_or(1ULL << (n % 64), std::memory_order_release);

  count_.store(n + 1, std::memory_order_release);
  return n;
}

void ForwardIndex::update_numeric(ImageIndex i, NumericField field,
                                  std::uint64_t value) {
  check_index(i);
  store_field(*field_ptr(slots_.writer_data()[i], field), value);
}

void ForwardIndex::update_varlen(ImageIndex i, std::string_view url) {
  check_index(i);
  if (url.empty()) throw Error("empty url");
  std::uint64_t ref = append_bytes(url);
  store_field(slots_.writer_data()[i].url_ref, ref);
}

void ForwardIndex::set_validity(ImageIndex i, bool valid) {
  check_index(i);
  std::atomic_ref<std::uint64_t> word(bitmap_.writer_data()[i / 64]);
  std::uint64_t bit = 1ULL << (i % 64);
  if (valid) {
    word.fetch_or(bit, std::memory_order_release);
  } else {
    word.fetch_and(~bit, std::memory_order_release);
  }
}

std::size_t ForwardIndex::valid_count() const {
  auto r = reader();
  std::size_t n = r.size();
  std::size_t valid = 0;
  for (ImageIndex i = 0; i < n; ++i) valid += r.is_valid(i) ? 1 : 0;
  return valid;
}

bool ForwardIndex::Reader::is_valid(ImageIndex i) const {
  index_->check_index(i);
  std::uint64_t* words = index_->bitmap_.reader_data_mutable();
  return (std::atomic_ref<std::uint64_t>(words[i / 64])
              .load(std::memory_order_acquire) >>
          (i % 64)) &
         1ULL;
}

std::uint64_t ForwardIndex::Reader::numeric(ImageIndex i,
                                            NumericField f) const {
  index_->check_index(i);
  return load_field(*field_ptr(index_->slots_.reader_data_mutable()[i], f));
}

std::string ForwardIndex::Reader::url(ImageIndex i) const {
  index_->check_index(i);
  std::uint64_t ref = load_field(index_->slots_.reader_data_mutable()[i].url_ref);
  std::size_t off = ref >> kLengthBits;
  std::size_t len = ref & ((1ULL << kLengthBits) - 1);
  const char* data = index_->buffer_.reader_data();
  return std::string(data + off, len);
}

ProductAttributes ForwardIndex::Reader::entry(ImageIndex i) const {
  index_->check_index(i);
  Slot& s = index_->slots_.reader_data_mutable()[i];
  ProductAttributes a;
  a.product_id = load_field(s.product_id);
  a.sales = load_field(s.sales);
  a.praise = load_field(s.praise);
  a.price = load_field(s.price);
  a.url = url(i);
  return a;
}

std::unique_ptr<ForwardIndex> ForwardIndex::compacted() const {
  auto r = reader();
  const std::size_t n = r.size();
  Options opts;
  opts.initial_entries = std::max<std::size_t>(n, 1);
  std::size_t live_bytes = 0;
  for (ImageIndex i = 0; i < n; ++i) live_bytes += r.url(i).size();
  opts.initial_buffer_bytes = std::max<std::size_t>(live_bytes, 1);
  auto out = std::make_unique<ForwardIndex>(opts);
  for (ImageIndex i = 0; i < n; ++i) {
    out->append_entry(r.entry(i));
    if (!r.is_valid(i)) out->set_validity(i, false);
  }
  return out;
}

std::string ForwardIndex::serialize() const {
  auto r = reader();
  const std::size_t n = r.size();
  std::string out = "JVSF";
  out.push_back(static_cast<char>(kForwardVersion));
  bytes::put_u64_be(out, n);
  for (ImageIndex i = 0; i < n; ++i) {
    ProductAttributes a = r.entry(i);
    bytes::put_u64_be(out, a.product_id);
    bytes::put_u64_be(out, a.sales);
    bytes::put_u64_be(out, a.praise);
    bytes::put_u64_be(out, a.price);
    bytes::put_u32_be(out, static_cast<std::uint32_t>(a.url.size()));
    out += a.url;
  }
  std::string bits((n + 7) / 8, '\0');
  for (ImageIndex i = 0; i < n; ++i) {
    if (r.is_valid(i)) bits[i / 8] = static_cast<char>(bits[i / 8] | (1 << (i % 8)));
  }
  out += bits;
  return out;
}

std::unique_ptr<ForwardIndex> ForwardIndex::deserialize(std::string_view data) {
  bytes::Reader in(data);
  in.expect_magic("JVSF");
  std::size_t at = in.offset();
  if (in.u8() != kForwardVersion) {
    throw FormatError("unsupported forward-index version", at);
  }
  std::uint64_t n = in.u64_be();
  // Each entry takes at least 36 bytes; reject absurd counts before allocating.
  if (n > data.size() / 36 + 1) {
    throw FormatError("entry count exceeds file size", in.offset());
  }
  Options opts;
  opts.initial_entries = std::max<std::size_t>(n, 1);
  opts.initial_buffer_bytes = std::max<std::size_t>(data.size(), 1);
  auto out = std::make_unique<ForwardIndex>(opts);
  for (std::uint64_t i = 0; i < n; ++i) {
    ProductAttributes a;
    a.product_id = in.u64_be();
    a.sales = in.u64_be();
    a.praise = in.u64_be();
    a.price = in.u64_be();
    std::uint32_t len = in.u32_be();
    a.url = std::string(in.take(len));
    out->append_entry(a);
  }
  std::string_view bits = in.take((n + 7) / 8);
  in.expect_end();
  for (std::uint64_t i = 0; i < n; ++i) {
    bool valid = (static_cast<std::uint8_t>(bits[i / 8]) >> (i % 8)) & 1;
    if (!valid) out->set_validity(i, false);
  }
  return out;
}

void ForwardIndex::save(const std::string& path) const {
  write_file_atomic(path, serialize());
}

std::unique_ptr<ForwardIndex> ForwardIndex::load(const std::string& path) {
  return deserialize(read_file(path));
}

}  // namespace jvs
