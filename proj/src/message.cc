#include "jvs/message.h"

#include <charconv>

#include "jvs/common.h"

namespace jvs {

namespace {

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    std::size_t pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

std::uint64_t parse_u64(std::string_view s, const char* what) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) {
    throw Error(std::string("bad ") + what + " '" + std::string(s) + "'");
  }
  return v;
}

std::uint64_t parse_product_id(std::string_view s) {
  std::uint64_t pid = parse_u64(s, "product id");
  if (pid == 0) throw Error("product id must be positive");
  return pid;
}

AttributeField parse_field(std::string_view s) {
  if (s == "sales") return AttributeField::kSales;
  if (s == "praise") return AttributeField::kPraise;
  if (s == "price") return AttributeField::kPrice;
  if (s == "available") return AttributeField::kAvailable;
  throw Error("unknown field '" + std::string(s) + "'");
}

void check_url(std::string_view url) {
  if (url.empty()) throw Error("empty url");
  if (url.find_first_of("\t\n\r;") != std::string_view::npos) {
    throw Error("url contains a separator character");
  }
}

}  // namespace

UpdateMessage UpdateMessage::add(std::uint64_t product_id, std::uint64_t sales,
                                 std::uint64_t praise, std::uint64_t price,
                                 std::vector<std::string> urls) {
  UpdateMessage m;
  m.kind = MessageKind::kProductAdd;
  m.product_id = product_id;
  m.attributes = {product_id, sales, praise, price, {}};
  for (auto& u : urls) m.images.push_back({std::move(u), std::nullopt});
  return m;
}

UpdateMessage UpdateMessage::update(std::uint64_t product_id,
                                    std::vector<AttributeChange> changes) {
  UpdateMessage m;
  m.kind = MessageKind::kAttributeUpdate;
  m.product_id = product_id;
  m.changes = std::move(changes);
  return m;
}

UpdateMessage UpdateMessage::remove(std::uint64_t product_id) {
  UpdateMessage m;
  m.kind = MessageKind::kProductRemove;
  m.product_id = product_id;
  return m;
}

const char* field_name(AttributeField f) {
  switch (f) {
    case AttributeField::kSales:
      return "sales";
    case AttributeField::kPraise:
      return "praise";
    case AttributeField::kPrice:
      return "price";
    case AttributeField::kAvailable:
      return "available";
  }
  return "?";
}

std::string format_message(const UpdateMessage& msg) {
  std::string out;
  switch (msg.kind) {
    case MessageKind::kProductAdd: {
      out = "ADD\t" + std::to_string(msg.product_id) + "\t" +
            std::to_string(msg.attributes.sales) + "\t" +
            std::to_string(msg.attributes.praise) + "\t" +
            std::to_string(msg.attributes.price) + "\t";
      for (std::size_t i = 0; i < msg.images.size(); ++i) {
        check_url(msg.images[i].url);
        if (i > 0) out += ';';
        out += msg.images[i].url;
      }
      return out;
    }
    case MessageKind::kAttributeUpdate: {
      out = "UPDATE\t" + std::to_string(msg.product_id) + "\t";
      for (std::size_t i = 0; i < msg.changes.size(); ++i) {
        if (i > 0) out += ',';
        out += field_name(msg.changes[i].field);
        out += '=';
        out += std::to_string(msg.changes[i].value);
      }
      return out;
    }
    case MessageKind::kProductRemove:
      return "REMOVE\t" + std::to_string(msg.product_id);
  }
  throw Error("unknown message kind");
}

std::optional<UpdateMessage> parse_message_line(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  if (line.empty() || line.front() == '#') return std::nullopt;
  auto cols = split(line, '\t');
  const std::string_view verb = cols[0];
  if (verb == "ADD") {
    if (cols.size() != 6) throw Error("ADD expects 6 columns");
    std::vector<std::string> urls;
    for (auto u : split(cols[5], ';')) {
      check_url(u);
      urls.emplace_back(u);
    }
    return UpdateMessage::add(parse_product_id(cols[1]),
                              parse_u64(cols[2], "sales"),
                              parse_u64(cols[3], "praise"),
                              parse_u64(cols[4], "price"), std::move(urls));
  }
  if (verb == "UPDATE") {
    if (cols.size() != 3) throw Error("UPDATE expects 3 columns");
    std::vector<AttributeChange> changes;
    for (auto kv : split(cols[2], ',')) {
      auto eq = kv.find('=');
      if (eq == std::string_view::npos) throw Error("change without '='");
      AttributeField f = parse_field(kv.substr(0, eq));
      std::uint64_t v = parse_u64(kv.substr(eq + 1), "value");
      if (f == AttributeField::kAvailable && v > 1) {
        throw Error("available must be 0 or 1");
      }
      changes.push_back({f, v});
    }
    return UpdateMessage::update(parse_product_id(cols[1]), std::move(changes));
  }
  if (verb == "REMOVE") {
    if (cols.size() != 2) throw Error("REMOVE expects 2 columns");
    return UpdateMessage::remove(parse_product_id(cols[1]));
  }
  throw Error("unknown verb '" + std::string(verb) + "'");
}

MessageLog parse_message_log(std::string_view text, bool strict) {
  MessageLog log;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    ++line_no;
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    try {
      if (auto msg = parse_message_line(line)) {
        log.messages.push_back(std::move(*msg));
      }
    } catch (const Error& e) {
      if (strict) {
        throw Error("line " + std::to_string(line_no) + ": " + e.what());
      }
      ++log.malformed;
      log.malformed_lines.push_back(line_no);
    }
  }
  return log;
}

MessageLog read_message_log(const std::string& path, bool strict) {
  return parse_message_log(read_file(path), strict);
}

std::optional<ReceivedMessage> VectorMessageSource::next() {
  if (pos_ >= messages_.size()) return std::nullopt;
  return ReceivedMessage{std::move(messages_[pos_++]),
                         std::chrono::steady_clock::now()};
}

void ChannelMessageSource::push(UpdateMessage msg) {
  {
    std::lock_guard lock(mu_);
    queue_.push_back({std::move(msg), std::chrono::steady_clock::now()});
  }
  cv_.notify_one();
}

void ChannelMessageSource::close() {
  {
    std::lock_guard lock(mu_);
    closed_ = true;
  }
  cv_.notify_all();
}

std::optional<ReceivedMessage> ChannelMessageSource::next() {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [&] { return closed_ || !queue_.empty(); });
  if (queue_.empty()) return std::nullopt;
  ReceivedMessage m = std::move(queue_.front());
  queue_.pop_front();
  return m;
}

}  // namespace jvs
