#pragma once

#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "jvs/core.h"

namespace jvs {

enum class MessageKind : std::uint8_t {
  kAttributeUpdate,
  kProductAdd,
  kProductRemove,
};

enum class AttributeField : std::uint8_t { kSales, kPraise, kPrice, kAvailable };

struct AttributeChange {
  AttributeField field;
  std::uint64_t value;

  bool operator==(const AttributeChange&) const = default;
};

struct ImageRef {
  std::string url;
  std::optional<std::string> raw_handle;

  bool operator==(const ImageRef&) const = default;
};

/// One product event from the update stream.
struct UpdateMessage {
  MessageKind kind = MessageKind::kAttributeUpdate;
  std::uint64_t product_id = 0;
  std::vector<AttributeChange> changes;  // kAttributeUpdate
  ProductAttributes attributes;          // kProductAdd; url unused
  std::vector<ImageRef> images;          // kProductAdd

  static UpdateMessage add(std::uint64_t product_id, std::uint64_t sales,
                           std::uint64_t praise, std::uint64_t price,
                           std::vector<std::string> urls);
  static UpdateMessage update(std::uint64_t product_id,
                              std::vector<AttributeChange> changes);
  static UpdateMessage remove(std::uint64_t product_id);

  bool operator==(const UpdateMessage&) const = default;
};

const char* field_name(AttributeField f);

/// Tab-separated log line (no trailing newline):
///   ADD  pid sales praise price url1;url2
///   UPDATE pid field=value[,field=value]
///   REMOVE pid
std::string format_message(const UpdateMessage& msg);

/// Parses one log line. Returns nullopt for blank and '#' comment lines and
/// throws Error for malformed ones.
std::optional<UpdateMessage> parse_message_line(std::string_view line);

struct MessageLog {
  std::vector<UpdateMessage> messages;
  std::size_t malformed = 0;
  std::vector<std::size_t> malformed_lines;  // 1-based
};

/// Lenient mode counts and skips malformed lines; strict mode throws an
/// Error naming the first bad line number.
MessageLog parse_message_log(std::string_view text, bool strict = false);
MessageLog read_message_log(const std::string& path, bool strict = false);

using SteadyTime = std::chrono::steady_clock::time_point;

struct ReceivedMessage {
  UpdateMessage message;
  SteadyTime received;
};

/// Ordered stream of messages; next() returns nullopt at end of stream.
class MessageSource {
 public:
  virtual ~MessageSource() = default;
  virtual std::optional<ReceivedMessage> next() = 0;
};

class VectorMessageSource : public MessageSource {
 public:
  explicit VectorMessageSource(std::vector<UpdateMessage> messages)
      : messages_(std::move(messages)) {}
  std::optional<ReceivedMessage> next() override;

 private:
  std::vector<UpdateMessage> messages_;
  std::size_t pos_ = 0;
};

/// In-process queue standing in for the message bus. push() stamps the
/// receipt time; next() blocks until a message arrives or close() is called.
class ChannelMessageSource : public MessageSource {
 public:
  void push(UpdateMessage msg);
  void close();
  std::optional<ReceivedMessage> next() override;

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<ReceivedMessage> queue_;
  bool closed_ = false;
};

}  // namespace jvs
