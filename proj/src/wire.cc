#include "jvs/wire.h"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <cstring>

#include "jvs/common.h"

namespace jvs::wire {

namespace {

using Clock = std::chrono::steady_clock;

std::uint64_t parse_uint(std::string_view s, std::string_view what) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) {
    throw Error("bad " + std::string(what) + " '" + std::string(s) + "'");
  }
  return v;
}

double parse_double(std::string_view s, std::string_view what) {
  double v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) {
    throw Error("bad " + std::string(what) + " '" + std::string(s) + "'");
  }
  return v;
}

std::vector<std::string_view> split(std::string_view s, char sep,
                                    std::size_t max_parts = SIZE_MAX) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (out.size() + 1 < max_parts) {
    std::size_t pos = s.find(sep, start);
    if (pos == std::string_view::npos) break;
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
  out.push_back(s.substr(start));
  return out;
}

std::string errno_text(const char* what) {
  return std::string(what) + ": " + std::strerror(errno);
}

class Fd {
 public:
  explicit Fd(int fd = -1) : fd_(fd) {}
  Fd(const Fd&) = delete;
  Fd& operator=(const Fd&) = delete;
  ~Fd() {
    if (fd_ >= 0) ::close(fd_);
  }
  int get() const noexcept { return fd_; }

 private:
  int fd_;
};

int remaining_ms(Clock::time_point deadline) {
  auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
                  deadline - Clock::now())
                  .count();
  return left <= 0 ? 0 : static_cast<int>(left);
}

// Full read/write with a deadline; false on orderly EOF before any byte.
bool read_exact(int fd, char* dst, std::size_t n, Clock::time_point deadline,
                bool allow_eof) {
  std::size_t got = 0;
  while (got < n) {
    if (deadline != Clock::time_point::max()) {
      pollfd p{fd, POLLIN, 0};
      int rc = ::poll(&p, 1, remaining_ms(deadline));
      if (rc == 0) throw Error("read timed out");
      if (rc < 0) {
        if (errno == EINTR) continue;
        throw Error(errno_text("poll"));
      }
    }
    ssize_t r = ::recv(fd, dst + got, n - got, 0);
    if (r == 0) {
      if (allow_eof && got == 0) return false;
      throw Error("connection closed mid-frame");
    }
    if (r < 0) {
      if (errno == EINTR) continue;
      throw Error(errno_text("recv"));
    }
    got += static_cast<std::size_t>(r);
  }
  return true;
}

void write_all(int fd, std::string_view data, Clock::time_point deadline) {
  std::size_t sent = 0;
  while (sent < data.size()) {
    if (deadline != Clock::time_point::max()) {
      pollfd p{fd, POLLOUT, 0};
      int rc = ::poll(&p, 1, remaining_ms(deadline));
      if (rc == 0) throw Error("write timed out");
      if (rc < 0) {
        if (errno == EINTR) continue;
        throw Error(errno_text("poll"));
      }
    }
    ssize_t w = ::send(fd, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
    if (w < 0) {
      if (errno == EINTR) continue;
      throw Error(errno_text("send"));
    }
    sent += static_cast<std::size_t>(w);
  }
}

std::optional<std::string> read_frame(int fd, Clock::time_point deadline) {
  char hdr[4];
  if (!read_exact(fd, hdr, 4, deadline, true)) return std::nullopt;
  std::uint32_t len = 0;
  for (char c : hdr) len = (len << 8) | static_cast<std::uint8_t>(c);
  if (len > kMaxFrameBytes) throw Error("frame too large");
  std::string payload(len, '\0');
  read_exact(fd, payload.data(), len, deadline, false);
  return payload;
}

sockaddr_in resolve(const Endpoint& ep) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const char* host = ep.host.empty() ? "0.0.0.0" : ep.host.c_str();
  if (int rc = ::getaddrinfo(host, nullptr, &hints, &res); rc != 0) {
    throw Error("cannot resolve " + ep.host + ": " + ::gai_strerror(rc));
  }
  sockaddr_in addr = *reinterpret_cast<sockaddr_in*>(res->ai_addr);
  ::freeaddrinfo(res);
  addr.sin_port = htons(ep.port);
  return addr;
}

void set_nodelay(int fd) {
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

std::string hit_value(const SearchHit& h) {
  const auto& a = h.attributes;
  return std::to_string(h.partition_id) + "," + std::to_string(h.image_index) +
         "," + format_double(h.distance) + "," + format_double(h.score) + "," +
         std::to_string(a.product_id) + "," + std::to_string(a.sales) + "," +
         std::to_string(a.praise) + "," + std::to_string(a.price) + "," + a.url;
}

SearchHit parse_hit(std::string_view v) {
  auto parts = split(v, ',', 9);
  if (parts.size() != 9) throw Error("malformed hit '" + std::string(v) + "'");
  SearchHit h;
  h.partition_id = static_cast<PartitionId>(parse_uint(parts[0], "partition"));
  h.image_index = parse_uint(parts[1], "image index");
  h.distance = parse_double(parts[2], "distance");
  h.score = parse_double(parts[3], "score");
  h.attributes.product_id = parse_uint(parts[4], "product id");
  h.attributes.sales = parse_uint(parts[5], "sales");
  h.attributes.praise = parse_uint(parts[6], "praise");
  h.attributes.price = parse_uint(parts[7], "price");
  h.attributes.url = std::string(parts[8]);
  return h;
}

}  // namespace

Endpoint Endpoint::parse(std::string_view text) {
  auto colon = text.rfind(':');
  if (colon == std::string_view::npos) {
    throw Error("endpoint '" + std::string(text) + "' is not host:port");
  }
  std::uint64_t port = parse_uint(text.substr(colon + 1), "port");
  if (port > 65535) throw Error("port out of range in '" + std::string(text) + "'");
  return {std::string(text.substr(0, colon)), static_cast<std::uint16_t>(port)};
}

std::optional<std::string_view> Message::get(std::string_view key) const {
  for (const auto& [k, v] : fields) {
    if (k == key) return std::string_view(v);
  }
  return std::nullopt;
}

std::vector<std::string_view> Message::get_all(std::string_view key) const {
  std::vector<std::string_view> out;
  for (const auto& [k, v] : fields) {
    if (k == key) out.emplace_back(v);
  }
  return out;
}

std::string_view Message::require(std::string_view key) const {
  auto v = get(key);
  if (!v) throw Error(verb + " is missing '" + std::string(key) + "'");
  return *v;
}

std::string encode_payload(const Message& msg) {
  std::string out = msg.verb;
  for (const auto& [k, v] : msg.fields) {
    if (k.find_first_of("\t\n") != std::string::npos ||
        v.find('\n') != std::string::npos) {
      throw Error("field '" + k + "' contains a line or field separator");
    }
    out += '\n';
    out += k;
    out += '\t';
    out += v;
  }
  return out;
}

Message decode_payload(std::string_view payload) {
  auto lines = split(payload, '\n');
  Message m;
  m.verb = std::string(lines[0]);
  if (m.verb.empty()) throw Error("empty verb");
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    auto tab = lines[i].find('\t');
    if (tab == std::string_view::npos) {
      throw Error("line " + std::to_string(i + 1) + " has no tab");
    }
    m.add(std::string(lines[i].substr(0, tab)),
          std::string(lines[i].substr(tab + 1)));
  }
  return m;
}

std::string frame(std::string_view payload) {
  if (payload.size() > kMaxFrameBytes) throw Error("payload too large");
  std::string out;
  out.reserve(payload.size() + 4);
  bytes::put_u32_be(out, static_cast<std::uint32_t>(payload.size()));
  out += payload;
  return out;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string format_vector(std::span<const float> v) {
  std::string out;
  char buf[32];
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i > 0) out += ',';
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v[i]);
    out.append(buf, ptr);
  }
  return out;
}

FeatureVector parse_vector(std::string_view csv) {
  std::vector<float> out;
  for (auto part : split(csv, ',')) {
    float f = 0;
    auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), f);
    if (part.empty() || ec != std::errc{} || ptr != part.data() + part.size()) {
      throw Error("bad vector component '" + std::string(part) + "'");
    }
    out.push_back(f);
  }
  return FeatureVector(std::move(out));
}

Message ping_message() { return Message{"PING", {}}; }

Message error_message(std::string_view what) {
  std::string text(what);
  for (char& c : text) {
    if (c == '\n') c = ' ';
  }
  return Message{"ERROR", {{"message", text}}};
}

Message query_message(const FeatureVector& q, std::size_t k, std::size_t nprobe) {
  QueryRequest r;
  r.query = q;
  r.k = k;
  r.nprobe = nprobe;
  return query_message(r);
}

Message query_message(const QueryRequest& request) {
  Message m{"QUERY", {}};
  if (const auto* v = std::get_if<FeatureVector>(&request.query)) {
    m.add("vector", format_vector(v->view()));
  } else {
    m.add("url", std::get<std::string>(request.query));
  }
  m.add("k", std::to_string(request.k));
  m.add("nprobe", std::to_string(request.nprobe));
  const auto& w = request.weights;
  m.add("w_sim", format_double(w.sim));
  m.add("w_sales", format_double(w.sales));
  m.add("w_praise", format_double(w.praise));
  m.add("w_price", format_double(w.price));
  return m;
}

QueryRequest parse_query(const Message& msg) {
  if (msg.verb != "QUERY") throw Error("expected QUERY, got " + msg.verb);
  QueryRequest r;
  if (auto v = msg.get("vector")) {
    r.query = parse_vector(*v);
  } else if (auto u = msg.get("url")) {
    r.query = std::string(*u);
  } else {
    throw Error("QUERY needs 'vector' or 'url'");
  }
  if (auto k = msg.get("k")) r.k = parse_uint(*k, "k");
  if (auto n = msg.get("nprobe")) r.nprobe = parse_uint(*n, "nprobe");
  if (r.k == 0) throw Error("k must be positive");
  if (r.nprobe == 0) throw Error("nprobe must be positive");
  if (auto w = msg.get("w_sim")) r.weights.sim = parse_double(*w, "w_sim");
  if (auto w = msg.get("w_sales")) r.weights.sales = parse_double(*w, "w_sales");
  if (auto w = msg.get("w_praise")) r.weights.praise = parse_double(*w, "w_praise");
  if (auto w = msg.get("w_price")) r.weights.price = parse_double(*w, "w_price");
  return r;
}

Message result_message(const PartialResult& result) {
  Message m{"RESULT", {}};
  m.add("count", std::to_string(result.hits.size()));
  m.add("degraded", result.degraded() ? "1" : "0");
  std::string missing;
  for (std::size_t i = 0; i < result.missing.size(); ++i) {
    if (i > 0) missing += ',';
    missing += std::to_string(result.missing[i]);
  }
  m.add("missing", missing);
  for (const auto& h : result.hits) m.add("hit", hit_value(h));
  return m;
}

PartialResult parse_result(const Message& msg) {
  if (msg.verb == "ERROR") {
    throw Error("remote error: " + std::string(msg.get("message").value_or("")));
  }
  if (msg.verb != "RESULT") throw Error("expected RESULT, got " + msg.verb);
  PartialResult r;
  for (auto h : msg.get_all("hit")) r.hits.push_back(parse_hit(h));
  if (auto c = msg.get("count"); c && parse_uint(*c, "count") != r.hits.size()) {
    throw Error("RESULT count does not match hits");
  }
  if (auto missing = msg.get("missing"); missing && !missing->empty()) {
    for (auto p : split(*missing, ',')) {
      r.missing.push_back(static_cast<PartitionId>(parse_uint(p, "partition")));
    }
  }
  return r;
}

std::string exchange(const Endpoint& to, std::string_view payload,
                     std::chrono::milliseconds timeout) {
  const auto deadline = Clock::now() + timeout;
  sockaddr_in addr = resolve(to);
  Fd sock(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0));
  if (sock.get() < 0) throw Error(errno_text("socket"));
  int flags = ::fcntl(sock.get(), F_GETFL, 0);
  ::fcntl(sock.get(), F_SETFL, flags | O_NONBLOCK);
  if (::connect(sock.get(), reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0) {
    if (errno != EINPROGRESS) throw Error(errno_text(("connect " + to.str()).c_str()));
    pollfd p{sock.get(), POLLOUT, 0};
    int rc = ::poll(&p, 1, remaining_ms(deadline));
    if (rc == 0) throw Error("connect to " + to.str() + " timed out");
    int err = 0;
    socklen_t len = sizeof(err);
    ::getsockopt(sock.get(), SOL_SOCKET, SO_ERROR, &err, &len);
    if (rc < 0 || err != 0) {
      errno = err;
      throw Error(errno_text(("connect " + to.str()).c_str()));
    }
  }
  set_nodelay(sock.get());
  write_all(sock.get(), frame(payload), deadline);
  auto reply = read_frame(sock.get(), deadline);
  if (!reply) throw Error("connection closed by " + to.str());
  return std::move(*reply);
}

Message call(const Endpoint& to, const Message& request,
             std::chrono::milliseconds timeout) {
  return decode_payload(exchange(to, encode_payload(request), timeout));
}

TcpServer::TcpServer(const Endpoint& listen, Handler handler)
    : handler_(std::move(handler)) {
  sockaddr_in addr = resolve(listen);
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (listen_fd_ < 0) throw Error(errno_text("socket"));
  int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0 ||
      ::listen(listen_fd_, 256) < 0) {
    std::string msg = errno_text(("listen on " + listen.str()).c_str());
    ::close(listen_fd_);
    listen_fd_ = -1;
    throw Error(msg);
  }
  socklen_t len = sizeof(addr);
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

TcpServer::~TcpServer() {
  stop();
  if (listen_fd_ >= 0) ::close(listen_fd_);
}

void TcpServer::start() {
  if (running_.exchange(true)) return;
  acceptor_ = std::thread([this] { accept_loop(); });
}

void TcpServer::stop() {
  if (!running_.exchange(false)) return;
  if (acceptor_.joinable()) acceptor_.join();
  std::vector<std::thread> workers;
  {
    std::lock_guard lock(conn_mu_);
    for (int fd : conn_fds_) ::shutdown(fd, SHUT_RDWR);
    workers = std::move(workers_);
    workers_.clear();
  }
  for (auto& t : workers) {
    if (t.joinable()) t.join();
  }
}

void TcpServer::accept_loop() {
  while (running_.load()) {
    pollfd p{listen_fd_, POLLIN, 0};
    int rc = ::poll(&p, 1, 50);
    if (rc <= 0) continue;
    int fd = ::accept4(listen_fd_, nullptr, nullptr, SOCK_CLOEXEC);
    if (fd < 0) continue;
    set_nodelay(fd);
    std::lock_guard lock(conn_mu_);
    // Reap finished workers so long runs do not accumulate threads.
    std::erase_if(workers_, [](std::thread& t) { return !t.joinable(); });
    conn_fds_.push_back(fd);
    workers_.emplace_back([this, fd] { serve(fd); });
  }
}

void TcpServer::serve(int fd) {
  try {
    while (running_.load()) {
      auto request = read_frame(fd, Clock::time_point::max());
      if (!request) break;
      std::string reply;
      try {
        reply = handler_(*request);
      } catch (const std::exception& e) {
        reply = encode_payload(error_message(e.what()));
      }
      write_all(fd, frame(reply), Clock::time_point::max());
    }
  } catch (const std::exception&) {
    // Peer went away or sent garbage; drop the connection.
  }
  std::lock_guard lock(conn_mu_);
  std::erase(conn_fds_, fd);
  ::close(fd);
  for (auto& t : workers_) {
    if (t.get_id() == std::this_thread::get_id()) {
      t.detach();
      break;
    }
  }
}

std::vector<SearchHit> RemoteSearcher::search(const FeatureVector& q,
                                              std::size_t k, std::size_t nprobe) {
  return parse_result(call(ep_, query_message(q, k, nprobe), timeout_)).hits;
}

PartialResult RemoteBroker::search(const FeatureVector& q, std::size_t k,
                                   std::size_t nprobe) {
  return parse_result(call(ep_, query_message(q, k, nprobe), timeout_));
}

}  // namespace jvs::wire
