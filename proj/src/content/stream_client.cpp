#include <arpa/inet.h>
#include <fmt/format.h>
#include <netdb.h>
#include <poll.h>
#include <sys/socket.h>
#include <sys/un.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <json.hpp>

#include "sankofa/content/content.hpp"

namespace sankofa::content {

namespace {

class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  Socket(Socket&& other) noexcept : fd_(std::exchange(other.fd_, -1)) {}
  Socket& operator=(Socket&& other) noexcept {
    if (this != &other) {
      reset();
      fd_ = std::exchange(other.fd_, -1);
    }
    return *this;
  }
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;
  ~Socket() { reset(); }

  int fd() const { return fd_; }
  explicit operator bool() const { return fd_ >= 0; }

 private:
  void reset() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }
  int fd_ = -1;
};

Socket connect_unix(const std::string& path) {
  Socket sock(::socket(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0));
  if (!sock) return {};
  sockaddr_un addr{};
  addr.sun_family = AF_UNIX;
  if (path.size() >= sizeof(addr.sun_path)) return {};
  std::memcpy(addr.sun_path, path.c_str(), path.size() + 1);
  if (::connect(sock.fd(), reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) return {};
  return sock;
}

Socket connect_tcp(const std::string& host, const std::string& port) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* found = nullptr;
  if (::getaddrinfo(host.c_str(), port.c_str(), &hints, &found) != 0) return {};
  Socket result;
  for (addrinfo* ai = found; ai; ai = ai->ai_next) {
    Socket sock(::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol));
    if (sock && ::connect(sock.fd(), ai->ai_addr, ai->ai_addrlen) == 0) {
      result = std::move(sock);
      break;
    }
  }
  ::freeaddrinfo(found);
  return result;
}

Socket connect_endpoint(const std::string& endpoint) {
  if (endpoint.rfind("unix:", 0) == 0) return connect_unix(endpoint.substr(5));
  if (endpoint.rfind("tcp:", 0) == 0) {
    const std::string rest = endpoint.substr(4);
    const auto colon = rest.rfind(':');
    if (colon == std::string::npos) {
      throw Error(Errc::InvalidArgument, "tcp endpoint needs host:port: " + endpoint);
    }
    return connect_tcp(rest.substr(0, colon), rest.substr(colon + 1));
  }
  throw Error(Errc::InvalidArgument, "endpoint must start with unix: or tcp: (" + endpoint + ")");
}

class SocketSource final : public TokenSource {
 public:
  SocketSource(Socket sock, Clock& clock, std::string name)
      : sock_(std::move(sock)), clock_(clock), name_(std::move(name)) {}

  Frame next(std::optional<Nanos> deadline) override {
    std::string line;
    if (!read_line(line, deadline)) return {Frame::Kind::Timeout, {}, FinishReason::Error};
    if (line.rfind("T ", 0) == 0) return {Frame::Kind::Token, unescape_token(line.substr(2))};
    if (line == "T") return {Frame::Kind::Token, ""};
    if (line.rfind("DONE", 0) == 0) {
      const std::string reason = line.size() > 5 ? line.substr(5) : "stop";
      return {Frame::Kind::Done, {}, finish_reason_from_string(reason)};
    }
    return {Frame::Kind::Done, {}, FinishReason::Error};
  }

 private:
  // False on deadline. A closed or failed connection yields an error DONE line.
  bool read_line(std::string& line, std::optional<Nanos> deadline) {
    while (true) {
      const auto newline = buffer_.find('\n');
      if (newline != std::string::npos) {
        line = buffer_.substr(0, newline);
        buffer_.erase(0, newline + 1);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return true;
      }
      if (closed_) {
        line = "DONE error";
        return true;
      }
      int timeout_ms = -1;
      if (deadline) {
        const Nanos remaining = *deadline - clock_.now();
        if (remaining <= 0) return false;
        timeout_ms = static_cast<int>((remaining + kNanosPerMilli - 1) / kNanosPerMilli);
      }
      pollfd pfd{sock_.fd(), POLLIN, 0};
      const int ready = ::poll(&pfd, 1, timeout_ms);
      if (ready < 0 && errno == EINTR) continue;
      if (ready == 0) return false;
      char chunk[4096];
      const ssize_t got = ready < 0 ? -1 : ::recv(sock_.fd(), chunk, sizeof(chunk), 0);
      if (got <= 0) {
        closed_ = true;
      } else {
        buffer_.append(chunk, static_cast<std::size_t>(got));
      }
    }
  }

  Socket sock_;
  Clock& clock_;
  std::string name_;
  std::string buffer_;
  bool closed_ = false;
};

}  // namespace

StreamClientBackend::StreamClientBackend(ModelBackendDescriptor descriptor, int max_retries,
                                         Nanos retry_backoff)
    : descriptor_(std::move(descriptor)), max_retries_(max_retries), retry_backoff_(retry_backoff) {}

std::unique_ptr<TokenSource> StreamClientBackend::open(const GenerationRequest& request,
                                                       Clock& clock) {
  Socket sock;
  for (int attempt = 0; attempt <= max_retries_ && !sock; ++attempt) {
    if (attempt > 0) clock.sleep_for(retry_backoff_);
    sock = connect_endpoint(descriptor_.endpoint);
  }
  if (!sock) {
    throw Error(Errc::BackendUnavailable,
                fmt::format("{}: cannot connect to {} after {} attempts", descriptor_.name,
                            descriptor_.endpoint, max_retries_ + 1));
  }
  const nlohmann::json body = {
      {"model", descriptor_.name},       {"template", request.template_id},
      {"language", request.language},    {"subject", request.subject},
      {"grade", request.grade},          {"max_tokens", request.max_tokens},
      {"seed", request.seed},
  };
  const std::string line = body.dump() + "\n";
  std::size_t sent = 0;
  while (sent < line.size()) {
    const ssize_t n = ::send(sock.fd(), line.data() + sent, line.size() - sent, MSG_NOSIGNAL);
    if (n <= 0) {
      if (n < 0 && errno == EINTR) continue;
      throw Error(Errc::BackendUnavailable, descriptor_.name + ": request write failed");
    }
    sent += static_cast<std::size_t>(n);
  }
  return std::make_unique<SocketSource>(std::move(sock), clock, descriptor_.name);
}

}  // namespace sankofa::content
