#include "drivesim/agents/transport.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <sys/un.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <thread>

#include "drivesim/common/error.hpp"

namespace drivesim::agents {

namespace {

double now_s() {
  using namespace std::chrono;
  return duration<double>(steady_clock::now().time_since_epoch()).count();
}

int remaining_ms(double deadline) {
  const double left = deadline - now_s();
  return left <= 0 ? 0 : int(left * 1000.0) + 1;
}

std::string sys_error(const std::string& what) { return what + ": " + std::strerror(errno); }

sockaddr_un unix_address(const std::string& path) {
  sockaddr_un a{};
  a.sun_family = AF_UNIX;
  if (path.size() >= sizeof(a.sun_path)) throw ValidationError("socket path too long: " + path);
  std::memcpy(a.sun_path, path.c_str(), path.size() + 1);
  return a;
}

sockaddr_in tcp_address(const Endpoint& ep) {
  sockaddr_in a{};
  a.sin_family = AF_INET;
  a.sin_port = htons(ep.port);
  const std::string host = ep.host == "localhost" ? "127.0.0.1" : ep.host;
  if (inet_pton(AF_INET, host.c_str(), &a.sin_addr) != 1) throw ValidationError("bad IPv4 host '" + ep.host + "'");
  return a;
}

}  // namespace

bool Endpoint::looks_like(const std::string& text) {
  return text.rfind("tcp://", 0) == 0 || text.rfind("unix:", 0) == 0;
}

Endpoint Endpoint::parse(const std::string& text) {
  Endpoint ep;
  if (text.rfind("unix:", 0) == 0) {
    ep.kind = Kind::unix_socket;
    ep.path = text.substr(5);
    if (ep.path.empty()) throw ValidationError("empty socket path in '" + text + "'");
    return ep;
  }
  if (text.rfind("tcp://", 0) != 0) throw ValidationError("endpoint must start with tcp:// or unix: ('" + text + "')");
  const std::string rest = text.substr(6);
  const auto colon = rest.rfind(':');
  if (colon == std::string::npos || colon == 0) throw ValidationError("endpoint needs host:port ('" + text + "')");
  ep.host = rest.substr(0, colon);
  const std::string port = rest.substr(colon + 1);
  char* end = nullptr;
  const long p = std::strtol(port.c_str(), &end, 10);
  if (port.empty() || *end != '\0' || p < 0 || p > 65535) throw ValidationError("bad port in '" + text + "'");
  ep.port = std::uint16_t(p);
  return ep;
}

std::string Endpoint::str() const {
  return kind == Kind::unix_socket ? "unix:" + path : "tcp://" + host + ":" + std::to_string(port);
}

Connection& Connection::operator=(Connection&& o) noexcept {
  if (this != &o) {
    close();
    fd_ = o.fd_;
    o.fd_ = -1;
  }
  return *this;
}

void Connection::close() {
  if (fd_ >= 0) {
    ::shutdown(fd_, SHUT_RDWR);
    ::close(fd_);
    fd_ = -1;
  }
}

void Connection::send_raw(std::span<const std::uint8_t> bytes) {
  if (fd_ < 0) throw AgentDisconnected("send on closed connection");
  std::size_t off = 0;
  while (off < bytes.size()) {
    const ssize_t n = ::send(fd_, bytes.data() + off, bytes.size() - off, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw AgentDisconnected(sys_error("send"));
    }
    off += std::size_t(n);
  }
}

void Connection::send(const Message& m, std::uint8_t version) { send_raw(encode(m, version)); }

bool Connection::read_exact(std::uint8_t* dst, std::size_t n, double deadline) {
  std::size_t got = 0;
  while (got < n) {
    pollfd p{fd_, POLLIN, 0};
    const int r = ::poll(&p, 1, remaining_ms(deadline));
    if (r < 0) {
      if (errno == EINTR) continue;
      throw AgentDisconnected(sys_error("poll"));
    }
    if (r == 0) {
      if (got == 0) return false;
      throw ProtocolError("timed out inside a frame");
    }
    const ssize_t k = ::recv(fd_, dst + got, n - got, 0);
    if (k == 0) throw AgentDisconnected("peer closed the connection");
    if (k < 0) {
      if (errno == EINTR || errno == EAGAIN) continue;
      throw AgentDisconnected(sys_error("recv"));
    }
    got += std::size_t(k);
  }
  return true;
}

std::optional<Message> Connection::receive(double timeout_s) {
  if (fd_ < 0) throw AgentDisconnected("receive on closed connection");
  const double deadline = now_s() + timeout_s;
  std::vector<std::uint8_t> frame(4);
  if (!read_exact(frame.data(), 4, deadline)) return std::nullopt;
  const auto n = body_length(std::span<const std::uint8_t, 4>(frame.data(), 4));
  frame.resize(4 + std::size_t(n));
  // The rest of a started frame gets the full timeout again.
  if (!read_exact(frame.data() + 4, n, now_s() + std::max(timeout_s, 1.0)))
    throw ProtocolError("timed out inside a frame");
  return decode(frame);
}

Listener::Listener(const Endpoint& ep) : ep_(ep) {
  if (ep.kind == Endpoint::Kind::unix_socket) {
    fd_ = ::socket(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0);
    if (fd_ < 0) throw IoError(sys_error("socket"));
    ::unlink(ep.path.c_str());
    auto a = unix_address(ep.path);
    if (::bind(fd_, reinterpret_cast<sockaddr*>(&a), sizeof(a)) < 0) {
      ::close(fd_);
      throw IoError(sys_error("bind " + ep.str()));
    }
  } else {
    fd_ = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
    if (fd_ < 0) throw IoError(sys_error("socket"));
    int one = 1;
    ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    auto a = tcp_address(ep);
    if (::bind(fd_, reinterpret_cast<sockaddr*>(&a), sizeof(a)) < 0) {
      ::close(fd_);
      throw IoError(sys_error("bind " + ep.str()));
    }
    socklen_t len = sizeof(a);
    ::getsockname(fd_, reinterpret_cast<sockaddr*>(&a), &len);
    ep_.port = ntohs(a.sin_port);
  }
  if (::listen(fd_, 16) < 0) {
    ::close(fd_);
    throw IoError(sys_error("listen " + ep.str()));
  }
}

Listener::~Listener() {
  if (fd_ >= 0) ::close(fd_);
  if (ep_.kind == Endpoint::Kind::unix_socket) ::unlink(ep_.path.c_str());
}

std::optional<Connection> Listener::accept(double timeout_s) {
  const double deadline = now_s() + timeout_s;
  for (;;) {
    pollfd p{fd_, POLLIN, 0};
    const int r = ::poll(&p, 1, remaining_ms(deadline));
    if (r < 0 && errno == EINTR) continue;
    if (r < 0) throw IoError(sys_error("poll"));
    if (r == 0) return std::nullopt;
    const int c = ::accept4(fd_, nullptr, nullptr, SOCK_CLOEXEC);
    if (c < 0) {
      if (errno == EINTR || errno == ECONNABORTED) continue;
      throw IoError(sys_error("accept"));
    }
    if (ep_.kind == Endpoint::Kind::tcp) {
      int one = 1;
      ::setsockopt(c, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    }
    return Connection(c);
  }
}

Connection connect(const Endpoint& ep, double timeout_s) {
  const double deadline = now_s() + timeout_s;
  for (;;) {
    int fd;
    int rc;
    if (ep.kind == Endpoint::Kind::unix_socket) {
      fd = ::socket(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0);
      auto a = unix_address(ep.path);
      rc = ::connect(fd, reinterpret_cast<sockaddr*>(&a), sizeof(a));
    } else {
      fd = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
      auto a = tcp_address(ep);
      rc = ::connect(fd, reinterpret_cast<sockaddr*>(&a), sizeof(a));
      if (rc == 0) {
        int one = 1;
        ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
      }
    }
    if (rc == 0) return Connection(fd);
    const int err = errno;
    ::close(fd);
    // The harness may not be listening yet; retry until the deadline.
    if ((err == ECONNREFUSED || err == ENOENT) && now_s() < deadline) {
      std::this_thread::sleep_for(std::chrono::milliseconds(20));
      continue;
    }
    errno = err;
    throw IoError(sys_error("connect " + ep.str()));
  }
}

}  // namespace drivesim::agents
