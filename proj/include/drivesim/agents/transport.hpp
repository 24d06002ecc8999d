#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>

#include "drivesim/agents/protocol.hpp"

namespace drivesim::agents {

/// "tcp://host:port" or "unix:/path/to/socket".
struct Endpoint {
  enum class Kind { tcp, unix_socket };
  Kind kind = Kind::tcp;
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;
  std::string path;

  static Endpoint parse(const std::string& text);  // throws ValidationError
  static bool looks_like(const std::string& text);
  std::string str() const;
};

/// One framed, blocking stream socket.
class Connection {
 public:
  Connection() = default;
  explicit Connection(int fd) : fd_(fd) {}
  Connection(Connection&& o) noexcept : fd_(o.fd_) { o.fd_ = -1; }
  Connection& operator=(Connection&& o) noexcept;
  Connection(const Connection&) = delete;
  Connection& operator=(const Connection&) = delete;
  ~Connection() { close(); }

  bool open() const { return fd_ >= 0; }
  void send(const Message& m, std::uint8_t version = kProtocolVersion);
  void send_raw(std::span<const std::uint8_t> bytes);
  /// Next whole frame, or nullopt once `timeout_s` passes. Throws
  /// AgentDisconnected on end of stream and ProtocolError on bad framing.
  std::optional<Message> receive(double timeout_s);
  void close();

 private:
  bool read_exact(std::uint8_t* dst, std::size_t n, double deadline);
  int fd_ = -1;
};

class Listener {
 public:
  explicit Listener(const Endpoint& ep);
  Listener(const Listener&) = delete;
  Listener& operator=(const Listener&) = delete;
  ~Listener();
  /// The bound address; a tcp port of 0 is replaced by the assigned one.
  const Endpoint& endpoint() const { return ep_; }
  std::optional<Connection> accept(double timeout_s);

 private:
  Endpoint ep_;
  int fd_ = -1;
};

/// Throws IoError when the endpoint cannot be reached within the timeout.
Connection connect(const Endpoint& ep, double timeout_s);

}  // namespace drivesim::agents
