#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace vrgym::bridge::net {

class NetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Owning file descriptor.
class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;
  Socket(Socket&& o) noexcept : fd_(o.release()) {}
  Socket& operator=(Socket&& o) noexcept;
  ~Socket();

  int fd() const { return fd_; }
  bool valid() const { return fd_ >= 0; }
  int release() {
    int f = fd_;
    fd_ = -1;
    return f;
  }
  void close();
  // Unblocks any thread sitting in recv() on this socket.
  void shutdown() const;

  void send_all(std::string_view bytes) const;
  // Returns 0 on orderly close.
  std::size_t recv_some(char* buf, std::size_t n) const;
  // Reads exactly n bytes; false on EOF before any byte.
  bool recv_exact(char* buf, std::size_t n) const;

 private:
  int fd_ = -1;
};

Socket listen_tcp(const std::string& host, std::uint16_t port);
std::uint16_t local_port(const Socket& s);
// Waits up to timeout_ms for a pending connection; invalid socket on timeout.
Socket accept_with_timeout(const Socket& listener, int timeout_ms);
Socket connect_tcp(const std::string& host, std::uint16_t port);

}  // namespace vrgym::bridge::net
