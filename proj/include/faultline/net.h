// Copyright 2026 The Faultline Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef FAULTLINE_NET_H_
#define FAULTLINE_NET_H_

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

namespace faultline::net {

class NetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Owning wrapper around a socket file descriptor.
class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  ~Socket();

  Socket(Socket&& other) noexcept : fd_(other.release()) {}
  Socket& operator=(Socket&& other) noexcept;
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;

  int fd() const { return fd_; }
  bool valid() const { return fd_ >= 0; }
  int release();
  void close();
  // Wakes any thread blocked on this socket without releasing the fd.
  void shutdown_both() const;
  void set_timeouts(std::chrono::milliseconds read_timeout,
                    std::chrono::milliseconds write_timeout) const;
  void set_nodelay() const;

 private:
  int fd_ = -1;
};

// Binds and listens. Throws NetError naming the address on failure
// (e.g. "cannot bind 127.0.0.1:8080: Address already in use").
Socket listen_tcp(const std::string& host, std::uint16_t port, int backlog = 256);
std::uint16_t local_port(const Socket& socket);
// Returns an invalid socket when the listener was shut down.
Socket accept_tcp(const Socket& listener);
Socket connect_tcp(const std::string& host, std::uint16_t port,
                   std::chrono::milliseconds timeout);

// Byte stream abstraction over plain sockets and TLS sessions.
class Stream {
 public:
  virtual ~Stream() = default;
  // Returns 0 on orderly EOF; throws NetError on failure or timeout.
  virtual std::size_t read_some(std::span<char> buffer) = 0;
  virtual void write_all(std::string_view data) = 0;
  virtual void shutdown_write() = 0;
  virtual const Socket& socket() const = 0;
  // Bytes already decoded and readable without touching the socket.
  virtual bool has_pending() const { return false; }
};

class PlainStream : public Stream {
 public:
  explicit PlainStream(Socket socket) : socket_(std::move(socket)) {}

  std::size_t read_some(std::span<char> buffer) override;
  void write_all(std::string_view data) override;
  void shutdown_write() override;
  const Socket& socket() const override { return socket_; }

  Socket release_socket() { return std::move(socket_); }

 private:
  Socket socket_;
};

// Line and length oriented reads over a Stream with an internal buffer.
class BufferedReader {
 public:
  explicit BufferedReader(Stream& stream) : stream_(&stream) {}

  // Reads one CRLF- or LF-terminated line without the terminator.
  // Returns nullopt on EOF before any byte. Throws NetError on EOF mid-line
  // or when the line exceeds max_length.
  std::optional<std::string> read_line(std::size_t max_length = 64 * 1024);
  // Appends exactly n bytes to out; throws NetError on premature EOF.
  void read_exact(std::size_t n, std::string& out);
  void read_to_eof(std::string& out, std::size_t max_bytes);
  std::string take_buffered();
  bool has_buffered() const { return pos_ < buffer_.size(); }
  Stream& stream() { return *stream_; }

 private:
  bool fill();

  Stream* stream_;
  std::string buffer_;
  std::size_t pos_ = 0;
};

}  // namespace faultline::net

#endif  // FAULTLINE_NET_H_
