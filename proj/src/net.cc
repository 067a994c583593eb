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

#include "faultline/net.h"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <memory>

#include <fmt/format.h>

namespace faultline::net {

namespace {

std::string errno_text(int err) { return std::strerror(err); }

struct AddrInfoDeleter {
  void operator()(addrinfo* ai) const { freeaddrinfo(ai); }
};
using AddrInfoPtr = std::unique_ptr<addrinfo, AddrInfoDeleter>;

AddrInfoPtr resolve(const std::string& host, std::uint16_t port, bool passive) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  if (passive) hints.ai_flags = AI_PASSIVE;
  addrinfo* out = nullptr;
  const std::string service = std::to_string(port);
  const int rc = getaddrinfo(host.empty() ? nullptr : host.c_str(),
                             service.c_str(), &hints, &out);
  if (rc != 0) {
    throw NetError(fmt::format("cannot resolve {}: {}", host, gai_strerror(rc)));
  }
  return AddrInfoPtr(out);
}

timeval to_timeval(std::chrono::milliseconds ms) {
  timeval tv{};
  tv.tv_sec = static_cast<time_t>(ms.count() / 1000);
  tv.tv_usec = static_cast<suseconds_t>((ms.count() % 1000) * 1000);
  return tv;
}

}  // namespace

Socket::~Socket() { close(); }

Socket& Socket::operator=(Socket&& other) noexcept {
  if (this != &other) {
    close();
    fd_ = other.release();
  }
  return *this;
}

int Socket::release() {
  const int fd = fd_;
  fd_ = -1;
  return fd;
}

void Socket::close() {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

void Socket::shutdown_both() const {
  if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

void Socket::set_timeouts(std::chrono::milliseconds read_timeout,
                          std::chrono::milliseconds write_timeout) const {
  const timeval rtv = to_timeval(read_timeout);
  const timeval wtv = to_timeval(write_timeout);
  setsockopt(fd_, SOL_SOCKET, SO_RCVTIMEO, &rtv, sizeof(rtv));
  setsockopt(fd_, SOL_SOCKET, SO_SNDTIMEO, &wtv, sizeof(wtv));
}

void Socket::set_nodelay() const {
  int one = 1;
  setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

Socket listen_tcp(const std::string& host, std::uint16_t port, int backlog) {
  auto addrs = resolve(host, port, true);
  int last_err = 0;
  for (addrinfo* ai = addrs.get(); ai != nullptr; ai = ai->ai_next) {
    Socket sock(::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol));
    if (!sock.valid()) {
      last_err = errno;
      continue;
    }
    int one = 1;
    setsockopt(sock.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    if (::bind(sock.fd(), ai->ai_addr, ai->ai_addrlen) != 0 ||
        ::listen(sock.fd(), backlog) != 0) {
      last_err = errno;
      continue;
    }
    return sock;
  }
  throw NetError(fmt::format("cannot bind {}:{}: {}", host, port, errno_text(last_err)));
}

std::uint16_t local_port(const Socket& socket) {
  sockaddr_storage ss{};
  socklen_t len = sizeof(ss);
  if (getsockname(socket.fd(), reinterpret_cast<sockaddr*>(&ss), &len) != 0) {
    throw NetError("getsockname: " + errno_text(errno));
  }
  if (ss.ss_family == AF_INET6) {
    return ntohs(reinterpret_cast<sockaddr_in6*>(&ss)->sin6_port);
  }
  return ntohs(reinterpret_cast<sockaddr_in*>(&ss)->sin_port);
}

Socket accept_tcp(const Socket& listener) {
  while (true) {
    const int fd = ::accept4(listener.fd(), nullptr, nullptr, SOCK_CLOEXEC);
    if (fd >= 0) return Socket(fd);
    if (errno == EINTR || errno == ECONNABORTED) continue;
    return Socket();
  }
}

Socket connect_tcp(const std::string& host, std::uint16_t port,
                   std::chrono::milliseconds timeout) {
  auto addrs = resolve(host, port, false);
  std::string last_error = "no addresses";
  for (addrinfo* ai = addrs.get(); ai != nullptr; ai = ai->ai_next) {
    Socket sock(::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol));
    if (!sock.valid()) {
      last_error = errno_text(errno);
      continue;
    }
    const int flags = fcntl(sock.fd(), F_GETFL, 0);
    fcntl(sock.fd(), F_SETFL, flags | O_NONBLOCK);
    int rc = ::connect(sock.fd(), ai->ai_addr, ai->ai_addrlen);
    if (rc != 0 && errno == EINPROGRESS) {
      pollfd pfd{sock.fd(), POLLOUT, 0};
      rc = ::poll(&pfd, 1, static_cast<int>(timeout.count()));
      if (rc == 0) {
        last_error = "connect timed out";
        continue;
      }
      int err = 0;
      socklen_t len = sizeof(err);
      getsockopt(sock.fd(), SOL_SOCKET, SO_ERROR, &err, &len);
      if (rc < 0 || err != 0) {
        last_error = errno_text(rc < 0 ? errno : err);
        continue;
      }
    } else if (rc != 0) {
      last_error = errno_text(errno);
      continue;
    }
    fcntl(sock.fd(), F_SETFL, flags);
    sock.set_nodelay();
    return sock;
  }
  throw NetError(fmt::format("cannot connect to {}:{}: {}", host, port, last_error));
}

std::size_t PlainStream::read_some(std::span<char> buffer) {
  while (true) {
    const ssize_t n = ::recv(socket_.fd(), buffer.data(), buffer.size(), 0);
    if (n >= 0) return static_cast<std::size_t>(n);
    if (errno == EINTR) continue;
    if (errno == EAGAIN || errno == EWOULDBLOCK) throw NetError("read timed out");
    throw NetError("recv: " + errno_text(errno));
  }
}

void PlainStream::write_all(std::string_view data) {
  while (!data.empty()) {
    const ssize_t n = ::send(socket_.fd(), data.data(), data.size(), MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw NetError("send: " + errno_text(errno));
    }
    data.remove_prefix(static_cast<std::size_t>(n));
  }
}

void PlainStream::shutdown_write() {
  if (socket_.valid()) ::shutdown(socket_.fd(), SHUT_WR);
}

bool BufferedReader::fill() {
  if (pos_ == buffer_.size()) {
    buffer_.clear();
    pos_ = 0;
  } else if (pos_ > 64 * 1024) {
    buffer_.erase(0, pos_);
    pos_ = 0;
  }
  char chunk[16 * 1024];
  const std::size_t n = stream_->read_some(chunk);
  if (n == 0) return false;
  buffer_.append(chunk, n);
  return true;
}

std::optional<std::string> BufferedReader::read_line(std::size_t max_length) {
  // Offset relative to pos_, since fill() may compact the buffer.
  std::size_t scanned = 0;
  while (true) {
    const std::size_t nl = buffer_.find('\n', pos_ + scanned);
    if (nl != std::string::npos) {
      std::size_t end = nl;
      if (end > pos_ && buffer_[end - 1] == '\r') --end;
      std::string line = buffer_.substr(pos_, end - pos_);
      pos_ = nl + 1;
      return line;
    }
    scanned = buffer_.size() - pos_;
    if (buffer_.size() - pos_ > max_length) throw NetError("line too long");
    const bool empty_before = buffer_.size() == pos_;
    if (!fill()) {
      if (empty_before) return std::nullopt;
      throw NetError("unexpected EOF inside line");
    }
  }
}

void BufferedReader::read_exact(std::size_t n, std::string& out) {
  while (n > 0) {
    if (pos_ == buffer_.size() && !fill()) throw NetError("unexpected EOF in body");
    const std::size_t take = std::min(n, buffer_.size() - pos_);
    out.append(buffer_, pos_, take);
    pos_ += take;
    n -= take;
  }
}

void BufferedReader::read_to_eof(std::string& out, std::size_t max_bytes) {
  while (true) {
    out.append(buffer_, pos_, std::string::npos);
    pos_ = buffer_.size();
    if (out.size() > max_bytes) throw NetError("body too large");
    if (!fill()) return;
  }
}

std::string BufferedReader::take_buffered() {
  std::string rest = buffer_.substr(pos_);
  buffer_.clear();
  pos_ = 0;
  return rest;
}

}  // namespace faultline::net
