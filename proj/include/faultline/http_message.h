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

#ifndef FAULTLINE_HTTP_MESSAGE_H_
#define FAULTLINE_HTTP_MESSAGE_H_

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "faultline/net.h"

namespace faultline::http {

class HttpError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::size_t kMaxBodyBytes = 256u * 1024u * 1024u;

bool iequals(std::string_view a, std::string_view b);

struct Header {
  std::string name;
  std::string value;

  bool operator==(const Header&) const = default;
};

// Ordered header list. Names keep their original case; lookups ignore it.
class HeaderList {
 public:
  HeaderList() = default;
  HeaderList(std::initializer_list<Header> init) : items_(init) {}

  std::optional<std::string_view> get(std::string_view name) const;
  bool contains(std::string_view name) const { return get(name).has_value(); }
  // Replaces the first header with this name and drops the rest, or appends.
  void set(std::string_view name, std::string_view value);
  void add(std::string_view name, std::string_view value);
  std::size_t remove(std::string_view name);
  // True when a comma-separated header carries the token (case-insensitive).
  bool has_token(std::string_view name, std::string_view token) const;

  const std::vector<Header>& items() const { return items_; }
  auto begin() const { return items_.begin(); }
  auto end() const { return items_.end(); }
  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }

  bool operator==(const HeaderList&) const = default;

 private:
  std::vector<Header> items_;
};

struct Request {
  std::string method;
  std::string target;
  std::string version = "HTTP/1.1";
  HeaderList headers;
  std::string body;
};

struct Response {
  std::string version = "HTTP/1.1";
  int status = 200;
  std::string reason = "OK";
  HeaderList headers;
  std::string body;
};

std::string_view reason_phrase(int status);

// Hop-by-hop headers per RFC 9110 plus those listed in Connection.
bool is_hop_by_hop(std::string_view name);
HeaderList end_to_end_headers(const HeaderList& headers);

bool response_has_body(std::string_view request_method, int status);

// Reads one request. Returns nullopt on clean EOF before the request line.
// Chunked bodies are decoded; the result carries no Transfer-Encoding.
// When the client sent "Expect: 100-continue" and continue_sink is set, the
// interim 100 response is written there before the body is read and the
// Expect header is dropped.
std::optional<Request> read_request(net::BufferedReader& reader,
                                    net::Stream* continue_sink = nullptr);
// Reads one response to a request made with request_method. Chunked and
// close-delimited bodies are buffered in full.
Response read_response(net::BufferedReader& reader, std::string_view request_method);

// Wire form with Content-Length regenerated from body.
std::string serialize_request(const Request& request);
// Wire form. When the response carries a body, Content-Length is rewritten
// to body.size(); bodiless responses (HEAD, 1xx, 204, 304) keep headers as-is.
std::string serialize_response(const Response& response, bool has_body);

// Does the message want the connection closed after this exchange?
bool wants_close(std::string_view version, const HeaderList& headers);

}  // namespace faultline::http

#endif  // FAULTLINE_HTTP_MESSAGE_H_
