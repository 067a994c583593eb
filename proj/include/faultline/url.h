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

#ifndef FAULTLINE_URL_H_
#define FAULTLINE_URL_H_

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace faultline {

// Absolute http(s) URL split into the parts the proxy routes on.
struct Url {
  std::string scheme;  // "http" or "https", lowercase
  std::string host;    // lowercase; IPv6 literals without brackets
  std::uint16_t port = 0;
  std::string target;  // path plus query, always starting with '/'

  bool is_default_port() const;
  std::string authority() const;
  // Normalized form: lowercase scheme and host, default port dropped,
  // path and query verbatim, fragment removed.
  std::string str() const;
};

std::optional<Url> parse_url(std::string_view text);
// Returns the input unchanged when it does not parse as an absolute URL.
std::string normalize_url(std::string_view text);

// Splits "host:port" / "[v6]:port". Missing port yields default_port.
std::optional<std::pair<std::string, std::uint16_t>> split_host_port(
    std::string_view authority, std::uint16_t default_port);

}  // namespace faultline

#endif  // FAULTLINE_URL_H_
