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

#ifndef FAULTLINE_FLOW_H_
#define FAULTLINE_FLOW_H_

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "faultline/http_message.h"

namespace faultline {

// Milliseconds since the Unix epoch.
using TimestampMs = std::int64_t;

inline TimestampMs now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

// One intercepted request/response exchange.
struct Flow {
  std::uint64_t id = 0;
  http::Request request;
  // Normalized absolute URL; rule matching and logging key on this.
  std::string url;
  // What the origin returned, when it was contacted and answered.
  std::optional<http::Response> upstream_response;
  // What the client received.
  std::optional<http::Response> response;

  std::optional<TimestampMs> t_client_request;
  std::optional<TimestampMs> t_upstream_response;
  std::optional<TimestampMs> t_client_response;

  std::vector<std::string> applied_rule_ids;
  // Synthesized by the proxy because the origin was unreachable (not an
  // injected fault).
  bool proxy_error = false;
  std::string proxy_error_detail;
  bool origin_contacted = false;
};

}  // namespace faultline

#endif  // FAULTLINE_FLOW_H_
