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

#ifndef FAULTLINE_FAULTS_H_
#define FAULTLINE_FAULTS_H_

#include <chrono>
#include <condition_variable>
#include <map>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "faultline/http_message.h"

namespace faultline {

inline constexpr double kDefaultDelaySeconds = 10.0;
inline constexpr int kDefaultNetworkErrorStatus = 502;
inline constexpr int kDefaultServerErrorStatus = 500;

// Built-in template identifiers.
inline constexpr std::string_view kNetworkErrorPage = "network_error";
inline constexpr std::string_view kServerErrorPage = "server_error";
inline constexpr std::string_view kGatewayTimeoutPage = "gateway_timeout";
inline constexpr std::string_view kMaliciousPopup = "malicious_popup";
inline constexpr std::string_view kDefaultPopupLink = "https://example.com/";
// Attribute carried exactly once by the built-in popup.
inline constexpr std::string_view kPopupMarker = "data-faultline-popup";

enum class FaultKind { kNetworkError, kServerError, kJsDelay, kPopup };
enum class JsDelayMode { kHold, kGatewayTimeout };

std::string_view to_string(FaultKind kind);
std::string_view to_string(JsDelayMode mode);

struct FaultSpec {
  FaultKind kind = FaultKind::kNetworkError;
  double delay_s = 0.0;
  int status_code = 0;
  // Empty selects the kind's default page.
  std::string template_id;
  // Popup: either a user snippet (loaded from snippet_path) or the built-in
  // popup with link_url substituted.
  std::string snippet_path;
  std::string snippet;
  std::string link_url;
  JsDelayMode js_mode = JsDelayMode::kHold;
  // Server error only: answer without contacting the origin.
  bool skip_origin = false;

  static FaultSpec network_error(double delay_s = kDefaultDelaySeconds);
  static FaultSpec server_error(int status = kDefaultServerErrorStatus);
  static FaultSpec js_delay(double delay_s = kDefaultDelaySeconds,
                            JsDelayMode mode = JsDelayMode::kHold);
  static FaultSpec popup(std::string snippet = {});

  bool contacts_origin() const;
  std::chrono::milliseconds delay() const;
  std::string page_template() const;

  bool operator==(const FaultSpec&) const = default;
};

// Blocks only the calling flow; stop() wakes every sleeper early.
class Sleeper {
 public:
  void sleep_for(std::chrono::milliseconds duration);
  void stop();
  bool stopped() const;

 private:
  mutable std::mutex mu_;
  std::condition_variable cv_;
  bool stopped_ = false;
};

// Error pages and popup templates by identifier. Pages may contain
// {{status_code}} and {{reason}}; the popup may contain {{link_url}}.
class TemplateLibrary {
 public:
  static TemplateLibrary with_builtins();

  void set(std::string id, std::string html);
  const std::string* find(std::string_view id) const;
  bool contains(std::string_view id) const { return find(id) != nullptr; }
  // Throws std::out_of_range for an unknown id.
  std::string render_page(std::string_view id, int status) const;
  std::string popup_snippet(const FaultSpec& spec) const;
  std::vector<std::string> ids() const;

 private:
  std::map<std::string, std::string, std::less<>> templates_;
};

std::string builtin_template(std::string_view id);

bool is_html_content_type(std::string_view content_type);

http::Response make_error_response(int status, std::string html);

// Sleeps spec.delay_s, then returns the network-error page. No origin I/O.
http::Response apply_network_error(const FaultSpec& spec, const TemplateLibrary& templates,
                                   Sleeper& sleeper);
// Replaces the response with spec.status_code and its error page.
http::Response apply_server_error(const FaultSpec& spec, const TemplateLibrary& templates);
// Holds the origin response for spec.delay_s, then forwards it unmodified
// or, in gateway-timeout mode, replaces it with a 504 page.
http::Response apply_js_delay(http::Response origin, const FaultSpec& spec,
                              const TemplateLibrary& templates, Sleeper& sleeper);

// Inserts snippet once, right before the last closing body tag, or appends
// it when there is none.
std::string inject_popup(std::string_view html, std::string_view snippet);

enum class PopupOutcome { kInjected, kNotHtml, kUndecodable };

// Decodes per Content-Encoding, injects, re-encodes and fixes
// Content-Length. Leaves the response untouched unless kInjected.
PopupOutcome inject_popup(http::Response& response, std::string_view snippet);

}  // namespace faultline

#endif  // FAULTLINE_FAULTS_H_
