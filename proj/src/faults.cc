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

#include "faultline/faults.h"

#include <cctype>
#include <cmath>
#include <stdexcept>

#include "faultline/compression.h"

namespace faultline {

namespace {

void replace_all(std::string& s, std::string_view from, std::string_view to) {
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
}

std::string html_escape(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&#39;"; break;
      default: out += c;
    }
  }
  return out;
}

std::size_t rfind_ci(std::string_view haystack, std::string_view needle) {
  if (needle.size() > haystack.size()) return std::string_view::npos;
  for (std::size_t i = haystack.size() - needle.size() + 1; i-- > 0;) {
    bool eq = true;
    for (std::size_t j = 0; j < needle.size() && eq; ++j) {
      eq = std::tolower(static_cast<unsigned char>(haystack[i + j])) ==
           std::tolower(static_cast<unsigned char>(needle[j]));
    }
    if (eq) return i;
  }
  return std::string_view::npos;
}

}  // namespace

std::string_view to_string(FaultKind kind) {
  switch (kind) {
    case FaultKind::kNetworkError: return "network_error";
    case FaultKind::kServerError: return "server_error";
    case FaultKind::kJsDelay: return "js_delay";
    case FaultKind::kPopup: return "popup";
  }
  return "unknown";
}

std::string_view to_string(JsDelayMode mode) {
  return mode == JsDelayMode::kHold ? "hold" : "gateway_timeout";
}

FaultSpec FaultSpec::network_error(double delay_s) {
  FaultSpec spec;
  spec.kind = FaultKind::kNetworkError;
  spec.delay_s = delay_s;
  spec.status_code = kDefaultNetworkErrorStatus;
  return spec;
}

FaultSpec FaultSpec::server_error(int status) {
  FaultSpec spec;
  spec.kind = FaultKind::kServerError;
  spec.status_code = status;
  return spec;
}

FaultSpec FaultSpec::js_delay(double delay_s, JsDelayMode mode) {
  FaultSpec spec;
  spec.kind = FaultKind::kJsDelay;
  spec.delay_s = delay_s;
  spec.js_mode = mode;
  return spec;
}

FaultSpec FaultSpec::popup(std::string snippet) {
  FaultSpec spec;
  spec.kind = FaultKind::kPopup;
  spec.snippet = std::move(snippet);
  return spec;
}

bool FaultSpec::contacts_origin() const {
  if (kind == FaultKind::kNetworkError) return false;
  if (kind == FaultKind::kServerError) return !skip_origin;
  return true;
}

std::chrono::milliseconds FaultSpec::delay() const {
  return std::chrono::milliseconds(static_cast<long long>(std::llround(delay_s * 1000.0)));
}

std::string FaultSpec::page_template() const {
  if (!template_id.empty()) return template_id;
  switch (kind) {
    case FaultKind::kNetworkError:
      return std::string(kNetworkErrorPage);
    case FaultKind::kServerError:
      return std::string(status_code == 504 ? kGatewayTimeoutPage : kServerErrorPage);
    case FaultKind::kJsDelay:
      return std::string(kGatewayTimeoutPage);
    case FaultKind::kPopup:
      return std::string(kMaliciousPopup);
  }
  return {};
}

void Sleeper::sleep_for(std::chrono::milliseconds duration) {
  if (duration.count() <= 0) return;
  std::unique_lock<std::mutex> lock(mu_);
  cv_.wait_for(lock, duration, [this] { return stopped_; });
}

void Sleeper::stop() {
  {
    std::lock_guard<std::mutex> lock(mu_);
    stopped_ = true;
  }
  cv_.notify_all();
}

bool Sleeper::stopped() const {
  std::lock_guard<std::mutex> lock(mu_);
  return stopped_;
}

TemplateLibrary TemplateLibrary::with_builtins() {
  TemplateLibrary lib;
  for (auto id : {kNetworkErrorPage, kServerErrorPage, kGatewayTimeoutPage, kMaliciousPopup}) {
    lib.set(std::string(id), builtin_template(id));
  }
  return lib;
}

void TemplateLibrary::set(std::string id, std::string html) {
  templates_[std::move(id)] = std::move(html);
}

const std::string* TemplateLibrary::find(std::string_view id) const {
  auto it = templates_.find(id);
  return it == templates_.end() ? nullptr : &it->second;
}

std::string TemplateLibrary::render_page(std::string_view id, int status) const {
  const std::string* html = find(id);
  if (html == nullptr) throw std::out_of_range("unknown template '" + std::string(id) + "'");
  std::string out = *html;
  replace_all(out, "{{status_code}}", std::to_string(status));
  replace_all(out, "{{reason}}", http::reason_phrase(status));
  return out;
}

std::string TemplateLibrary::popup_snippet(const FaultSpec& spec) const {
  if (!spec.snippet.empty()) return spec.snippet;
  const std::string id = spec.page_template();
  const std::string* html = find(id);
  if (html == nullptr) throw std::out_of_range("unknown template '" + id + "'");
  std::string out = *html;
  replace_all(out, "{{link_url}}",
              html_escape(spec.link_url.empty() ? kDefaultPopupLink : spec.link_url));
  return out;
}

std::vector<std::string> TemplateLibrary::ids() const {
  std::vector<std::string> out;
  for (const auto& [id, _] : templates_) out.push_back(id);
  return out;
}

bool is_html_content_type(std::string_view content_type) {
  const auto semi = content_type.find(';');
  std::string_view media = content_type.substr(0, semi);
  while (!media.empty() && media.back() == ' ') media.remove_suffix(1);
  while (!media.empty() && media.front() == ' ') media.remove_prefix(1);
  return http::iequals(media, "text/html") || http::iequals(media, "application/xhtml+xml");
}

http::Response make_error_response(int status, std::string html) {
  http::Response resp;
  resp.status = status;
  resp.reason = std::string(http::reason_phrase(status));
  resp.headers.add("Content-Type", "text/html; charset=utf-8");
  resp.headers.add("Cache-Control", "no-store");
  resp.body = std::move(html);
  resp.headers.add("Content-Length", std::to_string(resp.body.size()));
  return resp;
}

http::Response apply_network_error(const FaultSpec& spec, const TemplateLibrary& templates,
                                   Sleeper& sleeper) {
  sleeper.sleep_for(spec.delay());
  const int status = spec.status_code != 0 ? spec.status_code : kDefaultNetworkErrorStatus;
  return make_error_response(status, templates.render_page(spec.page_template(), status));
}

http::Response apply_server_error(const FaultSpec& spec, const TemplateLibrary& templates) {
  const int status = spec.status_code != 0 ? spec.status_code : kDefaultServerErrorStatus;
  return make_error_response(status, templates.render_page(spec.page_template(), status));
}

http::Response apply_js_delay(http::Response origin, const FaultSpec& spec,
                              const TemplateLibrary& templates, Sleeper& sleeper) {
  sleeper.sleep_for(spec.delay());
  if (spec.js_mode == JsDelayMode::kGatewayTimeout) {
    return make_error_response(504, templates.render_page(spec.page_template(), 504));
  }
  return origin;
}

std::string inject_popup(std::string_view html, std::string_view snippet) {
  const std::size_t close = rfind_ci(html, "</body");
  std::string out;
  out.reserve(html.size() + snippet.size());
  if (close == std::string_view::npos) {
    out.append(html);
    out.append(snippet);
    return out;
  }
  out.append(html.substr(0, close));
  out.append(snippet);
  out.append(html.substr(close));
  return out;
}

PopupOutcome inject_popup(http::Response& response, std::string_view snippet) {
  auto content_type = response.headers.get("Content-Type");
  if (!content_type || !is_html_content_type(*content_type)) return PopupOutcome::kNotHtml;
  const std::string encoding(response.headers.get("Content-Encoding").value_or(""));
  auto decoded = decode_body(response.body, encoding);
  if (!decoded) return PopupOutcome::kUndecodable;
  response.body = encode_body(inject_popup(*decoded, snippet), encoding);
  response.headers.set("Content-Length", std::to_string(response.body.size()));
  return PopupOutcome::kInjected;
}

}  // namespace faultline
