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

#include "faultline/http_message.h"

#include <algorithm>
#include <array>
#include <charconv>
#include <cctype>

#include <fmt/format.h>

namespace faultline::http {

namespace {

constexpr std::size_t kMaxHeaders = 256;

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

bool is_token_char(char c) {
  static constexpr std::string_view kSpecial = "!#$%&'*+-.^_`|~";
  return std::isalnum(static_cast<unsigned char>(c)) != 0 ||
         kSpecial.find(c) != std::string_view::npos;
}

HeaderList read_headers(net::BufferedReader& reader) {
  HeaderList headers;
  while (true) {
    auto line = reader.read_line();
    if (!line) throw HttpError("unexpected EOF in headers");
    if (line->empty()) return headers;
    if (headers.size() >= kMaxHeaders) throw HttpError("too many headers");
    const std::size_t colon = line->find(':');
    if (colon == std::string::npos || colon == 0) {
      throw HttpError("malformed header line: " + *line);
    }
    const std::string_view name(line->data(), colon);
    if (!std::all_of(name.begin(), name.end(), is_token_char)) {
      throw HttpError("invalid header name: " + std::string(name));
    }
    headers.add(name, trim(std::string_view(*line).substr(colon + 1)));
  }
}

std::size_t parse_length(std::string_view text) {
  text = trim(text);
  std::size_t value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw HttpError("invalid Content-Length: " + std::string(text));
  }
  if (value > kMaxBodyBytes) throw HttpError("body too large");
  return value;
}

void read_chunked(net::BufferedReader& reader, std::string& body) {
  while (true) {
    auto line = reader.read_line();
    if (!line) throw HttpError("unexpected EOF in chunked body");
    std::string_view size_text(*line);
    if (const auto semi = size_text.find(';'); semi != std::string_view::npos) {
      size_text = size_text.substr(0, semi);
    }
    size_text = trim(size_text);
    std::size_t size = 0;
    const auto [ptr, ec] =
        std::from_chars(size_text.data(), size_text.data() + size_text.size(), size, 16);
    if (ec != std::errc() || ptr != size_text.data() + size_text.size()) {
      throw HttpError("invalid chunk size: " + *line);
    }
    if (size == 0) break;
    if (body.size() + size > kMaxBodyBytes) throw HttpError("body too large");
    reader.read_exact(size, body);
    auto crlf = reader.read_line();
    if (!crlf || !crlf->empty()) throw HttpError("missing CRLF after chunk");
  }
  // Trailers are consumed and dropped.
  while (true) {
    auto line = reader.read_line();
    if (!line || line->empty()) return;
  }
}

bool is_chunked(const HeaderList& headers) {
  auto te = headers.get("Transfer-Encoding");
  if (!te) return false;
  std::string_view v = trim(*te);
  const auto comma = v.rfind(',');
  if (comma != std::string_view::npos) v = trim(v.substr(comma + 1));
  return iequals(v, "chunked");
}

void append_headers(std::string& out, const HeaderList& headers,
                    bool skip_content_length) {
  for (const auto& h : headers) {
    if (skip_content_length && iequals(h.name, "Content-Length")) continue;
    out += h.name;
    out += ": ";
    out += h.value;
    out += "\r\n";
  }
}

}  // namespace

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() &&
         std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) ==
                  std::tolower(static_cast<unsigned char>(y));
         });
}

std::optional<std::string_view> HeaderList::get(std::string_view name) const {
  for (const auto& h : items_) {
    if (iequals(h.name, name)) return std::string_view(h.value);
  }
  return std::nullopt;
}

void HeaderList::set(std::string_view name, std::string_view value) {
  auto it = std::find_if(items_.begin(), items_.end(),
                         [&](const Header& h) { return iequals(h.name, name); });
  if (it == items_.end()) {
    add(name, value);
    return;
  }
  it->value = std::string(value);
  items_.erase(std::remove_if(std::next(it), items_.end(),
                              [&](const Header& h) { return iequals(h.name, name); }),
               items_.end());
}

void HeaderList::add(std::string_view name, std::string_view value) {
  items_.push_back(Header{std::string(name), std::string(value)});
}

std::size_t HeaderList::remove(std::string_view name) {
  const auto before = items_.size();
  items_.erase(std::remove_if(items_.begin(), items_.end(),
                              [&](const Header& h) { return iequals(h.name, name); }),
               items_.end());
  return before - items_.size();
}

bool HeaderList::has_token(std::string_view name, std::string_view token) const {
  for (const auto& h : items_) {
    if (!iequals(h.name, name)) continue;
    std::string_view rest(h.value);
    while (!rest.empty()) {
      const auto comma = rest.find(',');
      if (iequals(trim(rest.substr(0, comma)), token)) return true;
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
  }
  return false;
}

std::string_view reason_phrase(int status) {
  switch (status) {
    case 100: return "Continue";
    case 101: return "Switching Protocols";
    case 200: return "OK";
    case 201: return "Created";
    case 202: return "Accepted";
    case 203: return "Non-Authoritative Information";
    case 204: return "No Content";
    case 206: return "Partial Content";
    case 301: return "Moved Permanently";
    case 302: return "Found";
    case 304: return "Not Modified";
    case 307: return "Temporary Redirect";
    case 308: return "Permanent Redirect";
    case 400: return "Bad Request";
    case 401: return "Unauthorized";
    case 403: return "Forbidden";
    case 404: return "Not Found";
    case 405: return "Method Not Allowed";
    case 408: return "Request Timeout";
    case 409: return "Conflict";
    case 410: return "Gone";
    case 413: return "Content Too Large";
    case 418: return "I'm a teapot";
    case 429: return "Too Many Requests";
    case 500: return "Internal Server Error";
    case 501: return "Not Implemented";
    case 502: return "Bad Gateway";
    case 503: return "Service Unavailable";
    case 504: return "Gateway Timeout";
    default: break;
  }
  if (status >= 500) return "Server Error";
  if (status >= 400) return "Client Error";
  return "Unknown";
}

bool is_hop_by_hop(std::string_view name) {
  static constexpr std::array<std::string_view, 9> kHopByHop = {
      "Connection",          "Keep-Alive", "Proxy-Authenticate",
      "Proxy-Authorization", "TE",         "Trailer",
      "Transfer-Encoding",   "Upgrade",    "Proxy-Connection"};
  return std::any_of(kHopByHop.begin(), kHopByHop.end(),
                     [&](std::string_view h) { return iequals(h, name); });
}

HeaderList end_to_end_headers(const HeaderList& headers) {
  std::vector<std::string> listed;
  for (const auto& h : headers) {
    if (!iequals(h.name, "Connection")) continue;
    std::string_view rest(h.value);
    while (!rest.empty()) {
      const auto comma = rest.find(',');
      auto token = trim(rest.substr(0, comma));
      if (!token.empty()) listed.emplace_back(token);
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
  }
  HeaderList out;
  for (const auto& h : headers) {
    if (is_hop_by_hop(h.name)) continue;
    if (std::any_of(listed.begin(), listed.end(),
                    [&](const std::string& l) { return iequals(l, h.name); })) {
      continue;
    }
    out.add(h.name, h.value);
  }
  return out;
}

bool response_has_body(std::string_view request_method, int status) {
  if (iequals(request_method, "HEAD")) return false;
  if (status < 200 || status == 204 || status == 304) return false;
  if (iequals(request_method, "CONNECT") && status / 100 == 2) return false;
  return true;
}

std::optional<Request> read_request(net::BufferedReader& reader, net::Stream* continue_sink) {
  std::optional<std::string> line;
  // Tolerate stray CRLFs between pipelined requests.
  do {
    line = reader.read_line();
    if (!line) return std::nullopt;
  } while (line->empty());

  Request req;
  const auto sp1 = line->find(' ');
  const auto sp2 = line->rfind(' ');
  if (sp1 == std::string::npos || sp2 == sp1) {
    throw HttpError("malformed request line: " + *line);
  }
  req.method = line->substr(0, sp1);
  req.target = line->substr(sp1 + 1, sp2 - sp1 - 1);
  req.version = line->substr(sp2 + 1);
  if (req.method.empty() || req.target.empty() || !req.version.starts_with("HTTP/1.")) {
    throw HttpError("malformed request line: " + *line);
  }
  req.headers = read_headers(reader);

  const bool has_body = is_chunked(req.headers) || req.headers.contains("Content-Length");
  if (req.headers.has_token("Expect", "100-continue")) {
    req.headers.remove("Expect");
    if (has_body && continue_sink != nullptr) {
      continue_sink->write_all("HTTP/1.1 100 Continue\r\n\r\n");
    }
  }

  if (is_chunked(req.headers)) {
    read_chunked(reader, req.body);
    req.headers.remove("Transfer-Encoding");
  } else if (auto cl = req.headers.get("Content-Length")) {
    reader.read_exact(parse_length(*cl), req.body);
  }
  return req;
}

Response read_response(net::BufferedReader& reader, std::string_view request_method) {
  Response resp;
  while (true) {
    auto line = reader.read_line();
    if (!line) throw net::NetError("upstream closed before status line");
    const auto sp1 = line->find(' ');
    if (sp1 == std::string::npos || !line->starts_with("HTTP/1.")) {
      throw HttpError("malformed status line: " + *line);
    }
    resp.version = line->substr(0, sp1);
    const std::string_view rest = std::string_view(*line).substr(sp1 + 1);
    const auto sp2 = rest.find(' ');
    const std::string_view code = rest.substr(0, sp2);
    const auto [ptr, ec] = std::from_chars(code.data(), code.data() + code.size(), resp.status);
    if (ec != std::errc() || code.size() != 3) {
      throw HttpError("malformed status line: " + *line);
    }
    resp.reason = sp2 == std::string_view::npos ? std::string() : std::string(rest.substr(sp2 + 1));
    resp.headers = read_headers(reader);
    // Interim responses other than 101 are swallowed.
    if (resp.status >= 100 && resp.status < 200 && resp.status != 101) {
      resp.headers = HeaderList();
      continue;
    }
    break;
  }

  if (!response_has_body(request_method, resp.status)) return resp;
  if (is_chunked(resp.headers)) {
    read_chunked(reader, resp.body);
    resp.headers.remove("Transfer-Encoding");
  } else if (auto cl = resp.headers.get("Content-Length")) {
    reader.read_exact(parse_length(*cl), resp.body);
  } else {
    reader.read_to_eof(resp.body, kMaxBodyBytes);
    resp.headers.set("Connection", "close");
  }
  return resp;
}

std::string serialize_request(const Request& request) {
  std::string out;
  out.reserve(256 + request.body.size());
  out += fmt::format("{} {} {}\r\n", request.method, request.target, request.version);
  append_headers(out, request.headers, true);
  if (!request.body.empty() || request.headers.contains("Content-Length")) {
    out += fmt::format("Content-Length: {}\r\n", request.body.size());
  }
  out += "\r\n";
  out += request.body;
  return out;
}

std::string serialize_response(const Response& response, bool has_body) {
  std::string out;
  out.reserve(256 + response.body.size());
  out += fmt::format("{} {} {}\r\n", response.version, response.status, response.reason);
  append_headers(out, response.headers, has_body);
  if (has_body) out += fmt::format("Content-Length: {}\r\n", response.body.size());
  out += "\r\n";
  if (has_body) out += response.body;
  return out;
}

bool wants_close(std::string_view version, const HeaderList& headers) {
  if (headers.has_token("Connection", "close")) return true;
  if (version == "HTTP/1.0") return !headers.has_token("Connection", "keep-alive");
  return false;
}

}  // namespace faultline::http
