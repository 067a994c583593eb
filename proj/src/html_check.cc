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

#include "faultline/html_check.h"

#include <algorithm>
#include <array>
#include <cctype>
#include <vector>

#include <fmt/format.h>

namespace faultline {

namespace {

constexpr std::array<std::string_view, 14> kVoidElements = {
    "area", "base", "br", "col", "embed", "hr", "img",
    "input", "link", "meta", "param", "source", "track", "wbr"};

bool is_void(std::string_view tag) {
  return std::find(kVoidElements.begin(), kVoidElements.end(), tag) != kVoidElements.end();
}

bool is_name_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '-' || c == '_' ||
         c == ':' || c == '.';
}

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f'; }

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

// Finds "</tag" case-insensitively at or after pos.
std::size_t find_close(std::string_view html, std::string_view tag, std::size_t pos) {
  const std::string needle = "</" + std::string(tag);
  while (pos < html.size()) {
    pos = html.find("</", pos);
    if (pos == std::string_view::npos) return pos;
    if (lower(html.substr(pos, needle.size())) == needle) return pos;
    pos += 2;
  }
  return std::string_view::npos;
}

class Checker {
 public:
  explicit Checker(std::string_view html) : html_(html) {}

  bool run(std::string* error) {
    const bool ok = scan();
    if (!ok && error != nullptr) *error = error_;
    return ok;
  }

 private:
  bool fail(std::string message) {
    error_ = fmt::format("offset {}: {}", pos_, message);
    return false;
  }

  bool scan() {
    while (pos_ < html_.size()) {
      const std::size_t lt = html_.find('<', pos_);
      if (lt == std::string_view::npos) break;
      pos_ = lt;
      if (html_.substr(pos_, 4) == "<!--") {
        const std::size_t end = html_.find("-->", pos_ + 4);
        if (end == std::string_view::npos) return fail("unterminated comment");
        pos_ = end + 3;
      } else if (html_.substr(pos_, 2) == "<!" || html_.substr(pos_, 2) == "<?") {
        const std::size_t end = html_.find('>', pos_);
        if (end == std::string_view::npos) return fail("unterminated declaration");
        pos_ = end + 1;
      } else if (html_.substr(pos_, 2) == "</") {
        if (!close_tag()) return false;
      } else if (pos_ + 1 < html_.size() &&
                 std::isalpha(static_cast<unsigned char>(html_[pos_ + 1])) != 0) {
        if (!open_tag()) return false;
      } else {
        ++pos_;  // a literal '<' in text
      }
    }
    if (!stack_.empty()) return fail("unclosed <" + stack_.back() + ">");
    return true;
  }

  bool close_tag() {
    pos_ += 2;
    const std::size_t start = pos_;
    while (pos_ < html_.size() && is_name_char(html_[pos_])) ++pos_;
    const std::string tag = lower(html_.substr(start, pos_ - start));
    while (pos_ < html_.size() && is_space(html_[pos_])) ++pos_;
    if (tag.empty() || pos_ >= html_.size() || html_[pos_] != '>') {
      return fail("malformed closing tag");
    }
    ++pos_;
    if (stack_.empty()) return fail("stray </" + tag + ">");
    if (stack_.back() != tag) {
      return fail("</" + tag + "> closes <" + stack_.back() + ">");
    }
    stack_.pop_back();
    return true;
  }

  bool open_tag() {
    ++pos_;
    const std::size_t start = pos_;
    while (pos_ < html_.size() && is_name_char(html_[pos_])) ++pos_;
    const std::string tag = lower(html_.substr(start, pos_ - start));
    bool self_closing = false;
    while (true) {
      while (pos_ < html_.size() && is_space(html_[pos_])) ++pos_;
      if (pos_ >= html_.size()) return fail("unterminated <" + tag + ">");
      const char c = html_[pos_];
      if (c == '>') {
        ++pos_;
        break;
      }
      if (c == '/' && pos_ + 1 < html_.size() && html_[pos_ + 1] == '>') {
        self_closing = true;
        pos_ += 2;
        break;
      }
      if (!attribute()) return false;
    }
    if (is_void(tag) || self_closing) return true;
    if (tag == "script" || tag == "style" || tag == "textarea" || tag == "title") {
      const std::size_t end = find_close(html_, tag, pos_);
      if (end == std::string_view::npos) return fail("unterminated <" + tag + ">");
      pos_ = end;
      stack_.push_back(tag);
      return close_tag();
    }
    stack_.push_back(tag);
    return true;
  }

  bool attribute() {
    const std::size_t start = pos_;
    while (pos_ < html_.size() && !is_space(html_[pos_]) && html_[pos_] != '=' &&
           html_[pos_] != '>' && html_[pos_] != '/' && html_[pos_] != '"' &&
           html_[pos_] != '\'' && html_[pos_] != '<') {
      ++pos_;
    }
    if (pos_ == start) return fail("malformed attribute");
    while (pos_ < html_.size() && is_space(html_[pos_])) ++pos_;
    if (pos_ >= html_.size() || html_[pos_] != '=') return true;
    ++pos_;
    while (pos_ < html_.size() && is_space(html_[pos_])) ++pos_;
    if (pos_ >= html_.size()) return fail("missing attribute value");
    const char quote = html_[pos_];
    if (quote == '"' || quote == '\'') {
      const std::size_t end = html_.find(quote, pos_ + 1);
      if (end == std::string_view::npos) return fail("unterminated attribute value");
      pos_ = end + 1;
      return true;
    }
    const std::size_t value_start = pos_;
    while (pos_ < html_.size() && !is_space(html_[pos_]) && html_[pos_] != '>') {
      const char v = html_[pos_];
      if (v == '"' || v == '\'' || v == '<' || v == '=' || v == '`') {
        return fail("invalid unquoted attribute value");
      }
      ++pos_;
    }
    if (pos_ == value_start) return fail("missing attribute value");
    return true;
  }

  std::string_view html_;
  std::size_t pos_ = 0;
  std::vector<std::string> stack_;
  std::string error_;
};

}  // namespace

bool check_html(std::string_view html, std::string* error) {
  return Checker(html).run(error);
}

}  // namespace faultline
