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

#ifndef FAULTLINE_HTML_CHECK_H_
#define FAULTLINE_HTML_CHECK_H_

#include <string>
#include <string_view>

namespace faultline {

// Strict structural check for HTML we author or inject: every non-void
// element is closed in order, attributes are well-formed, comments and
// raw-text elements (script, style) terminate. Case-insensitive tag names.
// On failure, returns false and describes the first problem in *error.
bool check_html(std::string_view html, std::string* error = nullptr);

}  // namespace faultline

#endif  // FAULTLINE_HTML_CHECK_H_
