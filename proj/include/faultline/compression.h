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

#ifndef FAULTLINE_COMPRESSION_H_
#define FAULTLINE_COMPRESSION_H_

#include <optional>
#include <string>
#include <string_view>

namespace faultline {

// Content-Encoding values we can decode and re-encode.
bool is_supported_encoding(std::string_view content_encoding);

// Decodes identity, gzip/x-gzip and deflate (zlib or raw). Returns nullopt
// for unsupported encodings or corrupt data.
std::optional<std::string> decode_body(std::string_view body, std::string_view content_encoding);
std::string encode_body(std::string_view body, std::string_view content_encoding);

}  // namespace faultline

#endif  // FAULTLINE_COMPRESSION_H_
