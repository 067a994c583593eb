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

#include "faultline/compression.h"

#include <stdexcept>

#include <zlib.h>

#include "faultline/http_message.h"

namespace faultline {

namespace {

enum class Codec { kIdentity, kGzip, kDeflate, kUnsupported };

Codec codec_for(std::string_view encoding) {
  while (!encoding.empty() && encoding.front() == ' ') encoding.remove_prefix(1);
  while (!encoding.empty() && encoding.back() == ' ') encoding.remove_suffix(1);
  if (encoding.empty() || http::iequals(encoding, "identity")) return Codec::kIdentity;
  if (http::iequals(encoding, "gzip") || http::iequals(encoding, "x-gzip")) return Codec::kGzip;
  if (http::iequals(encoding, "deflate")) return Codec::kDeflate;
  return Codec::kUnsupported;
}

std::optional<std::string> inflate_with(std::string_view body, int window_bits) {
  z_stream zs{};
  if (inflateInit2(&zs, window_bits) != Z_OK) return std::nullopt;
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(body.data()));
  zs.avail_in = static_cast<uInt>(body.size());
  std::string out;
  char chunk[32 * 1024];
  int rc = Z_OK;
  do {
    zs.next_out = reinterpret_cast<Bytef*>(chunk);
    zs.avail_out = sizeof(chunk);
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&zs);
      return std::nullopt;
    }
    out.append(chunk, sizeof(chunk) - zs.avail_out);
    if (out.size() > http::kMaxBodyBytes) {
      inflateEnd(&zs);
      return std::nullopt;
    }
    // gzip allows several members back to back.
    if (rc == Z_STREAM_END && window_bits > MAX_WBITS && zs.avail_in > 0) {
      if (inflateReset(&zs) != Z_OK) break;
      rc = Z_OK;
    }
  } while (rc != Z_STREAM_END && (zs.avail_in > 0 || zs.avail_out == 0));
  inflateEnd(&zs);
  if (rc != Z_STREAM_END) return std::nullopt;
  return out;
}

std::string deflate_with(std::string_view body, int window_bits) {
  z_stream zs{};
  if (deflateInit2(&zs, Z_DEFAULT_COMPRESSION, Z_DEFLATED, window_bits, 8,
                   Z_DEFAULT_STRATEGY) != Z_OK) {
    throw std::runtime_error("deflateInit2 failed");
  }
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(body.data()));
  zs.avail_in = static_cast<uInt>(body.size());
  std::string out;
  char chunk[32 * 1024];
  int rc = Z_OK;
  do {
    zs.next_out = reinterpret_cast<Bytef*>(chunk);
    zs.avail_out = sizeof(chunk);
    rc = deflate(&zs, Z_FINISH);
    out.append(chunk, sizeof(chunk) - zs.avail_out);
  } while (rc == Z_OK);
  deflateEnd(&zs);
  if (rc != Z_STREAM_END) throw std::runtime_error("deflate failed");
  return out;
}

}  // namespace

bool is_supported_encoding(std::string_view content_encoding) {
  return codec_for(content_encoding) != Codec::kUnsupported;
}

std::optional<std::string> decode_body(std::string_view body, std::string_view content_encoding) {
  switch (codec_for(content_encoding)) {
    case Codec::kIdentity:
      return std::string(body);
    case Codec::kGzip:
      return inflate_with(body, 16 + MAX_WBITS);
    case Codec::kDeflate:
      // Servers disagree on whether "deflate" carries the zlib wrapper.
      if (auto zlib = inflate_with(body, MAX_WBITS)) return zlib;
      return inflate_with(body, -MAX_WBITS);
    case Codec::kUnsupported:
      break;
  }
  return std::nullopt;
}

std::string encode_body(std::string_view body, std::string_view content_encoding) {
  switch (codec_for(content_encoding)) {
    case Codec::kIdentity:
      return std::string(body);
    case Codec::kGzip:
      return deflate_with(body, 16 + MAX_WBITS);
    case Codec::kDeflate:
      return deflate_with(body, MAX_WBITS);
    case Codec::kUnsupported:
      break;
  }
  throw std::invalid_argument("unsupported content encoding: " + std::string(content_encoding));
}

}  // namespace faultline
