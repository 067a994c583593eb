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

#include "faultline/url.h"

#include <gtest/gtest.h>

namespace faultline {
namespace {

TEST(ParseUrl, SplitsComponents) {
  auto url = parse_url("https://shop.example:8443/cart?id=3");
  ASSERT_TRUE(url);
  EXPECT_EQ(url->scheme, "https");
  EXPECT_EQ(url->host, "shop.example");
  EXPECT_EQ(url->port, 8443);
  EXPECT_EQ(url->target, "/cart?id=3");
  EXPECT_EQ(url->authority(), "shop.example:8443");
}

TEST(ParseUrl, DefaultsPortAndPath) {
  auto url = parse_url("http://example.com");
  ASSERT_TRUE(url);
  EXPECT_EQ(url->port, 80);
  EXPECT_EQ(url->target, "/");
  EXPECT_TRUE(url->is_default_port());
  EXPECT_EQ(parse_url("https://example.com")->port, 443);
}

TEST(ParseUrl, RejectsOtherSchemesAndGarbage) {
  EXPECT_FALSE(parse_url("ftp://example.com/"));
  EXPECT_FALSE(parse_url("example.com/path"));
  EXPECT_FALSE(parse_url("http://:80/"));
  EXPECT_FALSE(parse_url("http://host:0/"));
  EXPECT_FALSE(parse_url("http://host:70000/"));
  EXPECT_FALSE(parse_url("http://[::1/"));
}

TEST(ParseUrl, Ipv6Literal) {
  auto url = parse_url("http://[::1]:8080/x");
  ASSERT_TRUE(url);
  EXPECT_EQ(url->host, "::1");
  EXPECT_EQ(url->authority(), "[::1]:8080");
  EXPECT_EQ(url->str(), "http://[::1]:8080/x");
}

TEST(NormalizeUrl, LowercasesSchemeAndHostOnly) {
  EXPECT_EQ(normalize_url("HTTPS://Shop.Example.COM/Cart/Item?Q=A"),
            "https://shop.example.com/Cart/Item?Q=A");
}

TEST(NormalizeUrl, DropsDefaultPortFragmentAndUserinfo) {
  EXPECT_EQ(normalize_url("https://example.com:443/a#top"), "https://example.com/a");
  EXPECT_EQ(normalize_url("http://user:pw@example.com:80/"), "http://example.com/");
  EXPECT_EQ(normalize_url("http://example.com:8080/"), "http://example.com:8080/");
}

TEST(NormalizeUrl, BareQueryGetsRootPath) {
  EXPECT_EQ(normalize_url("https://example.com?x=1"), "https://example.com/?x=1");
}

TEST(NormalizeUrl, IsIdempotent) {
  for (const char* u : {"HTTP://A.B:80/p?q#f", "https://x.y:444/", "http://[::1]/", "not a url"}) {
    const std::string once = normalize_url(u);
    EXPECT_EQ(normalize_url(once), once) << u;
  }
}

TEST(NormalizeUrl, UnparsableInputIsReturnedUnchanged) {
  EXPECT_EQ(normalize_url("mailto:someone"), "mailto:someone");
}

TEST(SplitHostPort, Variants) {
  EXPECT_EQ(split_host_port("example.com:443", 80), std::make_pair(std::string("example.com"), std::uint16_t{443}));
  EXPECT_EQ(split_host_port("Example.com", 443)->first, "example.com");
  EXPECT_EQ(split_host_port("Example.com", 443)->second, 443);
  EXPECT_EQ(split_host_port("[2001:db8::1]:8443", 443)->first, "2001:db8::1");
  EXPECT_FALSE(split_host_port("2001:db8::1", 443));
  EXPECT_FALSE(split_host_port("", 443));
  EXPECT_FALSE(split_host_port("host:abc", 443));
}

}  // namespace
}  // namespace faultline
