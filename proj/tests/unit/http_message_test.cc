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

#include <gtest/gtest.h>

#include "string_stream.h"

namespace faultline::http {
namespace {

using faultline::testing::StringStream;

std::optional<Request> parse_request(std::string wire, StringStream** sink = nullptr) {
  static thread_local std::unique_ptr<StringStream> stream;
  stream = std::make_unique<StringStream>(std::move(wire));
  if (sink != nullptr) *sink = stream.get();
  net::BufferedReader reader(*stream);
  return read_request(reader, stream.get());
}

Response parse_response(std::string wire, std::string_view method = "GET") {
  StringStream stream(std::move(wire));
  net::BufferedReader reader(stream);
  return read_response(reader, method);
}

TEST(HeaderList, CaseInsensitiveLookupPreservesCase) {
  HeaderList h;
  h.add("Content-Type", "text/html");
  h.add("X-A", "1");
  h.add("x-a", "2");
  EXPECT_EQ(*h.get("content-type"), "text/html");
  EXPECT_EQ(*h.get("X-A"), "1");
  h.set("X-a", "3");
  EXPECT_EQ(h.size(), 2u);
  EXPECT_EQ(h.items()[1].name, "X-A");
  EXPECT_EQ(*h.get("x-a"), "3");
  EXPECT_EQ(h.remove("CONTENT-TYPE"), 1u);
  EXPECT_FALSE(h.contains("Content-Type"));
}

TEST(HeaderList, HasTokenSplitsCommaLists) {
  HeaderList h{{"Connection", "keep-alive, Upgrade"}};
  EXPECT_TRUE(h.has_token("connection", "upgrade"));
  EXPECT_TRUE(h.has_token("Connection", "Keep-Alive"));
  EXPECT_FALSE(h.has_token("Connection", "close"));
}

TEST(EndToEnd, DropsHopByHopAndConnectionListed) {
  HeaderList h{{"Host", "a"},        {"Connection", "close, X-Private"},
               {"X-Private", "1"},   {"Keep-Alive", "timeout=5"},
               {"Transfer-Encoding", "chunked"}, {"Proxy-Authorization", "x"},
               {"Accept", "*/*"}};
  HeaderList out = end_to_end_headers(h);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out.items()[0].name, "Host");
  EXPECT_EQ(out.items()[1].name, "Accept");
}

TEST(ReadRequest, ContentLengthBody) {
  auto req = parse_request(
      "POST http://a.test/x HTTP/1.1\r\nHost: a.test\r\nContent-Length: 5\r\n\r\nhello");
  ASSERT_TRUE(req);
  EXPECT_EQ(req->method, "POST");
  EXPECT_EQ(req->target, "http://a.test/x");
  EXPECT_EQ(req->version, "HTTP/1.1");
  EXPECT_EQ(req->body, "hello");
}

TEST(ReadRequest, ChunkedBodyIsDecoded) {
  auto req = parse_request(
      "POST / HTTP/1.1\r\nTransfer-Encoding: chunked\r\n\r\n"
      "5;ext=1\r\nhello\r\n6\r\n world\r\n0\r\nTrailer: x\r\n\r\n");
  ASSERT_TRUE(req);
  EXPECT_EQ(req->body, "hello world");
  EXPECT_FALSE(req->headers.contains("Transfer-Encoding"));
}

TEST(ReadRequest, CleanEofReturnsNullopt) {
  EXPECT_FALSE(parse_request(""));
  EXPECT_FALSE(parse_request("\r\n"));
}

TEST(ReadRequest, MalformedInputThrows) {
  EXPECT_THROW(parse_request("GARBAGE\r\n\r\n"), HttpError);
  EXPECT_THROW(parse_request("GET / SPDY/3\r\n\r\n"), HttpError);
  EXPECT_THROW(parse_request("GET / HTTP/1.1\r\nNoColon\r\n\r\n"), HttpError);
  EXPECT_THROW(parse_request("GET / HTTP/1.1\r\nContent-Length: x\r\n\r\n"), HttpError);
  EXPECT_THROW(parse_request("GET / HTTP/1.1\r\nBad Name: 1\r\n\r\n"), HttpError);
}

TEST(ReadRequest, TruncatedBodyThrows) {
  EXPECT_THROW(parse_request("POST / HTTP/1.1\r\nContent-Length: 10\r\n\r\nabc"), net::NetError);
}

TEST(ReadRequest, ExpectContinueWritesInterimResponse) {
  StringStream* sink = nullptr;
  auto req = parse_request(
      "PUT / HTTP/1.1\r\nExpect: 100-continue\r\nContent-Length: 2\r\n\r\nok", &sink);
  ASSERT_TRUE(req);
  EXPECT_EQ(req->body, "ok");
  EXPECT_FALSE(req->headers.contains("Expect"));
  EXPECT_EQ(sink->output(), "HTTP/1.1 100 Continue\r\n\r\n");
}

TEST(ReadRequest, PipelinedRequestsShareReader) {
  StringStream stream("GET /a HTTP/1.1\r\n\r\nGET /b HTTP/1.1\r\n\r\n");
  net::BufferedReader reader(stream);
  EXPECT_EQ(read_request(reader)->target, "/a");
  EXPECT_EQ(read_request(reader)->target, "/b");
  EXPECT_FALSE(read_request(reader));
}

TEST(ReadResponse, ContentLength) {
  auto resp = parse_response("HTTP/1.1 201 Created\r\nContent-Length: 3\r\nX: y\r\n\r\nabc");
  EXPECT_EQ(resp.status, 201);
  EXPECT_EQ(resp.reason, "Created");
  EXPECT_EQ(resp.body, "abc");
}

TEST(ReadResponse, CloseDelimitedBody) {
  auto resp = parse_response("HTTP/1.0 200 OK\r\n\r\nuntil eof");
  EXPECT_EQ(resp.body, "until eof");
  EXPECT_TRUE(wants_close(resp.version, resp.headers));
}

TEST(ReadResponse, SkipsInterimResponses) {
  auto resp = parse_response(
      "HTTP/1.1 100 Continue\r\n\r\nHTTP/1.1 103 Early Hints\r\nLink: x\r\n\r\n"
      "HTTP/1.1 200 OK\r\nContent-Length: 2\r\n\r\nok");
  EXPECT_EQ(resp.status, 200);
  EXPECT_EQ(resp.body, "ok");
}

TEST(ReadResponse, HeadAndNoContentHaveNoBody) {
  auto head = parse_response("HTTP/1.1 200 OK\r\nContent-Length: 100\r\n\r\n", "HEAD");
  EXPECT_TRUE(head.body.empty());
  auto nc = parse_response("HTTP/1.1 204 No Content\r\n\r\n");
  EXPECT_TRUE(nc.body.empty());
  auto nm = parse_response("HTTP/1.1 304 Not Modified\r\nContent-Length: 9\r\n\r\n");
  EXPECT_TRUE(nm.body.empty());
}

TEST(ReadResponse, ChunkedIsDecoded) {
  auto resp = parse_response(
      "HTTP/1.1 200 OK\r\nTransfer-Encoding: chunked\r\n\r\n3\r\nabc\r\n0\r\n\r\n");
  EXPECT_EQ(resp.body, "abc");
}

TEST(ReadResponse, SwitchingProtocolsStopsAtHeaders) {
  StringStream stream("HTTP/1.1 101 Switching Protocols\r\nUpgrade: websocket\r\n\r\nFRAME");
  net::BufferedReader reader(stream);
  auto resp = read_response(reader, "GET");
  EXPECT_EQ(resp.status, 101);
  EXPECT_TRUE(resp.body.empty());
  std::string rest = reader.take_buffered();
  reader.read_to_eof(rest, 1024);
  EXPECT_EQ(rest, "FRAME");
}

TEST(Serialize, RequestRegeneratesContentLength) {
  Request req;
  req.method = "POST";
  req.target = "/x";
  req.headers.add("Host", "a");
  req.headers.add("Content-Length", "999");
  req.body = "four";
  EXPECT_EQ(serialize_request(req), "POST /x HTTP/1.1\r\nHost: a\r\nContent-Length: 4\r\n\r\nfour");
}

TEST(Serialize, ResponseRoundTrip) {
  Response resp;
  resp.status = 404;
  resp.reason = "Not Found";
  resp.headers.add("Content-Type", "text/plain");
  resp.body = std::string("bin\0ary", 7);
  const std::string wire = serialize_response(resp, true);
  Response back = parse_response(wire);
  EXPECT_EQ(back.status, 404);
  EXPECT_EQ(back.body, resp.body);
  EXPECT_EQ(*back.headers.get("Content-Length"), "7");
}

TEST(Serialize, BodilessResponseKeepsHeaders) {
  Response resp;
  resp.headers.add("Content-Length", "42");
  EXPECT_EQ(serialize_response(resp, false), "HTTP/1.1 200 OK\r\nContent-Length: 42\r\n\r\n");
}

TEST(WantsClose, VersionDefaults) {
  EXPECT_FALSE(wants_close("HTTP/1.1", {}));
  EXPECT_TRUE(wants_close("HTTP/1.1", {{"Connection", "close"}}));
  EXPECT_TRUE(wants_close("HTTP/1.0", {}));
  EXPECT_FALSE(wants_close("HTTP/1.0", {{"Connection", "keep-alive"}}));
}

TEST(ResponseHasBody, Rules) {
  EXPECT_TRUE(response_has_body("GET", 200));
  EXPECT_FALSE(response_has_body("HEAD", 200));
  EXPECT_FALSE(response_has_body("GET", 204));
  EXPECT_FALSE(response_has_body("GET", 304));
  EXPECT_FALSE(response_has_body("GET", 101));
  EXPECT_TRUE(response_has_body("POST", 500));
}

}  // namespace
}  // namespace faultline::http
