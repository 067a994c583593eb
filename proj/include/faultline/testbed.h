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

// Local mock origin and scripted client for exercising the proxy without
// network access.

#ifndef FAULTLINE_TESTBED_H_
#define FAULTLINE_TESTBED_H_

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "json.hpp"

#include "faultline/tls.h"

namespace httplib {
class Server;
class Client;
}  // namespace httplib

namespace faultline::testbed {

struct MockRoute {
  std::string method = "GET";
  std::string path;
  int status = 200;
  std::string content_type = "text/html; charset=utf-8";
  std::string body;
  // "gzip" or "deflate": body is stored encoded and labelled accordingly.
  std::string content_encoding;
  std::chrono::milliseconds service_time{0};
  std::vector<std::pair<std::string, std::string>> headers;
};

// HTML pages (/, /page, /item/1), /app.js, a gzip-encoded page (/gzip),
// POST /v1/chat (usage 120 in / 30 out), POST /v1/chat/stream (SSE, usage
// 800 in / 12 out), /binary, POST /cart (303) and an echo endpoint at /echo.
std::vector<MockRoute> default_routes();

class MockOrigin {
 public:
  struct Options {
    bool tls = true;
    std::string host = "127.0.0.1";
    std::uint16_t port = 0;
    bool default_routes = true;
  };

  explicit MockOrigin(Options options);
  MockOrigin() : MockOrigin(Options{}) {}
  ~MockOrigin();
  MockOrigin(const MockOrigin&) = delete;
  MockOrigin& operator=(const MockOrigin&) = delete;

  // Replaces a route with the same method and path.
  void add_route(MockRoute route);
  void start();
  void stop();

  std::uint16_t port() const { return port_; }
  std::string base_url() const;
  // PEM of the authority that signed the origin certificate (TLS only).
  const std::string& ca_pem() const { return ca_pem_; }
  void write_ca(const std::filesystem::path& path) const;

  std::uint64_t hits(const std::string& path) const;
  std::uint64_t total_hits() const { return total_hits_; }
  void reset_hits();

 private:
  Options options_;
  std::string ca_pem_;
  tls::X509Ptr cert_;
  std::shared_ptr<EVP_PKEY> key_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  std::uint16_t port_ = 0;

  mutable std::mutex mu_;
  std::map<std::pair<std::string, std::string>, MockRoute> routes_;
  std::map<std::string, std::uint64_t> hits_;
  std::atomic<std::uint64_t> total_hits_{0};
};

struct ClientOptions {
  // Empty proxy_host talks to origins directly.
  std::string proxy_host;
  std::uint16_t proxy_port = 0;
  // PEM bundle trusted for HTTPS (the proxy CA when proxied).
  std::string ca_path;
  double timeout_s = 60.0;
  bool keep_alive = true;
};

struct StepExpectation {
  std::optional<int> status;
  std::optional<std::string> body_contains;
  std::optional<std::string> body_not_contains;
  std::optional<std::string> header_present;
  std::optional<double> min_elapsed_s;
  std::optional<double> max_elapsed_s;
};

struct ScriptedStep {
  std::string method = "GET";
  std::string url;
  std::map<std::string, std::string> headers;
  std::string body;
  StepExpectation expect;
};

struct StepResult {
  std::size_t index = 0;
  std::string method;
  std::string url;
  // 0 when the request failed at the transport level.
  int status = 0;
  std::string error;
  std::string body;
  std::multimap<std::string, std::string> headers;
  double latency_s = 0.0;
  std::vector<std::string> failures;

  bool passed() const { return failures.empty(); }
  std::optional<std::string> header(const std::string& name) const;
};

struct ScriptResult {
  std::vector<StepResult> steps;
  double wall_s = 0.0;

  bool passed() const;
  nlohmann::json to_json() const;
  std::string summary() const;
};

// Issues requests through httplib, one keep-alive client per origin.
// Not thread-safe; use one instance per thread.
class ScriptedClient {
 public:
  explicit ScriptedClient(ClientOptions options);
  ~ScriptedClient();
  ScriptedClient(const ScriptedClient&) = delete;
  ScriptedClient& operator=(const ScriptedClient&) = delete;

  StepResult execute(const ScriptedStep& step);

 private:
  httplib::Client& client_for(const std::string& origin);

  ClientOptions options_;
  std::map<std::string, std::unique_ptr<httplib::Client>> clients_;
};

std::vector<std::string> check_expectation(const StepResult& result,
                                           const StepExpectation& expect);

// Runs steps in order, or spread over `concurrency` clients (step i goes to
// client i % concurrency) when concurrency > 1.
ScriptResult run_script(const std::vector<ScriptedStep>& steps, const ClientOptions& options,
                        std::size_t concurrency = 1);

// {"steps": [{"method", "url", "headers", "body", "repeat", "expect": {...}}]}
// Throws std::invalid_argument naming the offending step.
std::vector<ScriptedStep> parse_script(const nlohmann::json& doc);
std::vector<ScriptedStep> load_script(const std::filesystem::path& path);

}  // namespace faultline::testbed

#endif  // FAULTLINE_TESTBED_H_
