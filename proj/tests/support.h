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

#ifndef FAULTLINE_TESTS_SUPPORT_H_
#define FAULTLINE_TESTS_SUPPORT_H_

#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "faultline/config.h"
#include "faultline/proxy.h"
#include "faultline/testbed.h"
#include "faultline/tls.h"

namespace faultline::testing {

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    const auto base = std::filesystem::temp_directory_path();
    for (int attempt = 0; attempt < 100; ++attempt) {
      path_ = base / ("faultline-test-" + std::to_string(::getpid()) + "-" +
                      std::to_string(rd()));
      if (std::filesystem::create_directory(path_)) return;
    }
    throw std::runtime_error("cannot create temp dir");
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << content;
}

inline std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path) {
  std::vector<nlohmann::json> out;
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(nlohmann::json::parse(line));
  }
  return out;
}

inline std::size_t count_occurrences(std::string_view haystack, std::string_view needle) {
  std::size_t n = 0;
  for (auto pos = haystack.find(needle); pos != std::string_view::npos;
       pos = haystack.find(needle, pos + needle.size())) {
    ++n;
  }
  return n;
}

struct CommandResult {
  int exit_code = -1;
  std::string output;
};

// Runs a shell command and captures stdout and stderr together.
inline CommandResult run_command(const std::string& command) {
  CommandResult result;
  FILE* pipe = ::popen((command + " 2>&1").c_str(), "r");
  if (pipe == nullptr) return result;
  char buffer[4096];
  std::size_t n = 0;
  while ((n = std::fread(buffer, 1, sizeof(buffer), pipe)) > 0) result.output.append(buffer, n);
  const int status = ::pclose(pipe);
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return result;
}

// Shared by every harness in a process; minting the CA once keeps tests fast.
inline std::shared_ptr<const tls::CertificateAuthority> test_authority() {
  static const auto ca = std::make_shared<const tls::CertificateAuthority>(
      tls::CertificateAuthority::generate(7, "faultline test CA"));
  return ca;
}

// Mock origin plus a proxy in front of it, all on ephemeral loopback ports.
class Harness {
 public:
  explicit Harness(testbed::MockOrigin::Options origin_options = {})
      : origin_(std::move(origin_options)) {
    origin_.start();
    proxy_ca_path_ = (dir_ / "proxy-ca.pem").string();
    if (!origin_.ca_pem().empty()) {
      origin_ca_path_ = (dir_ / "origin-ca.pem").string();
      origin_.write_ca(origin_ca_path_);
    }
    write_file(proxy_ca_path_, test_authority()->cert_pem());
  }
  ~Harness() { stop(); }

  // Defaults for a loopback proxy that trusts the mock origin.
  ProxyConfig base_config() const {
    ProxyConfig config;
    config.listen_port = 0;
    config.admin_port = 0;
    config.upstream.ca_path = origin_ca_path_;
    config.upstream.timeout_s = 10.0;
    config.ca.cert_path = proxy_ca_path_;
    config.report.flows_path = (dir_ / "flows.jsonl").string();
    config.report.tasks_path = (dir_ / "tasks.jsonl").string();
    return config;
  }

  ProxyServer& start(ProxyConfig config) {
    proxy_ = std::make_unique<ProxyServer>(std::move(config), test_authority());
    proxy_->start();
    return *proxy_;
  }
  ProxyServer& start() { return start(base_config()); }

  void stop() {
    if (proxy_) proxy_->stop();
  }

  ProxyServer& proxy() { return *proxy_; }
  testbed::MockOrigin& origin() { return origin_; }
  const TempDir& dir() const { return dir_; }
  std::string url(const std::string& path) const { return origin_.base_url() + path; }

  testbed::ClientOptions client_options() const {
    testbed::ClientOptions options;
    options.proxy_host = "127.0.0.1";
    options.proxy_port = proxy_->port();
    options.ca_path = proxy_ca_path_;
    options.timeout_s = 30.0;
    return options;
  }
  testbed::ClientOptions direct_options() const {
    testbed::ClientOptions options;
    options.ca_path = origin_ca_path_;
    options.timeout_s = 30.0;
    return options;
  }

  std::vector<nlohmann::json> flows() {
    proxy_->metrics().flush();
    return read_jsonl(dir_ / "flows.jsonl");
  }
  std::vector<nlohmann::json> tasks() {
    proxy_->metrics().flush();
    return read_jsonl(dir_ / "tasks.jsonl");
  }

  const std::string& origin_ca_path() const { return origin_ca_path_; }
  const std::string& proxy_ca_path() const { return proxy_ca_path_; }

 private:
  TempDir dir_;
  testbed::MockOrigin origin_;
  std::unique_ptr<ProxyServer> proxy_;
  std::string origin_ca_path_;
  std::string proxy_ca_path_;
};

inline InjectionRule make_rule(std::string id, UrlMatcher matcher, FrequencyPolicy frequency,
                               FaultSpec fault) {
  InjectionRule rule;
  rule.id = std::move(id);
  rule.matcher = std::move(matcher);
  rule.frequency = frequency;
  rule.fault = std::move(fault);
  return rule;
}

inline testbed::ScriptedStep get(std::string url) {
  testbed::ScriptedStep step;
  step.url = std::move(url);
  return step;
}

inline testbed::ScriptedStep post(std::string url, std::string body) {
  testbed::ScriptedStep step;
  step.method = "POST";
  step.url = std::move(url);
  step.body = std::move(body);
  return step;
}

}  // namespace faultline::testing

#endif  // FAULTLINE_TESTS_SUPPORT_H_
