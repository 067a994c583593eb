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

// faultline-testbed: local mock origin and scripted client.

#include <csignal>
#include <fstream>
#include <iostream>
#include <string>

#include <fmt/format.h>

#include "CLI11.hpp"

#include "faultline/testbed.h"
#include "faultline/url.h"

int main(int argc, char** argv) {
  CLI::App app{"faultline-testbed: mock origin and scripted client"};
  app.require_subcommand(1);

  std::string host = "127.0.0.1";
  std::uint16_t origin_port = 0;
  bool plain = false;
  std::string ca_out;
  auto* origin = app.add_subcommand("origin", "serve the mock origin until SIGINT or SIGTERM");
  origin->add_option("--host", host, "bind address");
  origin->add_option("-p,--port", origin_port, "port (0 picks a free one)");
  origin->add_flag("--plain", plain, "serve plain HTTP instead of HTTPS");
  origin->add_option("--ca-out", ca_out, "write the origin's CA certificate here");

  std::string script_path;
  std::string proxy;
  std::string ca_path;
  std::size_t concurrency = 1;
  double timeout_s = 60.0;
  std::string json_out;
  auto* run = app.add_subcommand("run", "execute a request script");
  run->add_option("script", script_path, "script JSON")->required()->check(CLI::ExistingFile);
  run->add_option("--proxy", proxy, "host:port of the proxy; omitted for direct requests");
  run->add_option("--ca", ca_path, "PEM bundle trusted for HTTPS");
  run->add_option("-j,--concurrency", concurrency, "parallel clients")->check(CLI::PositiveNumber);
  run->add_option("--timeout", timeout_s, "per-request timeout in seconds");
  run->add_option("--json", json_out, "write machine-readable results here");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*origin) {
      sigset_t signals;
      sigemptyset(&signals);
      sigaddset(&signals, SIGINT);
      sigaddset(&signals, SIGTERM);
      pthread_sigmask(SIG_BLOCK, &signals, nullptr);

      faultline::testbed::MockOrigin server(
          faultline::testbed::MockOrigin::Options{!plain, host, origin_port, true});
      server.start();
      if (!ca_out.empty()) server.write_ca(ca_out);
      std::cout << "origin " << server.base_url() << "\n" << std::flush;
      int received = 0;
      sigwait(&signals, &received);
      server.stop();
      return 0;
    }

    faultline::testbed::ClientOptions options;
    if (!proxy.empty()) {
      const auto hp = faultline::split_host_port(proxy, 8080);
      if (!hp) {
        std::cerr << "error: --proxy expects host:port\n";
        return 2;
      }
      options.proxy_host = hp->first;
      options.proxy_port = hp->second;
    }
    options.ca_path = ca_path;
    options.timeout_s = timeout_s;
    const auto steps = faultline::testbed::load_script(script_path);
    const auto result = faultline::testbed::run_script(steps, options, concurrency);
    std::cout << result.summary();
    if (!json_out.empty()) {
      std::ofstream out(json_out, std::ios::trunc);
      out << result.to_json().dump(2) << "\n";
    }
    return result.passed() ? 0 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
