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

// faultline: serve the intercepting proxy and drive it.

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "httplib.h"
#include "json.hpp"

#include "faultline/config.h"
#include "faultline/net.h"
#include "faultline/proxy.h"
#include "faultline/report.h"
#include "faultline/tls.h"

namespace {

using faultline::ProxyConfig;
using nlohmann::json;

constexpr int kExitUsage = 2;
constexpr int kExitFailure = 1;

struct CommonOptions {
  std::string config_path;
  std::string log_level = "info";
};

ProxyConfig load_or_default(const CommonOptions& common) {
  if (common.config_path.empty()) return ProxyConfig{};
  return faultline::load_config(common.config_path);
}

void configure_logging(const std::string& level) {
  auto logger = spdlog::stderr_color_mt("faultline");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::from_str(level));
  spdlog::set_pattern("%Y-%m-%dT%H:%M:%S.%e %^%l%$ %v");
}

// Control endpoint client shared by task/reset/status.
struct ControlTarget {
  std::string host = "127.0.0.1";
  int port = faultline::kDefaultAdminPort;
};

int call_control(const ControlTarget& target, const std::string& method, const std::string& path,
                 const json& body) {
  httplib::Client client(target.host, target.port);
  client.set_connection_timeout(5);
  client.set_read_timeout(30);
  httplib::Result res = method == "GET"
                            ? client.Get(path)
                            : client.Post(path, body.is_null() ? "" : body.dump(),
                                          "application/json");
  if (!res) {
    std::cerr << fmt::format("error: control endpoint {}:{} unreachable ({})\n", target.host,
                             target.port, httplib::to_string(res.error()));
    return kExitFailure;
  }
  std::cout << res->body;
  if (!res->body.empty() && res->body.back() != '\n') std::cout << '\n';
  return res->status / 100 == 2 ? 0 : kExitFailure;
}

int run_serve(const CommonOptions& common, CLI::App& cmd) {
  ProxyConfig config = load_or_default(common);
  if (auto* o = cmd.get_option("--port"); o->count() > 0) {
    config.listen_port = o->as<std::uint16_t>();
  }
  if (auto* o = cmd.get_option("--admin-port"); o->count() > 0) {
    config.admin_port = o->as<std::uint16_t>();
  }
  if (auto* o = cmd.get_option("--seed"); o->count() > 0) {
    config.rng_seed = o->as<std::uint64_t>();
  }
  if (auto* o = cmd.get_option("--condition"); o->count() > 0) {
    config.condition = o->as<std::string>();
  }
  if (config.admin_port != 0 && config.admin_port == config.listen_port) {
    std::cerr << "error: --admin-port must differ from --port\n";
    return kExitUsage;
  }

  auto ca = std::make_shared<const faultline::tls::CertificateAuthority>(
      faultline::tls::CertificateAuthority::load_or_create(config.ca.cert_path, config.ca.key_path,
                                                           config.ca.validity_days));

  // Signals are taken synchronously below; every thread inherits the mask.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  faultline::ProxyServer server(config, ca);
  try {
    server.start();
  } catch (const faultline::net::NetError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  std::cout << fmt::format("listening on {}:{}\n", config.listen_host, server.port());
  if (server.admin_port() != 0) {
    std::cout << fmt::format("control on {}:{}\n", config.listen_host, server.admin_port());
  }
  std::cout << fmt::format("CA certificate {}\n", config.ca.cert_path) << std::flush;

  int received = 0;
  sigwait(&signals, &received);
  spdlog::info("received signal {}, shutting down", received);
  server.stop();
  return 0;
}

int run_ca_export(const CommonOptions& common, const std::string& out_path) {
  const ProxyConfig config = load_or_default(common);
  const auto ca = faultline::tls::CertificateAuthority::load_or_create(
      config.ca.cert_path, config.ca.key_path, config.ca.validity_days);
  if (out_path.empty() || out_path == "-") {
    std::cout << ca.cert_pem();
    return 0;
  }
  std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
  out << ca.cert_pem();
  if (!out) {
    std::cerr << "error: cannot write " << out_path << "\n";
    return kExitFailure;
  }
  std::cerr << "wrote " << out_path << "\n";
  return 0;
}

int run_validate(const CommonOptions& common) {
  if (common.config_path.empty()) {
    std::cerr << "error: --config is required\n";
    return kExitUsage;
  }
  const ProxyConfig config = faultline::load_config(common.config_path);
  std::cout << fmt::format("ok: {} rule(s), {} model endpoint(s)\n", config.rules.size(),
                           config.llm_endpoints.size());
  return 0;
}

int run_report(const CommonOptions& common, std::string tasks_path, bool as_json) {
  if (tasks_path.empty()) tasks_path = load_or_default(common).report.tasks_path;
  const auto tasks = faultline::read_tasks_jsonl(tasks_path);
  const auto report = faultline::render_report(tasks);
  if (as_json) {
    std::cout << report.summary.dump(2) << "\n";
  } else {
    std::cout << report.text;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"faultline: fault-injecting interception proxy"};
  app.require_subcommand(1);
  CommonOptions common;
  app.add_option("-c,--config", common.config_path, "JSON config file")
      ->envname("FAULTLINE_CONFIG");
  app.add_option("--log-level", common.log_level, "trace, debug, info, warn, error or off")
      ->envname("FAULTLINE_LOG_LEVEL")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "critical", "off"}));

  auto* serve = app.add_subcommand("serve", "run the proxy until SIGINT or SIGTERM");
  serve->add_option("-p,--port", "proxy listen port (0 picks a free one)")
      ->envname("FAULTLINE_PORT")
      ->check(CLI::Range(0, 65535));
  serve->add_option("--admin-port", "control endpoint port (0 disables)")
      ->check(CLI::Range(0, 65535));
  serve->add_option("-s,--seed", "seed for random_n rules")->envname("FAULTLINE_SEED");
  serve->add_option("--condition", "condition label written to task records");

  auto* ca = app.add_subcommand("ca", "interception CA");
  ca->require_subcommand(1);
  std::string ca_out;
  auto* ca_export = ca->add_subcommand("export", "print (or write) the CA certificate");
  ca_export->add_option("-o,--out", ca_out, "output file; '-' or omitted for stdout");

  ControlTarget control;
  auto add_control = [&](CLI::App* cmd) {
    cmd->add_option("--admin-host", control.host, "control endpoint host");
    cmd->add_option("--admin-port", control.port, "control endpoint port")
        ->check(CLI::Range(1, 65535));
  };

  auto* task = app.add_subcommand("task", "task boundaries");
  task->require_subcommand(1);
  std::string task_id;
  auto* task_start = task->add_subcommand("start", "open a task");
  task_start->add_option("task_id", task_id, "task identifier")->required();
  add_control(task_start);
  std::optional<std::uint64_t> steps;
  auto* task_end = task->add_subcommand("end", "close the open task and write its record");
  task_end->add_option("--steps", steps, "agent step count reported by the harness");
  add_control(task_end);

  auto* reset = app.add_subcommand("reset", "reset every rule's occurrence counter");
  add_control(reset);
  auto* status = app.add_subcommand("status", "show rule counters and the open task");
  add_control(status);

  std::string tasks_path;
  bool report_json = false;
  auto* report = app.add_subcommand("report", "summarize tasks.jsonl");
  report->add_option("--tasks", tasks_path, "tasks.jsonl (default from config)");
  report->add_flag("--json", report_json, "machine-readable summary");

  auto* validate = app.add_subcommand("validate", "check a config file and exit");

  CLI11_PARSE(app, argc, argv);

  try {
    configure_logging(common.log_level);
    // Control commands fall back to the config's control port.
    auto resolve_control = [&](CLI::App* cmd) {
      if (cmd->get_option("--admin-port")->count() == 0 && !common.config_path.empty()) {
        const ProxyConfig config = faultline::load_config(common.config_path);
        control.port = config.admin_port;
        if (cmd->get_option("--admin-host")->count() == 0) control.host = config.listen_host;
      }
    };

    if (*serve) return run_serve(common, *serve);
    if (*ca_export) return run_ca_export(common, ca_out);
    if (*task_start) {
      resolve_control(task_start);
      return call_control(control, "POST", "/task/start", json{{"task_id", task_id}});
    }
    if (*task_end) {
      resolve_control(task_end);
      return call_control(control, "POST", "/task/end",
                          steps ? json{{"steps", *steps}} : json(nullptr));
    }
    if (*reset) {
      resolve_control(reset);
      return call_control(control, "POST", "/reset", json(nullptr));
    }
    if (*status) {
      resolve_control(status);
      return call_control(control, "GET", "/status", json(nullptr));
    }
    if (*report) return run_report(common, tasks_path, report_json);
    if (*validate) return run_validate(common);
  } catch (const faultline::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}
