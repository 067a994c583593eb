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

#ifndef FAULTLINE_CONFIG_H_
#define FAULTLINE_CONFIG_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "faultline/faults.h"
#include "faultline/match_policy.h"
#include "faultline/metrics.h"

namespace faultline {

// Validation failure; path() is the offending JSON path, e.g.
// "rules[0].frequency.k".
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string path, const std::string& message)
      : std::runtime_error(path + ": " + message), path_(std::move(path)) {}

  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

inline constexpr std::uint16_t kDefaultListenPort = 8080;
inline constexpr std::uint16_t kDefaultAdminPort = 8081;

struct InjectionRule {
  std::string id;
  UrlMatcher matcher = UrlMatcher::match_all();
  FrequencyPolicy frequency;
  FaultSpec fault;

  bool operator==(const InjectionRule&) const = default;
};

struct CaPaths {
  std::string cert_path;
  std::string key_path;
  int validity_days = 365;

  bool operator==(const CaPaths&) const = default;
};

struct UpstreamOptions {
  bool verify = true;
  std::string ca_path;
  double timeout_s = 30.0;

  bool operator==(const UpstreamOptions&) const = default;
};

struct ProxyConfig {
  std::string listen_host = "127.0.0.1";
  // 0 binds an ephemeral port (tests only; rejected in config files).
  std::uint16_t listen_port = kDefaultListenPort;
  // 0 disables the control endpoint.
  std::uint16_t admin_port = kDefaultAdminPort;
  std::uint64_t rng_seed = 0;
  std::string condition;
  bool reset_rules_on_task = true;
  CaPaths ca = default_ca_paths();
  UpstreamOptions upstream;
  // User template files by id; they override built-ins of the same id.
  std::map<std::string, std::string> template_paths;
  std::vector<InjectionRule> rules;
  std::vector<LlmEndpointSpec> llm_endpoints;
  ReportPaths report;

  // Built-ins plus loaded template_paths; filled by load_config.
  TemplateLibrary templates = TemplateLibrary::with_builtins();

  static CaPaths default_ca_paths();
  // Field-wise comparison of the declarative parts (templates excluded,
  // they derive from template_paths).
  bool equivalent(const ProxyConfig& other) const;
};

// Parses and validates a config document. Relative paths resolve against
// base_dir. Throws ConfigError naming the JSON path of the first problem.
ProxyConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir);
ProxyConfig load_config(const std::filesystem::path& path);
// Serializes to the same schema parse_config accepts.
nlohmann::json config_to_json(const ProxyConfig& config);

}  // namespace faultline

#endif  // FAULTLINE_CONFIG_H_
