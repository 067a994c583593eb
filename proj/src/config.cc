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

#include "faultline/config.h"

#include <cstdlib>
#include <fstream>
#include <limits>
#include <regex>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "faultline/html_check.h"

namespace faultline {

using nlohmann::json;

namespace {

std::string join_path(const std::string& parent, std::string_view key) {
  return parent.empty() ? std::string(key) : parent + "." + std::string(key);
}

std::string index_path(const std::string& parent, std::size_t i) {
  return fmt::format("{}[{}]", parent, i);
}

const char* type_name(const json& j) { return j.type_name(); }

// Strict object view: every key must be read, unknown keys are rejected.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) {
      throw ConfigError(path_.empty() ? "$" : path_,
                        fmt::format("expected object, got {}", type_name(j_)));
    }
  }

  std::string path(std::string_view key) const { return join_path(path_, key); }

  const json* raw(std::string_view key) {
    known_.insert(std::string(key));
    auto it = j_.find(std::string(key));
    return it == j_.end() ? nullptr : &*it;
  }

  const json& required(std::string_view key) {
    const json* v = raw(key);
    if (v == nullptr) throw ConfigError(path(key), "required key missing");
    return *v;
  }

  std::optional<std::string> string(std::string_view key) {
    const json* v = raw(key);
    if (v == nullptr) return std::nullopt;
    if (!v->is_string()) {
      throw ConfigError(path(key), fmt::format("expected string, got {}", type_name(*v)));
    }
    return v->get<std::string>();
  }

  std::string required_string(std::string_view key) {
    required(key);
    return *string(key);
  }

  std::optional<std::int64_t> integer(std::string_view key, std::int64_t min, std::int64_t max) {
    const json* v = raw(key);
    if (v == nullptr) return std::nullopt;
    if (!v->is_number_integer()) {
      throw ConfigError(path(key), fmt::format("expected integer, got {}", type_name(*v)));
    }
    if (v->is_number_unsigned() && v->get<std::uint64_t>() >
                                       static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max())) {
      throw ConfigError(path(key), fmt::format("must be in [{}, {}]", min, max));
    }
    const std::int64_t value = v->get<std::int64_t>();
    if (value < min || value > max) {
      throw ConfigError(path(key), fmt::format("must be in [{}, {}], got {}", min, max, value));
    }
    return value;
  }

  std::optional<std::uint64_t> unsigned_integer(std::string_view key) {
    const json* v = raw(key);
    if (v == nullptr) return std::nullopt;
    if (!v->is_number_unsigned() && !(v->is_number_integer() && v->get<std::int64_t>() >= 0)) {
      throw ConfigError(path(key), fmt::format("expected non-negative integer, got {}", v->dump()));
    }
    return v->get<std::uint64_t>();
  }

  std::optional<double> number(std::string_view key, double min, double max) {
    const json* v = raw(key);
    if (v == nullptr) return std::nullopt;
    if (!v->is_number()) {
      throw ConfigError(path(key), fmt::format("expected number, got {}", type_name(*v)));
    }
    const double value = v->get<double>();
    if (!(value >= min && value <= max)) {
      throw ConfigError(path(key), fmt::format("must be in [{}, {}], got {}", min, max, value));
    }
    return value;
  }

  std::optional<bool> boolean(std::string_view key) {
    const json* v = raw(key);
    if (v == nullptr) return std::nullopt;
    if (!v->is_boolean()) {
      throw ConfigError(path(key), fmt::format("expected boolean, got {}", type_name(*v)));
    }
    return v->get<bool>();
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!known_.contains(it.key())) throw ConfigError(path(it.key()), "unknown key");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> known_;
};

const json& require_array(const json& j, const std::string& path) {
  if (!j.is_array()) throw ConfigError(path, fmt::format("expected array, got {}", type_name(j)));
  return j;
}

std::string resolve(const std::filesystem::path& base_dir, const std::string& p) {
  if (p.empty()) return p;
  std::filesystem::path path(p);
  if (path.is_relative()) path = base_dir / path;
  return path.lexically_normal().string();
}

std::string read_text_file(const std::string& path, const std::string& json_path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(json_path, "cannot read file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string load_html_asset(const std::string& path, const std::string& json_path) {
  std::string html = read_text_file(path, json_path);
  std::string error;
  if (!check_html(html, &error)) {
    throw ConfigError(json_path, "'" + path + "' is not well-formed HTML: " + error);
  }
  return html;
}

UrlMatcher parse_matcher(const json& j, const std::string& path) {
  ObjectReader r(j, path);
  const std::string kind = r.required_string("kind");
  const std::string pattern = r.required_string("pattern");
  r.finish();
  if (kind == "exact") return UrlMatcher::exact(pattern);
  if (kind == "regex") {
    try {
      return UrlMatcher::regex(pattern);
    } catch (const std::regex_error& e) {
      throw ConfigError(join_path(path, "pattern"), std::string("invalid regex: ") + e.what());
    }
  }
  throw ConfigError(join_path(path, "kind"), "expected \"exact\" or \"regex\", got \"" + kind + "\"");
}

json matcher_to_json(const UrlMatcher& m) {
  return json{{"kind", m.kind() == MatchKind::kExact ? "exact" : "regex"}, {"pattern", m.pattern()}};
}

FrequencyPolicy parse_frequency(const json& j, const std::string& path) {
  ObjectReader r(j, path);
  const std::string kind = r.required_string("kind");
  constexpr std::int64_t kMax = std::numeric_limits<std::uint32_t>::max();
  FrequencyPolicy p;
  auto need_k = [&] {
    r.required("k");
    return static_cast<std::uint32_t>(*r.integer("k", 1, kMax));
  };
  if (kind == "always") {
    p = FrequencyPolicy::always();
  } else if (kind == "kth") {
    p = FrequencyPolicy::kth(need_k());
  } else if (kind == "first_k") {
    p = FrequencyPolicy::first_k(need_k());
  } else if (kind == "every_kth") {
    p = FrequencyPolicy::every_kth(need_k());
  } else if (kind == "random_n") {
    r.required("n");
    const auto n = static_cast<std::uint32_t>(*r.integer("n", 1, kMax));
    const auto horizon = r.integer("horizon", 1, kMax).value_or(FrequencyPolicy::kDefaultHorizon);
    p = FrequencyPolicy::random_n(n, static_cast<std::uint32_t>(horizon));
  } else {
    throw ConfigError(join_path(path, "kind"),
                      "expected one of always, kth, first_k, every_kth, random_n; got \"" + kind + "\"");
  }
  r.finish();
  return p;
}

json frequency_to_json(const FrequencyPolicy& p) {
  json j{{"kind", to_string(p.kind)}};
  switch (p.kind) {
    case FrequencyKind::kAlways: break;
    case FrequencyKind::kKth:
    case FrequencyKind::kFirstK:
    case FrequencyKind::kEveryKth: j["k"] = p.k; break;
    case FrequencyKind::kRandomN:
      j["n"] = p.n;
      j["horizon"] = p.horizon;
      break;
  }
  return j;
}

FaultSpec parse_fault(const json& j, const std::string& path, const std::filesystem::path& base_dir,
                      const TemplateLibrary& templates) {
  ObjectReader r(j, path);
  const std::string kind = r.required_string("kind");
  constexpr double kMaxDelay = 3600.0;
  FaultSpec f;
  if (kind == "network_error") {
    f = FaultSpec::network_error(r.number("delay_s", 0.0, kMaxDelay).value_or(kDefaultDelaySeconds));
    f.status_code = static_cast<int>(r.integer("status_code", 400, 599).value_or(kDefaultNetworkErrorStatus));
  } else if (kind == "server_error") {
    f = FaultSpec::server_error(
        static_cast<int>(r.integer("status_code", 400, 599).value_or(kDefaultServerErrorStatus)));
    f.skip_origin = r.boolean("skip_origin").value_or(false);
  } else if (kind == "js_delay") {
    f = FaultSpec::js_delay(r.number("delay_s", 0.0, kMaxDelay).value_or(kDefaultDelaySeconds));
    const std::string mode = r.string("mode").value_or("hold");
    if (mode == "hold") {
      f.js_mode = JsDelayMode::kHold;
    } else if (mode == "gateway_timeout") {
      f.js_mode = JsDelayMode::kGatewayTimeout;
    } else {
      throw ConfigError(r.path("mode"), "expected \"hold\" or \"gateway_timeout\", got \"" + mode + "\"");
    }
  } else if (kind == "popup") {
    f = FaultSpec::popup();
    f.link_url = r.string("link_url").value_or("");
    if (auto sp = r.string("snippet_path")) {
      f.snippet_path = resolve(base_dir, *sp);
      f.snippet = load_html_asset(f.snippet_path, r.path("snippet_path"));
    }
  } else {
    throw ConfigError(r.path("kind"),
                      "expected one of network_error, server_error, js_delay, popup; got \"" + kind + "\"");
  }
  f.template_id = r.string("template").value_or("");
  if (!f.template_id.empty() && !templates.contains(f.template_id)) {
    throw ConfigError(r.path("template"), "unknown template \"" + f.template_id + "\"");
  }
  r.finish();
  return f;
}

json fault_to_json(const FaultSpec& f) {
  json j{{"kind", to_string(f.kind)}};
  switch (f.kind) {
    case FaultKind::kNetworkError:
      j["delay_s"] = f.delay_s;
      j["status_code"] = f.status_code;
      break;
    case FaultKind::kServerError:
      j["status_code"] = f.status_code;
      j["skip_origin"] = f.skip_origin;
      break;
    case FaultKind::kJsDelay:
      j["delay_s"] = f.delay_s;
      j["mode"] = to_string(f.js_mode);
      break;
    case FaultKind::kPopup:
      if (!f.link_url.empty()) j["link_url"] = f.link_url;
      if (!f.snippet_path.empty()) j["snippet_path"] = f.snippet_path;
      break;
  }
  if (!f.template_id.empty()) j["template"] = f.template_id;
  return j;
}

LlmEndpointSpec parse_endpoint(const json& j, const std::string& path) {
  ObjectReader r(j, path);
  LlmEndpointSpec spec;
  spec.name = r.string("name").value_or("");
  spec.matcher = parse_matcher(r.required("matcher"), r.path("matcher"));
  if (const json* uf = r.raw("usage_fields")) {
    ObjectReader u(*uf, r.path("usage_fields"));
    spec.usage_fields.container = u.string("container").value_or(spec.usage_fields.container);
    spec.usage_fields.input_tokens_key =
        u.string("input_tokens_key").value_or(spec.usage_fields.input_tokens_key);
    spec.usage_fields.output_tokens_key =
        u.string("output_tokens_key").value_or(spec.usage_fields.output_tokens_key);
    u.finish();
  }
  if (const json* pj = r.raw("price")) {
    ObjectReader p(*pj, r.path("price"));
    constexpr double kInf = std::numeric_limits<double>::max();
    spec.price.usd_per_input_token = p.number("usd_per_input_token", 0.0, kInf).value_or(0.0);
    spec.price.usd_per_output_token = p.number("usd_per_output_token", 0.0, kInf).value_or(0.0);
    p.finish();
  }
  r.finish();
  return spec;
}

json endpoint_to_json(const LlmEndpointSpec& spec) {
  json j{{"matcher", matcher_to_json(spec.matcher)},
         {"usage_fields",
          {{"container", spec.usage_fields.container},
           {"input_tokens_key", spec.usage_fields.input_tokens_key},
           {"output_tokens_key", spec.usage_fields.output_tokens_key}}},
         {"price",
          {{"usd_per_input_token", spec.price.usd_per_input_token},
           {"usd_per_output_token", spec.price.usd_per_output_token}}}};
  if (!spec.name.empty()) j["name"] = spec.name;
  return j;
}

}  // namespace

CaPaths ProxyConfig::default_ca_paths() {
  const char* home = std::getenv("HOME");
  const std::filesystem::path dir =
      std::filesystem::path(home != nullptr && *home != '\0' ? home : ".") / ".faultline";
  return CaPaths{(dir / "faultline-ca-cert.pem").string(), (dir / "faultline-ca-key.pem").string(),
                 365};
}

bool ProxyConfig::equivalent(const ProxyConfig& o) const {
  return listen_host == o.listen_host && listen_port == o.listen_port &&
         admin_port == o.admin_port && rng_seed == o.rng_seed && condition == o.condition &&
         reset_rules_on_task == o.reset_rules_on_task && ca == o.ca && upstream == o.upstream &&
         template_paths == o.template_paths && rules == o.rules &&
         llm_endpoints == o.llm_endpoints && report == o.report;
}

ProxyConfig parse_config(const json& doc, const std::filesystem::path& base_dir) {
  ObjectReader r(doc, "");
  ProxyConfig cfg;
  cfg.listen_host = r.string("listen_host").value_or(cfg.listen_host);
  cfg.listen_port = static_cast<std::uint16_t>(r.integer("listen_port", 1, 65535).value_or(kDefaultListenPort));
  cfg.admin_port = static_cast<std::uint16_t>(r.integer("admin_port", 0, 65535).value_or(kDefaultAdminPort));
  if (cfg.admin_port != 0 && cfg.admin_port == cfg.listen_port) {
    throw ConfigError("admin_port", "must differ from listen_port");
  }
  cfg.rng_seed = r.unsigned_integer("rng_seed").value_or(0);
  cfg.condition = r.string("condition").value_or("");
  cfg.reset_rules_on_task = r.boolean("reset_rules_on_task").value_or(true);

  if (const json* ca = r.raw("ca")) {
    ObjectReader c(*ca, "ca");
    if (auto p = c.string("cert_path")) cfg.ca.cert_path = resolve(base_dir, *p);
    if (auto p = c.string("key_path")) cfg.ca.key_path = resolve(base_dir, *p);
    cfg.ca.validity_days = static_cast<int>(c.integer("validity_days", 1, 36500).value_or(365));
    c.finish();
  }

  if (const json* up = r.raw("upstream")) {
    ObjectReader u(*up, "upstream");
    cfg.upstream.verify = u.boolean("verify").value_or(true);
    if (auto p = u.string("ca_path")) cfg.upstream.ca_path = resolve(base_dir, *p);
    cfg.upstream.timeout_s = u.number("timeout_s", 0.1, 3600.0).value_or(cfg.upstream.timeout_s);
    u.finish();
  }

  if (const json* tp = r.raw("templates")) {
    ObjectReader t(*tp, "templates");
    for (auto it = tp->begin(); it != tp->end(); ++it) {
      const std::string id = it.key();
      const std::string path = resolve(base_dir, *t.string(id));
      cfg.template_paths[id] = path;
      cfg.templates.set(id, load_html_asset(path, t.path(id)));
    }
    t.finish();
  }

  if (const json* rules = r.raw("rules")) {
    require_array(*rules, "rules");
    std::set<std::string> ids;
    for (std::size_t i = 0; i < rules->size(); ++i) {
      const std::string path = index_path("rules", i);
      ObjectReader rr((*rules)[i], path);
      InjectionRule rule;
      rule.id = rr.required_string("id");
      if (rule.id.empty()) throw ConfigError(rr.path("id"), "must not be empty");
      if (!ids.insert(rule.id).second) {
        throw ConfigError(rr.path("id"), "duplicate rule id \"" + rule.id + "\"");
      }
      rule.matcher = parse_matcher(rr.required("matcher"), rr.path("matcher"));
      if (const json* fj = rr.raw("frequency")) {
        rule.frequency = parse_frequency(*fj, rr.path("frequency"));
      }
      rule.fault = parse_fault(rr.required("fault"), rr.path("fault"), base_dir, cfg.templates);
      rr.finish();
      cfg.rules.push_back(std::move(rule));
    }
  }

  if (const json* eps = r.raw("llm_endpoints")) {
    require_array(*eps, "llm_endpoints");
    for (std::size_t i = 0; i < eps->size(); ++i) {
      cfg.llm_endpoints.push_back(parse_endpoint((*eps)[i], index_path("llm_endpoints", i)));
    }
  }

  if (const json* rep = r.raw("report")) {
    ObjectReader p(*rep, "report");
    if (auto f = p.string("flows_path")) cfg.report.flows_path = *f;
    if (auto t = p.string("tasks_path")) cfg.report.tasks_path = *t;
    p.finish();
  }
  cfg.report.flows_path = resolve(base_dir, cfg.report.flows_path);
  cfg.report.tasks_path = resolve(base_dir, cfg.report.tasks_path);

  r.finish();
  return cfg;
}

ProxyConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("$", "cannot read config file '" + path.string() + "'");
  json doc = json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw ConfigError("$", "'" + path.string() + "' is not valid JSON");
  const auto base = std::filesystem::absolute(path).parent_path();
  return parse_config(doc, base);
}

json config_to_json(const ProxyConfig& c) {
  json rules = json::array();
  for (const auto& rule : c.rules) {
    rules.push_back({{"id", rule.id},
                     {"matcher", matcher_to_json(rule.matcher)},
                     {"frequency", frequency_to_json(rule.frequency)},
                     {"fault", fault_to_json(rule.fault)}});
  }
  json endpoints = json::array();
  for (const auto& ep : c.llm_endpoints) endpoints.push_back(endpoint_to_json(ep));
  json templates = json::object();
  for (const auto& [id, path] : c.template_paths) templates[id] = path;
  return json{{"listen_host", c.listen_host},
              {"listen_port", c.listen_port},
              {"admin_port", c.admin_port},
              {"rng_seed", c.rng_seed},
              {"condition", c.condition},
              {"reset_rules_on_task", c.reset_rules_on_task},
              {"ca",
               {{"cert_path", c.ca.cert_path},
                {"key_path", c.ca.key_path},
                {"validity_days", c.ca.validity_days}}},
              {"upstream",
               {{"verify", c.upstream.verify},
                {"ca_path", c.upstream.ca_path},
                {"timeout_s", c.upstream.timeout_s}}},
              {"templates", std::move(templates)},
              {"rules", std::move(rules)},
              {"llm_endpoints", std::move(endpoints)},
              {"report", {{"flows_path", c.report.flows_path}, {"tasks_path", c.report.tasks_path}}}};
}

}  // namespace faultline
