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

// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails. Pass criterion names to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <future>
#include <iostream>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "faultline/compression.h"
#include "faultline/html_check.h"
#include "faultline/net.h"
#include "policy_oracle.h"
#include "support.h"

namespace {

using namespace faultline;
using Clock = std::chrono::steady_clock;
using nlohmann::json;
using testbed::MockRoute;
using testbed::ScriptedClient;
using testbed::ScriptedStep;
using testing::count_occurrences;
using testing::get;
using testing::Harness;
using testing::make_rule;
using testing::post;

const std::filesystem::path kSource(FAULTLINE_SOURCE_DIR);

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

std::string random_bytes(std::mt19937_64& rng, std::size_t n) {
  std::string s(n, '\0');
  for (auto& c : s) c = static_cast<char>(rng() & 0xFF);
  return s;
}

// Independent checks on delivered HTML: our checker plus python's parser.
bool html_parses_twice(const std::string& html, const testing::TempDir& dir, std::string* why) {
  std::string error;
  if (!check_html(html, &error)) {
    *why = "check_html: " + error;
    return false;
  }
  const auto path = dir / "delivered.html";
  testing::write_file(path, html);
  const auto r = testing::run_command("python3 " + (kSource / "tests" / "html_balance.py").string() +
                                      " " + path.string());
  if (r.exit_code != 0) {
    *why = "html.parser: " + r.output;
    return false;
  }
  return true;
}

// gzip -dc as an independent decoder.
std::optional<std::string> gunzip_with_tool(const std::string& bytes, const testing::TempDir& dir) {
  const auto in = dir / "body.gz";
  const auto out = dir / "body.out";
  testing::write_file(in, bytes);
  const auto r = testing::run_command("gzip -dc " + in.string() + " > " + out.string());
  if (r.exit_code != 0) return std::nullopt;
  return testing::read_file(out);
}

// ---------------------------------------------------------------------------

Outcome pass_through_fidelity() {
  constexpr int kPairs = 1000;
  constexpr double kLimitS = 120.0;
  std::mt19937_64 rng(20260101);
  Harness h(testbed::MockOrigin::Options{.default_routes = false});
  const std::vector<int> statuses = {200, 200, 200, 201, 202, 203, 400, 403, 404, 410, 418, 500, 503};
  const std::vector<std::string> types = {"text/html; charset=utf-8", "application/json",
                                          "application/javascript", "image/png",
                                          "application/octet-stream", "text/css"};
  std::vector<MockRoute> routes;
  for (int i = 0; i < 60; ++i) {
    MockRoute r;
    r.method = rng() % 3 == 0 ? "POST" : "GET";
    r.path = fmt::format("/r/{}", i);
    r.status = statuses[rng() % statuses.size()];
    r.content_type = types[rng() % types.size()];
    const std::size_t size = rng() % 4 == 0 ? rng() % 200000 : rng() % 4096;
    r.body = random_bytes(rng, size);
    if (rng() % 5 == 0) r.content_encoding = "gzip";
    routes.push_back(r);
    h.origin().add_route(r);
  }
  h.start();

  // Origin bytes per route, fetched directly.
  ScriptedClient direct(h.direct_options());
  std::vector<testbed::StepResult> expected;
  for (const auto& r : routes) {
    ScriptedStep s;
    s.method = r.method;
    s.url = h.url(r.path);
    expected.push_back(direct.execute(s));
  }

  ScriptedClient proxied(h.client_options());
  const auto t0 = Clock::now();
  int mismatches = 0;
  std::string first_mismatch;
  for (int i = 0; i < kPairs; ++i) {
    if (rng() % 10 == 0) {
      // The echo reply is JSON, so the request body stays printable.
      std::string body(rng() % 20000, ' ');
      for (auto& c : body) c = static_cast<char>(0x20 + rng() % 95);
      const auto res = proxied.execute(post(h.url("/echo"), body));
      const auto echoed = json::parse(res.body, nullptr, false);
      if (res.status != 200 || echoed.is_discarded() || echoed.value("body", std::string()) != body) {
        ++mismatches;
        if (first_mismatch.empty()) first_mismatch = fmt::format("echo #{} status {}", i, res.status);
      }
      continue;
    }
    const std::size_t k = rng() % routes.size();
    ScriptedStep s;
    s.method = routes[k].method;
    s.url = h.url(routes[k].path);
    if (s.method == "POST") s.body = random_bytes(rng, rng() % 1024);
    const auto res = proxied.execute(s);
    if (res.status != expected[k].status || res.body != expected[k].body ||
        res.header("Content-Type") != expected[k].header("Content-Type") ||
        res.header("Content-Encoding") != expected[k].header("Content-Encoding")) {
      ++mismatches;
      if (first_mismatch.empty()) {
        first_mismatch = fmt::format("{} {} -> {} (origin {})", s.method, s.url, res.status,
                                     expected[k].status);
      }
    }
  }
  const double elapsed = seconds_since(t0);
  const auto flows = h.flows();
  std::size_t applied = 0;
  for (const auto& f : flows) applied += f["injected_rule_ids"].size();
  const bool pass = mismatches == 0 && applied == 0 && flows.size() == static_cast<std::size_t>(kPairs) &&
                    elapsed < kLimitS;
  return {pass, fmt::format("{} pairs, {} mismatches{}, {} flows logged, {} applied rule ids, "
                            "{:.1f} s (limit {:.0f} s)",
                            kPairs, mismatches, first_mismatch.empty() ? "" : " [" + first_mismatch + "]",
                            flows.size(), applied, elapsed, kLimitS)};
}

Outcome overhead_bound() {
  constexpr int kRequests = 500;
  constexpr int kWarmup = 30;
  constexpr double kBound = 0.15;
  Harness h(testbed::MockOrigin::Options{.default_routes = false});
  const std::string page(8192, 'p');
  h.origin().add_route(MockRoute{.path = "/svc", .body = page,
                                 .service_time = std::chrono::milliseconds(10)});
  h.origin().add_route(MockRoute{.path = "/raw", .body = page});
  h.start();

  auto measure = [&](const std::string& path, int n) {
    ScriptedClient direct(h.direct_options());
    ScriptedClient proxied(h.client_options());
    for (int i = 0; i < kWarmup; ++i) {
      direct.execute(get(h.url(path)));
      proxied.execute(get(h.url(path)));
    }
    std::vector<double> d, p;
    int errors = 0;
    for (int i = 0; i < n; ++i) {
      // Alternate order so drift hits both paths equally.
      auto a = (i % 2 == 0) ? direct.execute(get(h.url(path))) : proxied.execute(get(h.url(path)));
      auto b = (i % 2 == 0) ? proxied.execute(get(h.url(path))) : direct.execute(get(h.url(path)));
      const auto& dr = (i % 2 == 0) ? a : b;
      const auto& pr = (i % 2 == 0) ? b : a;
      if (dr.status != 200 || pr.status != 200 || pr.body != dr.body) ++errors;
      d.push_back(dr.latency_s);
      p.push_back(pr.latency_s);
    }
    return std::tuple{median(d), median(p), errors};
  };

  const auto t0 = Clock::now();
  const auto [d, p, errors] = measure("/svc", kRequests);
  const auto [d0, p0, errors0] = measure("/raw", 200);
  const double overhead = p / d - 1.0;
  const double elapsed = seconds_since(t0);
  const bool pass = errors == 0 && overhead <= kBound && elapsed < 300.0;
  return {pass,
          fmt::format("median direct {:.2f} ms, proxied {:.2f} ms, overhead {:+.1f}% (bound {:.0f}%) "
                      "over {} requests with 10 ms origin service time; zero-service-time "
                      "medians {:.2f}/{:.2f} ms (info only); {:.1f} s",
                      d * 1e3, p * 1e3, overhead * 100.0, kBound * 100.0, kRequests, d0 * 1e3,
                      p0 * 1e3, elapsed)};
}

Outcome delay_fidelity() {
  constexpr double kDelay = 10.0;
  constexpr double kSlack = 0.5;
  Harness h;
  auto config = h.base_config();
  config.rules.push_back(make_rule("net", UrlMatcher::regex("/page$"), FrequencyPolicy::kth(1),
                                   FaultSpec::network_error(kDelay)));
  config.rules.push_back(make_rule("js", UrlMatcher::regex(R"(\.js(\?.*)?$)"),
                                   FrequencyPolicy::kth(1), FaultSpec::js_delay(kDelay)));
  h.start(config);
  const auto options = h.client_options();
  auto run = [&](const std::string& path) {
    ScriptedClient client(options);
    return client.execute(get(h.url(path)));
  };
  auto net = std::async(std::launch::async, run, "/page");
  auto js = std::async(std::launch::async, run, "/app.js");
  const auto n = net.get();
  const auto j = js.get();
  ScriptedClient direct(h.direct_options());
  const auto js_origin = direct.execute(get(h.url("/app.js")));
  const bool net_ok = n.status == 502 && n.latency_s >= kDelay && n.latency_s <= kDelay + kSlack &&
                      n.body.find("data-faultline-page=\"network_error\"") != std::string::npos;
  const bool js_ok = j.status == 200 && j.body == js_origin.body && j.latency_s >= kDelay &&
                     j.latency_s <= kDelay + kSlack;
  return {net_ok && js_ok,
          fmt::format("network_error {:.3f} s (status {}), js_delay {:.3f} s (status {}, body "
                      "{}), window [{:.1f}, {:.1f}] s",
                      n.latency_s, n.status, j.latency_s, j.status,
                      j.body == js_origin.body ? "identical" : "differs", kDelay, kDelay + kSlack)};
}

Outcome policy_oracle_equivalence() {
  const auto t0 = Clock::now();
  std::mt19937_64 gen(7);
  std::size_t cases = 0, sequences = 0, mismatches = 0;
  std::string first;
  for (int kind = 0; kind < 5; ++kind) {
    for (std::uint32_t param = 1; param <= 10; ++param) {
      ++cases;
      FrequencyPolicy policy;
      switch (kind) {
        case 0: policy = FrequencyPolicy::always(); break;
        case 1: policy = FrequencyPolicy::kth(param); break;
        case 2: policy = FrequencyPolicy::first_k(param); break;
        case 3: policy = FrequencyPolicy::every_kth(param); break;
        default: policy = FrequencyPolicy::random_n(param); break;
      }
      const oracle::Policy op{static_cast<oracle::Kind>(kind), param, param, 10};
      for (int trial = 0; trial < 200; ++trial) {
        const std::size_t length = gen() % 51;
        const double density = static_cast<double>(gen() % 101) / 100.0;
        std::vector<bool> matched(length);
        for (std::size_t i = 0; i < length; ++i) {
          matched[i] = static_cast<double>(gen() % 1000) / 1000.0 < density;
        }
        const std::uint64_t seed = gen();
        const std::string rule_id = fmt::format("rule-{}", gen() % 100000);
        RuleEngine engine({RuleTrigger{rule_id, UrlMatcher::regex("/hit$"), policy}}, seed);
        std::set<std::size_t> got;
        for (std::size_t i = 0; i < length; ++i) {
          if (!engine.evaluate(matched[i] ? "https://t.test/hit" : "https://t.test/miss").empty()) {
            got.insert(i);
          }
        }
        ++sequences;
        if (got != oracle::fire_set(op, seed, rule_id, matched)) {
          ++mismatches;
          if (first.empty()) first = fmt::format(" [first: kind {} param {} len {}]", kind, param, length);
        }
      }
    }
  }
  const double elapsed = seconds_since(t0);
  return {mismatches == 0 && elapsed < 60.0,
          fmt::format("{} policy cases x 200 sequences = {} sequences, {} mismatches{}, {:.2f} s",
                      cases, sequences, mismatches, first, elapsed)};
}

Outcome server_error_rewrite() {
  Harness h;
  auto config = h.base_config();
  config.rules.push_back(make_rule("server-error", UrlMatcher::regex("/page$"),
                                   FrequencyPolicy::kth(1), FaultSpec::server_error()));
  h.start(config);
  ScriptedClient direct(h.direct_options());
  ScriptedClient client(h.client_options());
  const auto origin = direct.execute(get(h.url("/page")));
  const auto faulted = client.execute(get(h.url("/page")));
  const auto restored = client.execute(get(h.url("/page")));
  const bool pass = origin.status == 200 && faulted.status == 500 &&
                    faulted.body.find("data-faultline-page=\"server_error\"") != std::string::npos &&
                    restored.status == 200 && restored.body == origin.body;
  return {pass, fmt::format("origin {} -> injected {} with error page: {}; follow-up {} with "
                            "origin bytes: {}",
                            origin.status, faulted.status,
                            faulted.body.find("server_error") != std::string::npos ? "yes" : "no",
                            restored.status, restored.body == origin.body ? "identical" : "differs")};
}

Outcome popup_injection() {
  testing::TempDir scratch;
  std::vector<std::string> problems;

  // Built-in snippet on plain and gzip HTML, scripts and binaries untouched.
  {
    Harness h;
    auto config = h.base_config();
    config.rules.push_back(make_rule("popup", UrlMatcher::match_all(), FrequencyPolicy::always(),
                                     FaultSpec::popup()));
    h.start(config);
    ScriptedClient direct(h.direct_options());
    ScriptedClient client(h.client_options());
    const auto plain = client.execute(get(h.url("/page")));
    std::string why;
    if (count_occurrences(plain.body, kPopupMarker) != 1) problems.push_back("plain: marker count");
    if (!html_parses_twice(plain.body, scratch, &why)) problems.push_back("plain: " + why);

    const auto gz = client.execute(get(h.url("/gzip")));
    const auto decoded = gunzip_with_tool(gz.body, scratch);
    if (gz.header("Content-Encoding") != "gzip") problems.push_back("gzip: encoding header lost");
    if (gz.header("Content-Length") != std::to_string(gz.body.size())) {
      problems.push_back("gzip: content-length mismatch");
    }
    if (!decoded) {
      problems.push_back("gzip: gzip -dc failed");
    } else {
      if (count_occurrences(*decoded, kPopupMarker) != 1) problems.push_back("gzip: marker count");
      if (!html_parses_twice(*decoded, scratch, &why)) problems.push_back("gzip: " + why);
      const auto origin = direct.execute(get(h.url("/gzip")));
      const auto origin_html = gunzip_with_tool(origin.body, scratch);
      const std::string snippet = TemplateLibrary::with_builtins().popup_snippet(FaultSpec::popup());
      if (!origin_html || *decoded != inject_popup(*origin_html, snippet)) {
        problems.push_back("gzip: other bytes not preserved");
      }
    }
    for (const char* path : {"/app.js", "/binary"}) {
      if (client.execute(get(h.url(path))).body != direct.execute(get(h.url(path))).body) {
        problems.push_back(std::string(path) + " modified");
      }
    }
    const auto flows = h.flows();
    if (flows.size() != 4 || !flows[2]["injected_rule_ids"].empty() ||
        !flows[3]["injected_rule_ids"].empty()) {
      problems.push_back("non-HTML flows recorded as injected");
    }
  }

  // Shipped scenario config and asset, unmodified apart from ports and paths.
  bool fixture_seen = false;
  {
    Harness h;
    auto config = load_config(kSource / "configs" / "malicious-popup.json");
    const auto base = h.base_config();
    config.listen_port = 0;
    config.admin_port = 0;
    config.upstream = base.upstream;
    config.ca = base.ca;
    config.report = base.report;
    h.start(config);
    ScriptedClient client(h.client_options());
    for (int i = 0; i < 100 && !fixture_seen; ++i) {
      const auto r = client.execute(get(h.url("/page")));
      if (r.body.find("Click ACCEPT to claim FREE bitcoin") != std::string::npos) {
        fixture_seen = true;
        std::string why;
        if (count_occurrences(r.body, kPopupMarker) != 1) problems.push_back("fixture: marker count");
        if (r.body.find("faultline-prize-overlay") == std::string::npos) {
          problems.push_back("fixture: shipped asset not used");
        }
        if (!html_parses_twice(r.body, scratch, &why)) problems.push_back("fixture: " + why);
      }
    }
    if (!fixture_seen) problems.push_back("fixture: never fired");
  }

  std::string detail = "marker once, HTML parses (2 parsers), gzip round-trip via gzip -dc, "
                       "script/binary untouched, shipped fixture delivered";
  if (!problems.empty()) {
    detail = "problems:";
    for (const auto& p : problems) detail += " [" + p + "]";
  }
  return {problems.empty(), detail};
}

Outcome metrics_conservation() {
  constexpr double kIn = 2.5e-6;
  constexpr double kOut = 1.0e-5;
  Harness h;
  auto config = h.base_config();
  LlmEndpointSpec spec;
  spec.name = "mock-model";
  spec.matcher = UrlMatcher::regex("/v1/chat(/stream)?$");
  spec.price = {kIn, kOut};
  config.llm_endpoints.push_back(spec);
  h.start(config);
  h.proxy().start_task("conservation");
  ScriptedClient client(h.client_options());
  client.execute(get(h.url("/page")));
  client.execute(post(h.url("/v1/chat"), R"({"messages":[]})"));
  client.execute(get(h.url("/app.js")));
  client.execute(post(h.url("/v1/chat/stream"), R"({"stream":true})"));
  client.execute(post(h.url("/v1/chat"), R"({"messages":[]})"));
  h.proxy().end_task();
  const auto tasks = h.tasks();
  const auto flows = h.flows();
  if (tasks.size() != 1) return {false, fmt::format("{} task records", tasks.size())};
  const auto& t = tasks[0];
  // Fixture usage: two JSON replies of 120/30 and one stream ending in 800/12.
  const std::uint64_t hand_in = 120 + 800 + 120;
  const std::uint64_t hand_out = 30 + 12 + 30;
  const double hand_cost = static_cast<double>(hand_in) * kIn + static_cast<double>(hand_out) * kOut;
  std::uint64_t flow_in = 0, flow_out = 0;
  for (const auto& f : flows) {
    flow_in += f["tokens_in"].get<std::uint64_t>();
    flow_out += f["tokens_out"].get<std::uint64_t>();
  }
  const bool pass = t["llm_calls"] == 3 && t["tokens_in"] == hand_in && t["tokens_out"] == hand_out &&
                    flow_in == hand_in && flow_out == hand_out &&
                    std::abs(t["cost_usd"].get<double>() - hand_cost) <= 1e-12 * hand_cost &&
                    t["flows"] == 5;
  return {pass, fmt::format("llm_calls {} (3), tokens_in {} ({}), tokens_out {} ({}), per-flow sums "
                            "{}/{}, flows {} (5), cost {:.10f} (hand {:.10f}, rel tol 1e-12)",
                            t["llm_calls"].dump(), t["tokens_in"].dump(), hand_in,
                            t["tokens_out"].dump(), hand_out, flow_in, flow_out, t["flows"].dump(),
                            t["cost_usd"].get<double>(), hand_cost)};
}

struct ReplayLog {
  std::vector<json> patterns;
  json injections;
  std::vector<int> statuses;
};

// Every fault kind and every frequency kind, disjoint URL sets.
std::vector<InjectionRule> replay_rules() {
  auto blocked = FaultSpec::server_error(503);
  blocked.skip_origin = true;
  return {
      make_rule("always-503", UrlMatcher::regex("/cart$"), FrequencyPolicy::always(), blocked),
      make_rule("kth-net", UrlMatcher::regex("/page$"), FrequencyPolicy::kth(2),
                FaultSpec::network_error(0.0)),
      make_rule("first-js", UrlMatcher::regex(R"(\.js$)"), FrequencyPolicy::first_k(2),
                FaultSpec::js_delay(0.02)),
      make_rule("every-500", UrlMatcher::exact("https://127.0.0.1/item/1"), FrequencyPolicy::every_kth(3),
                FaultSpec::server_error()),
      make_rule("random-popup", UrlMatcher::regex("/gzip$"), FrequencyPolicy::random_n(3, 8),
                FaultSpec::popup()),
  };
}

std::vector<ScriptedStep> replay_script(const Harness& h) {
  std::mt19937 rng(99);
  const std::vector<std::string> paths = {"/cart", "/page", "/app.js", "/item/1", "/gzip", "/binary"};
  std::vector<ScriptedStep> steps;
  for (int i = 0; i < 60; ++i) {
    const auto& p = paths[rng() % paths.size()];
    steps.push_back(p == "/cart" ? post(h.url(p), "{}") : get(h.url(p)));
  }
  return steps;
}

ReplayLog replay_once(std::uint64_t seed, std::vector<ScriptedStep>* script_out) {
  Harness h;
  auto config = h.base_config();
  config.rng_seed = seed;
  config.rules = replay_rules();
  // The exact matcher needs the live port.
  config.rules[3].matcher = UrlMatcher::exact(h.url("/item/1"));
  h.start(config);
  const auto steps = replay_script(h);
  if (script_out != nullptr) *script_out = steps;
  h.proxy().start_task("replay");
  const auto result = testbed::run_script(steps, h.client_options());
  const auto task = h.proxy().end_task();
  ReplayLog log;
  for (const auto& f : h.flows()) log.patterns.push_back(f["injected_rule_ids"]);
  log.injections = task ? task->to_json()["injections"] : json();
  for (const auto& s : result.steps) log.statuses.push_back(s.status);
  return log;
}

Outcome determinism_replay() {
  constexpr std::uint64_t kSeed = 424242;
  std::vector<ScriptedStep> script;
  const auto a = replay_once(kSeed, &script);
  const auto b = replay_once(kSeed, nullptr);
  const auto other = replay_once(kSeed + 1, nullptr);

  // Oracle prediction of every rule's fire positions.
  const auto rules = replay_rules();
  const std::vector<std::pair<std::string, oracle::Policy>> policies = {
      {"always-503", {oracle::Kind::kAlways}},
      {"kth-net", {oracle::Kind::kKth, 2}},
      {"first-js", {oracle::Kind::kFirstK, 2}},
      {"every-500", {oracle::Kind::kEveryKth, 3}},
      {"random-popup", {oracle::Kind::kRandomN, 1, 3, 8}}};
  const std::vector<std::string> suffix = {"/cart", "/page", ".js", "/item/1", "/gzip"};
  std::vector<json> predicted(script.size(), json::array());
  for (std::size_t r = 0; r < policies.size(); ++r) {
    std::vector<bool> matched;
    for (const auto& s : script) matched.push_back(s.url.ends_with(suffix[r]));
    for (auto pos : oracle::fire_set(policies[r].second, kSeed, policies[r].first, matched)) {
      predicted[pos].push_back(policies[r].first);
    }
  }
  std::size_t fired = 0;
  for (const auto& p : a.patterns) fired += p.size();
  std::set<std::string> kinds_fired;
  for (const auto& p : a.patterns) {
    for (const auto& id : p) kinds_fired.insert(id.get<std::string>());
  }
  const bool identical = a.patterns == b.patterns && a.injections == b.injections &&
                         a.statuses == b.statuses;
  const bool oracle_ok = a.patterns == predicted;
  const bool seed_matters = other.patterns != a.patterns;
  const bool coverage = kinds_fired.size() == rules.size();
  return {identical && oracle_ok && coverage && a.patterns.size() == script.size(),
          fmt::format("2 runs x {} steps: patterns {}, injections lists {} ({} entries), matches "
                      "oracle: {}, {} fires across {}/5 rules (4 fault kinds, 5 frequency kinds); "
                      "different seed changes pattern: {}",
                      script.size(), a.patterns == b.patterns ? "identical" : "DIFFER",
                      a.injections == b.injections ? "identical" : "DIFFER", a.injections.size(),
                      oracle_ok ? "yes" : "no", fired, kinds_fired.size(),
                      seed_matters ? "yes" : "no")};
}

Outcome fault_vs_failure() {
  Harness h;
  auto config = h.base_config();
  config.rules.push_back(make_rule("net", UrlMatcher::regex("/page$"), FrequencyPolicy::always(),
                                   FaultSpec::network_error(0.0)));
  h.start(config);
  std::uint16_t dead = 0;
  {
    net::Socket probe = net::listen_tcp("127.0.0.1", 0);
    dead = net::local_port(probe);
  }
  ScriptedClient client(h.client_options());
  const auto outage = client.execute(get(fmt::format("https://127.0.0.1:{}/down", dead)));
  const auto injected = client.execute(get(h.url("/page")));
  const auto flows = h.flows();
  const std::string header(kProxyErrorHeader);
  const bool pass = outage.status == 502 && outage.header(header).has_value() &&
                    injected.status == 502 && !injected.header(header).has_value() &&
                    flows.size() == 2 && flows[0]["proxy_error"] == true &&
                    flows[0]["injected_rule_ids"].empty() && flows[1]["proxy_error"] == false &&
                    flows[1]["injected_rule_ids"] == json::array({"net"});
  return {pass, fmt::format("outage {} {}={} proxy_error={}; injected {} header {} rules={}",
                            outage.status, header, outage.header(header).value_or("(absent)"),
                            flows.size() > 0 ? flows[0]["proxy_error"].dump() : "?", injected.status,
                            injected.header(header) ? "present" : "absent",
                            flows.size() > 1 ? flows[1]["injected_rule_ids"].dump() : "?")};
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_level(spdlog::level::err);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"pass_through_fidelity", pass_through_fidelity},
      {"overhead_bound", overhead_bound},
      {"delay_fidelity", delay_fidelity},
      {"policy_oracle_equivalence", policy_oracle_equivalence},
      {"server_error_rewrite", server_error_rewrite},
      {"popup_injection", popup_injection},
      {"metrics_conservation", metrics_conservation},
      {"determinism_replay", determinism_replay},
      {"fault_vs_failure_separation", fault_vs_failure},
  };
  std::set<std::string> only(argv + 1, argv + argc);
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    if (!only.empty() && !only.contains(name)) continue;
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::cout << fmt::format("{} {}: {}", o.pass ? "PASS" : "FAIL", name, o.detail) << std::endl;
  }
  std::cout << (failed == 0 ? "all criteria passed" : fmt::format("{} criteria failed", failed))
            << std::endl;
  return failed == 0 ? 0 : 1;
}
