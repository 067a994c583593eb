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

#include "faultline/testbed.h"

#include <fstream>
#include <stdexcept>

#include <fmt/format.h>

#include "httplib.h"

#include "faultline/compression.h"
#include "faultline/url.h"

namespace faultline::testbed {

using nlohmann::json;

namespace {

constexpr std::string_view kShopPage =
    "<!DOCTYPE html>\n<html>\n<head><meta charset=\"utf-8\"><title>Mock shop</title></head>\n"
    "<body>\n<h1>Mock shop</h1>\n<ul>\n<li><a href=\"/item/1\">Kettle</a></li>\n"
    "<li><a href=\"/item/2\">Toaster</a></li>\n</ul>\n<form action=\"/cart\" method=\"post\">"
    "<button type=\"submit\">Add to cart</button></form>\n</body>\n</html>\n";

constexpr std::string_view kChatCompletion =
    R"json({"id":"chatcmpl-mock","object":"chat.completion","model":"mock-model",)json"
    R"json("choices":[{"index":0,"message":{"role":"assistant","content":"click(12)"},)json"
    R"json("finish_reason":"stop"}],"usage":{"prompt_tokens":120,"completion_tokens":30,)json"
    R"json("total_tokens":150}})json";

constexpr std::string_view kChatStream =
    "data: {\"id\":\"chatcmpl-mock\",\"choices\":[{\"delta\":{\"content\":\"scroll\"}}]}\n\n"
    "data: {\"id\":\"chatcmpl-mock\",\"choices\":[{\"delta\":{\"content\":\"(down)\"}}]}\n\n"
    "data: {\"id\":\"chatcmpl-mock\",\"choices\":[],\"usage\":{\"prompt_tokens\":800,"
    "\"completion_tokens\":12,\"total_tokens\":812}}\n\n"
    "data: [DONE]\n\n";

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string origin_of(const Url& url) {
  return fmt::format("{}://{}", url.scheme, url.authority());
}

}  // namespace

std::vector<MockRoute> default_routes() {
  std::vector<MockRoute> routes;
  routes.push_back(MockRoute{.path = "/", .body = std::string(kShopPage)});
  routes.push_back(MockRoute{.path = "/page", .body = std::string(kShopPage)});
  routes.push_back(MockRoute{.path = "/item/1", .body = std::string(kShopPage)});
  routes.push_back(MockRoute{.path = "/gzip",
                             .body = std::string(kShopPage),
                             .content_encoding = "gzip"});
  routes.push_back(MockRoute{.path = "/app.js",
                             .content_type = "application/javascript",
                             .body = "document.title = 'loaded';\n"});
  routes.push_back(MockRoute{.method = "POST",
                             .path = "/v1/chat",
                             .content_type = "application/json",
                             .body = std::string(kChatCompletion)});
  routes.push_back(MockRoute{.method = "POST",
                             .path = "/v1/chat/stream",
                             .content_type = "text/event-stream",
                             .body = std::string(kChatStream)});
  std::string binary(256, '\0');
  for (int i = 0; i < 256; ++i) binary[static_cast<std::size_t>(i)] = static_cast<char>(i);
  routes.push_back(MockRoute{.path = "/binary",
                             .content_type = "application/octet-stream",
                             .body = std::move(binary)});
  routes.push_back(MockRoute{.method = "POST",
                             .path = "/cart",
                             .status = 303,
                             .body = "",
                             .headers = {{"Location", "/"}}});
  return routes;
}

MockOrigin::MockOrigin(Options options) : options_(std::move(options)) {
  if (options_.tls) {
    const auto ca = tls::CertificateAuthority::generate(2, "faultline mock origin CA");
    std::shared_ptr<EVP_PKEY> key(tls::generate_ec_key().release(), tls::PkeyDeleter{});
    tls::LeafCertificate leaf = ca.mint_leaf(options_.host, key);
    ca_pem_ = ca.cert_pem();
    cert_ = std::move(leaf.cert);
    key_ = std::move(key);
    server_ = std::make_unique<httplib::SSLServer>(cert_.get(), key_.get());
  } else {
    server_ = std::make_unique<httplib::Server>();
  }
  server_->set_keep_alive_max_count(100000);
  server_->set_keep_alive_timeout(30);
  server_->set_tcp_nodelay(true);

  auto handler = [this](const httplib::Request& req, httplib::Response& res) {
    ++total_hits_;
    std::optional<MockRoute> route;
    {
      std::lock_guard lock(mu_);
      ++hits_[req.path];
      const std::string method = req.method == "HEAD" ? "GET" : req.method;
      if (auto it = routes_.find({method, req.path}); it != routes_.end()) route = it->second;
    }
    if (req.path == "/echo") {
      json headers = json::object();
      for (const auto& [name, value] : req.headers) headers[name] = value;
      res.set_content(json{{"method", req.method},
                           {"path", req.path},
                           {"headers", headers},
                           {"body", req.body}}
                          .dump(),
                      "application/json");
      return;
    }
    if (!route) {
      res.status = 404;
      res.set_content("not found\n", "text/plain");
      return;
    }
    if (route->service_time.count() > 0) std::this_thread::sleep_for(route->service_time);
    res.status = route->status;
    for (const auto& [name, value] : route->headers) res.set_header(name, value);
    if (!route->content_encoding.empty()) {
      res.set_header("Content-Encoding", route->content_encoding);
    }
    res.set_content(route->body, route->content_type);
  };
  server_->Get(".*", handler);
  server_->Post(".*", handler);
  server_->Put(".*", handler);
  server_->Patch(".*", handler);
  server_->Delete(".*", handler);
  server_->Options(".*", handler);

  if (options_.default_routes) {
    for (auto& route : default_routes()) add_route(std::move(route));
  }
}

MockOrigin::~MockOrigin() { stop(); }

void MockOrigin::add_route(MockRoute route) {
  if (!route.content_encoding.empty()) {
    route.body = encode_body(route.body, route.content_encoding);
  }
  std::lock_guard lock(mu_);
  routes_[{route.method, route.path}] = std::move(route);
}

void MockOrigin::start() {
  if (thread_.joinable()) return;
  if (options_.port == 0) {
    const int port = server_->bind_to_any_port(options_.host);
    if (port <= 0) throw std::runtime_error("mock origin: cannot bind " + options_.host);
    port_ = static_cast<std::uint16_t>(port);
  } else {
    if (!server_->bind_to_port(options_.host, options_.port)) {
      throw std::runtime_error(
          fmt::format("mock origin: cannot bind {}:{}", options_.host, options_.port));
    }
    port_ = options_.port;
  }
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
}

void MockOrigin::stop() {
  if (!thread_.joinable()) return;
  server_->stop();
  thread_.join();
}

std::string MockOrigin::base_url() const {
  return fmt::format("{}://{}:{}", options_.tls ? "https" : "http", options_.host, port_);
}

void MockOrigin::write_ca(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << ca_pem_;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

std::uint64_t MockOrigin::hits(const std::string& path) const {
  std::lock_guard lock(mu_);
  auto it = hits_.find(path);
  return it == hits_.end() ? 0 : it->second;
}

void MockOrigin::reset_hits() {
  std::lock_guard lock(mu_);
  hits_.clear();
  total_hits_ = 0;
}

std::optional<std::string> StepResult::header(const std::string& name) const {
  for (const auto& [k, v] : headers) {
    if (k.size() == name.size() &&
        std::equal(k.begin(), k.end(), name.begin(),
                   [](char a, char b) { return std::tolower(a) == std::tolower(b); })) {
      return v;
    }
  }
  return std::nullopt;
}

bool ScriptResult::passed() const {
  return std::all_of(steps.begin(), steps.end(), [](const StepResult& s) { return s.passed(); });
}

json ScriptResult::to_json() const {
  json out = json::array();
  for (const auto& s : steps) {
    out.push_back(json{{"index", s.index},
                       {"method", s.method},
                       {"url", s.url},
                       {"status", s.status},
                       {"error", s.error},
                       {"latency_s", s.latency_s},
                       {"passed", s.passed()},
                       {"failures", s.failures}});
  }
  return json{{"passed", passed()}, {"wall_s", wall_s}, {"steps", std::move(out)}};
}

std::string ScriptResult::summary() const {
  std::string text;
  std::size_t ok = 0;
  for (const auto& s : steps) {
    if (s.passed()) ++ok;
    text += fmt::format("[{}] #{} {} {} -> {} in {:.3f}s", s.passed() ? "ok" : "FAIL", s.index,
                        s.method, s.url, s.status == 0 ? s.error : std::to_string(s.status),
                        s.latency_s);
    for (const auto& f : s.failures) text += "\n    " + f;
    text += "\n";
  }
  text += fmt::format("{}/{} steps passed in {:.3f}s\n", ok, steps.size(), wall_s);
  return text;
}

std::vector<std::string> check_expectation(const StepResult& result,
                                           const StepExpectation& expect) {
  std::vector<std::string> failures;
  if (result.status == 0) {
    failures.push_back("transport error: " + result.error);
    return failures;
  }
  if (expect.status && result.status != *expect.status) {
    failures.push_back(fmt::format("status {} (expected {})", result.status, *expect.status));
  }
  if (expect.body_contains && result.body.find(*expect.body_contains) == std::string::npos) {
    failures.push_back(fmt::format("body lacks \"{}\"", *expect.body_contains));
  }
  if (expect.body_not_contains &&
      result.body.find(*expect.body_not_contains) != std::string::npos) {
    failures.push_back(fmt::format("body contains \"{}\"", *expect.body_not_contains));
  }
  if (expect.header_present && !result.header(*expect.header_present)) {
    failures.push_back(fmt::format("header {} missing", *expect.header_present));
  }
  if (expect.min_elapsed_s && result.latency_s < *expect.min_elapsed_s) {
    failures.push_back(
        fmt::format("latency {:.3f}s below {:.3f}s", result.latency_s, *expect.min_elapsed_s));
  }
  if (expect.max_elapsed_s && result.latency_s > *expect.max_elapsed_s) {
    failures.push_back(
        fmt::format("latency {:.3f}s above {:.3f}s", result.latency_s, *expect.max_elapsed_s));
  }
  return failures;
}

ScriptedClient::ScriptedClient(ClientOptions options) : options_(std::move(options)) {}

ScriptedClient::~ScriptedClient() = default;

httplib::Client& ScriptedClient::client_for(const std::string& origin) {
  auto& slot = clients_[origin];
  if (!slot) {
    slot = std::make_unique<httplib::Client>(origin);
    if (!options_.proxy_host.empty()) slot->set_proxy(options_.proxy_host, options_.proxy_port);
    if (!options_.ca_path.empty()) slot->set_ca_cert_path(options_.ca_path);
    slot->enable_server_certificate_verification(true);
    slot->set_tcp_nodelay(true);
    slot->set_keep_alive(options_.keep_alive);
    slot->set_decompress(false);
    const auto secs = static_cast<time_t>(options_.timeout_s);
    const auto usecs = static_cast<time_t>((options_.timeout_s - static_cast<double>(secs)) * 1e6);
    slot->set_read_timeout(secs, usecs);
    slot->set_write_timeout(secs, usecs);
    slot->set_connection_timeout(secs, usecs);
  }
  return *slot;
}

StepResult ScriptedClient::execute(const ScriptedStep& step) {
  StepResult result;
  result.method = step.method;
  result.url = step.url;
  const auto url = parse_url(step.url);
  if (!url) {
    result.error = "invalid url";
    result.failures = check_expectation(result, step.expect);
    return result;
  }

  httplib::Request req;
  req.method = step.method;
  req.path = url->target;
  for (const auto& [name, value] : step.headers) req.set_header(name, value);
  if (!step.body.empty()) {
    req.body = step.body;
    if (!req.has_header("Content-Type")) req.set_header("Content-Type", "application/json");
  }

  const auto start = std::chrono::steady_clock::now();
  auto res = client_for(origin_of(*url)).send(req);
  result.latency_s = seconds_since(start);
  if (!res) {
    result.error = httplib::to_string(res.error());
  } else {
    result.status = res->status;
    result.body = res->body;
    for (const auto& [name, value] : res->headers) result.headers.emplace(name, value);
  }
  result.failures = check_expectation(result, step.expect);
  return result;
}

ScriptResult run_script(const std::vector<ScriptedStep>& steps, const ClientOptions& options,
                        std::size_t concurrency) {
  ScriptResult out;
  out.steps.resize(steps.size());
  const auto start = std::chrono::steady_clock::now();
  concurrency = std::max<std::size_t>(1, std::min(concurrency, steps.size()));
  auto worker = [&](std::size_t lane) {
    ScriptedClient client(options);
    for (std::size_t i = lane; i < steps.size(); i += concurrency) {
      out.steps[i] = client.execute(steps[i]);
      out.steps[i].index = i;
    }
  };
  if (concurrency == 1) {
    worker(0);
  } else {
    std::vector<std::thread> threads;
    for (std::size_t lane = 0; lane < concurrency; ++lane) threads.emplace_back(worker, lane);
    for (auto& t : threads) t.join();
  }
  out.wall_s = seconds_since(start);
  return out;
}

namespace {

void require_known_keys(const json& obj, std::initializer_list<std::string_view> keys,
                        const std::string& where) {
  for (const auto& [key, _] : obj.items()) {
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
      throw std::invalid_argument(fmt::format("{}: unknown key \"{}\"", where, key));
    }
  }
}

template <typename T>
std::optional<T> optional_field(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) return std::nullopt;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw std::invalid_argument(fmt::format("{}.{}: wrong type", where, key));
  }
}

}  // namespace

std::vector<ScriptedStep> parse_script(const json& doc) {
  const json* list = &doc;
  if (doc.is_object()) {
    require_known_keys(doc, {"steps"}, "script");
    if (!doc.contains("steps")) throw std::invalid_argument("script: missing \"steps\"");
    list = &doc.at("steps");
  }
  if (!list->is_array()) throw std::invalid_argument("script: \"steps\" must be an array");

  std::vector<ScriptedStep> steps;
  for (std::size_t i = 0; i < list->size(); ++i) {
    const json& item = (*list)[i];
    const std::string where = fmt::format("steps[{}]", i);
    if (!item.is_object()) throw std::invalid_argument(where + ": must be an object");
    require_known_keys(item, {"method", "url", "headers", "body", "repeat", "expect"}, where);
    ScriptedStep step;
    const auto url = optional_field<std::string>(item, "url", where);
    if (!url || !parse_url(*url)) throw std::invalid_argument(where + ".url: absolute URL required");
    step.url = *url;
    step.method = optional_field<std::string>(item, "method", where).value_or("GET");
    step.body = optional_field<std::string>(item, "body", where).value_or("");
    step.headers =
        optional_field<std::map<std::string, std::string>>(item, "headers", where).value_or(
            std::map<std::string, std::string>{});
    if (item.contains("expect")) {
      const json& e = item.at("expect");
      const std::string ew = where + ".expect";
      if (!e.is_object()) throw std::invalid_argument(ew + ": must be an object");
      require_known_keys(e,
                         {"status", "body_contains", "body_not_contains", "header_present",
                          "min_elapsed_s", "max_elapsed_s"},
                         ew);
      step.expect.status = optional_field<int>(e, "status", ew);
      step.expect.body_contains = optional_field<std::string>(e, "body_contains", ew);
      step.expect.body_not_contains = optional_field<std::string>(e, "body_not_contains", ew);
      step.expect.header_present = optional_field<std::string>(e, "header_present", ew);
      step.expect.min_elapsed_s = optional_field<double>(e, "min_elapsed_s", ew);
      step.expect.max_elapsed_s = optional_field<double>(e, "max_elapsed_s", ew);
    }
    const int repeat = optional_field<int>(item, "repeat", where).value_or(1);
    if (repeat < 1) throw std::invalid_argument(where + ".repeat: must be >= 1");
    for (int r = 0; r < repeat; ++r) steps.push_back(step);
  }
  return steps;
}

std::vector<ScriptedStep> load_script(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot read " + path.string());
  json doc = json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw std::invalid_argument(path.string() + ": invalid JSON");
  return parse_script(doc);
}

}  // namespace faultline::testbed
