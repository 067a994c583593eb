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

#include "faultline/proxy.h"

#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <array>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "httplib.h"

namespace faultline {

using nlohmann::json;

namespace {

constexpr auto kClientIdleTimeout = std::chrono::seconds(120);
constexpr auto kClientWriteTimeout = std::chrono::seconds(60);

std::string html_escape(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::vector<RuleTrigger> make_triggers(const ProxyConfig& config) {
  std::vector<RuleTrigger> triggers;
  triggers.reserve(config.rules.size());
  for (const auto& rule : config.rules) {
    triggers.push_back(RuleTrigger{rule.id, rule.matcher, rule.frequency});
  }
  return triggers;
}

std::chrono::milliseconds upstream_timeout(const ProxyConfig& config) {
  return std::chrono::milliseconds(static_cast<std::int64_t>(config.upstream.timeout_s * 1000.0));
}

void write_local_error(net::Stream& stream, int status, std::string_view message) {
  http::Response resp;
  resp.status = status;
  resp.reason = std::string(http::reason_phrase(status));
  resp.headers.add("Content-Type", "text/plain; charset=utf-8");
  resp.headers.add("Connection", "close");
  resp.body = std::string(message) + "\n";
  try {
    stream.write_all(http::serialize_response(resp, true));
  } catch (const std::exception&) {
  }
}

std::string origin_key(const Url& url) { return url.scheme + "://" + url.authority(); }

}  // namespace

void SocketRegistry::add(int fd) {
  std::lock_guard lock(mu_);
  if (closed_) {
    ::shutdown(fd, SHUT_RDWR);
  }
  fds_.push_back(fd);
}

void SocketRegistry::remove(int fd) {
  std::lock_guard lock(mu_);
  auto it = std::find(fds_.begin(), fds_.end(), fd);
  if (it != fds_.end()) fds_.erase(it);
}

void SocketRegistry::shutdown_all() {
  std::lock_guard lock(mu_);
  closed_ = true;
  for (int fd : fds_) ::shutdown(fd, SHUT_RDWR);
}

ConnectionPool::ConnectionPool(tls::UpstreamContext& tls, std::chrono::milliseconds timeout,
                               SocketRegistry* registry)
    : tls_(&tls), timeout_(timeout), registry_(registry) {}

ConnectionPool::~ConnectionPool() {
  for (auto& [_, conn] : idle_) release(conn);
}

ConnectionPool::Connection ConnectionPool::open(const Url& url) {
  net::Socket sock = net::connect_tcp(url.host, url.port, timeout_);
  sock.set_timeouts(timeout_, timeout_);
  sock.set_nodelay();
  const int fd = sock.fd();
  if (registry_ != nullptr) registry_->add(fd);
  try {
    Connection conn;
    if (url.scheme == "https") {
      conn.stream = tls_->connect(std::move(sock), url.host);
    } else {
      conn.stream = std::make_unique<net::PlainStream>(std::move(sock));
    }
    conn.reader = std::make_unique<net::BufferedReader>(*conn.stream);
    ++opened_;
    return conn;
  } catch (...) {
    if (registry_ != nullptr) registry_->remove(fd);
    throw;
  }
}

void ConnectionPool::release(Connection& connection) {
  if (!connection.stream) return;
  if (registry_ != nullptr) registry_->remove(connection.stream->socket().fd());
  connection.reader.reset();
  connection.stream.reset();
}

http::Response ConnectionPool::fetch(const Url& url, const http::Request& request) {
  const std::string key = origin_key(url);
  const std::string wire = http::serialize_request(request);
  while (true) {
    Connection conn;
    bool reused = false;
    if (auto it = idle_.find(key); it != idle_.end()) {
      conn = std::move(it->second);
      idle_.erase(it);
      reused = true;
    } else {
      conn = open(url);
    }
    try {
      conn.stream->write_all(wire);
      http::Response resp = http::read_response(*conn.reader, request.method);
      const bool keep = !http::wants_close(resp.version, resp.headers) &&
                        !http::wants_close(request.version, request.headers) &&
                        !conn.reader->has_buffered();
      if (keep) {
        idle_[key] = std::move(conn);
      } else {
        release(conn);
      }
      return resp;
    } catch (const std::exception& e) {
      release(conn);
      // The origin may have dropped an idle keep-alive connection; one
      // attempt on a fresh connection follows.
      if (!reused) throw;
      spdlog::debug("retrying {} on a fresh connection: {}", key, e.what());
    }
  }
}

http::Response make_proxy_error_response(std::string_view detail) {
  std::string html = fmt::format(
      "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>502 Bad Gateway</title>"
      "</head>\n<body><h1>502 Bad Gateway</h1>\n<p>faultline could not reach the origin: "
      "{}</p></body></html>\n",
      html_escape(detail));
  http::Response resp = make_error_response(502, std::move(html));
  resp.headers.set(kProxyErrorHeader, "upstream-unreachable");
  return resp;
}

void FlowPipeline::run(Flow& flow, const Url& url, UpstreamClient& upstream) {
  const std::vector<std::size_t> fired = rules_->evaluate(flow.url);
  const bool contact = std::all_of(fired.begin(), fired.end(), [&](std::size_t i) {
    return config_->rules[i].fault.contacts_origin();
  });

  std::optional<http::Response> current;
  std::string failure;
  if (contact) {
    try {
      http::Response origin = upstream.fetch(url, flow.request);
      flow.t_upstream_response = now_ms();
      flow.origin_contacted = true;
      flow.upstream_response = origin;
      current = std::move(origin);
    } catch (const std::exception& e) {
      failure = e.what();
      spdlog::warn("flow {} {}: upstream failed: {}", flow.id, flow.url, failure);
    }
  }

  const TemplateLibrary& templates = config_->templates;
  for (const std::size_t index : fired) {
    const InjectionRule& rule = config_->rules[index];
    const FaultSpec& fault = rule.fault;
    bool applied = false;
    switch (fault.kind) {
      case FaultKind::kNetworkError:
        current = apply_network_error(fault, templates, *sleeper_);
        applied = true;
        break;
      case FaultKind::kServerError:
        current = apply_server_error(fault, templates);
        applied = true;
        break;
      case FaultKind::kJsDelay:
        if (current) {
          current = apply_js_delay(std::move(*current), fault, templates, *sleeper_);
          applied = true;
        } else if (fault.js_mode == JsDelayMode::kGatewayTimeout) {
          sleeper_->sleep_for(fault.delay());
          current = make_error_response(504, templates.render_page(fault.page_template(), 504));
          applied = true;
        }
        break;
      case FaultKind::kPopup:
        if (current && http::response_has_body(flow.request.method, current->status)) {
          const PopupOutcome outcome = inject_popup(*current, templates.popup_snippet(fault));
          applied = outcome == PopupOutcome::kInjected;
          if (outcome == PopupOutcome::kUndecodable) {
            spdlog::warn("flow {}: rule {} skipped, body could not be decoded", flow.id, rule.id);
          }
        }
        break;
    }
    if (applied) {
      flow.applied_rule_ids.push_back(rule.id);
      spdlog::info("flow {} {}: applied {} ({})", flow.id, flow.url, rule.id,
                   to_string(fault.kind));
    }
  }

  if (!current) {
    flow.proxy_error = true;
    flow.proxy_error_detail = failure.empty() ? "no response" : failure;
    current = make_proxy_error_response(flow.proxy_error_detail);
  }
  flow.response = std::move(current);
}

ProxyServer::ProxyServer(ProxyConfig config, std::shared_ptr<const tls::CertificateAuthority> ca)
    : config_(std::move(config)),
      ca_(std::move(ca)),
      rules_(make_triggers(config_), config_.rng_seed),
      metrics_(MetricsLogger::Options{config_.llm_endpoints, config_.report, config_.condition}),
      pipeline_(config_, rules_, sleeper_),
      leaves_(std::make_shared<tls::LeafCache>(ca_)),
      interception_(std::make_unique<tls::InterceptionContext>(leaves_)),
      upstream_tls_(std::make_unique<tls::UpstreamContext>(
          tls::UpstreamTlsOptions{config_.upstream.verify, config_.upstream.ca_path})) {}

ProxyServer::~ProxyServer() { stop(); }

void ProxyServer::start() {
  if (running_) return;
  listener_ = net::listen_tcp(config_.listen_host, config_.listen_port);
  port_ = net::local_port(listener_);
  if (config_.admin_port != 0) {
    try {
      start_admin();
    } catch (...) {
      listener_.close();
      throw;
    }
  }
  running_ = true;
  acceptor_ = std::thread([this] { accept_loop(); });
  spdlog::info("proxy listening on {}:{}", config_.listen_host, port_);
}

void ProxyServer::stop() {
  if (!running_.exchange(false)) return;
  sleeper_.stop();
  listener_.shutdown_both();
  if (acceptor_.joinable()) acceptor_.join();
  listener_.close();
  sockets_.shutdown_all();
  reap_finished(true);
  if (admin_) {
    admin_->stop();
    if (admin_thread_.joinable()) admin_thread_.join();
    admin_.reset();
  }
  metrics_.flush(std::chrono::seconds(5));
}

void ProxyServer::accept_loop() {
  while (running_) {
    net::Socket client = net::accept_tcp(listener_);
    if (!client.valid()) {
      if (!running_) break;
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
      continue;
    }
    reap_finished(false);
    std::lock_guard lock(threads_mu_);
    const std::uint64_t id = next_worker_++;
    workers_.emplace(id, std::thread([this, id, sock = std::move(client)]() mutable {
                       serve_connection(std::move(sock));
                       std::lock_guard done(threads_mu_);
                       finished_.push_back(id);
                     }));
  }
}

void ProxyServer::reap_finished(bool all) {
  std::vector<std::thread> joinable;
  {
    std::lock_guard lock(threads_mu_);
    if (all) {
      for (auto& [_, t] : workers_) joinable.push_back(std::move(t));
      workers_.clear();
      finished_.clear();
    } else {
      for (const std::uint64_t id : finished_) {
        auto it = workers_.find(id);
        if (it == workers_.end()) continue;
        joinable.push_back(std::move(it->second));
        workers_.erase(it);
      }
      finished_.clear();
    }
  }
  for (auto& t : joinable) {
    if (t.joinable()) t.join();
  }
}

void ProxyServer::serve_connection(net::Socket client) {
  client.set_timeouts(kClientIdleTimeout, kClientWriteTimeout);
  client.set_nodelay();
  const int fd = client.fd();
  sockets_.add(fd);
  {
    net::PlainStream stream(std::move(client));
    net::BufferedReader reader(stream);
    ConnectionPool pool(*upstream_tls_, upstream_timeout(config_), &sockets_);
    try {
      serve_http(stream, reader, std::nullopt, pool);
    } catch (const std::exception& e) {
      spdlog::debug("client connection closed: {}", e.what());
    }
    sockets_.remove(fd);
  }
}

void ProxyServer::serve_http(net::Stream& stream, net::BufferedReader& reader,
                             const std::optional<Tunnel>& tunnel, ConnectionPool& pool) {
  while (running_) {
    std::optional<http::Request> request;
    try {
      request = http::read_request(reader, &stream);
    } catch (const http::HttpError& e) {
      write_local_error(stream, 400, e.what());
      return;
    }
    if (!request) return;
    if (http::iequals(request->method, "CONNECT")) {
      if (tunnel) {
        write_local_error(stream, 405, "CONNECT inside a tunnel is not supported");
        return;
      }
      handle_connect(stream, reader, *request, pool);
      return;
    }
    if (!handle_request(stream, reader, std::move(*request), tunnel, pool)) return;
  }
}

void ProxyServer::handle_connect(net::Stream& stream, net::BufferedReader& reader,
                                 const http::Request& request, ConnectionPool& pool) {
  const auto host_port = split_host_port(request.target, 443);
  if (!host_port || !tls::is_valid_hostname(host_port->first)) {
    write_local_error(stream, 400, "invalid CONNECT target: " + request.target);
    return;
  }
  const auto& [host, port] = *host_port;
  stream.write_all("HTTP/1.1 200 Connection established\r\n\r\n");

  const int fd = stream.socket().fd();
  bool is_tls = false;
  if (!reader.has_buffered()) {
    unsigned char first = 0;
    const ssize_t n = ::recv(fd, &first, 1, MSG_PEEK);
    if (n <= 0) return;
    is_tls = first == 0x16;
  }
  if (!is_tls) {
    serve_http(stream, reader, Tunnel{"http", host, port}, pool);
    return;
  }

  // The TLS session gets its own descriptor for the same connection so the
  // original stays registered (and owned) until the connection ends.
  net::Socket dup_sock(::dup(fd));
  if (!dup_sock.valid()) return;
  std::unique_ptr<tls::TlsStream> tls_stream;
  try {
    tls_stream = interception_->accept(std::move(dup_sock), host);
  } catch (const std::exception& e) {
    spdlog::warn("TLS handshake with client for {} failed: {}", host, e.what());
    return;
  }
  net::BufferedReader tls_reader(*tls_stream);
  serve_http(*tls_stream, tls_reader, Tunnel{"https", host, port}, pool);
}

bool ProxyServer::handle_request(net::Stream& stream, net::BufferedReader& reader,
                                 http::Request request,
                                 const std::optional<Tunnel>& tunnel, ConnectionPool& pool) {
  Url url;
  if (tunnel) {
    url.scheme = tunnel->scheme;
    url.host = tunnel->host;
    url.port = tunnel->port;
    if (request.target.starts_with("/")) {
      url.target = request.target;
    } else if (auto parsed = parse_url(request.target)) {
      url.target = parsed->target;
    } else {
      write_local_error(stream, 400, "invalid request target: " + request.target);
      return false;
    }
  } else {
    auto parsed = parse_url(request.target);
    if (!parsed) {
      write_local_error(stream, 400,
                        "faultline is a forward proxy; send absolute-form requests or CONNECT");
      return false;
    }
    url = std::move(*parsed);
  }

  const bool client_close = http::wants_close(request.version, request.headers);
  const auto upgrade = request.headers.get("Upgrade");
  const bool is_upgrade = upgrade && request.headers.has_token("Connection", "upgrade");

  Flow flow;
  flow.id = next_flow_id_++;
  flow.t_client_request = now_ms();
  flow.url = url.str();
  flow.request.method = request.method;
  flow.request.target = url.target;
  flow.request.headers = http::end_to_end_headers(request.headers);
  if (!flow.request.headers.contains("Host")) flow.request.headers.set("Host", url.authority());
  flow.request.body = std::move(request.body);

  if (is_upgrade) {
    flow.request.headers.set("Connection", "Upgrade");
    flow.request.headers.set("Upgrade", *upgrade);
    relay_upgrade(stream, reader, flow, url, pool);
    return false;
  }

  pipeline_.run(flow, url, pool);

  http::Response& resp = *flow.response;
  resp.headers = http::end_to_end_headers(resp.headers);
  if (client_close) {
    resp.headers.set("Connection", "close");
  } else if (request.version == "HTTP/1.0") {
    resp.headers.set("Connection", "keep-alive");
  }
  bool delivered = true;
  begin_delivery();
  try {
    stream.write_all(
        http::serialize_response(resp, http::response_has_body(flow.request.method, resp.status)));
    flow.t_client_response = now_ms();
  } catch (const std::exception& e) {
    delivered = false;
    spdlog::debug("flow {}: client write failed: {}", flow.id, e.what());
  }
  metrics_.record_flow(flow);
  end_delivery();
  return delivered && !client_close && running_;
}

void ProxyServer::relay_upgrade(net::Stream& client, net::BufferedReader& client_reader,
                                Flow& flow, const Url& url, ConnectionPool& pool) {
  ConnectionPool::Connection upstream;
  try {
    upstream = pool.open(url);
    upstream.stream->write_all(http::serialize_request(flow.request));
    http::Response resp = http::read_response(*upstream.reader, flow.request.method);
    flow.t_upstream_response = now_ms();
    flow.origin_contacted = true;
    flow.upstream_response = resp;
    flow.response = std::move(resp);
  } catch (const std::exception& e) {
    pool.release(upstream);
    flow.proxy_error = true;
    flow.proxy_error_detail = e.what();
    flow.response = make_proxy_error_response(flow.proxy_error_detail);
  }

  const http::Response& resp = *flow.response;
  const bool switched = resp.status == 101;
  begin_delivery();
  try {
    client.write_all(http::serialize_response(
        resp, !switched && http::response_has_body(flow.request.method, resp.status)));
    flow.t_client_response = now_ms();
  } catch (const std::exception& e) {
    spdlog::debug("flow {}: client write failed: {}", flow.id, e.what());
  }
  metrics_.record_flow(flow);
  end_delivery();
  if (!switched || !flow.t_client_response) {
    pool.release(upstream);
    return;
  }

  // Both directions are relayed opaquely until either side closes.
  try {
    if (client_reader.has_buffered()) upstream.stream->write_all(client_reader.take_buffered());
    if (upstream.reader->has_buffered()) client.write_all(upstream.reader->take_buffered());
    std::array<char, 16 * 1024> buffer{};
    std::array<net::Stream*, 2> from = {&client, upstream.stream.get()};
    std::array<net::Stream*, 2> to = {upstream.stream.get(), &client};
    std::array<bool, 2> open = {true, true};
    while (running_ && (open[0] || open[1])) {
      std::array<pollfd, 2> fds{};
      bool pending = false;
      for (int i = 0; i < 2; ++i) {
        fds[i].fd = open[i] ? from[i]->socket().fd() : -1;
        fds[i].events = POLLIN;
        pending = pending || (open[i] && from[i]->has_pending());
      }
      if (!pending) {
        const int rc = ::poll(fds.data(), fds.size(), 500);
        if (rc < 0 && errno != EINTR) break;
        if (rc <= 0) continue;
      }
      for (int i = 0; i < 2; ++i) {
        if (!open[i]) continue;
        if (!from[i]->has_pending() && (fds[i].revents & (POLLIN | POLLHUP | POLLERR)) == 0) {
          continue;
        }
        const std::size_t n = from[i]->read_some(buffer);
        if (n == 0) {
          open[i] = false;
          to[i]->shutdown_write();
          continue;
        }
        to[i]->write_all(std::string_view(buffer.data(), n));
      }
    }
  } catch (const std::exception& e) {
    spdlog::debug("flow {}: upgraded connection ended: {}", flow.id, e.what());
  }
  pool.release(upstream);
}

void ProxyServer::begin_delivery() {
  std::lock_guard lock(delivery_mu_);
  ++deliveries_;
}

void ProxyServer::end_delivery() {
  {
    std::lock_guard lock(delivery_mu_);
    --deliveries_;
  }
  delivery_cv_.notify_all();
}

void ProxyServer::await_deliveries() {
  std::unique_lock lock(delivery_mu_);
  if (!delivery_cv_.wait_for(lock, std::chrono::seconds(5), [this] { return deliveries_ == 0; })) {
    spdlog::warn("{} response(s) still being delivered at task boundary", deliveries_);
  }
}

std::optional<TaskMetrics> ProxyServer::start_task(std::string task_id) {
  std::lock_guard lock(control_mu_);
  await_deliveries();
  auto previous = metrics_.start_task(std::move(task_id));
  if (config_.reset_rules_on_task) rules_.reset_task();
  return previous;
}

std::optional<TaskMetrics> ProxyServer::end_task(std::optional<std::uint64_t> steps) {
  std::lock_guard lock(control_mu_);
  await_deliveries();
  auto finished = metrics_.finalize_task(steps);
  if (finished && config_.reset_rules_on_task) rules_.reset_task();
  metrics_.flush(std::chrono::seconds(5));
  return finished;
}

void ProxyServer::reset_rules() {
  std::lock_guard lock(control_mu_);
  rules_.reset_task();
}

json ProxyServer::status() const {
  json rules = json::array();
  for (const auto& s : rules_.snapshot()) {
    rules.push_back(json{{"rule_id", s.rule_id}, {"count", s.count}, {"fired", s.fired}});
  }
  const auto task = metrics_.active_task_id();
  return json{{"port", port_},
              {"admin_port", admin_port_},
              {"condition", config_.condition},
              {"active_task", task ? json(*task) : json(nullptr)},
              {"flows_recorded", metrics_.flows_recorded()},
              {"leaf_certificates", leaves_->size()},
              {"rules", std::move(rules)}};
}

void ProxyServer::start_admin() {
  auto server = std::make_unique<httplib::Server>();
  auto reply = [](httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump() + "\n", "application/json");
  };

  server->Post("/task/start", [this, reply](const httplib::Request& req, httplib::Response& res) {
    const json body = json::parse(req.body, nullptr, false);
    if (!body.is_object() || !body.contains("task_id") || !body["task_id"].is_string() ||
        body["task_id"].get<std::string>().empty()) {
      reply(res, 400, json{{"error", "expected {\"task_id\": \"<non-empty string>\"}"}});
      return;
    }
    const std::string id = body["task_id"].get<std::string>();
    const auto previous = start_task(id);
    reply(res, 200,
          json{{"task_id", id}, {"finalized", previous ? previous->to_json() : json(nullptr)}});
  });

  server->Post("/task/end", [this, reply](const httplib::Request& req, httplib::Response& res) {
    std::optional<std::uint64_t> steps;
    if (!req.body.empty()) {
      const json body = json::parse(req.body, nullptr, false);
      if (!body.is_object() ||
          (body.contains("steps") && !body["steps"].is_number_unsigned())) {
        reply(res, 400, json{{"error", "expected {\"steps\": <non-negative integer>}"}});
        return;
      }
      if (body.contains("steps")) steps = body["steps"].get<std::uint64_t>();
    }
    const auto finished = end_task(steps);
    if (!finished) {
      reply(res, 409, json{{"error", "no task is open"}});
      return;
    }
    reply(res, 200, finished->to_json());
  });

  server->Post("/reset", [this, reply](const httplib::Request&, httplib::Response& res) {
    reset_rules();
    reply(res, 200, json{{"reset", true}});
  });

  server->Get("/status", [this, reply](const httplib::Request&, httplib::Response& res) {
    reply(res, 200, status());
  });

  server->Get("/ca.pem", [this](const httplib::Request&, httplib::Response& res) {
    res.set_content(ca_->cert_pem(), "application/x-pem-file");
  });

  if (!server->bind_to_port(config_.listen_host, config_.admin_port)) {
    throw net::NetError(fmt::format("cannot bind {}:{} (control endpoint)", config_.listen_host,
                                    config_.admin_port));
  }
  admin_port_ = config_.admin_port;
  admin_ = std::move(server);
  admin_thread_ = std::thread([this] { admin_->listen_after_bind(); });
}

}  // namespace faultline
