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

// Intercepting forward proxy.
//
// Clients reach the proxy with absolute-form HTTP requests or CONNECT.
// A CONNECT tunnel whose first byte is a TLS record is terminated with a
// leaf minted for the SNI name; anything else in the tunnel is parsed as
// plain HTTP. Each request becomes a Flow that runs through FlowPipeline
// and is handed to the MetricsLogger exactly once.

#ifndef FAULTLINE_PROXY_H_
#define FAULTLINE_PROXY_H_

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "faultline/config.h"
#include "faultline/faults.h"
#include "faultline/flow.h"
#include "faultline/http_message.h"
#include "faultline/match_policy.h"
#include "faultline/metrics.h"
#include "faultline/net.h"
#include "faultline/tls.h"
#include "faultline/url.h"

namespace httplib {
class Server;
}

namespace faultline {

// Header on every response the proxy synthesizes because the origin could
// not be reached. Injected faults never carry it.
inline constexpr std::string_view kProxyErrorHeader = "X-Faultline-Proxy-Error";

// Sockets that stop() must be able to wake. Entries are removed before
// their fd is closed.
class SocketRegistry {
 public:
  void add(int fd);
  void remove(int fd);
  void shutdown_all();

 private:
  std::mutex mu_;
  std::vector<int> fds_;
  bool closed_ = false;
};

class UpstreamClient {
 public:
  virtual ~UpstreamClient() = default;
  // Sends request (origin-form target) to url's origin and reads the full
  // response. Throws on connection, TLS or protocol failure.
  virtual http::Response fetch(const Url& url, const http::Request& request) = 0;
};

// Keep-alive upstream connections owned by one client connection.
class ConnectionPool : public UpstreamClient {
 public:
  ConnectionPool(tls::UpstreamContext& tls, std::chrono::milliseconds timeout,
                 SocketRegistry* registry = nullptr);
  ~ConnectionPool() override;
  ConnectionPool(const ConnectionPool&) = delete;
  ConnectionPool& operator=(const ConnectionPool&) = delete;

  http::Response fetch(const Url& url, const http::Request& request) override;

  // Opens a fresh connection (not pooled); used for protocol upgrades.
  struct Connection {
    std::unique_ptr<net::Stream> stream;
    std::unique_ptr<net::BufferedReader> reader;
  };
  Connection open(const Url& url);
  void release(Connection& connection);

  std::size_t opened() const { return opened_; }

 private:
  std::map<std::string, Connection> idle_;
  tls::UpstreamContext* tls_;
  std::chrono::milliseconds timeout_;
  SocketRegistry* registry_;
  std::size_t opened_ = 0;
};

// Applies the configured rules to one flow.
class FlowPipeline {
 public:
  FlowPipeline(const ProxyConfig& config, RuleEngine& rules, Sleeper& sleeper)
      : config_(&config), rules_(&rules), sleeper_(&sleeper) {}

  // Fills flow.response and the bookkeeping fields. flow.request carries the
  // origin-form request to forward; flow.url the normalized absolute URL.
  void run(Flow& flow, const Url& url, UpstreamClient& upstream);

 private:
  const ProxyConfig* config_;
  RuleEngine* rules_;
  Sleeper* sleeper_;
};

http::Response make_proxy_error_response(std::string_view detail);

class ProxyServer {
 public:
  ProxyServer(ProxyConfig config, std::shared_ptr<const tls::CertificateAuthority> ca);
  ~ProxyServer();
  ProxyServer(const ProxyServer&) = delete;
  ProxyServer& operator=(const ProxyServer&) = delete;

  // Binds the proxy and control ports. Throws net::NetError naming the
  // address when a port is unavailable.
  void start();
  void stop();
  bool running() const { return running_; }

  std::uint16_t port() const { return port_; }
  std::uint16_t admin_port() const { return admin_port_; }

  // Control operations, also served over the admin endpoint.
  std::optional<TaskMetrics> start_task(std::string task_id);
  std::optional<TaskMetrics> end_task(std::optional<std::uint64_t> steps = std::nullopt);
  void reset_rules();
  nlohmann::json status() const;

  const ProxyConfig& config() const { return config_; }
  MetricsLogger& metrics() { return metrics_; }
  RuleEngine& rules() { return rules_; }
  const tls::CertificateAuthority& authority() const { return *ca_; }

 private:
  struct Tunnel {
    std::string scheme;
    std::string host;
    std::uint16_t port;
  };

  void accept_loop();
  void reap_finished(bool all);
  void serve_connection(net::Socket client);
  // Serves requests until the client closes or asks to.
  void serve_http(net::Stream& stream, net::BufferedReader& reader,
                  const std::optional<Tunnel>& tunnel, ConnectionPool& pool);
  void handle_connect(net::Stream& stream, net::BufferedReader& reader,
                      const http::Request& request, ConnectionPool& pool);
  // Returns false when the client connection must close.
  bool handle_request(net::Stream& stream, net::BufferedReader& reader, http::Request request,
                      const std::optional<Tunnel>& tunnel, ConnectionPool& pool);
  void relay_upgrade(net::Stream& client, net::BufferedReader& client_reader, Flow& flow,
                     const Url& url, ConnectionPool& pool);
  void start_admin();
  // Task boundaries wait for responses already on the wire to be recorded.
  void begin_delivery();
  void end_delivery();
  void await_deliveries();

  ProxyConfig config_;
  std::shared_ptr<const tls::CertificateAuthority> ca_;
  RuleEngine rules_;
  MetricsLogger metrics_;
  Sleeper sleeper_;
  FlowPipeline pipeline_;
  std::shared_ptr<tls::LeafCache> leaves_;
  std::unique_ptr<tls::InterceptionContext> interception_;
  std::unique_ptr<tls::UpstreamContext> upstream_tls_;

  net::Socket listener_;
  std::uint16_t port_ = 0;
  std::uint16_t admin_port_ = 0;
  std::atomic<bool> running_{false};
  std::atomic<std::uint64_t> next_flow_id_{1};
  std::thread acceptor_;
  SocketRegistry sockets_;

  std::mutex threads_mu_;
  std::map<std::uint64_t, std::thread> workers_;
  std::vector<std::uint64_t> finished_;
  std::uint64_t next_worker_ = 0;

  std::unique_ptr<httplib::Server> admin_;
  std::thread admin_thread_;
  std::mutex control_mu_;
  std::mutex delivery_mu_;
  std::condition_variable delivery_cv_;
  std::size_t deliveries_ = 0;
};

}  // namespace faultline

#endif  // FAULTLINE_PROXY_H_
