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

#include "faultline/metrics.h"

#include <filesystem>
#include <fstream>
#include <map>

#include <spdlog/spdlog.h>

#include "faultline/compression.h"

namespace faultline {

using nlohmann::json;

namespace {

const json* find_path(const json& root, std::string_view dotted) {
  const json* node = &root;
  while (!dotted.empty()) {
    const auto dot = dotted.find('.');
    const std::string key(dotted.substr(0, dot));
    if (!node->is_object()) return nullptr;
    auto it = node->find(key);
    if (it == node->end()) return nullptr;
    node = &*it;
    dotted = dot == std::string_view::npos ? std::string_view() : dotted.substr(dot + 1);
  }
  return node;
}

std::optional<std::uint64_t> count_field(const json& usage, const std::string& key) {
  auto it = usage.find(key);
  if (it == usage.end()) return std::nullopt;
  if (it->is_number_unsigned()) return it->get<std::uint64_t>();
  if (it->is_number_integer() && it->get<std::int64_t>() >= 0) {
    return static_cast<std::uint64_t>(it->get<std::int64_t>());
  }
  return std::nullopt;
}

// Merges the usage object found in doc into out; later values win per key.
bool merge_usage(const json& doc, const UsageFields& fields, TokenUsage& out) {
  const json* usage = find_path(doc, fields.container);
  if (usage == nullptr || !usage->is_object()) return false;
  auto in = count_field(*usage, fields.input_tokens_key);
  auto outc = count_field(*usage, fields.output_tokens_key);
  if (!in && !outc) return false;
  if (in) out.tokens_in = *in;
  if (outc) out.tokens_out = *outc;
  out.found = true;
  return true;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

json opt_ts(const std::optional<TimestampMs>& t) { return t ? json(*t) : json(nullptr); }

}  // namespace

const LlmEndpointSpec* classify_flow(std::string_view url,
                                     std::span<const LlmEndpointSpec> specs) {
  for (const auto& spec : specs) {
    if (spec.matcher.matches(url)) return &spec;
  }
  return nullptr;
}

const LlmEndpointSpec* classify_flow(const Flow& flow, std::span<const LlmEndpointSpec> specs) {
  return classify_flow(flow.url, specs);
}

TokenUsage parse_usage(std::string_view body, const UsageFields& fields) {
  TokenUsage usage;
  json doc = json::parse(body.begin(), body.end(), nullptr, false);
  if (!doc.is_discarded()) {
    merge_usage(doc, fields, usage);
  } else {
    // Streamed response: one JSON record per line, optionally "data:"-prefixed.
    std::string_view rest = body;
    while (!rest.empty()) {
      const auto nl = rest.find('\n');
      std::string_view line = trim(rest.substr(0, nl));
      rest = nl == std::string_view::npos ? std::string_view() : rest.substr(nl + 1);
      if (line.starts_with("data:")) line = trim(line.substr(5));
      if (line.empty() || line.front() != '{') continue;
      json rec = json::parse(line.begin(), line.end(), nullptr, false);
      if (!rec.is_discarded()) merge_usage(rec, fields, usage);
    }
  }
  if (!usage.found) {
    spdlog::warn("no usage object ('{}') with '{}'/'{}' in model response; counting 0 tokens",
                 fields.container, fields.input_tokens_key, fields.output_tokens_key);
  }
  return usage;
}

json TaskMetrics::to_json() const {
  json inj = json::array();
  for (const auto& i : injections) inj.push_back({{"rule_id", i.rule_id}, {"flow_id", i.flow_id}});
  return json{{"task_id", task_id},
              {"condition", condition},
              {"t_start", t_start},
              {"t_end", t_end},
              {"client_latency_s", client_latency_s},
              {"flows", flows},
              {"llm_calls", llm_calls},
              {"tokens_in", tokens_in},
              {"tokens_out", tokens_out},
              {"cost_usd", cost_usd},
              {"steps", steps},
              {"steps_source", steps_source},
              {"injections", std::move(inj)}};
}

TaskMetrics TaskMetrics::from_json(const json& j) {
  TaskMetrics m;
  m.task_id = j.at("task_id").get<std::string>();
  m.condition = j.value("condition", std::string());
  m.t_start = j.value("t_start", TimestampMs{0});
  m.t_end = j.value("t_end", TimestampMs{0});
  m.client_latency_s = j.at("client_latency_s").get<double>();
  m.flows = j.value("flows", std::uint64_t{0});
  m.llm_calls = j.at("llm_calls").get<std::uint64_t>();
  m.tokens_in = j.at("tokens_in").get<std::uint64_t>();
  m.tokens_out = j.at("tokens_out").get<std::uint64_t>();
  m.cost_usd = j.at("cost_usd").get<double>();
  m.steps = j.value("steps", m.llm_calls);
  m.steps_source = j.value("steps_source", std::string("llm_calls"));
  if (auto it = j.find("injections"); it != j.end()) {
    for (const auto& i : *it) {
      m.injections.push_back({i.at("rule_id").get<std::string>(), i.at("flow_id").get<std::uint64_t>()});
    }
  }
  return m;
}

JsonlSink::JsonlSink(std::chrono::milliseconds retry_interval)
    : retry_interval_(retry_interval), writer_([this] { run(); }) {}

JsonlSink::~JsonlSink() {
  {
    std::lock_guard<std::mutex> lock(mu_);
    stopping_ = true;
  }
  cv_.notify_all();
  writer_.join();
}

void JsonlSink::append(std::string path, std::string line) {
  {
    std::lock_guard<std::mutex> lock(mu_);
    queue_.push_back(Entry{std::move(path), std::move(line)});
  }
  cv_.notify_one();
}

bool JsonlSink::flush(std::chrono::milliseconds timeout) {
  std::unique_lock<std::mutex> lock(mu_);
  cv_.notify_one();
  return drained_.wait_for(lock, timeout, [this] { return queue_.empty() && in_flight_ == 0; });
}

std::size_t JsonlSink::pending() const {
  std::lock_guard<std::mutex> lock(mu_);
  return queue_.size() + in_flight_;
}

bool JsonlSink::write_batch(std::deque<Entry>& batch) {
  std::map<std::string, std::string> by_path;
  std::vector<std::string> order;
  for (auto& e : batch) {
    auto [it, inserted] = by_path.try_emplace(e.path);
    if (inserted) order.push_back(e.path);
    it->second += e.line;
    it->second += '\n';
  }
  std::deque<Entry> failed;
  for (const auto& path : order) {
    std::ofstream out(path, std::ios::app | std::ios::binary);
    if (out) {
      out << by_path[path];
      out.flush();
    }
    if (!out) {
      spdlog::warn("metrics write to {} failed; will retry", path);
      for (auto& e : batch) {
        if (e.path == path) failed.push_back(std::move(e));
      }
    }
  }
  batch = std::move(failed);
  return batch.empty();
}

void JsonlSink::run() {
  std::unique_lock<std::mutex> lock(mu_);
  while (true) {
    cv_.wait(lock, [this] { return stopping_ || !queue_.empty(); });
    if (queue_.empty() && stopping_) break;
    std::deque<Entry> batch;
    batch.swap(queue_);
    in_flight_ = batch.size();
    lock.unlock();
    const bool ok = write_batch(batch);
    lock.lock();
    // Failed lines go back to the front, ahead of anything queued meanwhile.
    for (auto it = batch.rbegin(); it != batch.rend(); ++it) queue_.push_front(std::move(*it));
    in_flight_ = 0;
    if (queue_.empty()) drained_.notify_all();
    if (!ok) {
      if (stopping_) {
        spdlog::error("dropping {} unwritable metrics lines at shutdown", queue_.size());
        queue_.clear();
        drained_.notify_all();
        break;
      }
      cv_.wait_for(lock, retry_interval_, [this] { return stopping_; });
    }
  }
  drained_.notify_all();
}

json flow_record(const Flow& flow, const std::optional<std::string>& task_id,
                 const TokenUsage& usage, bool llm) {
  return json{{"flow_id", flow.id},
              {"task_id", task_id ? json(*task_id) : json(nullptr)},
              {"url", flow.url},
              {"method", flow.request.method},
              {"status", flow.response ? json(flow.response->status) : json(nullptr)},
              {"t_client_request", opt_ts(flow.t_client_request)},
              {"t_upstream_response", opt_ts(flow.t_upstream_response)},
              {"t_client_response", opt_ts(flow.t_client_response)},
              {"injected_rule_ids", flow.applied_rule_ids},
              {"tokens_in", usage.tokens_in},
              {"tokens_out", usage.tokens_out},
              {"llm", llm},
              {"origin_contacted", flow.origin_contacted},
              {"proxy_error", flow.proxy_error}};
}

MetricsLogger::MetricsLogger(Options options) : options_(std::move(options)) {
  for (const auto& p : {options_.paths.flows_path, options_.paths.tasks_path}) {
    const std::filesystem::path path(p);
    std::error_code ec;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  }
}

TokenUsage MetricsLogger::record_flow(const Flow& flow) {
  const LlmEndpointSpec* spec = classify_flow(flow, options_.endpoints);
  TokenUsage usage;
  if (spec != nullptr && flow.upstream_response) {
    const auto& up = *flow.upstream_response;
    const std::string encoding(up.headers.get("Content-Encoding").value_or(""));
    if (auto body = decode_body(up.body, encoding)) {
      usage = parse_usage(*body, spec->usage_fields);
    } else {
      spdlog::warn("cannot decode model response body (encoding '{}')", encoding);
    }
  }

  std::optional<std::string> task_id;
  {
    std::lock_guard<std::mutex> lock(mu_);
    ++flows_recorded_;
    if (task_) {
      task_id = task_->task_id;
      ++task_->flows;
      if (spec != nullptr) {
        ++task_->llm_calls;
        task_->tokens_in += usage.tokens_in;
        task_->tokens_out += usage.tokens_out;
        task_->cost_usd += static_cast<double>(usage.tokens_in) * spec->price.usd_per_input_token +
                           static_cast<double>(usage.tokens_out) * spec->price.usd_per_output_token;
      }
      for (const auto& rule_id : flow.applied_rule_ids) {
        task_->injections.push_back({rule_id, flow.id});
      }
    }
    // Appended under the lock so records keep recording order.
    sink_.append(options_.paths.flows_path,
                 flow_record(flow, task_id, usage, spec != nullptr).dump());
  }
  return usage;
}

std::optional<TaskMetrics> MetricsLogger::start_task(std::string task_id) {
  std::lock_guard<std::mutex> lock(mu_);
  std::optional<TaskMetrics> previous;
  if (task_) {
    spdlog::warn("task '{}' still open; finalizing before starting '{}'", task_->task_id, task_id);
    previous = finalize_locked(std::nullopt);
  }
  TaskMetrics next;
  next.task_id = std::move(task_id);
  next.condition = options_.condition;
  next.t_start = now_ms();
  task_ = std::move(next);
  return previous;
}

std::optional<TaskMetrics> MetricsLogger::finalize_task(std::optional<std::uint64_t> steps) {
  std::lock_guard<std::mutex> lock(mu_);
  if (!task_) {
    spdlog::warn("finalize requested with no open task; ignoring");
    return std::nullopt;
  }
  return finalize_locked(steps);
}

std::optional<TaskMetrics> MetricsLogger::finalize_locked(std::optional<std::uint64_t> steps) {
  TaskMetrics done = std::move(*task_);
  task_.reset();
  done.t_end = std::max(now_ms(), done.t_start);
  done.client_latency_s = static_cast<double>(done.t_end - done.t_start) / 1000.0;
  if (steps) {
    done.steps = *steps;
    done.steps_source = "harness";
  } else {
    done.steps = done.llm_calls;
  }
  sink_.append(options_.paths.tasks_path, done.to_json().dump());
  return done;
}

std::optional<std::string> MetricsLogger::active_task_id() const {
  std::lock_guard<std::mutex> lock(mu_);
  if (!task_) return std::nullopt;
  return task_->task_id;
}

std::optional<TaskMetrics> MetricsLogger::snapshot() const {
  std::lock_guard<std::mutex> lock(mu_);
  return task_;
}

std::uint64_t MetricsLogger::flows_recorded() const {
  std::lock_guard<std::mutex> lock(mu_);
  return flows_recorded_;
}

bool MetricsLogger::flush(std::chrono::milliseconds timeout) { return sink_.flush(timeout); }

}  // namespace faultline
