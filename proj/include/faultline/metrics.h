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

// Efficiency metrics: one JSONL record per flow, one per task.
//
// Flows whose URL matches an LlmEndpointSpec are model-API calls. Their
// token usage is read from the origin's response body, either a single
// JSON document or a stream of "data: {...}" records (the last value seen
// for each key wins), and priced with the endpoint's price table:
//
//   cost = tokens_in * usd_per_input_token + tokens_out * usd_per_output_token
//
// summed over every model-API flow of the task.

#ifndef FAULTLINE_METRICS_H_
#define FAULTLINE_METRICS_H_

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "json.hpp"

#include "faultline/flow.h"
#include "faultline/match_policy.h"

namespace faultline {

struct UsageFields {
  // Dotted path to the usage object; empty means the document root.
  std::string container = "usage";
  std::string input_tokens_key = "prompt_tokens";
  std::string output_tokens_key = "completion_tokens";

  bool operator==(const UsageFields&) const = default;
};

struct Price {
  double usd_per_input_token = 0.0;
  double usd_per_output_token = 0.0;

  bool operator==(const Price&) const = default;
};

struct LlmEndpointSpec {
  std::string name;
  UrlMatcher matcher = UrlMatcher::match_all();
  UsageFields usage_fields;
  Price price;

  bool operator==(const LlmEndpointSpec&) const = default;
};

struct TokenUsage {
  std::uint64_t tokens_in = 0;
  std::uint64_t tokens_out = 0;
  bool found = false;
};

// First spec, in configuration order, whose matcher accepts url.
const LlmEndpointSpec* classify_flow(std::string_view url,
                                     std::span<const LlmEndpointSpec> specs);
const LlmEndpointSpec* classify_flow(const Flow& flow, std::span<const LlmEndpointSpec> specs);

// Never throws; a body without usage yields {0, 0, found=false}.
TokenUsage parse_usage(std::string_view body, const UsageFields& fields);

struct Injection {
  std::string rule_id;
  std::uint64_t flow_id = 0;

  bool operator==(const Injection&) const = default;
};

struct TaskMetrics {
  std::string task_id;
  std::string condition;
  TimestampMs t_start = 0;
  TimestampMs t_end = 0;
  double client_latency_s = 0.0;
  std::uint64_t flows = 0;
  std::uint64_t llm_calls = 0;
  std::uint64_t tokens_in = 0;
  std::uint64_t tokens_out = 0;
  double cost_usd = 0.0;
  std::uint64_t steps = 0;
  // "llm_calls" unless the harness supplied a step count.
  std::string steps_source = "llm_calls";
  std::vector<Injection> injections;

  nlohmann::json to_json() const;
  static TaskMetrics from_json(const nlohmann::json& j);
};

struct ReportPaths {
  std::string flows_path = "flows.jsonl";
  std::string tasks_path = "tasks.jsonl";

  bool operator==(const ReportPaths&) const = default;
};

// Appends lines to files from a single writer thread. Producers never block
// on disk; failed writes stay queued and are retried.
class JsonlSink {
 public:
  explicit JsonlSink(std::chrono::milliseconds retry_interval = std::chrono::milliseconds(200));
  ~JsonlSink();
  JsonlSink(const JsonlSink&) = delete;
  JsonlSink& operator=(const JsonlSink&) = delete;

  void append(std::string path, std::string line);
  // Waits until every line queued so far is on disk. False on timeout.
  bool flush(std::chrono::milliseconds timeout);
  std::size_t pending() const;

 private:
  struct Entry {
    std::string path;
    std::string line;
  };

  void run();
  static bool write_batch(std::deque<Entry>& batch);

  std::chrono::milliseconds retry_interval_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::condition_variable drained_;
  std::deque<Entry> queue_;
  std::size_t in_flight_ = 0;
  bool stopping_ = false;
  std::thread writer_;
};

// Per-flow and per-task accounting. Thread-safe.
class MetricsLogger {
 public:
  struct Options {
    std::vector<LlmEndpointSpec> endpoints;
    ReportPaths paths;
    std::string condition;
  };

  explicit MetricsLogger(Options options);

  // Appends one flow record and, for model-API flows inside an open task,
  // adds to the task totals. Returns the usage attributed to the flow.
  TokenUsage record_flow(const Flow& flow);
  // Opens a task. A task that is still open is finalized first and returned.
  std::optional<TaskMetrics> start_task(std::string task_id);
  // Emits the open task's record and closes it; nullopt (with a warning)
  // when no task is open.
  std::optional<TaskMetrics> finalize_task(std::optional<std::uint64_t> steps = std::nullopt);

  std::optional<std::string> active_task_id() const;
  std::optional<TaskMetrics> snapshot() const;
  std::uint64_t flows_recorded() const;
  bool flush(std::chrono::milliseconds timeout = std::chrono::seconds(10));

  const std::vector<LlmEndpointSpec>& endpoints() const { return options_.endpoints; }

 private:
  std::optional<TaskMetrics> finalize_locked(std::optional<std::uint64_t> steps);

  Options options_;
  JsonlSink sink_;
  mutable std::mutex mu_;
  std::optional<TaskMetrics> task_;
  std::uint64_t flows_recorded_ = 0;
};

nlohmann::json flow_record(const Flow& flow, const std::optional<std::string>& task_id,
                           const TokenUsage& usage, bool llm);

}  // namespace faultline

#endif  // FAULTLINE_METRICS_H_
