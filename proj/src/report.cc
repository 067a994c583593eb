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

#include "faultline/report.h"

#include <fstream>
#include <map>
#include <stdexcept>

#include <fmt/format.h>

namespace faultline {

using nlohmann::json;

namespace {

constexpr std::string_view kRowFormat = "{:<24} {:<16} {:>10} {:>9} {:>7} {:>11} {:>11} {:>11}\n";

json means_json(const MetricMeans& m) {
  return json{{"client_latency_s", m.client_latency_s}, {"llm_calls", m.llm_calls},
              {"steps", m.steps},                       {"tokens_in", m.tokens_in},
              {"tokens_out", m.tokens_out},             {"cost_usd", m.cost_usd}};
}

std::string mean_row(std::string_view label, std::string_view condition, const MetricMeans& m) {
  return fmt::format(kRowFormat, label, condition, fmt::format("{:.2f}", m.client_latency_s),
                     fmt::format("{:.2f}", m.llm_calls), fmt::format("{:.2f}", m.steps),
                     fmt::format("{:.1f}", m.tokens_in), fmt::format("{:.1f}", m.tokens_out),
                     fmt::format("{:.6f}", m.cost_usd));
}

}  // namespace

MetricMeans mean_of(const std::vector<TaskMetrics>& tasks) {
  MetricMeans m;
  if (tasks.empty()) return m;
  for (const auto& t : tasks) {
    m.client_latency_s += t.client_latency_s;
    m.llm_calls += static_cast<double>(t.llm_calls);
    m.steps += static_cast<double>(t.steps);
    m.tokens_in += static_cast<double>(t.tokens_in);
    m.tokens_out += static_cast<double>(t.tokens_out);
    m.cost_usd += t.cost_usd;
  }
  const double n = static_cast<double>(tasks.size());
  m.client_latency_s /= n;
  m.llm_calls /= n;
  m.steps /= n;
  m.tokens_in /= n;
  m.tokens_out /= n;
  m.cost_usd /= n;
  return m;
}

Report render_report(const std::vector<TaskMetrics>& tasks) {
  Report report;
  if (tasks.empty()) {
    report.text = "no tasks\n";
    report.summary = json{{"tasks", 0}, {"rows", json::array()}, {"mean", nullptr}};
    return report;
  }

  std::string text = fmt::format(kRowFormat, "task", "condition", "latency_s", "llm_calls",
                                 "steps", "tokens_in", "tokens_out", "cost_usd");
  json rows = json::array();
  std::map<std::string, std::vector<TaskMetrics>> by_condition;
  for (const auto& t : tasks) {
    text += fmt::format(kRowFormat, t.task_id, t.condition, fmt::format("{:.2f}", t.client_latency_s),
                        t.llm_calls, t.steps, t.tokens_in, t.tokens_out,
                        fmt::format("{:.6f}", t.cost_usd));
    rows.push_back(t.to_json());
    by_condition[t.condition].push_back(t);
  }
  const MetricMeans overall = mean_of(tasks);
  text += mean_row("mean", "", overall);

  json per_condition = json::object();
  if (by_condition.size() > 1) {
    text += "\nper condition\n";
    for (const auto& [condition, group] : by_condition) {
      const MetricMeans m = mean_of(group);
      text += mean_row(fmt::format("mean (n={})", group.size()), condition, m);
      per_condition[condition] = means_json(m);
      per_condition[condition]["tasks"] = group.size();
    }
  }
  report.text = std::move(text);
  report.summary = json{{"tasks", tasks.size()},
                        {"rows", std::move(rows)},
                        {"mean", means_json(overall)},
                        {"by_condition", std::move(per_condition)}};
  return report;
}

std::vector<TaskMetrics> read_tasks_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::vector<TaskMetrics> tasks;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      tasks.push_back(TaskMetrics::from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw std::runtime_error(fmt::format("{}:{}: {}", path.string(), line_no, e.what()));
    }
  }
  return tasks;
}

}  // namespace faultline
