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

#ifndef FAULTLINE_REPORT_H_
#define FAULTLINE_REPORT_H_

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "faultline/metrics.h"

namespace faultline {

struct MetricMeans {
  double client_latency_s = 0.0;
  double llm_calls = 0.0;
  double steps = 0.0;
  double tokens_in = 0.0;
  double tokens_out = 0.0;
  double cost_usd = 0.0;
};

MetricMeans mean_of(const std::vector<TaskMetrics>& tasks);

struct Report {
  std::string text;
  nlohmann::json summary;
};

// One row per task, then a mean row; per-condition means follow when the
// tasks span more than one condition.
Report render_report(const std::vector<TaskMetrics>& tasks);

// Reads tasks.jsonl; blank lines are skipped. Throws std::runtime_error
// naming the line number of a malformed record.
std::vector<TaskMetrics> read_tasks_jsonl(const std::filesystem::path& path);

}  // namespace faultline

#endif  // FAULTLINE_REPORT_H_
