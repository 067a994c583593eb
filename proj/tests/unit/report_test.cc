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

#include <gtest/gtest.h>

#include "support.h"

namespace faultline {
namespace {

using testing::TempDir;
using testing::write_file;

TaskMetrics task(std::string id, std::string condition, double latency, std::uint64_t calls,
                 std::uint64_t in, std::uint64_t out, double cost) {
  TaskMetrics t;
  t.task_id = std::move(id);
  t.condition = std::move(condition);
  t.client_latency_s = latency;
  t.llm_calls = calls;
  t.steps = calls;
  t.tokens_in = in;
  t.tokens_out = out;
  t.cost_usd = cost;
  return t;
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start < text.size()) {
    const auto nl = text.find('\n', start);
    out.push_back(text.substr(start, nl - start));
    if (nl == std::string::npos) break;
    start = nl + 1;
  }
  return out;
}

TEST(Report, EmptyListSaysNoTasks) {
  const auto r = render_report({});
  EXPECT_EQ(r.text, "no tasks\n");
  EXPECT_EQ(r.summary["tasks"], 0);
}

TEST(Report, RowReproducesInputsVerbatim) {
  const auto r = render_report({task("wa-17", "network-error", 61.26, 5, 7300, 120, 0.037)});
  const auto ls = lines(r.text);
  ASSERT_GE(ls.size(), 3u);
  EXPECT_NE(ls[1].find("wa-17"), std::string::npos);
  EXPECT_NE(ls[1].find(" 61.26 "), std::string::npos) << ls[1];
  EXPECT_NE(ls[1].find(" 7300 "), std::string::npos) << ls[1];
  EXPECT_NE(ls[1].find(" 0.037000"), std::string::npos) << ls[1];
  EXPECT_DOUBLE_EQ(r.summary["rows"][0]["client_latency_s"].get<double>(), 61.26);
  EXPECT_EQ(r.summary["rows"][0]["tokens_in"], 7300);
  EXPECT_DOUBLE_EQ(r.summary["rows"][0]["cost_usd"].get<double>(), 0.037);
}

TEST(Report, TwoTaskMeanIsHandAverage) {
  const auto m = mean_of({task("a", "c", 10.0, 4, 1000, 10, 0.5),
                          task("b", "c", 20.0, 7, 3000, 31, 1.5)});
  EXPECT_DOUBLE_EQ(m.client_latency_s, 15.0);
  EXPECT_DOUBLE_EQ(m.llm_calls, 5.5);
  EXPECT_DOUBLE_EQ(m.steps, 5.5);
  EXPECT_DOUBLE_EQ(m.tokens_in, 2000.0);
  EXPECT_DOUBLE_EQ(m.tokens_out, 20.5);
  EXPECT_DOUBLE_EQ(m.cost_usd, 1.0);
}

TEST(Report, ThreeTaskFixtureFromFile) {
  TempDir dir;
  // Means by hand: latency (12.5+30+47.5)/3 = 30.00, calls (3+6+9)/3 = 6.00,
  // tokens_in (1000+2000+6000)/3 = 3000.0, tokens_out (10+20+33)/3 = 21.0,
  // cost (0.01+0.02+0.06)/3 = 0.030000.
  write_file(dir / "tasks.jsonl",
             R"({"task_id":"t1","condition":"no-fault","client_latency_s":12.5,"llm_calls":3,"tokens_in":1000,"tokens_out":10,"cost_usd":0.01}
{"task_id":"t2","condition":"no-fault","client_latency_s":30,"llm_calls":6,"tokens_in":2000,"tokens_out":20,"cost_usd":0.02,"steps":8,"steps_source":"harness"}

{"task_id":"t3","condition":"no-fault","client_latency_s":47.5,"llm_calls":9,"tokens_in":6000,"tokens_out":33,"cost_usd":0.06}
)");
  const auto tasks = read_tasks_jsonl(dir / "tasks.jsonl");
  ASSERT_EQ(tasks.size(), 3u);
  EXPECT_EQ(tasks[0].steps, 3u);
  EXPECT_EQ(tasks[1].steps, 8u);
  const auto r = render_report(tasks);
  const auto ls = lines(r.text);
  ASSERT_EQ(ls.size(), 5u) << r.text;  // header, 3 rows, mean
  EXPECT_EQ(ls[4].rfind("mean", 0), 0u);
  for (const char* cell : {" 30.00 ", " 6.00 ", " 3000.0 ", " 21.0 ", " 0.030000"}) {
    EXPECT_NE(ls[4].find(cell), std::string::npos) << cell << " in " << ls[4];
  }
  EXPECT_DOUBLE_EQ(r.summary["mean"]["client_latency_s"].get<double>(), 30.0);
  EXPECT_DOUBLE_EQ(r.summary["mean"]["steps"].get<double>(), (3.0 + 8.0 + 9.0) / 3.0);
  EXPECT_NEAR(r.summary["mean"]["cost_usd"].get<double>(), 0.03, 1e-15);
  EXPECT_EQ(r.summary["tasks"], 3);
}

TEST(Report, GroupsByCondition) {
  const auto r = render_report({task("a", "no-fault", 10, 1, 1, 1, 0), task("b", "server-error", 30, 1, 1, 1, 0),
                                task("c", "server-error", 50, 1, 1, 1, 0)});
  EXPECT_NE(r.text.find("per condition"), std::string::npos);
  EXPECT_DOUBLE_EQ(r.summary["by_condition"]["server-error"]["client_latency_s"].get<double>(), 40.0);
  EXPECT_EQ(r.summary["by_condition"]["server-error"]["tasks"], 2);
}

TEST(Report, BadLineNamesFileAndLine) {
  TempDir dir;
  write_file(dir / "tasks.jsonl", "{\"task_id\":\"a\",\"client_latency_s\":1,\"llm_calls\":1,"
                                  "\"tokens_in\":1,\"tokens_out\":1,\"cost_usd\":0}\n{oops\n");
  try {
    read_tasks_jsonl(dir / "tasks.jsonl");
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("tasks.jsonl:2"), std::string::npos) << e.what();
  }
  EXPECT_THROW(read_tasks_jsonl(dir / "missing.jsonl"), std::runtime_error);
}

}  // namespace
}  // namespace faultline
