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

// URL matching and occurrence-based firing policies.
//
// Every rule owns an OccurrenceState. Each matched flow calls
// should_inject() exactly once; the call first increments the occurrence
// count and then decides:
//
//   always        fire on every occurrence
//   kth(k)        fire only on occurrence k
//   first_k(k)    fire on occurrences 1..k
//   every_kth(k)  fire on occurrences k, 2k, 3k, ...
//   random_n(n)   one uniform draw u per occurrence from the rule's seeded
//                 generator; fire when u < p and fewer than n fires so far,
//                 with p = min(1, n / horizon)
//
// The per-rule generator is std::mt19937_64 seeded with
// splitmix64(global_seed ^ fnv1a64(rule_id)); u = (next() >> 11) * 2^-53.

#ifndef FAULTLINE_MATCH_POLICY_H_
#define FAULTLINE_MATCH_POLICY_H_

#include <cstdint>
#include <memory>
#include <mutex>
#include <random>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

namespace faultline {

enum class MatchKind { kExact, kRegex };

class UrlMatcher {
 public:
  // An exact pattern is normalized once so it compares against normalized
  // request URLs.
  static UrlMatcher exact(std::string_view url);
  // Throws std::regex_error when the pattern does not compile.
  static UrlMatcher regex(std::string_view pattern);
  static UrlMatcher match_all() { return regex(".*"); }

  // Exact: full-string equality. Regex: unanchored search.
  bool matches(std::string_view normalized_url) const;

  MatchKind kind() const { return kind_; }
  const std::string& pattern() const { return pattern_; }

  bool operator==(const UrlMatcher& other) const {
    return kind_ == other.kind_ && pattern_ == other.pattern_;
  }

 private:
  UrlMatcher(MatchKind kind, std::string pattern);

  MatchKind kind_;
  std::string pattern_;
  std::shared_ptr<const std::regex> compiled_;
};

bool match_url(const UrlMatcher& matcher, std::string_view normalized_url);

enum class FrequencyKind { kAlways, kKth, kFirstK, kEveryKth, kRandomN };

std::string_view to_string(FrequencyKind kind);

struct FrequencyPolicy {
  static constexpr std::uint32_t kDefaultHorizon = 10;

  FrequencyKind kind = FrequencyKind::kAlways;
  std::uint32_t k = 1;
  std::uint32_t n = 1;
  std::uint32_t horizon = kDefaultHorizon;

  static FrequencyPolicy always() { return {}; }
  static FrequencyPolicy kth(std::uint32_t k) { return {FrequencyKind::kKth, k}; }
  static FrequencyPolicy first_k(std::uint32_t k) { return {FrequencyKind::kFirstK, k}; }
  static FrequencyPolicy every_kth(std::uint32_t k) { return {FrequencyKind::kEveryKth, k}; }
  static FrequencyPolicy random_n(std::uint32_t n, std::uint32_t horizon = kDefaultHorizon) {
    return {FrequencyKind::kRandomN, 1, n, horizon};
  }

  double acceptance_probability() const;
  bool operator==(const FrequencyPolicy&) const = default;
};

std::uint64_t derive_rule_seed(std::uint64_t global_seed, std::string_view rule_id);

// Counter and generator state behind one rule. Not synchronized; RuleEngine
// serializes access per rule.
class OccurrenceState {
 public:
  OccurrenceState(std::string rule_id, std::uint64_t global_seed);

  bool should_inject(const FrequencyPolicy& policy);
  void reset();

  const std::string& rule_id() const { return rule_id_; }
  std::uint64_t count() const { return count_; }
  std::uint64_t fired() const { return fired_; }

 private:
  std::string rule_id_;
  std::uint64_t seed_;
  std::uint64_t count_ = 0;
  std::uint64_t fired_ = 0;
  std::mt19937_64 rng_;
};

bool should_inject(OccurrenceState& state, const FrequencyPolicy& policy);

struct RuleTrigger {
  std::string rule_id;
  UrlMatcher matcher;
  FrequencyPolicy policy;
};

// Evaluates every rule against a URL and reports the ones that fire.
// Thread-safe: each rule's state is guarded by its own mutex.
class RuleEngine {
 public:
  struct Snapshot {
    std::string rule_id;
    std::uint64_t count;
    std::uint64_t fired;
  };

  RuleEngine(std::vector<RuleTrigger> triggers, std::uint64_t seed);

  // Indices of fired rules in configuration order.
  std::vector<std::size_t> evaluate(std::string_view normalized_url);
  void reset_task();
  std::vector<Snapshot> snapshot() const;
  std::size_t size() const { return slots_.size(); }

 private:
  struct Slot {
    RuleTrigger trigger;
    std::unique_ptr<std::mutex> mu;
    OccurrenceState state;
  };

  std::vector<Slot> slots_;
};

}  // namespace faultline

#endif  // FAULTLINE_MATCH_POLICY_H_
