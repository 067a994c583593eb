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

#include "faultline/match_policy.h"

#include <algorithm>

#include "faultline/url.h"

namespace faultline {

namespace {

std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

}  // namespace

UrlMatcher::UrlMatcher(MatchKind kind, std::string pattern)
    : kind_(kind), pattern_(std::move(pattern)) {
  if (kind_ == MatchKind::kRegex) {
    compiled_ = std::make_shared<const std::regex>(pattern_, std::regex::ECMAScript |
                                                                 std::regex::optimize);
  }
}

UrlMatcher UrlMatcher::exact(std::string_view url) {
  return UrlMatcher(MatchKind::kExact, normalize_url(url));
}

UrlMatcher UrlMatcher::regex(std::string_view pattern) {
  return UrlMatcher(MatchKind::kRegex, std::string(pattern));
}

bool UrlMatcher::matches(std::string_view normalized_url) const {
  if (kind_ == MatchKind::kExact) return normalized_url == pattern_;
  return std::regex_search(normalized_url.begin(), normalized_url.end(), *compiled_);
}

bool match_url(const UrlMatcher& matcher, std::string_view normalized_url) {
  return matcher.matches(normalized_url);
}

std::string_view to_string(FrequencyKind kind) {
  switch (kind) {
    case FrequencyKind::kAlways: return "always";
    case FrequencyKind::kKth: return "kth";
    case FrequencyKind::kFirstK: return "first_k";
    case FrequencyKind::kEveryKth: return "every_kth";
    case FrequencyKind::kRandomN: return "random_n";
  }
  return "unknown";
}

double FrequencyPolicy::acceptance_probability() const {
  if (horizon == 0) return 1.0;
  return std::min(1.0, static_cast<double>(n) / static_cast<double>(horizon));
}

std::uint64_t derive_rule_seed(std::uint64_t global_seed, std::string_view rule_id) {
  return splitmix64(global_seed ^ fnv1a64(rule_id));
}

OccurrenceState::OccurrenceState(std::string rule_id, std::uint64_t global_seed)
    : rule_id_(std::move(rule_id)),
      seed_(derive_rule_seed(global_seed, rule_id_)),
      rng_(seed_) {}

bool OccurrenceState::should_inject(const FrequencyPolicy& policy) {
  ++count_;
  bool fire = false;
  switch (policy.kind) {
    case FrequencyKind::kAlways:
      fire = true;
      break;
    case FrequencyKind::kKth:
      fire = count_ == policy.k;
      break;
    case FrequencyKind::kFirstK:
      fire = count_ <= policy.k;
      break;
    case FrequencyKind::kEveryKth:
      fire = count_ % policy.k == 0;
      break;
    case FrequencyKind::kRandomN: {
      const double u = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
      fire = fired_ < policy.n && u < policy.acceptance_probability();
      break;
    }
  }
  if (fire) ++fired_;
  return fire;
}

void OccurrenceState::reset() {
  count_ = 0;
  fired_ = 0;
  rng_.seed(seed_);
}

bool should_inject(OccurrenceState& state, const FrequencyPolicy& policy) {
  return state.should_inject(policy);
}

RuleEngine::RuleEngine(std::vector<RuleTrigger> triggers, std::uint64_t seed) {
  slots_.reserve(triggers.size());
  for (auto& t : triggers) {
    std::string id = t.rule_id;
    slots_.push_back(Slot{std::move(t), std::make_unique<std::mutex>(),
                          OccurrenceState(std::move(id), seed)});
  }
}

std::vector<std::size_t> RuleEngine::evaluate(std::string_view normalized_url) {
  std::vector<std::size_t> fired;
  for (std::size_t i = 0; i < slots_.size(); ++i) {
    auto& slot = slots_[i];
    if (!slot.trigger.matcher.matches(normalized_url)) continue;
    std::lock_guard<std::mutex> lock(*slot.mu);
    if (slot.state.should_inject(slot.trigger.policy)) fired.push_back(i);
  }
  return fired;
}

void RuleEngine::reset_task() {
  for (auto& slot : slots_) {
    std::lock_guard<std::mutex> lock(*slot.mu);
    slot.state.reset();
  }
}

std::vector<RuleEngine::Snapshot> RuleEngine::snapshot() const {
  std::vector<Snapshot> out;
  out.reserve(slots_.size());
  for (const auto& slot : slots_) {
    std::lock_guard<std::mutex> lock(*slot.mu);
    out.push_back({slot.state.rule_id(), slot.state.count(), slot.state.fired()});
  }
  return out;
}

}  // namespace faultline
