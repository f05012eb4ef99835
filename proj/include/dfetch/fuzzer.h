// Copyright 2026 The dfetch Authors.
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

// Fuzzing campaign: random invocations under the monitor, with exploit
// attempts against every parameter seen fetched more than once.

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dfetch/monitor.h"
#include "dfetch/targets.h"
#include "dfetch/trigger.h"

namespace dfetch {

struct ExploitRecord {
  std::uint64_t iteration = 0;
  Method method = Method::CacheTrigger;
  MutationKind strategy = MutationKind::SetZero;
  int trigger_fetch = 1;
  Verdict verdict = Verdict::Benign;
  bool triggered = false;
};

struct CandidateEntry {
  std::string target;
  int param = 0;
  // fetch count -> number of invocations that showed it
  std::map<int, std::uint64_t> observed_fetch_counts;
  std::uint64_t first_seen = 0;
  std::vector<ExploitRecord> exploits;
  std::string label;

  bool corrupted() const;
  // Most frequently observed count; ties go to the smaller one.
  int typical_fetch_count() const;
};

struct CampaignConfig {
  std::uint64_t budget = 1000;
  std::uint64_t seed = 0;
  // Once candidates exist, every n-th iteration exploits one of them.
  std::uint64_t exploit_every = 4;
  Method method = Method::CacheTrigger;
  Tick probe_period = 0;
  int close_after_misses = 2;
  // Iterations run in batches of this size, each on its own backend.
  int workers = 1;
};

struct CampaignReport {
  std::uint64_t budget = 0;
  std::uint64_t seed = 0;
  std::map<std::string, std::uint64_t> invocations;
  std::map<std::string, std::uint64_t> rejected;
  std::vector<CandidateEntry> candidates;
  // Invocations that threw; logged and skipped.
  std::uint64_t faults = 0;
  std::vector<std::string> fault_messages;

  const CandidateEntry* find(std::string_view target, int param = -1) const;
};

// Category for a candidate: ExploitableBug when any exploit corrupted the
// target, else its annotated category, else "SanityCheck-or-unknown".
std::string candidate_label(const TargetDescriptor& t, bool corrupted);

// Deterministic in (registry, config, backend config). Errors raised by a
// target invocation are counted in `faults` and never abort the campaign.
CampaignReport run_campaign(const BackendFactory& make,
                            const std::vector<const TargetDescriptor*>& registry,
                            const CampaignConfig& cfg);

// Plain-text category table: one row per label with its targets.
std::string table1_text(const CampaignReport& r);

}  // namespace dfetch
