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

// JSON and CSV renderings of every report type. Output carries no wall-clock
// data, so a seeded simulator run reproduces byte for byte.

#pragma once

#include <cstdint>
#include <nlohmann/json.hpp>
#include <string>
#include <string_view>
#include <vector>

#include "dfetch/dropit.h"
#include "dfetch/fuzzer.h"
#include "dfetch/monitor.h"
#include "dfetch/probe.h"
#include "dfetch/schedule.h"
#include "dfetch/trigger.h"

namespace dfetch {

inline constexpr int kSchemaVersion = 1;

// Hex FNV-1a of a canonical config rendering.
std::string config_hash(std::string_view canonical_config);

// {"schema_version", "kind", "seed", "config_hash"}; callers add fields.
nlohmann::json envelope(std::string_view kind, std::uint64_t seed,
                        std::string_view hash);

// First line of every CSV, ahead of the column header.
std::string csv_preamble(std::uint64_t seed, std::string_view hash);

nlohmann::json to_json(const CalibrationProfile& p);
nlohmann::json to_json(const InvokeResult& r);
nlohmann::json to_json(const MonitorReport& r);
nlohmann::json to_json(const ExploitOutcome& o);
nlohmann::json to_json(const CampaignReport& r);
nlohmann::json to_json(const TxStats& s);
nlohmann::json to_json(const TxResult& r);
nlohmann::json to_json(const InterleavingRun& r);
nlohmann::json to_json(const TargetDescriptor& t, const ArgRecord& a);

struct TrialRow {
  Method method = Method::CacheTrigger;
  MutationKind strategy = MutationKind::Increment;
  int n_checks = 0;
  Verdict verdict = Verdict::Benign;
  std::optional<Tick> flip_vtime;
};

std::string trials_csv_header();
std::string to_csv(const TrialRow& r);

std::string bench_csv(const std::vector<BenchRow>& rows);

}  // namespace dfetch
