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

#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "dfetch/common.h"

namespace dfetch {

// Simulator constants. These are configuration, not measurements: every sim
// experiment is parameterized over them.
struct SimConfig {
  Tick hit_latency = 70;
  Tick miss_latency = 200;
  Tick flush_ticks = 1;
  Tick reload_ticks = 2;
  // Cost of one instrumented access on the target's timeline.
  Tick access_ticks = 1;
  // Delay between a trigger's hit sample and its write landing.
  Tick write_ticks = 1;
  // Upper bound of the uniform pause added to every probe cycle. 0 = off.
  Tick noise_ticks = 0;
  bool record_events = true;

  Tick fr_cycle_cost() const { return flush_ticks + reload_ticks; }
};

// Flat `key = value` configuration. Lines starting with '#' are comments.
using KeyValues = std::map<std::string, std::string>;

KeyValues parse_key_values(const std::string& text);
KeyValues load_key_values(const std::string& path);

// Applies recognized sim.* keys (hit_latency, miss_latency, ...). Unknown
// keys are left for the caller.
void apply_sim_config(SimConfig& cfg, const KeyValues& kv);

// Canonical `k=v;` rendering, stable across runs.
std::string canonical(const KeyValues& kv);
std::string canonical(const SimConfig& cfg);

}  // namespace dfetch
