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

// Black-box target corpus. Each target reads its parameters only through
// UserMemory and reports a verdict from its own internal state, so the
// tooling never needs to look inside.

#pragma once

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dfetch/args.h"
#include "dfetch/memory.h"
#include "dfetch/sim.h"

namespace dfetch {

enum class Annotation : std::uint8_t {
  Exploitable,
  NonExploitableDoubleFetch,
  SingleFetch,
};

enum class Category : std::uint8_t {
  Filenames,
  SharedInOut,
  Strings,
  SanityCheck,
  StructureElements,
  ExploitableBug,
  None,
};

std::string_view to_string(Annotation a);
std::string_view to_string(Category c);

struct InvokeResult {
  Verdict verdict = Verdict::Benign;
  std::int64_t ret = 0;
  // The target refused its input after a check.
  bool rejected = false;
  // An in-range but different case was dispatched.
  bool wrong_case = false;
  // Copy attempts made by targets that retry.
  int attempts = 1;
};

struct TargetOptions {
  // Replaces the target's default distance between its double fetches.
  std::optional<Tick> gap;
};

// One line access in an unmodified run. `gap` is the distance from the
// previous step, or from invocation start for the first.
struct ScriptStep {
  int param = 0;
  std::size_t line = 0;
  sim::AccessKind kind = sim::AccessKind::Read;
  Tick gap = 0;
};

using InvokeFn = std::function<InvokeResult(UserMemory&, const ArgRecord&,
                                            const TargetOptions&)>;
using ScriptFn = std::function<std::vector<ScriptStep>(const ArgRecord&,
                                                       const TargetOptions&)>;

struct TargetDescriptor {
  std::string id;
  std::string summary;
  std::vector<ParamSpec> params;
  InvokeFn invoke;
  ScriptFn access_script;
  Annotation annotation = Annotation::SingleFetch;
  Category category = Category::None;
  // Parameter that carries the double fetch, -1 if none.
  int bug_param = -1;
  bool in_corpus = true;
  Tick default_gap = 0;
};

const std::vector<TargetDescriptor>& registry();
// Usage error if the id is unknown.
const TargetDescriptor& find_target(std::string_view id);
std::vector<const TargetDescriptor*> corpus();

// Times of the nominal accesses to `param`, relative to invocation start.
std::vector<Tick> access_times(const TargetDescriptor& t, const ArgRecord& a,
                               int param, const TargetOptions& opts = {});

// Runs the target on the simulator with no adversary present.
InvokeResult invoke_plain(sim::Machine& m, const TargetDescriptor& t,
                          const ArgRecord& a, const TargetOptions& opts = {});

// Distance between two fetches expressed as a multiple of the probe
// cycle cost and rounded to whole ticks.
Tick gap_ticks(double fr_cycles, double fr_cycle_cost);

// Default dedupe_analog gap: 10000/298 probe cycles at the configured cost.
Tick dedupe_gap(const SimConfig& cfg);

}  // namespace dfetch
