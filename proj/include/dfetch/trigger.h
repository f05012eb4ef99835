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

// Exploitation: change a parameter between two fetches and see whether the
// target's oracle reports corruption. Three ways to time the change:
//   CacheTrigger   probe the line, write right after the n-th fetch is seen
//   BusyWait       write after a fixed delay from invocation start
//   ValueFlipping  alternate valid and mutated values every tick

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "dfetch/monitor.h"
#include "dfetch/schedule.h"
#include "dfetch/targets.h"

namespace dfetch {

enum class MutationKind : std::uint8_t { SetZero, FlipLSB, Increment, RandomValue };

struct MutationStrategy {
  MutationKind kind = MutationKind::Increment;
  std::uint64_t seed = 0;  // RandomValue only
};

std::string_view to_string(MutationKind k);
MutationKind parse_mutation(std::string_view s);

struct Mutated {
  std::vector<std::byte> bytes;
  // The mutation left the value unchanged, e.g. zeroing a zero.
  bool noop = false;
};

std::int64_t mutate_int(std::int64_t v, MutationStrategy s, bool* noop = nullptr);
// Bytewise; Increment has no bytewise meaning and is a usage error.
std::vector<std::byte> mutate_bytes(std::span<const std::byte> in,
                                    MutationStrategy s, bool* noop = nullptr);
// Mutates an argument's current contents: the 8-byte value of an IntScalar,
// otherwise the buffer's first line.
Mutated mutate_param(const Argument& a, std::span<const std::byte> current,
                     MutationStrategy s);
std::vector<MutationKind> applicable_mutations(ParamKind k);

enum class Method : std::uint8_t { CacheTrigger, BusyWait, ValueFlipping };

std::string_view to_string(Method m);
Method parse_method(std::string_view s);

struct ExploitRequest {
  int param = 0;
  MutationStrategy strategy;
  Method method = Method::CacheTrigger;
  // CacheTrigger writes after this fetch (1-based) is first seen.
  int trigger_fetch = 1;
  Tick probe_period = 0;
  int close_after_misses = 2;
  // BusyWait sweeps its delay over trials using this index.
  std::uint64_t trial_index = 0;
  double cycles_per_tick = kDefaultCyclesPerTick;
};

struct ExploitOutcome {
  InvokeResult result;
  bool triggered = false;  // the adversary wrote at least once
  std::optional<Tick> flip_time;  // first write, relative to invocation start
  bool mutation_noop = false;
  Tick busy_delay = 0;

  bool success() const { return result.verdict == Verdict::Corrupted; }
};

// Adversary program each method runs for a given request. `original` and
// `mutated` are the bytes written at the parameter's start.
AdversaryProgram method_program(Method m, int param,
                                const std::vector<std::byte>& original,
                                const std::vector<std::byte>& mutated,
                                int trigger_fetch, Tick busy_delay);

// Schedule-mode adversary: `writes` alternating writes of the mutated and
// original leading bytes of `param`, mutated first.
AdversaryProgram flip_program(ProbeBackend& backend, const ArgRecord& args,
                              int param, MutationStrategy s, int writes = 1);

// BusyWait delay for a trial: (trial_index mod K) probe cycles, where K
// covers the nominal time of the fetch after `trigger_fetch` plus one.
Tick busy_wait_delay(const TargetDescriptor& t, const ArgRecord& args,
                     const ExploitRequest& req, double fr_cycle_cost,
                     const TargetOptions& opts = {});

// Runs an adversary program against one invocation. On the simulator it is a
// timeline process; on hardware, a thread.
ExploitOutcome run_adversary(ProbeBackend& backend, const TargetDescriptor& t,
                             const ArgRecord& args,
                             const AdversaryProgram& program,
                             const ExploitRequest& req, std::uint64_t seed,
                             const TargetOptions& opts = {});

ExploitOutcome exploit_invoke(ProbeBackend& backend, const TargetDescriptor& t,
                              const ArgRecord& args, const ExploitRequest& req,
                              std::uint64_t seed,
                              const TargetOptions& opts = {});

struct RateResult {
  int trials = 0;
  int successes = 0;
  double rate() const {
    return trials ? static_cast<double>(successes) / trials : 0.0;
  }
};

// Fresh backend and in-bounds arguments per trial.
// `on_trial`, when set, sees every trial's outcome in order.
RateResult success_rate(
    const BackendFactory& make, const TargetDescriptor& t,
    const ExploitRequest& req, int trials, std::uint64_t seed,
    const TargetOptions& opts = {},
    const std::function<void(int, const ExploitOutcome&)>& on_trial = {});

// Success rate against multi_check_<n>, Increment mutation, CacheTrigger on
// the n-th fetch.
RateResult multi_check_success(const BackendFactory& make, int n, Method m,
                               int trials, std::uint64_t seed);

}  // namespace dfetch
