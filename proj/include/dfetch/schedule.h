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

// Adversary programs and schedule mode.
//
// In schedule mode there is no clock: the target's line accesses and the
// adversary's steps are merged in an explicit order, and every such order
// can be enumerated or replayed.

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "dfetch/args.h"
#include "dfetch/config.h"
#include "dfetch/targets.h"

namespace dfetch {

struct AdvStep {
  enum class Op : std::uint8_t { Wait, Write, FlipOnHit };
  Op op = Op::Wait;
  Tick ticks = 0;  // Wait
  int param = 0;   // Write, FlipOnHit
  std::size_t offset = 0;
  std::vector<std::byte> bytes;
  int nth_fetch = 1;  // FlipOnHit: act on this fetch's first hit

  static AdvStep wait(Tick t);
  static AdvStep write(int param, std::vector<std::byte> bytes,
                       std::size_t offset = 0);
  static AdvStep flip_on_hit(int param, int nth, std::vector<std::byte> bytes,
                             std::size_t offset = 0);
};

// In timed mode `repeat` restarts the program until the target returns.
// Schedule mode runs the steps once.
struct AdversaryProgram {
  std::vector<AdvStep> steps;
  bool repeat = false;

  // Usage error for unknown parameters, empty writes, or a repeating program
  // that would not advance time.
  void validate(const ArgRecord& args) const;
};

enum class ScheduleActor : std::uint8_t { Target, Trigger };

// Interleaving of target line accesses and adversary steps. Each entry names
// the actor and that actor's own step index.
struct Schedule {
  std::vector<std::pair<ScheduleActor, int>> order;

  std::string to_json() const;
  // Throws a usage error on malformed input.
  static Schedule from_json(const std::string& text);
  // Usage error unless both actors' steps appear in order, exactly once.
  void check(int target_steps, int adversary_steps) const;
};

// Function run under a schedule. Usually a target's invoke, possibly wrapped
// by a protection scheme.
using ScheduledBody =
    std::function<InvokeResult(UserMemory&, const ArgRecord&)>;
// Builds the invocation's arguments on a fresh backend.
using ArgFactory = std::function<ArgRecord(ProbeBackend&)>;

struct ScheduleOutcome {
  Schedule schedule;
  InvokeResult result;
};

struct InterleavingRun {
  std::vector<ScheduleOutcome> outcomes;
  // True when the schedule space exceeded the budget and was sampled.
  bool sampled = false;
  int target_steps = 0;
  int adversary_steps = 0;
  // C(target_steps + adversary_steps, adversary_steps), as a double since it
  // can exceed 64 bits.
  double schedule_count = 0.0;
};

double binomial(int n, int k);

// Counts the line accesses the body makes with no adversary present.
int count_target_steps(const SimConfig& cfg, const ScheduledBody& body,
                       const ArgFactory& make_args);

// Runs the body once per schedule on a fresh machine. Enumerates every
// schedule when there are at most `max_schedules`, otherwise draws that many
// uniformly at random with `seed`.
InterleavingRun run_interleavings(const SimConfig& cfg,
                                  const ScheduledBody& body,
                                  const ArgFactory& make_args,
                                  const AdversaryProgram& adversary,
                                  std::size_t max_schedules,
                                  std::uint64_t seed);

InvokeResult replay_schedule(const SimConfig& cfg, const ScheduledBody& body,
                             const ArgFactory& make_args,
                             const AdversaryProgram& adversary,
                             const Schedule& schedule);

}  // namespace dfetch
