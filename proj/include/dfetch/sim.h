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

// Deterministic cache and timeline simulator.
//
// The Machine owns line-granular memory with a one-bit cache state and a
// version counter per line. Nothing in it moves the clock on its own: the
// Timeline decides who runs when and sets now() before each action.

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dfetch/common.h"
#include "dfetch/config.h"
#include "dfetch/probe.h"

namespace dfetch::sim {

enum class AccessKind : std::uint8_t { Read, Write, Flush };

std::string_view to_string(AccessKind k);

struct AccessEvent {
  Tick vtime = 0;
  std::uint64_t seq = 0;
  Actor actor = Actor::Target;
  AccessKind kind = AccessKind::Read;
  LineId line;
};

class Machine {
 public:
  explicit Machine(SimConfig cfg = {});

  const SimConfig& config() const { return cfg_; }

  SharedBuffer allocate(std::size_t size_bytes);
  bool registered(LineId line) const { return line.value < lines_.size(); }
  std::size_t line_count() const { return lines_.size(); }

  // Raw bytes of one line or of a whole allocation. No event is recorded.
  std::span<std::byte> line_bytes(LineId line);
  std::span<std::byte> bytes(const SharedBuffer& buf);

  // Instrumented operations, stamped with now(). A Read or Write brings the
  // line into the cache; a Write also bumps its version. Returns the
  // latency a timed load would have observed.
  Tick access(LineId line, AccessKind kind, Actor actor);
  void flush(LineId line, Actor actor);

  // Read followed by advancing the clock by access_ticks.
  Tick record_access(LineId line, AccessKind kind, Actor actor);

  bool cached(LineId line) const;
  std::uint64_t version(LineId line) const;

  // Cooperative line locks used by the lock-based fallback.
  void lock(LineId line);
  void unlock(LineId line);
  bool locked(LineId line) const;

  Tick now() const { return now_; }
  // Throws a state error when `t` is earlier than now().
  void set_now(Tick t);
  void advance(Tick dt) { set_now(now_ + dt); }

  const std::vector<AccessEvent>& log() const { return log_; }
  std::uint64_t events_recorded() const { return seq_; }

  // `vtime,actor,kind,line` rows with a header line.
  std::string log_csv() const;

 private:
  struct LineState {
    bool cached = false;
    bool locked = false;
    std::uint64_t version = 0;
  };

  void check(LineId line) const;
  void record(LineId line, AccessKind kind, Actor actor);

  SimConfig cfg_;
  std::vector<std::byte> data_;
  std::vector<LineState> lines_;
  std::vector<AccessEvent> log_;
  std::uint64_t seq_ = 0;
  Tick now_ = 0;
};

// One actor on the shared timeline. A process exposes the time of its next
// action; the timeline calls step() with the machine clock set to that time.
class Process {
 public:
  explicit Process(std::uint32_t id) : id_(id) {}
  virtual ~Process() = default;

  std::uint32_t id() const { return id_; }
  virtual std::optional<Tick> next_time() const = 0;
  virtual void step(Machine& m) = 0;
  // Called once, with the tick at which the target's invocation returned.
  virtual void on_target_return(Tick) {}

 private:
  std::uint32_t id_;
};

// Orders actions by (tick, key), where key = mix64(seed, process id, tick).
// The key depends only on its inputs, so adding a process never reorders the
// others and the same seed replays the same interleaving.
class Timeline {
 public:
  static constexpr std::uint32_t kTargetId = 0;

  Timeline(Machine& m, std::uint64_t seed) : machine_(m), seed_(seed) {}

  void add(Process* p) { procs_.push_back(p); }
  Machine& machine() { return machine_; }
  std::uint64_t seed() const { return seed_; }

  std::uint64_t key(std::uint32_t proc_id, Tick t) const {
    return mix64(seed_, proc_id, static_cast<std::uint64_t>(t));
  }

  // Runs every pending action ordered before the given process's action at
  // tick t, then leaves the machine clock at t.
  void run_before(Tick t, std::uint32_t proc_id);
  // Tells every process that the target returned at t and drains them.
  // Throws a resource error if they are still active after `limit` ticks.
  void finish(Tick t, Tick limit);

 private:
  bool ordered_before(Tick ta, std::uint32_t a, Tick tb, std::uint32_t b) const;

  Machine& machine_;
  std::uint64_t seed_;
  std::vector<Process*> procs_;
};

}  // namespace dfetch::sim
