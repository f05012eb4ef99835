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

// The only way a target touches shared memory. Each backend supplies an
// implementation, which is what lets one target body run on the simulator,
// under a replayed schedule, inside a transaction and on real hardware.

#pragma once

#include <cstdint>
#include <span>

#include "dfetch/args.h"
#include "dfetch/sim.h"

namespace dfetch {

class UserMemory {
 public:
  virtual ~UserMemory() = default;

  // Copies bytes [offset, offset + out.size()) of the argument's buffer,
  // touching each covered line in order. Returns the time of the first
  // line access relative to invocation start.
  virtual Tick fetch(const Argument& a, std::size_t offset,
                     std::span<std::byte> out) = 0;
  virtual void store(const Argument& a, std::size_t offset,
                     std::span<const std::byte> in) = 0;
  // Local computation that does not touch shared memory.
  virtual void work(Tick ticks) = 0;
  // Time since invocation start.
  virtual Tick now() const = 0;
  virtual std::uint64_t version(LineId line) const = 0;
  virtual void lock_line(LineId line) = 0;
  virtual void unlock_line(LineId line) = 0;

  void work_until(Tick t) {
    if (t > now()) work(t - now());
  }
  std::int64_t fetch_i64(const Argument& a, std::size_t offset = 0);
  void store_i64(const Argument& a, std::size_t offset, std::int64_t v);
};

// Splits [offset, offset + len) into per-line pieces.
struct LineChunk {
  LineId line;
  std::size_t line_offset;  // within the line
  std::size_t buf_offset;   // within the caller's span
  std::size_t len;
};
std::vector<LineChunk> split_lines(const SharedBuffer& buf, std::size_t offset,
                                   std::size_t len);

// Timed memory on the simulator. Every line access first lets the timeline
// run all adversary actions ordered before it.
class SimMemory final : public UserMemory {
 public:
  SimMemory(sim::Timeline& tl, Actor actor, Tick start)
      : tl_(tl), actor_(actor), start_(start), t_(start) {}

  Tick fetch(const Argument& a, std::size_t offset,
             std::span<std::byte> out) override;
  void store(const Argument& a, std::size_t offset,
             std::span<const std::byte> in) override;
  void work(Tick ticks) override { t_ += ticks; }
  Tick now() const override { return t_ - start_; }
  std::uint64_t version(LineId line) const override {
    return tl_.machine().version(line);
  }
  void lock_line(LineId line) override { tl_.machine().lock(line); }
  void unlock_line(LineId line) override { tl_.machine().unlock(line); }

  // Absolute virtual time of the target's local clock.
  Tick clock() const { return t_; }

 private:
  sim::Timeline& tl_;
  Actor actor_;
  Tick start_;
  Tick t_;
};

// Host memory behind HwProbe. One tick is `cycles_per_tick` cycles; work()
// spins on the cycle counter.
class HwMemory final : public UserMemory {
 public:
  HwMemory(HwProbe& probe, double cycles_per_tick);

  Tick fetch(const Argument& a, std::size_t offset,
             std::span<std::byte> out) override;
  void store(const Argument& a, std::size_t offset,
             std::span<const std::byte> in) override;
  void work(Tick ticks) override;
  Tick now() const override;
  std::uint64_t version(LineId line) const override {
    return probe_.version(line);
  }
  void lock_line(LineId line) override { probe_.lock_line(line); }
  void unlock_line(LineId line) override { probe_.unlock_line(line); }

 private:
  HwProbe& probe_;
  double cycles_per_tick_;
  std::uint64_t start_;
};

// Ticks of work per hardware cycle budget. 100 cycles per tick puts the
// simulator's gaps at realistic kernel-path distances.
inline constexpr double kDefaultCyclesPerTick = 100.0;

}  // namespace dfetch
