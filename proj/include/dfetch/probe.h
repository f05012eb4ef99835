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

// Flush+Reload primitives behind a backend contract. Two implementations
// exist: SimProbe drives the deterministic virtual cache in sim.h, HwProbe
// uses clflush and the cycle counter on the host CPU.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "dfetch/common.h"
#include "dfetch/config.h"

namespace dfetch {

namespace sim {
class Machine;
}

// A page-granular allocation shared between the host and a black box. The
// allocation is rounded up to whole pages, so no two buffers ever share a
// cache line; line_ids cover the requested size only.
struct SharedBuffer {
  LineId base;
  std::size_t size_bytes = 0;
  std::size_t alloc_bytes = 0;
  std::vector<LineId> line_ids;

  std::size_t lines_allocated() const { return alloc_bytes / kLineSize; }
  // Line holding byte `offset`; offsets up to alloc_bytes are addressable.
  LineId line_at(std::size_t offset) const;
};

enum class Classification : std::uint8_t { Hit, Miss };

struct ProbeSample {
  Tick timestamp = 0;
  Tick latency = 0;
  Classification classification = Classification::Miss;
};

using Histogram = std::map<Tick, std::uint64_t>;

struct CalibrationProfile {
  Tick threshold = 0;
  Histogram hit_latencies;
  Histogram miss_latencies;
  double fr_cycle_cost = 0.0;
  // Fraction of calibration samples misclassified by `threshold`.
  double misclassification = 0.0;

  Classification classify(Tick latency) const {
    return latency < threshold ? Classification::Hit : Classification::Miss;
  }
};

// Midpoint between the 99th-percentile hit and 1st-percentile miss latency,
// falling back to the empirical error minimizer when the tails overlap.
// Throws a calibration error when more than 10% of samples stay
// misclassified.
CalibrationProfile build_profile(const std::vector<Tick>& hits,
                                 const std::vector<Tick>& misses,
                                 double fr_cycle_cost);

class ProbeBackend {
 public:
  virtual ~ProbeBackend() = default;

  virtual BackendKind kind() const = 0;
  virtual SharedBuffer allocate_shared(std::size_t size_bytes) = 0;
  virtual void flush(LineId line) = 0;
  virtual ProbeSample timed_reload(LineId line) = 0;
  virtual CalibrationProfile calibrate(int rounds) = 0;

  // Host-side view of a buffer's bytes, bypassing instrumentation. Only for
  // setting up arguments before an invocation and for inspection after it.
  virtual std::span<std::byte> bytes(const SharedBuffer& buf) = 0;

  const std::optional<CalibrationProfile>& profile() const { return profile_; }
  void set_profile(CalibrationProfile p) { profile_ = std::move(p); }

 protected:
  const CalibrationProfile& require_profile() const;

  std::optional<CalibrationProfile> profile_;
};

class SimProbe final : public ProbeBackend {
 public:
  explicit SimProbe(sim::Machine& machine);
  // Owns a fresh machine built from `cfg`.
  explicit SimProbe(const SimConfig& cfg);
  ~SimProbe() override;

  BackendKind kind() const override { return BackendKind::Sim; }
  SharedBuffer allocate_shared(std::size_t size_bytes) override;
  void flush(LineId line) override;
  ProbeSample timed_reload(LineId line) override;
  // Runs on a scratch machine with the same constants, so calibration never
  // shows up in this machine's event log. Sets and returns the profile.
  CalibrationProfile calibrate(int rounds) override;
  std::span<std::byte> bytes(const SharedBuffer& buf) override;

  sim::Machine& machine() { return machine_; }

 private:
  std::unique_ptr<sim::Machine> owned_;
  sim::Machine& machine_;
};

// Exact calibration result the sim backend produces for `cfg`; lets callers
// skip the scratch run when building many short-lived sim instances.
CalibrationProfile sim_profile(const SimConfig& cfg, int rounds = 16);

// Host CPU backend. Construction throws a capability error when the flush
// instruction or a usable cycle counter is missing.
class HwProbe final : public ProbeBackend {
 public:
  HwProbe();
  ~HwProbe() override;

  static bool supported();

  BackendKind kind() const override { return BackendKind::Hardware; }
  SharedBuffer allocate_shared(std::size_t size_bytes) override;
  void flush(LineId line) override;
  ProbeSample timed_reload(LineId line) override;
  CalibrationProfile calibrate(int rounds) override;
  std::span<std::byte> bytes(const SharedBuffer& buf) override;

  std::byte* address(LineId line) const;
  std::uint64_t version(LineId line) const;
  // Seqlock-style versioned store used by attacker threads and the
  // emulated transaction commit.
  void versioned_store(LineId line, std::size_t offset,
                       std::span<const std::byte> in);
  void versioned_load(LineId line, std::size_t offset,
                      std::span<std::byte> out) const;
  // Cooperative line locks; attacker threads wait while a line is held.
  void lock_line(LineId line);
  void unlock_line(LineId line);
  bool line_locked(LineId line) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Cycle counter access shared by the hardware monitor, trigger and bench.
std::uint64_t read_cycles();

// Fresh, calibrated backend per call. Experiments that need independent
// trials take one of these.
using BackendFactory = std::function<std::unique_ptr<ProbeBackend>()>;

// Each call builds a new simulator with the event log off.
BackendFactory sim_factory(const SimConfig& cfg);
// Each call builds a new HwProbe carrying `profile`.
BackendFactory hw_factory(const CalibrationProfile& profile);

}  // namespace dfetch
