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

// Double-fetch detection: probe the lines of each shared parameter while the
// target runs and count separate fetches.

#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "dfetch/memory.h"
#include "dfetch/probe.h"
#include "dfetch/sim.h"
#include "dfetch/targets.h"

namespace dfetch {

// Groups hit samples into fetches. A fetch opens on a hit and closes after
// `close_after_misses` consecutive misses; hits inside an open fetch belong
// to it.
class FetchCounter {
 public:
  explicit FetchCounter(int close_after_misses = 2);

  // Returns true when this sample opens a new fetch.
  bool observe(bool hit, Tick t);

  int count() const { return static_cast<int>(first_hits_.size()); }
  // Timestamp of the first hit of each fetch.
  const std::vector<Tick>& first_hits() const { return first_hits_; }
  const std::vector<Tick>& hits() const { return hits_; }

 private:
  int close_after_;
  bool open_ = false;
  int misses_ = 0;
  std::vector<Tick> first_hits_;
  std::vector<Tick> hits_;
};

struct MonitorConfig {
  // Parameters to watch; empty means every shared parameter.
  std::vector<int> params;
  // Ticks on the simulator, cycles on hardware. 0 picks the calibrated
  // probe cycle cost. Must not be below it.
  Tick probe_period = 0;
  // Sampling stops this long after invocation start. 0 = no limit.
  Tick max_duration = 0;
  int close_after_misses = 2;
  // Watch every line of each buffer instead of only the first.
  bool monitor_all_lines = false;
  // Hardware only: work() ticks to cycles.
  double cycles_per_tick = kDefaultCyclesPerTick;
};

struct ParamReport {
  int param = 0;
  std::vector<Tick> hits;
  std::vector<Tick> fetch_starts;
  int fetch_count = 0;
};

struct MonitorReport {
  std::string target;
  std::vector<ParamReport> per_param;
  InvokeResult result;
  Tick start = 0;
  Tick end = 0;

  const ParamReport* find(int param) const;
};

bool is_double_fetch(const MonitorReport& r, int param);

// Probe loop on the simulator timeline. Samples at start + phase + k*period
// (plus optional noise): timed reload, then flush, both at the boundary.
// After the target returns it takes one last sample and stops.
class SimProbeLoop : public sim::Process {
 public:
  SimProbeLoop(std::uint32_t id, SimProbe& probe, LineId line, Tick first,
               Tick period, Tick noise, std::uint64_t seed, Tick deadline,
               int close_after_misses);

  std::optional<Tick> next_time() const override;
  void step(sim::Machine& m) override;
  void on_target_return(Tick t) override { returned_at_ = t; }

  const FetchCounter& counter() const { return counter_; }
  LineId line() const { return line_; }

 protected:
  // Called right after a sample opened fetch number `count`.
  virtual void on_fetch(int /*count*/, Tick /*t*/) {}
  void stop() { stopped_ = true; }

 private:
  SimProbe& probe_;
  LineId line_;
  Tick next_;
  Tick period_;
  Tick noise_;
  std::uint64_t seed_;
  Tick deadline_;
  std::optional<Tick> returned_at_;
  bool stopped_ = false;
  std::uint64_t samples_ = 0;
  FetchCounter counter_;
};

// Uniform phase in [0, period) derived from the seed and loop id.
Tick probe_phase(std::uint64_t seed, std::uint32_t id, Tick period);

// Resolves the probe period against the backend's calibration. Config error
// if it is below the probe cycle cost.
Tick effective_period(const ProbeBackend& backend, Tick requested);

MonitorReport monitor_invoke(ProbeBackend& backend, const TargetDescriptor& t,
                             const ArgRecord& args, const MonitorConfig& cfg,
                             std::uint64_t seed,
                             const TargetOptions& opts = {});

// Fraction of `trials` in which two_fetch, with its fetches `gap_c` probe
// cycles apart, is reported as a double fetch. One fresh simulator per trial.
double detection_probability(const SimConfig& sim_cfg, double gap_c, int trials,
                             std::uint64_t seed, int close_after_misses = 2);

}  // namespace dfetch
