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

#include "dfetch/probe.h"

#include <algorithm>
#include <cmath>
#include <set>

#include "dfetch/sim.h"

namespace dfetch {
namespace {

Tick percentile(std::vector<Tick> v, double q) {
  std::sort(v.begin(), v.end());
  auto idx = static_cast<std::size_t>(std::ceil(q * static_cast<double>(v.size())));
  if (idx > 0) --idx;
  return v[std::min(idx, v.size() - 1)];
}

double error_rate(const std::vector<Tick>& hits,
                  const std::vector<Tick>& misses, Tick thr) {
  std::size_t wrong = 0;
  for (Tick h : hits) wrong += h >= thr;
  for (Tick m : misses) wrong += m < thr;
  return static_cast<double>(wrong) /
         static_cast<double>(hits.size() + misses.size());
}

Histogram histogram(const std::vector<Tick>& v) {
  Histogram h;
  for (Tick x : v) ++h[x];
  return h;
}

}  // namespace

LineId SharedBuffer::line_at(std::size_t offset) const {
  if (offset >= alloc_bytes) {
    throw_error(ErrorKind::Usage, "offset " + std::to_string(offset) +
                                      " outside allocation of " +
                                      std::to_string(alloc_bytes) + " bytes");
  }
  return LineId{base.value + static_cast<std::uint32_t>(offset / kLineSize)};
}

CalibrationProfile build_profile(const std::vector<Tick>& hits,
                                 const std::vector<Tick>& misses,
                                 double fr_cycle_cost) {
  if (hits.empty() || misses.empty()) {
    throw_error(ErrorKind::Calibration, "no calibration samples");
  }
  const Tick h99 = percentile(hits, 0.99);
  const Tick m1 = percentile(misses, 0.01);

  Tick thr = 0;
  if (h99 < m1) {
    thr = h99 + (m1 - h99 + 1) / 2;
  } else {
    // Tails overlap: take the cut with the fewest misclassified samples.
    std::set<Tick> cands;
    for (Tick x : hits) cands.insert(x + 1);
    for (Tick x : misses) cands.insert(x);
    double best = 2.0;
    for (Tick c : cands) {
      const double e = error_rate(hits, misses, c);
      if (e < best) {
        best = e;
        thr = c;
      }
    }
  }

  CalibrationProfile p;
  p.threshold = thr;
  p.hit_latencies = histogram(hits);
  p.miss_latencies = histogram(misses);
  p.fr_cycle_cost = fr_cycle_cost;
  p.misclassification = error_rate(hits, misses, thr);
  if (p.misclassification > 0.10) {
    throw_error(ErrorKind::Calibration,
                "hit and miss latencies overlap: " +
                    std::to_string(p.misclassification * 100.0) +
                    "% of samples misclassified");
  }
  return p;
}

const CalibrationProfile& ProbeBackend::require_profile() const {
  if (!profile_) {
    throw_error(ErrorKind::Calibration, "backend has not been calibrated");
  }
  return *profile_;
}

SimProbe::SimProbe(sim::Machine& machine) : machine_(machine) {}

SimProbe::SimProbe(const SimConfig& cfg)
    : owned_(std::make_unique<sim::Machine>(cfg)), machine_(*owned_) {}

SimProbe::~SimProbe() = default;

SharedBuffer SimProbe::allocate_shared(std::size_t size_bytes) {
  return machine_.allocate(size_bytes);
}

void SimProbe::flush(LineId line) { machine_.flush(line, Actor::Monitor); }

ProbeSample SimProbe::timed_reload(LineId line) {
  const CalibrationProfile& p = require_profile();
  ProbeSample s;
  s.timestamp = machine_.now();
  s.latency = machine_.access(line, sim::AccessKind::Read, Actor::Monitor);
  s.classification = p.classify(s.latency);
  return s;
}

CalibrationProfile SimProbe::calibrate(int rounds) {
  if (rounds < 1) throw_error(ErrorKind::Usage, "calibration rounds must be >= 1");
  SimConfig cfg = machine_.config();
  cfg.record_events = false;
  sim::Machine scratch(cfg);
  const LineId line = scratch.allocate(kLineSize).base;

  std::vector<Tick> hits, misses;
  Tick fr_total = 0;
  for (int i = 0; i < rounds; ++i) {
    scratch.record_access(line, sim::AccessKind::Read, Actor::Target);
    hits.push_back(scratch.access(line, sim::AccessKind::Read, Actor::Monitor));
    scratch.advance(cfg.reload_ticks);

    const Tick start = scratch.now();
    scratch.flush(line, Actor::Monitor);
    scratch.advance(cfg.flush_ticks);
    misses.push_back(scratch.access(line, sim::AccessKind::Read, Actor::Monitor));
    scratch.advance(cfg.reload_ticks);
    fr_total += scratch.now() - start;
  }
  profile_ = build_profile(hits, misses,
                           static_cast<double>(fr_total) / rounds);
  return *profile_;
}

std::span<std::byte> SimProbe::bytes(const SharedBuffer& buf) {
  return machine_.bytes(buf);
}

CalibrationProfile sim_profile(const SimConfig& cfg, int rounds) {
  std::vector<Tick> hits(static_cast<std::size_t>(rounds), cfg.hit_latency);
  std::vector<Tick> misses(static_cast<std::size_t>(rounds), cfg.miss_latency);
  return build_profile(hits, misses, static_cast<double>(cfg.fr_cycle_cost()));
}

BackendFactory sim_factory(const SimConfig& cfg) {
  SimConfig c = cfg;
  c.record_events = false;
  const CalibrationProfile profile = sim_profile(c);
  return [c, profile]() -> std::unique_ptr<ProbeBackend> {
    auto p = std::make_unique<SimProbe>(c);
    p->set_profile(profile);
    return p;
  };
}

BackendFactory hw_factory(const CalibrationProfile& profile) {
  return [profile]() -> std::unique_ptr<ProbeBackend> {
    auto p = std::make_unique<HwProbe>();
    p->set_profile(profile);
    return p;
  };
}

}  // namespace dfetch
