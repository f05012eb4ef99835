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

#include "dfetch/monitor.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <memory>
#include <thread>

namespace dfetch {

FetchCounter::FetchCounter(int close_after_misses)
    : close_after_(close_after_misses) {
  if (close_after_ < 1) {
    throw_error(ErrorKind::Config, "close_after_misses must be >= 1");
  }
}

bool FetchCounter::observe(bool hit, Tick t) {
  if (hit) {
    hits_.push_back(t);
    misses_ = 0;
    if (open_) return false;
    open_ = true;
    first_hits_.push_back(t);
    return true;
  }
  if (open_ && ++misses_ >= close_after_) open_ = false;
  return false;
}

const ParamReport* MonitorReport::find(int param) const {
  for (const ParamReport& p : per_param) {
    if (p.param == param) return &p;
  }
  return nullptr;
}

bool is_double_fetch(const MonitorReport& r, int param) {
  const ParamReport* p = r.find(param);
  return p && p->fetch_count >= 2;
}

Tick probe_phase(std::uint64_t seed, std::uint32_t id, Tick period) {
  return static_cast<Tick>(mix64(seed, id, 0x7068617365ULL) %
                           static_cast<std::uint64_t>(period));
}

Tick effective_period(const ProbeBackend& backend, Tick requested) {
  if (!backend.profile()) {
    throw_error(ErrorKind::Calibration, "backend has not been calibrated");
  }
  const auto cost =
      static_cast<Tick>(std::ceil(backend.profile()->fr_cycle_cost));
  if (requested == 0) return std::max<Tick>(cost, 1);
  if (requested < cost) {
    throw_error(ErrorKind::Config,
                "probe period " + std::to_string(requested) +
                    " is below the probe cycle cost " + std::to_string(cost));
  }
  return requested;
}

SimProbeLoop::SimProbeLoop(std::uint32_t id, SimProbe& probe, LineId line,
                           Tick first, Tick period, Tick noise,
                           std::uint64_t seed, Tick deadline,
                           int close_after_misses)
    : sim::Process(id),
      probe_(probe),
      line_(line),
      next_(first),
      period_(period),
      noise_(noise),
      seed_(seed),
      deadline_(deadline),
      counter_(close_after_misses) {}

std::optional<Tick> SimProbeLoop::next_time() const {
  if (stopped_) return std::nullopt;
  if (deadline_ > 0 && next_ > deadline_) return std::nullopt;
  return next_;
}

void SimProbeLoop::step(sim::Machine& m) {
  const Tick t = m.now();
  const ProbeSample s = probe_.timed_reload(line_);
  probe_.flush(line_);
  const bool hit = s.classification == Classification::Hit;
  if (counter_.observe(hit, t)) on_fetch(counter_.count(), t);
  if (returned_at_ && t >= *returned_at_) stopped_ = true;
  Tick pause = period_;
  if (noise_ > 0) {
    pause += static_cast<Tick>(mix64(seed_, id(), samples_) %
                               static_cast<std::uint64_t>(noise_ + 1));
  }
  ++samples_;
  next_ = t + pause;
}

namespace {

struct Watch {
  int param;
  LineId line;
};

std::vector<Watch> watch_list(const TargetDescriptor& t, const ArgRecord& args,
                              const MonitorConfig& cfg) {
  std::vector<int> params = cfg.params;
  if (params.empty()) {
    for (const Argument& a : args.args) {
      if (a.shared()) params.push_back(a.index);
    }
  }
  std::vector<Watch> out;
  for (int p : params) {
    const Argument& a = args.at(p);
    if (!a.shared()) {
      throw_error(ErrorKind::Usage, "parameter '" + a.spec.name + "' of " +
                                        t.id + " is passed by value");
    }
    if (cfg.monitor_all_lines) {
      for (LineId l : a.buffer.line_ids) out.push_back({p, l});
    } else {
      out.push_back({p, a.buffer.line_ids.front()});
    }
  }
  return out;
}

// Folds per-line counters into per-parameter reports. A fetch of a
// multi-line buffer touches each line, so the busiest line speaks for it.
void fold(MonitorReport& rep, const std::vector<Watch>& watches,
          const std::vector<const FetchCounter*>& counters) {
  for (std::size_t i = 0; i < watches.size(); ++i) {
    ParamReport* pr = nullptr;
    for (ParamReport& p : rep.per_param) {
      if (p.param == watches[i].param) pr = &p;
    }
    if (!pr) {
      rep.per_param.push_back({watches[i].param, {}, {}, 0});
      pr = &rep.per_param.back();
    }
    const FetchCounter& c = *counters[i];
    if (c.count() > pr->fetch_count || (pr->hits.empty() && !c.hits().empty())) {
      pr->fetch_count = c.count();
      pr->hits = c.hits();
      pr->fetch_starts = c.first_hits();
    }
  }
}

MonitorReport monitor_sim(SimProbe& probe, const TargetDescriptor& t,
                          const ArgRecord& args, const MonitorConfig& cfg,
                          std::uint64_t seed, const TargetOptions& opts) {
  sim::Machine& m = probe.machine();
  const Tick period = effective_period(probe, cfg.probe_period);
  const std::vector<Watch> watches = watch_list(t, args, cfg);

  sim::Timeline tl(m, seed);
  const Tick start = m.now();
  const Tick deadline = cfg.max_duration > 0 ? start + cfg.max_duration : 0;
  std::vector<std::unique_ptr<SimProbeLoop>> loops;
  for (std::size_t i = 0; i < watches.size(); ++i) {
    const auto id = static_cast<std::uint32_t>(i + 1);
    loops.push_back(std::make_unique<SimProbeLoop>(
        id, probe, watches[i].line, start + probe_phase(seed, id, period),
        period, m.config().noise_ticks, seed, deadline,
        cfg.close_after_misses));
    tl.add(loops.back().get());
  }

  SimMemory mem(tl, Actor::Target, start);
  MonitorReport rep;
  rep.target = t.id;
  rep.start = start;
  rep.result = t.invoke(mem, args, opts);
  tl.finish(mem.clock(), 2 * (period + m.config().noise_ticks) + 1);
  m.set_now(std::max(m.now(), mem.clock()));
  rep.end = mem.clock();

  std::vector<const FetchCounter*> counters;
  for (const auto& l : loops) counters.push_back(&l->counter());
  fold(rep, watches, counters);
  return rep;
}

MonitorReport monitor_hw(HwProbe& probe, const TargetDescriptor& t,
                         const ArgRecord& args, const MonitorConfig& cfg,
                         const TargetOptions& opts) {
  const Tick period = effective_period(probe, cfg.probe_period);
  const std::vector<Watch> watches = watch_list(t, args, cfg);
  std::vector<std::unique_ptr<FetchCounter>> counters;
  for (std::size_t i = 0; i < watches.size(); ++i) {
    counters.push_back(std::make_unique<FetchCounter>(cfg.close_after_misses));
  }

  std::atomic<bool> stop{false};
  std::atomic<int> ready{0};
  const auto start = static_cast<Tick>(read_cycles());
  std::vector<std::thread> threads;
  for (std::size_t i = 0; i < watches.size(); ++i) {
    threads.emplace_back([&, i] {
      const LineId line = watches[i].line;
      FetchCounter& c = *counters[i];
      probe.flush(line);
      ready.fetch_add(1);
      for (;;) {
        const bool last = stop.load(std::memory_order_acquire);
        const auto t0 = static_cast<Tick>(read_cycles());
        if (cfg.max_duration > 0 && t0 - start > cfg.max_duration) break;
        const ProbeSample s = probe.timed_reload(line);
        probe.flush(line);
        c.observe(s.classification == Classification::Hit, t0 - start);
        if (last) break;
        while (static_cast<Tick>(read_cycles()) < t0 + period) {
        }
      }
    });
  }
  while (ready.load() < static_cast<int>(watches.size())) std::this_thread::yield();

  MonitorReport rep;
  rep.target = t.id;
  rep.start = 0;
  {
    HwMemory mem(probe, cfg.cycles_per_tick);
    rep.result = t.invoke(mem, args, opts);
  }
  rep.end = static_cast<Tick>(read_cycles()) - start;
  stop.store(true, std::memory_order_release);
  for (std::thread& th : threads) th.join();

  std::vector<const FetchCounter*> raw;
  for (const auto& c : counters) raw.push_back(c.get());
  fold(rep, watches, raw);
  return rep;
}

}  // namespace

MonitorReport monitor_invoke(ProbeBackend& backend, const TargetDescriptor& t,
                             const ArgRecord& args, const MonitorConfig& cfg,
                             std::uint64_t seed, const TargetOptions& opts) {
  if (backend.kind() == BackendKind::Sim) {
    return monitor_sim(static_cast<SimProbe&>(backend), t, args, cfg, seed,
                       opts);
  }
  return monitor_hw(static_cast<HwProbe&>(backend), t, args, cfg, opts);
}

double detection_probability(const SimConfig& sim_cfg, double gap_c, int trials,
                             std::uint64_t seed, int close_after_misses) {
  if (trials <= 0) throw_error(ErrorKind::Usage, "trials must be positive");
  SimConfig cfg = sim_cfg;
  cfg.record_events = false;
  const CalibrationProfile profile = sim_profile(cfg);
  const TargetDescriptor& t = find_target("two_fetch");
  TargetOptions opts;
  if (gap_c < 0) throw_error(ErrorKind::Usage, "negative gap");
  // Back-to-back is as close as two fetches can get.
  opts.gap = std::max(cfg.access_ticks,
                      gap_ticks(gap_c, static_cast<double>(cfg.fr_cycle_cost())));
  MonitorConfig mc;
  mc.close_after_misses = close_after_misses;

  int detected = 0;
  for (int i = 0; i < trials; ++i) {
    const std::uint64_t s = mix64(seed, static_cast<std::uint64_t>(i));
    sim::Machine m(cfg);
    SimProbe probe(m);
    probe.set_profile(profile);
    const ArgRecord args = generate_args(probe, t.params, s, {true});
    detected += is_double_fetch(monitor_invoke(probe, t, args, mc, s, opts), 0);
  }
  return static_cast<double>(detected) / trials;
}

}  // namespace dfetch
