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

#include "dfetch/trigger.h"

#include <algorithm>
#include <array>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstring>
#include <thread>

namespace dfetch {

std::string_view to_string(MutationKind k) {
  switch (k) {
    case MutationKind::SetZero: return "SetZero";
    case MutationKind::FlipLSB: return "FlipLSB";
    case MutationKind::Increment: return "Increment";
    case MutationKind::RandomValue: return "RandomValue";
  }
  return "?";
}

MutationKind parse_mutation(std::string_view s) {
  for (MutationKind k : {MutationKind::SetZero, MutationKind::FlipLSB,
                         MutationKind::Increment, MutationKind::RandomValue}) {
    if (s == to_string(k)) return k;
  }
  throw_error(ErrorKind::Usage, "unknown mutation '" + std::string(s) + "'");
}

std::string_view to_string(Method m) {
  switch (m) {
    case Method::CacheTrigger: return "CacheTrigger";
    case Method::BusyWait: return "BusyWait";
    case Method::ValueFlipping: return "ValueFlipping";
  }
  return "?";
}

Method parse_method(std::string_view s) {
  for (Method m : {Method::CacheTrigger, Method::BusyWait, Method::ValueFlipping}) {
    if (s == to_string(m)) return m;
  }
  throw_error(ErrorKind::Usage, "unknown method '" + std::string(s) + "'");
}

std::int64_t mutate_int(std::int64_t v, MutationStrategy s, bool* noop) {
  std::int64_t out = v;
  switch (s.kind) {
    case MutationKind::SetZero: out = 0; break;
    case MutationKind::FlipLSB: out = v ^ 1; break;
    case MutationKind::Increment:
      out = static_cast<std::int64_t>(static_cast<std::uint64_t>(v) + 1);
      break;
    case MutationKind::RandomValue:
      out = static_cast<std::int64_t>(mix64(s.seed, static_cast<std::uint64_t>(v)));
      if (out == v) out ^= 1;
      break;
  }
  if (noop) *noop = out == v;
  return out;
}

std::vector<std::byte> mutate_bytes(std::span<const std::byte> in,
                                    MutationStrategy s, bool* noop) {
  std::vector<std::byte> out(in.begin(), in.end());
  switch (s.kind) {
    case MutationKind::SetZero:
      std::fill(out.begin(), out.end(), std::byte{0});
      break;
    case MutationKind::FlipLSB:
      for (std::byte& b : out) b ^= std::byte{1};
      break;
    case MutationKind::Increment:
      throw_error(ErrorKind::Usage, "Increment only applies to integers");
    case MutationKind::RandomValue:
      for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = static_cast<std::byte>(mix64(s.seed, i) & 0xff);
      }
      if (!out.empty() && std::equal(out.begin(), out.end(), in.begin())) {
        out[0] ^= std::byte{1};
      }
      break;
  }
  if (noop) *noop = std::equal(out.begin(), out.end(), in.begin());
  return out;
}

Mutated mutate_param(const Argument& a, std::span<const std::byte> current,
                     MutationStrategy s) {
  Mutated m;
  if (a.spec.kind == ParamKind::IntScalar) {
    std::array<std::byte, 8> b{};
    std::copy_n(current.begin(), 8, b.begin());
    const std::int64_t v = mutate_int(std::bit_cast<std::int64_t>(b), s, &m.noop);
    const auto nb = std::bit_cast<std::array<std::byte, 8>>(v);
    m.bytes.assign(nb.begin(), nb.end());
  } else {
    m.bytes = mutate_bytes(current.first(kLineSize), s, &m.noop);
  }
  return m;
}

std::vector<MutationKind> applicable_mutations(ParamKind k) {
  if (k == ParamKind::IntScalar) {
    return {MutationKind::SetZero, MutationKind::FlipLSB, MutationKind::Increment,
            MutationKind::RandomValue};
  }
  return {MutationKind::SetZero, MutationKind::FlipLSB, MutationKind::RandomValue};
}

AdversaryProgram method_program(Method m, int param,
                                const std::vector<std::byte>& original,
                                const std::vector<std::byte>& mutated,
                                int trigger_fetch, Tick busy_delay) {
  AdversaryProgram p;
  switch (m) {
    case Method::CacheTrigger:
      p.steps = {AdvStep::flip_on_hit(param, trigger_fetch, mutated)};
      break;
    case Method::BusyWait:
      p.steps = {AdvStep::wait(busy_delay), AdvStep::write(param, mutated)};
      break;
    case Method::ValueFlipping:
      p.steps = {AdvStep::write(param, mutated), AdvStep::write(param, original)};
      p.repeat = true;
      break;
  }
  return p;
}

AdversaryProgram flip_program(ProbeBackend& backend, const ArgRecord& args,
                              int param, MutationStrategy s, int writes) {
  if (writes < 1) throw_error(ErrorKind::Usage, "writes must be >= 1");
  const Argument& a = args.at(param);
  if (!a.shared()) {
    throw_error(ErrorKind::Usage, "parameter '" + a.spec.name + "' is passed by value");
  }
  const std::span<std::byte> cur = backend.bytes(a.buffer);
  const Mutated mut = mutate_param(a, cur, s);
  std::vector<std::byte> original(
      cur.begin(), cur.begin() + static_cast<std::ptrdiff_t>(mut.bytes.size()));
  AdversaryProgram p;
  for (int i = 0; i < writes; ++i) {
    p.steps.push_back(AdvStep::write(param, i % 2 ? original : mut.bytes));
  }
  return p;
}

Tick busy_wait_delay(const TargetDescriptor& t, const ArgRecord& args,
                     const ExploitRequest& req, double fr_cycle_cost,
                     const TargetOptions& opts) {
  const Tick c = std::max<Tick>(1, static_cast<Tick>(std::ceil(fr_cycle_cost)));
  const std::vector<Tick> times = access_times(t, args, req.param, opts);
  if (times.empty()) return 0;
  const std::size_t idx = std::min<std::size_t>(
      static_cast<std::size_t>(std::max(req.trigger_fetch, 0)), times.size() - 1);
  const Tick k = (times[idx] + c - 1) / c + 1;
  return static_cast<Tick>(req.trial_index % static_cast<std::uint64_t>(k)) * c;
}

namespace {

// Adversary program on the simulator timeline.
class SimAdversary final : public sim::Process {
 public:
  SimAdversary(std::uint32_t id, SimProbe& probe, const ArgRecord& args,
               const AdversaryProgram& prog, Tick start, Tick period,
               int close_after, std::uint64_t seed)
      : sim::Process(id),
        probe_(probe),
        args_(args),
        prog_(prog),
        start_(start),
        period_(period),
        close_after_(close_after),
        seed_(seed),
        next_(start),
        counter_(close_after) {
    settle();
  }

  std::optional<Tick> next_time() const override {
    if (done_) return std::nullopt;
    return next_;
  }

  void on_target_return(Tick) override { done_ = true; }

  void step(sim::Machine& m) override {
    const Tick t = m.now();
    const AdvStep& s = prog_.steps[pc_];
    if (probing_) {
      const LineId line = args_.at(s.param).buffer.line_at(s.offset);
      const ProbeSample smp = probe_.timed_reload(line);
      probe_.flush(line);
      const bool opened =
          counter_.observe(smp.classification == Classification::Hit, t);
      if (opened && counter_.count() == s.nth_fetch) {
        probing_ = false;
        next_ = t + m.config().write_ticks;
      } else {
        next_ = t + period_;
      }
      return;
    }
    if (!write(m, s)) {
      next_ = t + 1;
      return;
    }
    if (!first_write_) first_write_ = t - start_;
    ++pc_;
    armed_ = false;
    next_ = t + m.config().write_ticks;
    settle();
  }

  std::optional<Tick> first_write() const { return first_write_; }

 private:
  bool write(sim::Machine& m, const AdvStep& s) {
    const Argument& a = args_.at(s.param);
    const auto chunks = split_lines(a.buffer, s.offset, s.bytes.size());
    for (const LineChunk& c : chunks) {
      if (m.locked(c.line)) return false;
    }
    for (const LineChunk& c : chunks) {
      m.access(c.line, sim::AccessKind::Write, Actor::Trigger);
      std::memcpy(m.line_bytes(c.line).data() + c.line_offset,
                  s.bytes.data() + c.buf_offset, c.len);
    }
    return true;
  }

  // Advances past waits and sets up probing for the next step.
  void settle() {
    for (;;) {
      if (pc_ == prog_.steps.size()) {
        if (!prog_.repeat) {
          done_ = true;
          return;
        }
        pc_ = 0;
      }
      const AdvStep& s = prog_.steps[pc_];
      if (s.op == AdvStep::Op::Wait) {
        next_ += s.ticks;
        ++pc_;
        continue;
      }
      if (s.op == AdvStep::Op::FlipOnHit && !armed_) {
        armed_ = true;
        probing_ = true;
        counter_ = FetchCounter(close_after_);
        next_ += probe_phase(seed_, id(), period_);
      }
      return;
    }
  }

  SimProbe& probe_;
  const ArgRecord& args_;
  const AdversaryProgram& prog_;
  Tick start_;
  Tick period_;
  int close_after_;
  std::uint64_t seed_;
  Tick next_;
  std::size_t pc_ = 0;
  bool done_ = false;
  bool probing_ = false;
  bool armed_ = false;
  FetchCounter counter_;
  std::optional<Tick> first_write_;
};

constexpr std::uint32_t kAdversaryId = 64;

ExploitOutcome run_sim(SimProbe& probe, const TargetDescriptor& t,
                       const ArgRecord& args, const AdversaryProgram& prog,
                       const ExploitRequest& req, std::uint64_t seed,
                       const TargetOptions& opts) {
  sim::Machine& m = probe.machine();
  const Tick period = effective_period(probe, req.probe_period);
  sim::Timeline tl(m, seed);
  const Tick start = m.now();
  SimAdversary adv(kAdversaryId, probe, args, prog, start, period,
                   req.close_after_misses, seed);
  tl.add(&adv);
  SimMemory mem(tl, Actor::Target, start);
  ExploitOutcome out;
  out.result = t.invoke(mem, args, opts);
  tl.finish(mem.clock(), 0);
  m.set_now(std::max(m.now(), mem.clock()));
  out.flip_time = adv.first_write();
  out.triggered = out.flip_time.has_value();
  return out;
}

ExploitOutcome run_hw(HwProbe& probe, const TargetDescriptor& t,
                      const ArgRecord& args, const AdversaryProgram& prog,
                      const ExploitRequest& req, const TargetOptions& opts) {
  const Tick period = effective_period(probe, req.probe_period);
  const double cpt = req.cycles_per_tick;
  std::atomic<bool> stop{false};
  std::atomic<bool> started{false};
  std::atomic<std::int64_t> first_write{-1};
  const std::uint64_t start = read_cycles();

  auto spin_until = [&](std::uint64_t until) {
    while (read_cycles() < until) {
      if (stop.load(std::memory_order_relaxed)) return false;
    }
    return true;
  };
  auto do_write = [&](const AdvStep& s) {
    const Argument& a = args.at(s.param);
    const auto chunks = split_lines(a.buffer, s.offset, s.bytes.size());
    for (const LineChunk& c : chunks) {
      while (probe.line_locked(c.line)) {
        if (stop.load(std::memory_order_relaxed)) return;
      }
    }
    for (const LineChunk& c : chunks) {
      probe.versioned_store(c.line, c.line_offset,
                            std::span(s.bytes).subspan(c.buf_offset, c.len));
    }
    std::int64_t expected = -1;
    first_write.compare_exchange_strong(
        expected, static_cast<std::int64_t>((read_cycles() - start) / cpt));
  };

  std::thread adversary([&] {
    started.store(true);
    do {
      for (const AdvStep& s : prog.steps) {
        if (stop.load(std::memory_order_relaxed)) return;
        if (s.op == AdvStep::Op::Wait) {
          if (!spin_until(read_cycles() + static_cast<std::uint64_t>(s.ticks * cpt))) {
            return;
          }
        } else if (s.op == AdvStep::Op::Write) {
          do_write(s);
        } else {
          const LineId line = args.at(s.param).buffer.line_at(s.offset);
          FetchCounter c(req.close_after_misses);
          probe.flush(line);
          for (;;) {
            if (stop.load(std::memory_order_relaxed)) return;
            const std::uint64_t t0 = read_cycles();
            const ProbeSample smp = probe.timed_reload(line);
            probe.flush(line);
            if (c.observe(smp.classification == Classification::Hit,
                          static_cast<Tick>(t0 - start)) &&
                c.count() == s.nth_fetch) {
              break;
            }
            spin_until(t0 + static_cast<std::uint64_t>(period));
          }
          do_write(s);
        }
      }
    } while (prog.repeat);
  });
  while (!started.load()) std::this_thread::yield();

  ExploitOutcome out;
  {
    HwMemory mem(probe, cpt);
    out.result = t.invoke(mem, args, opts);
  }
  stop.store(true);
  adversary.join();
  if (first_write.load() >= 0) out.flip_time = first_write.load();
  out.triggered = out.flip_time.has_value();
  return out;
}

}  // namespace

ExploitOutcome run_adversary(ProbeBackend& backend, const TargetDescriptor& t,
                             const ArgRecord& args,
                             const AdversaryProgram& program,
                             const ExploitRequest& req, std::uint64_t seed,
                             const TargetOptions& opts) {
  program.validate(args);
  if (backend.kind() == BackendKind::Sim) {
    return run_sim(static_cast<SimProbe&>(backend), t, args, program, req,
                   seed, opts);
  }
  return run_hw(static_cast<HwProbe&>(backend), t, args, program, req, opts);
}

ExploitOutcome exploit_invoke(ProbeBackend& backend, const TargetDescriptor& t,
                              const ArgRecord& args, const ExploitRequest& req,
                              std::uint64_t seed, const TargetOptions& opts) {
  const Argument& a = args.at(req.param);
  if (!a.shared()) {
    throw_error(ErrorKind::Usage,
                "parameter '" + a.spec.name + "' is passed by value");
  }
  if (req.trigger_fetch < 1) {
    throw_error(ErrorKind::Usage, "trigger fetch must be >= 1");
  }
  const std::span<std::byte> cur = backend.bytes(a.buffer);
  const Mutated mut = mutate_param(a, cur, req.strategy);
  const std::vector<std::byte> original(cur.begin(),
                                        cur.begin() + static_cast<std::ptrdiff_t>(mut.bytes.size()));
  if (!backend.profile()) {
    throw_error(ErrorKind::Calibration, "backend has not been calibrated");
  }
  Tick delay = 0;
  if (req.method == Method::BusyWait) {
    // Target time is in ticks; on hardware a probe cycle is a fraction of one.
    double cost = backend.profile()->fr_cycle_cost;
    if (backend.kind() == BackendKind::Hardware) cost /= req.cycles_per_tick;
    delay = busy_wait_delay(t, args, req, cost, opts);
  }
  const AdversaryProgram prog = method_program(
      req.method, req.param, original, mut.bytes, req.trigger_fetch, delay);
  ExploitOutcome out = run_adversary(backend, t, args, prog, req, seed, opts);
  out.mutation_noop = mut.noop;
  out.busy_delay = delay;
  return out;
}

RateResult success_rate(
    const BackendFactory& make, const TargetDescriptor& t,
    const ExploitRequest& req, int trials, std::uint64_t seed,
    const TargetOptions& opts,
    const std::function<void(int, const ExploitOutcome&)>& on_trial) {
  if (trials <= 0) throw_error(ErrorKind::Usage, "trials must be positive");
  RateResult r;
  for (int i = 0; i < trials; ++i) {
    const std::uint64_t s = mix64(seed, static_cast<std::uint64_t>(i));
    std::unique_ptr<ProbeBackend> backend = make();
    const ArgRecord args = generate_args(*backend, t.params, s, {true});
    ExploitRequest q = req;
    q.trial_index = static_cast<std::uint64_t>(i);
    if (q.strategy.kind == MutationKind::RandomValue) q.strategy.seed = s;
    const ExploitOutcome o = exploit_invoke(*backend, t, args, q, s, opts);
    r.successes += o.success();
    if (on_trial) on_trial(i, o);
    ++r.trials;
  }
  return r;
}

RateResult multi_check_success(const BackendFactory& make, int n, Method m,
                               int trials, std::uint64_t seed) {
  const TargetDescriptor& t = find_target("multi_check_" + std::to_string(n));
  ExploitRequest req;
  req.param = 0;
  req.method = m;
  req.strategy.kind = MutationKind::Increment;
  req.trigger_fetch = n;
  return success_rate(make, t, req, trials, seed);
}

}  // namespace dfetch
