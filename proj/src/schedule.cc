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

#include "dfetch/schedule.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <nlohmann/json.hpp>
#include <random>
#include <set>

#include "dfetch/memory.h"

namespace dfetch {
namespace {

// Memory for schedule mode. Before the target's k-th line access, every
// adversary step assigned to slot k runs. Writes to a locked line wait for
// the unlock.
class ScheduleMemory final : public UserMemory {
 public:
  ScheduleMemory(sim::Machine& m, const ArgRecord& args,
                 const AdversaryProgram& prog, std::vector<int> slots)
      : m_(m),
        args_(args),
        prog_(prog),
        slots_(std::move(slots)),
        done_(prog.steps.size(), false) {}

  Tick fetch(const Argument& a, std::size_t offset,
             std::span<std::byte> out) override {
    const Tick first = t_;
    for (const LineChunk& c : split_lines(a.buffer, offset, out.size())) {
      run_slot();
      m_.set_now(t_);
      m_.access(c.line, sim::AccessKind::Read, Actor::Target);
      std::memcpy(out.data() + c.buf_offset,
                  m_.line_bytes(c.line).data() + c.line_offset, c.len);
      t_ += m_.config().access_ticks;
      ++k_;
    }
    return first;
  }

  void store(const Argument& a, std::size_t offset,
             std::span<const std::byte> in) override {
    for (const LineChunk& c : split_lines(a.buffer, offset, in.size())) {
      run_slot();
      m_.set_now(t_);
      m_.access(c.line, sim::AccessKind::Write, Actor::Target);
      std::memcpy(m_.line_bytes(c.line).data() + c.line_offset,
                  in.data() + c.buf_offset, c.len);
      t_ += m_.config().access_ticks;
      ++k_;
    }
  }

  void work(Tick ticks) override { t_ += ticks; }
  Tick now() const override { return t_; }
  std::uint64_t version(LineId line) const override { return m_.version(line); }
  void lock_line(LineId line) override { m_.lock(line); }
  void unlock_line(LineId line) override {
    m_.unlock(line);
    std::vector<Pending> still;
    for (Pending& p : deferred_) {
      if (p.line == line) {
        apply(p);
      } else {
        still.push_back(std::move(p));
      }
    }
    deferred_ = std::move(still);
  }

  // Runs whatever is left once the target has returned.
  void finish() {
    for (std::size_t j = 0; j < prog_.steps.size(); ++j) {
      if (!done_[j]) run_step(j);
    }
    for (Pending& p : deferred_) {
      m_.unlock(p.line);
      apply(p);
    }
    deferred_.clear();
  }

  int steps() const { return k_; }

 private:
  struct Pending {
    LineId line;
    std::size_t line_offset;
    std::vector<std::byte> bytes;
  };

  void run_slot() {
    for (std::size_t j = 0; j < prog_.steps.size(); ++j) {
      if (!done_[j] && slots_[j] <= k_) run_step(j);
    }
  }

  void run_step(std::size_t j) {
    done_[j] = true;
    const AdvStep& s = prog_.steps[j];
    if (s.op == AdvStep::Op::Wait) return;
    const Argument& a = args_.at(s.param);
    for (const LineChunk& c : split_lines(a.buffer, s.offset, s.bytes.size())) {
      Pending p{c.line, c.line_offset,
                {s.bytes.begin() + static_cast<std::ptrdiff_t>(c.buf_offset),
                 s.bytes.begin() + static_cast<std::ptrdiff_t>(c.buf_offset + c.len)}};
      if (m_.locked(c.line)) {
        deferred_.push_back(std::move(p));
      } else {
        apply(p);
      }
    }
  }

  void apply(const Pending& p) {
    m_.set_now(std::max(m_.now(), t_));
    m_.access(p.line, sim::AccessKind::Write, Actor::Trigger);
    std::memcpy(m_.line_bytes(p.line).data() + p.line_offset, p.bytes.data(),
                p.bytes.size());
  }

  sim::Machine& m_;
  const ArgRecord& args_;
  const AdversaryProgram& prog_;
  std::vector<int> slots_;
  std::vector<bool> done_;
  std::vector<Pending> deferred_;
  Tick t_ = 0;
  int k_ = 0;
};

struct RunResult {
  InvokeResult result;
  int target_steps = 0;
};

RunResult run_once(const SimConfig& cfg, const ScheduledBody& body,
                   const ArgFactory& make_args, const AdversaryProgram& prog,
                   std::vector<int> slots) {
  SimConfig c = cfg;
  c.record_events = false;
  sim::Machine m(c);
  SimProbe probe(m);
  const ArgRecord args = make_args(probe);
  prog.validate(args);
  ScheduleMemory mem(m, args, prog, std::move(slots));
  RunResult r;
  r.result = body(mem, args);
  r.target_steps = mem.steps();
  mem.finish();
  return r;
}

// Adversary positions (indices into the merged order) to slots.
std::vector<int> slots_from_positions(const std::vector<int>& pos) {
  std::vector<int> slots;
  for (std::size_t j = 0; j < pos.size(); ++j) {
    slots.push_back(pos[j] - static_cast<int>(j));
  }
  return slots;
}

Schedule schedule_from_slots(const std::vector<int>& slots, int target_steps) {
  Schedule s;
  std::size_t j = 0;
  for (int k = 0; k <= target_steps; ++k) {
    while (j < slots.size() && slots[j] <= k) {
      s.order.emplace_back(ScheduleActor::Trigger, static_cast<int>(j));
      ++j;
    }
    if (k < target_steps) s.order.emplace_back(ScheduleActor::Target, k);
  }
  return s;
}

std::vector<int> slots_from_schedule(const Schedule& s) {
  std::vector<int> slots;
  int k = 0;
  for (const auto& [actor, idx] : s.order) {
    if (actor == ScheduleActor::Target) {
      ++k;
    } else {
      slots.push_back(k);
    }
  }
  return slots;
}

}  // namespace

AdvStep AdvStep::wait(Tick t) {
  AdvStep s;
  s.op = Op::Wait;
  s.ticks = t;
  return s;
}

AdvStep AdvStep::write(int param, std::vector<std::byte> bytes,
                       std::size_t offset) {
  AdvStep s;
  s.op = Op::Write;
  s.param = param;
  s.bytes = std::move(bytes);
  s.offset = offset;
  return s;
}

AdvStep AdvStep::flip_on_hit(int param, int nth, std::vector<std::byte> bytes,
                             std::size_t offset) {
  AdvStep s = write(param, std::move(bytes), offset);
  s.op = Op::FlipOnHit;
  s.nth_fetch = nth;
  return s;
}

void AdversaryProgram::validate(const ArgRecord& args) const {
  Tick cycle = 0;
  for (const AdvStep& s : steps) {
    if (s.op == AdvStep::Op::Wait) {
      if (s.ticks < 0) throw_error(ErrorKind::Usage, "negative wait");
      cycle += s.ticks;
      continue;
    }
    const Argument& a = args.at(s.param);
    if (!a.shared()) {
      throw_error(ErrorKind::Usage,
                  "parameter '" + a.spec.name + "' is passed by value");
    }
    if (s.bytes.empty()) throw_error(ErrorKind::Usage, "empty adversary write");
    if (s.offset + s.bytes.size() > a.buffer.alloc_bytes) {
      throw_error(ErrorKind::Usage, "adversary write outside the buffer");
    }
    if (s.op == AdvStep::Op::FlipOnHit && s.nth_fetch < 1) {
      throw_error(ErrorKind::Usage, "fetch index must be >= 1");
    }
    cycle += 1;
  }
  if (repeat && cycle == 0) {
    throw_error(ErrorKind::Usage, "repeating adversary never advances time");
  }
}

std::string Schedule::to_json() const {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& [actor, idx] : order) {
    j.push_back({actor == ScheduleActor::Target ? "Target" : "Trigger", idx});
  }
  return j.dump();
}

Schedule Schedule::from_json(const std::string& text) {
  Schedule s;
  try {
    const nlohmann::json j = nlohmann::json::parse(text);
    if (!j.is_array()) throw std::invalid_argument("not an array");
    for (const auto& e : j) {
      if (!e.is_array() || e.size() != 2) throw std::invalid_argument("entry");
      const std::string actor = e[0].get<std::string>();
      ScheduleActor a;
      if (actor == "Target") {
        a = ScheduleActor::Target;
      } else if (actor == "Trigger") {
        a = ScheduleActor::Trigger;
      } else {
        throw std::invalid_argument("actor " + actor);
      }
      s.order.emplace_back(a, e[1].get<int>());
    }
  } catch (const std::exception& e) {
    throw_error(ErrorKind::Usage, std::string("malformed schedule: ") + e.what());
  }
  return s;
}

void Schedule::check(int target_steps, int adversary_steps) const {
  int t = 0, a = 0;
  for (const auto& [actor, idx] : order) {
    int& want = actor == ScheduleActor::Target ? t : a;
    if (idx != want) {
      throw_error(ErrorKind::Usage, "schedule steps out of order");
    }
    ++want;
  }
  if (t != target_steps || a != adversary_steps) {
    throw_error(ErrorKind::Usage,
                "schedule has " + std::to_string(t) + "/" + std::to_string(a) +
                    " target/adversary steps, expected " +
                    std::to_string(target_steps) + "/" +
                    std::to_string(adversary_steps));
  }
}

double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  k = std::min(k, n - k);
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return std::round(r);
}

int count_target_steps(const SimConfig& cfg, const ScheduledBody& body,
                       const ArgFactory& make_args) {
  const AdversaryProgram none;
  return run_once(cfg, body, make_args, none, {}).target_steps;
}

InterleavingRun run_interleavings(const SimConfig& cfg,
                                  const ScheduledBody& body,
                                  const ArgFactory& make_args,
                                  const AdversaryProgram& adversary,
                                  std::size_t max_schedules,
                                  std::uint64_t seed) {
  if (max_schedules == 0) throw_error(ErrorKind::Usage, "max_schedules is 0");
  InterleavingRun run;
  run.target_steps = count_target_steps(cfg, body, make_args);
  run.adversary_steps = static_cast<int>(adversary.steps.size());
  const int n = run.target_steps + run.adversary_steps;
  const int k = run.adversary_steps;
  run.schedule_count = binomial(n, k);

  auto execute = [&](const std::vector<int>& positions) {
    const std::vector<int> slots = slots_from_positions(positions);
    ScheduleOutcome o;
    o.schedule = schedule_from_slots(slots, run.target_steps);
    o.result = run_once(cfg, body, make_args, adversary, slots).result;
    run.outcomes.push_back(std::move(o));
  };

  if (run.schedule_count <= static_cast<double>(max_schedules)) {
    // Lexicographic walk over k-subsets of {0..n-1}.
    std::vector<int> pos(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) pos[static_cast<std::size_t>(i)] = i;
    for (;;) {
      execute(pos);
      int i = k - 1;
      while (i >= 0 && pos[static_cast<std::size_t>(i)] == n - k + i) --i;
      if (i < 0) break;
      ++pos[static_cast<std::size_t>(i)];
      for (int j = i + 1; j < k; ++j) {
        pos[static_cast<std::size_t>(j)] = pos[static_cast<std::size_t>(j - 1)] + 1;
      }
    }
    return run;
  }

  run.sampled = true;
  std::mt19937_64 rng(seed);
  for (std::size_t s = 0; s < max_schedules; ++s) {
    // Floyd's algorithm: a uniform k-subset in k draws.
    std::set<int> chosen;
    for (int j = n - k; j < n; ++j) {
      const int r = std::uniform_int_distribution<int>(0, j)(rng);
      if (!chosen.insert(r).second) chosen.insert(j);
    }
    execute(std::vector<int>(chosen.begin(), chosen.end()));
  }
  return run;
}

InvokeResult replay_schedule(const SimConfig& cfg, const ScheduledBody& body,
                             const ArgFactory& make_args,
                             const AdversaryProgram& adversary,
                             const Schedule& schedule) {
  const int t = count_target_steps(cfg, body, make_args);
  schedule.check(t, static_cast<int>(adversary.steps.size()));
  return run_once(cfg, body, make_args, adversary,
                  slots_from_schedule(schedule))
      .result;
}

}  // namespace dfetch
