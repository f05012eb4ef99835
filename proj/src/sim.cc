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

#include "dfetch/sim.h"

#include <limits>

namespace dfetch::sim {

std::string_view to_string(AccessKind k) {
  switch (k) {
    case AccessKind::Read: return "Read";
    case AccessKind::Write: return "Write";
    case AccessKind::Flush: return "Flush";
  }
  return "?";
}

Machine::Machine(SimConfig cfg) : cfg_(cfg) {}

SharedBuffer Machine::allocate(std::size_t size_bytes) {
  if (size_bytes == 0) throw_error(ErrorKind::Usage, "zero-sized buffer");
  const std::size_t pages = (size_bytes + kPageSize - 1) / kPageSize;
  const std::size_t nlines = pages * kPageSize / kLineSize;
  if (lines_.size() + nlines > std::numeric_limits<std::uint32_t>::max()) {
    throw_error(ErrorKind::Resource, "simulated address space exhausted");
  }
  SharedBuffer buf;
  buf.base = LineId{static_cast<std::uint32_t>(lines_.size())};
  buf.size_bytes = size_bytes;
  buf.alloc_bytes = pages * kPageSize;
  const std::size_t used = (size_bytes + kLineSize - 1) / kLineSize;
  for (std::size_t i = 0; i < used; ++i) {
    buf.line_ids.push_back(LineId{buf.base.value + static_cast<std::uint32_t>(i)});
  }
  lines_.resize(lines_.size() + nlines);
  data_.resize(lines_.size() * kLineSize);
  return buf;
}

void Machine::check(LineId line) const {
  if (!registered(line)) {
    throw_error(ErrorKind::Usage,
                "line " + std::to_string(line.value) + " is not registered");
  }
}

std::span<std::byte> Machine::line_bytes(LineId line) {
  check(line);
  return {data_.data() + std::size_t{line.value} * kLineSize, kLineSize};
}

std::span<std::byte> Machine::bytes(const SharedBuffer& buf) {
  check(buf.base);
  return {data_.data() + std::size_t{buf.base.value} * kLineSize,
          buf.alloc_bytes};
}

void Machine::record(LineId line, AccessKind kind, Actor actor) {
  const std::uint64_t seq = seq_++;
  if (cfg_.record_events) log_.push_back({now_, seq, actor, kind, line});
}

Tick Machine::access(LineId line, AccessKind kind, Actor actor) {
  check(line);
  if (kind == AccessKind::Flush) {
    flush(line, actor);
    return 0;
  }
  LineState& s = lines_[line.value];
  const Tick latency = s.cached ? cfg_.hit_latency : cfg_.miss_latency;
  s.cached = true;
  if (kind == AccessKind::Write) ++s.version;
  record(line, kind, actor);
  return latency;
}

void Machine::flush(LineId line, Actor actor) {
  check(line);
  lines_[line.value].cached = false;
  record(line, AccessKind::Flush, actor);
}

Tick Machine::record_access(LineId line, AccessKind kind, Actor actor) {
  const Tick latency = access(line, kind, actor);
  advance(cfg_.access_ticks);
  return latency;
}

bool Machine::cached(LineId line) const {
  check(line);
  return lines_[line.value].cached;
}

std::uint64_t Machine::version(LineId line) const {
  check(line);
  return lines_[line.value].version;
}

void Machine::lock(LineId line) {
  check(line);
  if (lines_[line.value].locked) {
    throw_error(ErrorKind::State, "line already locked");
  }
  lines_[line.value].locked = true;
}

void Machine::unlock(LineId line) {
  check(line);
  lines_[line.value].locked = false;
}

bool Machine::locked(LineId line) const {
  check(line);
  return lines_[line.value].locked;
}

void Machine::set_now(Tick t) {
  if (t < now_) {
    throw_error(ErrorKind::State, "virtual clock moved backwards (" +
                                      std::to_string(now_) + " -> " +
                                      std::to_string(t) + ")");
  }
  now_ = t;
}

std::string Machine::log_csv() const {
  std::string out = "vtime,actor,kind,line\n";
  for (const AccessEvent& e : log_) {
    out += std::to_string(e.vtime);
    out += ',';
    out += to_string(e.actor);
    out += ',';
    out += to_string(e.kind);
    out += ',';
    out += std::to_string(e.line.value);
    out += '\n';
  }
  return out;
}

bool Timeline::ordered_before(Tick ta, std::uint32_t a, Tick tb,
                              std::uint32_t b) const {
  if (ta != tb) return ta < tb;
  const std::uint64_t ka = key(a, ta), kb = key(b, tb);
  if (ka != kb) return ka < kb;
  return a < b;
}

void Timeline::run_before(Tick t, std::uint32_t proc_id) {
  for (;;) {
    Process* best = nullptr;
    Tick best_t = 0;
    for (Process* p : procs_) {
      const auto nt = p->next_time();
      if (!nt || !ordered_before(*nt, p->id(), t, proc_id)) continue;
      if (!best || ordered_before(*nt, p->id(), best_t, best->id())) {
        best = p;
        best_t = *nt;
      }
    }
    if (!best) break;
    machine_.set_now(best_t);
    best->step(machine_);
  }
  machine_.set_now(t);
}

void Timeline::finish(Tick t, Tick limit) {
  for (Process* p : procs_) p->on_target_return(t);
  for (;;) {
    Process* best = nullptr;
    Tick best_t = 0;
    for (Process* p : procs_) {
      const auto nt = p->next_time();
      if (!nt) continue;
      if (!best || ordered_before(*nt, p->id(), best_t, best->id())) {
        best = p;
        best_t = *nt;
      }
    }
    if (!best) return;
    if (best_t > t + limit) {
      throw_error(ErrorKind::Resource, "adversary still active " +
                                           std::to_string(limit) +
                                           " ticks after target return");
    }
    machine_.set_now(best_t);
    best->step(machine_);
  }
}

}  // namespace dfetch::sim
