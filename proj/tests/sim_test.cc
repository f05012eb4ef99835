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

#include <gtest/gtest.h>

#include <map>
#include <random>

#include "dfetch/memory.h"
#include "dfetch/sim.h"

namespace dfetch::sim {
namespace {

TEST(Machine, CacheStateAgreesWithReplayedLog) {
  // Random instrumented operations; an independent replay of the event log
  // must arrive at the same cache and version state, and each access must
  // report the latency its replayed state implies.
  SimConfig cfg;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Machine m(cfg);
    const SharedBuffer a = m.allocate(256);
    const SharedBuffer b = m.allocate(64);
    std::vector<LineId> lines = a.line_ids;
    lines.push_back(b.line_ids[0]);
    std::mt19937_64 rng(seed);
    std::map<std::uint32_t, bool> cached;
    std::map<std::uint32_t, std::uint64_t> version;
    for (int i = 0; i < 500; ++i) {
      const LineId l = lines[rng() % lines.size()];
      const auto op = rng() % 3;
      m.advance(static_cast<Tick>(rng() % 3));
      if (op == 2) {
        m.flush(l, Actor::Monitor);
        cached[l.value] = false;
      } else {
        const bool was = cached[l.value];
        const Tick lat = m.access(l, op == 0 ? AccessKind::Read : AccessKind::Write,
                                  Actor::Target);
        EXPECT_EQ(lat, was ? cfg.hit_latency : cfg.miss_latency);
        cached[l.value] = true;
        if (op == 1) ++version[l.value];
      }
    }
    // Replay the log from scratch.
    std::map<std::uint32_t, bool> replay_cached;
    std::map<std::uint32_t, std::uint64_t> replay_version;
    Tick last = 0;
    std::uint64_t last_seq = 0;
    for (const AccessEvent& e : m.log()) {
      EXPECT_GE(e.vtime, last);
      if (&e != &m.log().front()) {
        EXPECT_GT(e.seq, last_seq);
      }
      last = e.vtime;
      last_seq = e.seq;
      if (e.kind == AccessKind::Flush) {
        replay_cached[e.line.value] = false;
      } else {
        replay_cached[e.line.value] = true;
        if (e.kind == AccessKind::Write) ++replay_version[e.line.value];
      }
    }
    for (LineId l : lines) {
      EXPECT_EQ(m.cached(l), replay_cached[l.value]);
      EXPECT_EQ(m.cached(l), cached[l.value]);
      EXPECT_EQ(m.version(l), replay_version[l.value]);
      EXPECT_EQ(m.version(l), version[l.value]);
    }
  }
}

TEST(Machine, ClockNeverMovesBackwards) {
  Machine m;
  m.set_now(10);
  try {
    m.set_now(9);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::State);
  }
  EXPECT_EQ(m.now(), 10);
}

TEST(Machine, UnregisteredAccessIsUsageError) {
  Machine m;
  try {
    m.access(LineId{3}, AccessKind::Read, Actor::Target);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Usage);
  }
}

TEST(Machine, LogCsvHasHeaderAndOneRowPerEvent) {
  Machine m;
  const SharedBuffer b = m.allocate(64);
  m.access(b.line_ids[0], AccessKind::Read, Actor::Target);
  m.advance(2);
  m.flush(b.line_ids[0], Actor::Monitor);
  const std::string csv = m.log_csv();
  EXPECT_EQ(csv.rfind("vtime,actor,kind,line\n", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
  EXPECT_NE(csv.find("2,Monitor,Flush,0"), std::string::npos);
}

TEST(Machine, RecordingCanBeTurnedOff) {
  SimConfig cfg;
  cfg.record_events = false;
  Machine m(cfg);
  const SharedBuffer b = m.allocate(64);
  m.access(b.line_ids[0], AccessKind::Read, Actor::Target);
  EXPECT_TRUE(m.log().empty());
  EXPECT_TRUE(m.cached(b.line_ids[0]));
}

// Records the order in which it ran.
class Recorder final : public Process {
 public:
  Recorder(std::uint32_t id, Tick start, Tick period, Tick stop,
           std::vector<std::pair<Tick, std::uint32_t>>* out)
      : Process(id), next_(start), period_(period), stop_(stop), out_(out) {}
  std::optional<Tick> next_time() const override {
    if (next_ > stop_) return std::nullopt;
    return next_;
  }
  void step(Machine& m) override {
    out_->push_back({m.now(), id()});
    next_ += period_;
  }

 private:
  Tick next_, period_, stop_;
  std::vector<std::pair<Tick, std::uint32_t>>* out_;
};

std::vector<std::pair<Tick, std::uint32_t>> run_recorders(std::uint64_t seed) {
  Machine m;
  Timeline tl(m, seed);
  std::vector<std::pair<Tick, std::uint32_t>> out;
  Recorder a(1, 0, 2, 40, &out), b(2, 1, 3, 40, &out), c(3, 0, 1, 40, &out);
  tl.add(&a);
  tl.add(&b);
  tl.add(&c);
  tl.run_before(20, Timeline::kTargetId);
  tl.finish(20, 100);
  return out;
}

TEST(Timeline, OrderIsByTickThenKeyAndReproducible) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto run = run_recorders(seed);
    EXPECT_EQ(run, run_recorders(seed));
    Machine m;
    Timeline tl(m, seed);
    for (std::size_t i = 1; i < run.size(); ++i) {
      const auto& [t0, p0] = run[i - 1];
      const auto& [t1, p1] = run[i];
      ASSERT_LE(t0, t1);
      if (t0 == t1) {
        EXPECT_LT(tl.key(p0, t0), tl.key(p1, t1));
      }
    }
  }
}

TEST(Timeline, RunBeforeStopsAtTheTargetsSlot) {
  Machine m;
  Timeline tl(m, 5);
  std::vector<std::pair<Tick, std::uint32_t>> out;
  Recorder a(1, 0, 1, 100, &out);
  tl.add(&a);
  tl.run_before(10, Timeline::kTargetId);
  EXPECT_EQ(m.now(), 10);
  ASSERT_FALSE(out.empty());
  // Everything that ran is ordered before the target's action at tick 10.
  for (const auto& [t, p] : out) {
    EXPECT_TRUE(t < 10 || tl.key(p, t) < tl.key(Timeline::kTargetId, 10));
  }
}

TEST(Timeline, FinishThrowsWhenProcessesNeverStop) {
  Machine m;
  Timeline tl(m, 1);
  std::vector<std::pair<Tick, std::uint32_t>> out;
  Recorder forever(1, 0, 1, 1'000'000, &out);
  tl.add(&forever);
  try {
    tl.finish(0, 50);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Resource);
  }
}

TEST(SimMemory, FetchStampsRelativeTimesAndLogsTargetReads) {
  Machine m;
  SimProbe probe(m);
  ParamSpec spec;
  spec.kind = ParamKind::Buffer;
  spec.size_bytes = 128;
  Argument a;
  a.spec = spec;
  a.buffer = probe.allocate_shared(128);
  Timeline tl(m, 0);
  m.set_now(100);
  SimMemory mem(tl, Actor::Target, m.now());
  mem.work(4);
  std::array<std::byte, 80> out{};
  EXPECT_EQ(mem.fetch(a, 32, out), 4);
  // Two lines touched, one access each.
  ASSERT_EQ(m.log().size(), 2u);
  EXPECT_EQ(m.log()[0].vtime, 104);
  EXPECT_EQ(m.log()[0].line.value, a.buffer.line_ids[0].value);
  EXPECT_EQ(m.log()[1].line.value, a.buffer.line_ids[1].value);
  EXPECT_EQ(mem.now(), 4 + 2 * m.config().access_ticks);
}

TEST(SplitLines, CoversRangeExactly) {
  SimProbe probe{SimConfig{}};
  const SharedBuffer b = probe.allocate_shared(300);
  for (std::size_t off = 0; off < 300; off += 7) {
    for (std::size_t len = 1; off + len <= 300; len += 13) {
      std::size_t covered = 0;
      for (const LineChunk& c : split_lines(b, off, len)) {
        EXPECT_EQ(c.buf_offset, covered);
        EXPECT_LE(c.line_offset + c.len, kLineSize);
        EXPECT_EQ(c.line.value, b.line_at(off + covered).value);
        covered += c.len;
      }
      EXPECT_EQ(covered, len);
    }
  }
}

}  // namespace
}  // namespace dfetch::sim
