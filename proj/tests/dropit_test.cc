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

#include "dfetch/dropit.h"
#include "dfetch/schedule.h"
#include "dfetch/trigger.h"

namespace dfetch {
namespace {

struct SimRig {
  sim::Machine m;
  SimProbe probe{m};
  sim::Timeline tl{m, 1};
  SimMemory mem{tl, Actor::Target, 0};
};

Argument int_arg(SimProbe& probe, std::int64_t v) {
  ParamSpec s;
  s.name = "v";
  s.kind = ParamKind::IntScalar;
  s.lo = s.hi = v;
  return generate_args(probe, {s}, 0, {true}).args[0];
}

TEST(Protect, NestedRegionsAreUsageErrors) {
  SimRig r;
  TxRegion outer, inner;
  try {
    protect(outer, r.mem, [&](UserMemory& tx) { protect(inner, tx, [](UserMemory&) {}, [] {}); },
            [] {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Usage);
  }
  // The guard was released; a fresh region works.
  EXPECT_EQ(protect(outer, r.mem, [](UserMemory&) {}, [] {}).status, TxStatus::Committed);
}

TEST(Protect, HardwareModeNeedsRtm) {
  if (rtm_supported()) {
    EXPECT_NO_THROW(TxRegion({TxMode::HardwareTx, 10}));
    return;
  }
  try {
    TxRegion r({TxMode::HardwareTx, 10});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Capability);
  }
}

TEST(Protect, QuietBodyCommitsFirstTry) {
  SimRig r;
  Argument a = int_arg(r.probe, 5);
  TxRegion region;
  std::int64_t seen = 0;
  const TxResult res = protect(region, r.mem, [&](UserMemory& tx) { seen = tx.fetch_i64(a); },
                               [] { FAIL(); });
  EXPECT_EQ(res.status, TxStatus::Committed);
  EXPECT_EQ(res.attempts, 1);
  EXPECT_EQ(seen, 5);
  EXPECT_EQ(region.stats().commits, 1u);
  EXPECT_EQ(region.stats().aborts, 0u);
}

TEST(Protect, WritesAreBufferedUntilCommit) {
  SimRig r;
  Argument a = int_arg(r.probe, 5);
  const LineId l = a.buffer.line_ids[0];
  TxRegion region;
  protect(region, r.mem, [&](UserMemory& tx) {
    tx.store_i64(a, 0, 9);
    EXPECT_EQ(r.m.version(l), 0u);  // not yet visible
    EXPECT_EQ(tx.fetch_i64(a), 9);  // but read back inside
  }, [] {});
  EXPECT_EQ(r.mem.fetch_i64(a), 9);
  EXPECT_GT(r.m.version(l), 0u);
}

TEST(Protect, ThrowingBodyDiscardsWrites) {
  SimRig r;
  Argument a = int_arg(r.probe, 5);
  TxRegion region;
  EXPECT_THROW(protect(region, r.mem, [&](UserMemory& tx) {
    tx.store_i64(a, 0, 9);
    throw std::runtime_error("boom");
  }, [] {}), std::runtime_error);
  EXPECT_EQ(r.mem.fetch_i64(a), 5);
  EXPECT_EQ(region.stats().explicit_aborts, 1u);
}

TEST(Protect, ConflictRetriesThenFallsBack) {
  // A writer that changes the line between every pair of reads.
  SimRig r;
  Argument a = int_arg(r.probe, 5);
  TxRegion region({TxMode::EmulatedTx, 3});
  int fallbacks = 0;
  std::int64_t v = 5;
  const TxResult res = protect(region, r.mem, [&](UserMemory& tx) {
    tx.fetch_i64(a);
    r.probe.bytes(a.buffer)[0] = static_cast<std::byte>(++v);
    r.m.access(a.buffer.line_ids[0], sim::AccessKind::Write, Actor::Trigger);
    tx.fetch_i64(a);
  }, [&] { ++fallbacks; });
  EXPECT_EQ(res.status, TxStatus::FellBack);
  EXPECT_EQ(res.attempts, 4);
  EXPECT_EQ(fallbacks, 1);
  EXPECT_EQ(region.stats().conflict_aborts, 4u);
  EXPECT_EQ(region.stats().fallbacks, 1u);
}

TargetDescriptor protected_(const std::string& id, TxMode mode = TxMode::EmulatedTx,
                            int retries = 1000) {
  return protect_target(find_target(id), {mode, retries});
}

TEST(ProtectTarget, SingleTriggeredFlipCommitsOnRetry) {
  const TargetDescriptor t = protected_("naive_strcpy");
  auto backend = sim_factory(SimConfig{})();
  const ArgRecord a = generate_args(*backend, t.params, 2, {true});
  ExploitRequest req;
  req.strategy.kind = MutationKind::FlipLSB;
  const ExploitOutcome o = exploit_invoke(*backend, t, a, req, 2);
  EXPECT_TRUE(o.triggered);
  EXPECT_NE(o.result.verdict, Verdict::Corrupted);
  EXPECT_EQ(o.result.attempts, 2);
}

TEST(ProtectTarget, PersistentFlippingEndsInFallback) {
  auto stats = std::make_shared<TxStats>();
  const TargetDescriptor t =
      protect_target(find_target("dedupe_analog"), {TxMode::EmulatedTx, 5}, stats);
  auto backend = sim_factory(SimConfig{})();
  const ArgRecord a = generate_args(*backend, t.params, 2, {true});
  ExploitRequest req;
  req.method = Method::ValueFlipping;
  req.strategy.kind = MutationKind::Increment;
  const ExploitOutcome o = exploit_invoke(*backend, t, a, req, 2);
  EXPECT_EQ(o.result.verdict, Verdict::FaultDetected);
  EXPECT_EQ(stats->fallbacks, 1u);
  EXPECT_EQ(stats->attempts, 6u);
}

TEST(ProtectTarget, NoAttackNoOverhead) {
  for (const TargetDescriptor& base : registry()) {
    const TargetDescriptor t = protect_target(base, {});
    sim::Machine m;
    SimProbe probe(m);
    const ArgRecord a = generate_args(probe, t.params, 4, {true});
    const InvokeResult plain = invoke_plain(m, base, a);
    sim::Machine m2;
    SimProbe probe2(m2);
    const ArgRecord a2 = generate_args(probe2, t.params, 4, {true});
    const InvokeResult wrapped = invoke_plain(m2, t, a2);
    EXPECT_EQ(wrapped.verdict, plain.verdict) << base.id;
    EXPECT_EQ(wrapped.ret, plain.ret) << base.id;
    EXPECT_EQ(wrapped.attempts, 1) << base.id;
  }
}

ScheduledBody body_of(const TargetDescriptor& t) {
  return [t](UserMemory& m, const ArgRecord& a) { return t.invoke(m, a, {}); };
}

TEST(ProtectTarget, NoScheduleCorruptsAProtectedTarget) {
  for (const char* id : {"naive_strcpy", "dedupe_analog", "switch_jump_table", "multi_check_3"}) {
    const TargetDescriptor& base = find_target(id);
    for (TxMode mode : {TxMode::EmulatedTx, TxMode::LockFallback}) {
      const TargetDescriptor t = protect_target(base, {mode, 1000});
      for (std::uint64_t seed = 0; seed < 4; ++seed) {
        const ArgFactory make = [&base, seed](ProbeBackend& b) {
          return generate_args(b, base.params, seed, {true});
        };
        for (MutationKind k : applicable_mutations(base.params[base.bug_param].kind)) {
          SimProbe scratch{SimConfig{}};
          for (int writes : {1, 2, 3}) {
            const AdversaryProgram p =
                flip_program(scratch, make(scratch), base.bug_param, {k, seed}, writes);
            const InterleavingRun run =
                run_interleavings(SimConfig{}, body_of(t), make, p, 20000, seed);
            for (const ScheduleOutcome& o : run.outcomes) {
              ASSERT_NE(o.result.verdict, Verdict::Corrupted)
                  << id << " " << to_string(mode) << " " << o.schedule.to_json();
            }
          }
        }
      }
    }
  }
}

TEST(ProtectedStrcpy, NeverCorruptedUnderTrigger) {
  const TargetDescriptor& t = find_target("naive_strcpy");
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    SimRig r;
    const ArgRecord a = generate_args(r.probe, t.params, seed, {true});
    TxRegion region;
    const InvokeResult res = protected_strcpy(r.mem, a.args[0], region);
    EXPECT_EQ(res.verdict, Verdict::Benign);
    EXPECT_EQ(res.ret, a.args[0].value);
  }
}

TEST(Bench, NeedsEnoughTrialsAndReportsThreeModes) {
  SimProbe probe{SimConfig{}};
  probe.set_profile(sim_profile(SimConfig{}));
  EXPECT_THROW(bench_switch(probe, 100, TxMode::EmulatedTx, 1), Error);
  const auto rows = bench_switch(probe, 10000, TxMode::EmulatedTx, 1);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].mode, "unprotected");
  EXPECT_EQ(rows[1].mode, "spinlock");
  EXPECT_EQ(rows[2].mode, "dropit");
  // Virtual costs: one access; lock adds three more; an uncontended region
  // adds none.
  EXPECT_EQ(rows[0].mean_cost, 1.0);
  EXPECT_EQ(rows[1].mean_cost, 4.0);
  EXPECT_EQ(rows[2].mean_cost, 1.0);
}

TEST(TxMode, NamesRoundTrip) {
  for (TxMode m : {TxMode::HardwareTx, TxMode::EmulatedTx, TxMode::LockFallback}) {
    EXPECT_EQ(parse_tx_mode(to_string(m)), m);
  }
  EXPECT_THROW(parse_tx_mode("Magic"), Error);
}

}  // namespace
}  // namespace dfetch
