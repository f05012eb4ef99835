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

#include <set>

#include "dfetch/schedule.h"
#include "dfetch/trigger.h"

namespace dfetch {
namespace {

// Pascal's triangle, built by addition only.
std::vector<std::vector<double>> pascal(int rows) {
  std::vector<std::vector<double>> t(rows + 1);
  for (int n = 0; n <= rows; ++n) {
    t[n].assign(n + 1, 1.0);
    for (int k = 1; k < n; ++k) t[n][k] = t[n - 1][k - 1] + t[n - 1][k];
  }
  return t;
}

TEST(Binomial, MatchesPascalsTriangle) {
  const auto t = pascal(60);
  for (int n = 0; n <= 60; ++n) {
    for (int k = 0; k <= n; ++k) EXPECT_DOUBLE_EQ(binomial(n, k), t[n][k]) << n << "," << k;
  }
  EXPECT_EQ(binomial(3, 5), 0.0);
}

ScheduledBody body_of(const TargetDescriptor& t) {
  return [&t](UserMemory& m, const ArgRecord& a) { return t.invoke(m, a, {}); };
}

ArgFactory args_of(const TargetDescriptor& t, std::uint64_t seed) {
  return [&t, seed](ProbeBackend& b) { return generate_args(b, t.params, seed, {true}); };
}

AdversaryProgram writes(const TargetDescriptor& t, std::uint64_t seed, int n,
                        MutationKind k = MutationKind::RandomValue) {
  SimProbe scratch{SimConfig{}};
  return flip_program(scratch, args_of(t, seed)(scratch), t.bug_param, {k, seed}, n);
}

TEST(Interleavings, ExhaustiveEnumerationIsCompleteAndDistinct) {
  const TargetDescriptor& t = find_target("multi_check_3");
  const SimConfig cfg;
  const int steps = count_target_steps(cfg, body_of(t), args_of(t, 1));
  EXPECT_EQ(steps, 4);
  for (int a = 1; a <= 4; ++a) {
    const InterleavingRun run =
        run_interleavings(cfg, body_of(t), args_of(t, 1), writes(t, 1, a), 1'000'000, 1);
    EXPECT_FALSE(run.sampled);
    EXPECT_EQ(run.target_steps, steps);
    EXPECT_EQ(run.adversary_steps, a);
    EXPECT_DOUBLE_EQ(run.schedule_count, pascal(steps + a)[steps + a][a]);
    EXPECT_EQ(static_cast<double>(run.outcomes.size()), run.schedule_count);
    std::set<std::string> seen;
    for (const ScheduleOutcome& o : run.outcomes) {
      o.schedule.check(steps, a);
      seen.insert(o.schedule.to_json());
    }
    EXPECT_EQ(seen.size(), run.outcomes.size());
  }
}

TEST(Interleavings, SamplesWhenTheSpaceIsTooLarge) {
  const TargetDescriptor& t = find_target("multi_check_8");
  const InterleavingRun run = run_interleavings(SimConfig{}, body_of(t), args_of(t, 2),
                                                writes(t, 2, 12), 500, 7);
  EXPECT_TRUE(run.sampled);
  EXPECT_EQ(run.outcomes.size(), 500u);
  std::set<std::string> seen;
  for (const ScheduleOutcome& o : run.outcomes) {
    o.schedule.check(run.target_steps, run.adversary_steps);
    seen.insert(o.schedule.to_json());
  }
  EXPECT_EQ(seen.size(), 500u);
  // Same seed, same sample.
  const InterleavingRun again = run_interleavings(SimConfig{}, body_of(t), args_of(t, 2),
                                                  writes(t, 2, 12), 500, 7);
  for (std::size_t i = 0; i < 500; ++i) {
    EXPECT_EQ(run.outcomes[i].schedule.to_json(), again.outcomes[i].schedule.to_json());
  }
}

TEST(Interleavings, ReplayReproducesEveryOutcome) {
  const TargetDescriptor& t = find_target("switch_jump_table");
  const AdversaryProgram p = writes(t, 3, 2);
  const InterleavingRun run =
      run_interleavings(SimConfig{}, body_of(t), args_of(t, 3), p, 1000, 3);
  for (const ScheduleOutcome& o : run.outcomes) {
    const Schedule s = Schedule::from_json(o.schedule.to_json());
    const InvokeResult r = replay_schedule(SimConfig{}, body_of(t), args_of(t, 3), p, s);
    EXPECT_EQ(r.verdict, o.result.verdict);
    EXPECT_EQ(r.ret, o.result.ret);
  }
}

TEST(Interleavings, AdversaryFirstAndLastAreBenign) {
  // Writing before the first fetch or after the last one is not a race.
  for (const char* id : {"naive_strcpy", "dedupe_analog", "switch_jump_table"}) {
    const TargetDescriptor& t = find_target(id);
    const InterleavingRun run =
        run_interleavings(SimConfig{}, body_of(t), args_of(t, 4), writes(t, 4, 1), 1000, 4);
    ASSERT_GE(run.outcomes.size(), 2u);
    EXPECT_NE(run.outcomes.front().result.verdict, Verdict::Corrupted) << id;
    EXPECT_NE(run.outcomes.back().result.verdict, Verdict::Corrupted) << id;
  }
}

TEST(Interleavings, AnnotationMatchesOracle) {
  // Exploitable iff some single-write schedule under some mutation corrupts.
  for (const TargetDescriptor& t : registry()) {
    if (t.bug_param < 0) continue;
    bool corrupted = false;
    for (std::uint64_t seed = 0; seed < 8 && !corrupted; ++seed) {
      for (MutationKind k : applicable_mutations(t.params[t.bug_param].kind)) {
        const InterleavingRun run = run_interleavings(
            SimConfig{}, body_of(t), args_of(t, seed), writes(t, seed, 1, k), 1000, seed);
        for (const ScheduleOutcome& o : run.outcomes) {
          corrupted |= o.result.verdict == Verdict::Corrupted;
        }
      }
    }
    EXPECT_EQ(corrupted, t.annotation == Annotation::Exploitable) << t.id;
  }
}

TEST(Schedule, JsonFormatAndRoundTrip) {
  Schedule s;
  s.order = {{ScheduleActor::Target, 0}, {ScheduleActor::Trigger, 0},
             {ScheduleActor::Target, 1}};
  EXPECT_EQ(s.to_json(), R"([["Target",0],["Trigger",0],["Target",1]])");
  EXPECT_EQ(Schedule::from_json(s.to_json()).order, s.order);
  s.check(2, 1);
  EXPECT_THROW(s.check(3, 1), Error);
  EXPECT_THROW(Schedule::from_json("[[\"Bob\",0]]"), Error);
  EXPECT_THROW(Schedule::from_json("{}"), Error);
  Schedule bad;
  bad.order = {{ScheduleActor::Target, 1}, {ScheduleActor::Target, 0}};
  EXPECT_THROW(bad.check(2, 0), Error);
}

TEST(AdversaryProgram, ValidatesParametersAndProgress) {
  const TargetDescriptor& t = find_target("two_fetch");
  SimProbe probe{SimConfig{}};
  const ArgRecord a = generate_args(probe, t.params, 0, {true});
  AdversaryProgram p;
  p.steps = {AdvStep::write(5, {std::byte{1}})};
  EXPECT_THROW(p.validate(a), Error);
  p.steps = {AdvStep::write(0, {})};
  EXPECT_THROW(p.validate(a), Error);
  p.steps = {AdvStep::wait(0)};
  p.repeat = true;
  EXPECT_THROW(p.validate(a), Error);
  p.steps = {AdvStep::write(0, {std::byte{1}})};
  p.validate(a);
}

}  // namespace
}  // namespace dfetch
