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
#include <tuple>

#include "dfetch/targets.h"

namespace dfetch {
namespace {

using Access = std::tuple<Tick, int, std::size_t, sim::AccessKind>;

// Target accesses from the event log, mapped back to (param, line index).
std::vector<Access> logged(const sim::Machine& m, const ArgRecord& a) {
  std::vector<Access> out;
  for (const sim::AccessEvent& e : m.log()) {
    if (e.actor != Actor::Target) continue;
    for (const Argument& arg : a.args) {
      if (!arg.shared()) continue;
      const auto& ids = arg.buffer.line_ids;
      for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i].value == e.line.value) out.emplace_back(e.vtime, arg.index, i, e.kind);
      }
    }
  }
  return out;
}

std::vector<Access> scripted(const TargetDescriptor& t, const ArgRecord& a) {
  std::vector<Access> out;
  Tick at = 0;
  for (const ScriptStep& s : t.access_script(a, {})) {
    at += s.gap;
    out.emplace_back(at, s.param, s.line, s.kind);
  }
  return out;
}

TEST(Targets, AccessScriptsMatchTheEventLog) {
  for (const TargetDescriptor& t : registry()) {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      sim::Machine m;
      SimProbe probe(m);
      const ArgRecord a = generate_args(probe, t.params, seed, {true});
      const InvokeResult r = invoke_plain(m, t, a);
      EXPECT_FALSE(r.rejected) << t.id << " seed " << seed;
      EXPECT_EQ(r.verdict, Verdict::Benign) << t.id;
      EXPECT_EQ(logged(m, a), scripted(t, a)) << t.id << " seed " << seed;
    }
  }
}

TEST(Targets, AccessTimesFollowTheScript) {
  const TargetDescriptor& t = find_target("dedupe_analog");
  SimProbe probe{SimConfig{}};
  const ArgRecord a = generate_args(probe, t.params, 1, {true});
  const std::vector<Tick> times = access_times(t, a, 0);
  ASSERT_EQ(times.size(), 2u);
  EXPECT_EQ(times[1] - times[0], dedupe_gap(SimConfig{}));
  TargetOptions o;
  o.gap = 7;
  EXPECT_EQ(access_times(t, a, 0, o)[1] - access_times(t, a, 0, o)[0], 7);
}

TEST(Targets, AnnotationsAndCategories) {
  std::set<std::string> exploitable, corpus_ids;
  for (const TargetDescriptor* t : corpus()) {
    corpus_ids.insert(t->id);
    if (t->annotation == Annotation::Exploitable) exploitable.insert(t->id);
  }
  EXPECT_EQ(exploitable, (std::set<std::string>{"naive_strcpy", "dedupe_analog",
                                                "switch_jump_table", "multi_check_3"}));
  EXPECT_TRUE(corpus_ids.count("single_fetch"));
  EXPECT_FALSE(corpus_ids.count("two_fetch"));
  EXPECT_EQ(find_target("inout_buffer").category, Category::SharedInOut);
  EXPECT_EQ(find_target("filename_cache").category, Category::Filenames);
  EXPECT_EQ(find_target("safe_retry_copy").category, Category::Strings);
  EXPECT_EQ(find_target("sanity_ok").category, Category::SanityCheck);
  EXPECT_EQ(find_target("struct_members").category, Category::StructureElements);
  EXPECT_EQ(find_target("single_fetch").annotation, Annotation::SingleFetch);
}

TEST(Targets, UnknownIdIsUsageError) {
  try {
    find_target("no_such_target");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Usage);
  }
}

TEST(Targets, GapArithmetic) {
  EXPECT_EQ(gap_ticks(2.0, 3.0), 6);
  EXPECT_EQ(gap_ticks(0.5, 3.0), 2);  // 1.5 rounds half away from zero
  // 10000 / 298 probe cycles at 3 ticks each.
  EXPECT_EQ(dedupe_gap(SimConfig{}), 101);
}

TEST(Targets, DoubleFetchTargetsReadTheirBugParamAtLeastTwice) {
  for (const TargetDescriptor& t : registry()) {
    SimProbe probe{SimConfig{}};
    const ArgRecord a = generate_args(probe, t.params, 3, {true});
    int reads = 0;
    for (const ScriptStep& s : t.access_script(a, {})) reads += s.param == t.bug_param;
    if (t.annotation == Annotation::SingleFetch) {
      EXPECT_EQ(t.bug_param, -1) << t.id;
    } else {
      EXPECT_GE(reads, 2) << t.id;
    }
  }
}

TEST(Targets, OutOfRangeInputsAreRejected) {
  const TargetDescriptor& t = find_target("switch_jump_table");
  sim::Machine m;
  SimProbe probe(m);
  ArgRecord a = generate_args(probe, t.params, 0, {true});
  set_int_arg(probe, a.args[0], 6);
  EXPECT_TRUE(invoke_plain(m, t, a).rejected);
  set_int_arg(probe, a.args[0], -1);
  EXPECT_TRUE(invoke_plain(m, t, a).rejected);
  set_int_arg(probe, a.args[0], 5);
  EXPECT_FALSE(invoke_plain(m, t, a).rejected);
}

}  // namespace
}  // namespace dfetch
