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

#include <algorithm>
#include <cstring>
#include <set>

#include "dfetch/fuzzer.h"

namespace dfetch {
namespace {

std::int64_t read_i64(SimProbe& p, const Argument& a) {
  std::int64_t v = 0;
  std::memcpy(&v, p.bytes(a.buffer).data(), sizeof v);
  return v;
}

TEST(GenerateArgs, SameSeedSameBytes) {
  for (const TargetDescriptor& t : registry()) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      SimProbe p1{SimConfig{}}, p2{SimConfig{}};
      const ArgRecord a = generate_args(p1, t.params, seed);
      const ArgRecord b = generate_args(p2, t.params, seed);
      ASSERT_EQ(a.args.size(), b.args.size());
      for (std::size_t i = 0; i < a.args.size(); ++i) {
        EXPECT_EQ(a.args[i].value, b.args[i].value);
        EXPECT_EQ(a.args[i].valid, b.args[i].valid);
        if (a.args[i].shared()) {
          const auto x = p1.bytes(a.args[i].buffer);
          const auto y = p2.bytes(b.args[i].buffer);
          EXPECT_TRUE(std::equal(x.begin(), x.end(), y.begin(), y.end())) << t.id;
        }
      }
    }
  }
}

TEST(GenerateArgs, ValidValuesRespectBoundsAndStringsAreTerminated) {
  for (const TargetDescriptor& t : registry()) {
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
      SimProbe p{SimConfig{}};
      const ArgRecord a = generate_args(p, t.params, seed);
      for (const Argument& arg : a.args) {
        const ParamSpec& s = arg.spec;
        if (s.kind == ParamKind::IntScalar) {
          const bool inside = arg.value >= s.lo && arg.value <= s.hi;
          EXPECT_EQ(inside, arg.valid) << t.id;
          if (arg.shared()) {
            EXPECT_EQ(read_i64(p, arg), arg.value);
          }
        }
        if (s.kind == ParamKind::CString || s.kind == ParamKind::FileNameLike) {
          const auto bytes = p.bytes(arg.buffer);
          ASSERT_LT(static_cast<std::size_t>(arg.value), s.size_bytes) << t.id;
          EXPECT_EQ(bytes[static_cast<std::size_t>(arg.value)], std::byte{0});
          for (std::int64_t i = 0; i < arg.value; ++i) {
            EXPECT_NE(bytes[static_cast<std::size_t>(i)], std::byte{0});
          }
          if (arg.valid) {
            EXPECT_GE(arg.value, s.lo);
            EXPECT_LE(arg.value, s.hi);
          }
        }
        if (!arg.shared()) {
          EXPECT_TRUE(arg.buffer.line_ids.empty());
        }
      }
    }
  }
}

TEST(GenerateArgs, ValidOnlyNeverLeavesBounds) {
  for (const TargetDescriptor& t : registry()) {
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
      SimProbe p{SimConfig{}};
      for (const Argument& arg : generate_args(p, t.params, seed, {true}).args) {
        EXPECT_TRUE(arg.valid) << t.id;
      }
    }
  }
}

TEST(GenerateArgs, MostInvocationsAreAccepted) {
  for (const TargetDescriptor& t : registry()) {
    int accepted = 0;
    constexpr int kRuns = 1000;
    for (int seed = 0; seed < kRuns; ++seed) {
      sim::Machine m;
      SimProbe p(m);
      const ArgRecord a = generate_args(p, t.params, static_cast<std::uint64_t>(seed));
      accepted += !invoke_plain(m, t, a).rejected;
    }
    EXPECT_GE(accepted, kRuns * 3 / 4) << t.id;
  }
}

TEST(GenerateArgs, SetIntArgRewritesSharedValue) {
  const TargetDescriptor& t = find_target("dedupe_analog");
  SimProbe p{SimConfig{}};
  ArgRecord a = generate_args(p, t.params, 3, {true});
  set_int_arg(p, a.args[0], 12345);
  EXPECT_EQ(read_i64(p, a.args[0]), 12345);
  EXPECT_EQ(a.args[0].value, 12345);
  EXPECT_THROW(set_int_arg(p, a.args[1], 1), Error);
}

CampaignConfig small(std::uint64_t seed, int workers = 1) {
  CampaignConfig c;
  c.budget = 2000;
  c.seed = seed;
  c.workers = workers;
  return c;
}

std::vector<const TargetDescriptor*> only(std::initializer_list<const char*> ids) {
  std::vector<const TargetDescriptor*> out;
  for (const char* id : ids) out.push_back(&find_target(id));
  return out;
}

TEST(Campaign, SingleFetchTargetYieldsNothing) {
  const CampaignReport r =
      run_campaign(sim_factory(SimConfig{}), only({"single_fetch"}), small(1));
  EXPECT_TRUE(r.candidates.empty());
  EXPECT_EQ(r.invocations.at("single_fetch"), 2000u);
  EXPECT_EQ(r.faults, 0u);
}

TEST(Campaign, FindsDoubleFetchesAndLabelsThem) {
  const CampaignReport r = run_campaign(
      sim_factory(SimConfig{}),
      only({"single_fetch", "dedupe_analog", "safe_retry_copy", "sanity_ok"}), small(2));
  ASSERT_EQ(r.candidates.size(), 3u);
  EXPECT_FALSE(r.find("single_fetch"));
  const CandidateEntry* d = r.find("dedupe_analog", 0);
  ASSERT_TRUE(d);
  EXPECT_TRUE(d->corrupted());
  EXPECT_EQ(d->label, std::string(to_string(Category::ExploitableBug)));
  EXPECT_EQ(d->typical_fetch_count(), 2);
  const CandidateEntry* s = r.find("safe_retry_copy");
  ASSERT_TRUE(s);
  EXPECT_FALSE(s->corrupted());
  EXPECT_FALSE(s->exploits.empty());
  EXPECT_EQ(s->label, std::string(to_string(Category::Strings)));
  const CandidateEntry* k = r.find("sanity_ok");
  ASSERT_TRUE(k);
  EXPECT_EQ(k->label, std::string(to_string(Category::SanityCheck)));
}

TEST(Campaign, ReproducibleForAFixedSeedAndWorkerCount) {
  for (int workers : {1, 3}) {
    const CampaignReport a = run_campaign(sim_factory(SimConfig{}), corpus(), small(7, workers));
    const CampaignReport b = run_campaign(sim_factory(SimConfig{}), corpus(), small(7, workers));
    EXPECT_EQ(a.invocations, b.invocations);
    EXPECT_EQ(a.rejected, b.rejected);
    ASSERT_EQ(a.candidates.size(), b.candidates.size());
    for (std::size_t i = 0; i < a.candidates.size(); ++i) {
      EXPECT_EQ(a.candidates[i].target, b.candidates[i].target);
      EXPECT_EQ(a.candidates[i].observed_fetch_counts, b.candidates[i].observed_fetch_counts);
      EXPECT_EQ(a.candidates[i].first_seen, b.candidates[i].first_seen);
      EXPECT_EQ(a.candidates[i].exploits.size(), b.candidates[i].exploits.size());
      EXPECT_EQ(a.candidates[i].label, b.candidates[i].label);
    }
  }
}

TEST(Campaign, BudgetIsSpentExactly) {
  const CampaignReport r = run_campaign(sim_factory(SimConfig{}), corpus(), small(4));
  std::uint64_t total = 0;
  for (const auto& [id, n] : r.invocations) total += n;
  // Iterations are either monitored invocations or exploit attempts.
  for (const CandidateEntry& c : r.candidates) {
    for (const ExploitRecord& e : c.exploits) total += e.iteration < 2000;
  }
  EXPECT_EQ(total, 2000u);
}

TEST(Campaign, CandidatesAreExactlyTheAnnotatedMultiFetchTargets) {
  std::set<std::string> expected;
  for (const TargetDescriptor* t : corpus()) {
    if (t->annotation != Annotation::SingleFetch) expected.insert(t->id);
  }
  const CampaignReport r = run_campaign(sim_factory(SimConfig{}), corpus(), small(5));
  std::set<std::string> found;
  for (const CandidateEntry& c : r.candidates) {
    found.insert(c.target);
    EXPECT_EQ(c.param, find_target(c.target).bug_param) << c.target;
  }
  EXPECT_EQ(found, expected);
}

TEST(Campaign, TableTextListsEveryCandidate) {
  const CampaignReport r = run_campaign(sim_factory(SimConfig{}), corpus(), small(6));
  const std::string text = table1_text(r);
  for (const CandidateEntry& c : r.candidates) {
    EXPECT_NE(text.find(c.target), std::string::npos) << c.target;
  }
}

TEST(CandidateLabel, FollowsCategoryAndOutcome) {
  EXPECT_EQ(candidate_label(find_target("dedupe_analog"), true),
            std::string(to_string(Category::ExploitableBug)));
  EXPECT_EQ(candidate_label(find_target("dedupe_analog"), false), "SanityCheck-or-unknown");
  EXPECT_EQ(candidate_label(find_target("filename_cache"), false),
            std::string(to_string(Category::Filenames)));
}

}  // namespace
}  // namespace dfetch
