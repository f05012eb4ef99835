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

#include "dfetch/report.h"

namespace dfetch {
namespace {

using nlohmann::json;

TEST(Envelope, CarriesSchemaKindSeedAndHash) {
  const json e = envelope("sweep", 42, config_hash("x"));
  EXPECT_EQ(e["schema_version"], kSchemaVersion);
  EXPECT_EQ(e["kind"], "sweep");
  EXPECT_EQ(e["seed"], 42);
  EXPECT_EQ(e["config_hash"], config_hash("x"));
}

TEST(ConfigHash, SixteenHexDigitsOfFnv1a) {
  // Published FNV-1a 64-bit vectors.
  EXPECT_EQ(config_hash(""), "cbf29ce484222325");
  EXPECT_EQ(config_hash("a"), "af63dc4c8601ec8c");
  EXPECT_NE(config_hash("backend=sim"), config_hash("backend=hw"));
}

TEST(Csv, PreambleAndHeaders) {
  EXPECT_EQ(csv_preamble(7, "00ff"), "# seed=7,config_hash=00ff\n");
  EXPECT_EQ(trials_csv_header(), "method,strategy,n_checks,verdict,flip_vtime\n");
  TrialRow r;
  r.method = Method::ValueFlipping;
  r.strategy = MutationKind::Increment;
  r.n_checks = 3;
  r.verdict = Verdict::Corrupted;
  EXPECT_EQ(to_csv(r), "ValueFlipping,Increment,3,Corrupted,\n");
  r.flip_vtime = 17;
  EXPECT_EQ(to_csv(r), "ValueFlipping,Increment,3,Corrupted,17\n");
  const std::string b = bench_csv({{"unprotected", 1.0, 0.0}, {"dropit", 2.5, 0.5}});
  EXPECT_EQ(b, "mode,mean_cost,stddev\nunprotected,1,0\ndropit,2.5,0.5\n");
}

TEST(Json, CalibrationProfile) {
  const json j = to_json(sim_profile(SimConfig{}));
  EXPECT_EQ(j["threshold"], 135);
  EXPECT_EQ(j["fr_cycle_cost"], 3.0);
  EXPECT_EQ(j["misclassification"], 0.0);
}

TEST(Json, CampaignRoundTripsThroughText) {
  CampaignConfig c;
  c.budget = 500;
  c.seed = 3;
  const CampaignReport r = run_campaign(sim_factory(SimConfig{}), corpus(), c);
  const json j = json::parse(to_json(r).dump());
  EXPECT_EQ(j["budget"], 500);
  ASSERT_EQ(j["candidates"].size(), r.candidates.size());
  for (std::size_t i = 0; i < r.candidates.size(); ++i) {
    const json& jc = j["candidates"][i];
    EXPECT_EQ(jc["target"], r.candidates[i].target);
    EXPECT_EQ(jc["label"], r.candidates[i].label);
    EXPECT_EQ(jc["exploits"].size(), r.candidates[i].exploits.size());
  }
}

TEST(Json, InterleavingRunCarriesReplayableSchedules) {
  const TargetDescriptor& t = find_target("dedupe_analog");
  const ArgFactory make = [&t](ProbeBackend& b) {
    return generate_args(b, t.params, 1, {true});
  };
  SimProbe scratch{SimConfig{}};
  const AdversaryProgram p =
      flip_program(scratch, make(scratch), 0, {MutationKind::Increment, 1}, 1);
  const ScheduledBody body = [&t](UserMemory& m, const ArgRecord& a) {
    return t.invoke(m, a, {});
  };
  const InterleavingRun run = run_interleavings(SimConfig{}, body, make, p, 100, 1);
  const json j = to_json(run);
  EXPECT_EQ(j["schedule_count"], run.schedule_count);
  ASSERT_EQ(j["outcomes"].size(), run.outcomes.size());
  for (std::size_t i = 0; i < run.outcomes.size(); ++i) {
    const Schedule s = Schedule::from_json(j["outcomes"][i]["schedule"].dump());
    EXPECT_EQ(s.order, run.outcomes[i].schedule.order);
    EXPECT_EQ(j["outcomes"][i]["result"]["verdict"],
              std::string(to_string(run.outcomes[i].result.verdict)));
  }
}

TEST(Json, TargetDescriptionIncludesAccessScript) {
  const TargetDescriptor& t = find_target("struct_members");
  SimProbe p{SimConfig{}};
  const ArgRecord a = generate_args(p, t.params, 0, {true});
  const json j = to_json(t, a);
  EXPECT_EQ(j["id"], "struct_members");
  EXPECT_EQ(j["access_script"].size(), t.access_script(a, {}).size());
  EXPECT_EQ(j["params"].size(), t.params.size());
}

TEST(Json, TxStatsHasEveryCounter) {
  TxStats s;
  s.commits = 3;
  const json j = to_json(s);
  for (const char* k : {"executions", "attempts", "commits", "aborts", "conflict_aborts",
                        "explicit_aborts", "capacity_aborts", "fallbacks"}) {
    EXPECT_TRUE(j.contains(k)) << k;
  }
  EXPECT_EQ(j["commits"], 3);
}

}  // namespace
}  // namespace dfetch
