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

#include "dfetch/common.h"
#include "dfetch/config.h"

namespace dfetch {
namespace {

TEST(Fnv1a, PublishedVectors) {
  EXPECT_EQ(fnv1a(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(fnv1a("foobar"), 0x85944171f73967e8ULL);
}

TEST(Mix64, DistinctInputsGiveDistinctOutputs) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t a = 0; a < 64; ++a) {
    for (std::uint64_t b = 0; b < 64; ++b) seen.insert(mix64(a, b));
  }
  EXPECT_EQ(seen.size(), 64u * 64u);
  static_assert(mix64(1, 2) == mix64(1, 2));
  EXPECT_NE(mix64(1, 2), mix64(2, 1));
  EXPECT_NE(mix64(1, 2, 3), mix64(1, 2, 4));
}

TEST(Errors, MessageCarriesKind) {
  try {
    throw_error(ErrorKind::Capability, "no clflush");
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Capability);
    EXPECT_NE(std::string(e.what()).find("no clflush"), std::string::npos);
  }
}

TEST(Backend, ParsesNames) {
  EXPECT_EQ(parse_backend("sim"), BackendKind::Sim);
  EXPECT_EQ(parse_backend("hw"), BackendKind::Hardware);
  EXPECT_THROW(parse_backend("gpu"), Error);
}

TEST(KeyValues, ParsesCommentsAndWhitespace) {
  const KeyValues kv = parse_key_values("# comment\n  hit_latency = 50 \n\nseed=3\n");
  EXPECT_EQ(kv.size(), 2u);
  EXPECT_EQ(kv.at("hit_latency"), "50");
  EXPECT_EQ(kv.at("seed"), "3");
  EXPECT_THROW(parse_key_values("no equals sign"), Error);
}

TEST(SimConfigKeys, AppliesKnownKeysAndValidates) {
  SimConfig cfg;
  apply_sim_config(cfg, {{"miss_latency", "300"}, {"noise_ticks", "2"}, {"other", "x"}});
  EXPECT_EQ(cfg.miss_latency, 300);
  EXPECT_EQ(cfg.noise_ticks, 2);

  SimConfig bad;
  try {
    apply_sim_config(bad, {{"hit_latency", "400"}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Config);
  }
  SimConfig bad2;
  EXPECT_THROW(apply_sim_config(bad2, {{"flush_ticks", "abc"}}), Error);
  SimConfig bad3;
  EXPECT_THROW(apply_sim_config(bad3, {{"flush_ticks", "0"}, {"reload_ticks", "0"}}),
               Error);
}

TEST(Canonical, StableAndOrderIndependent) {
  KeyValues a{{"b", "2"}, {"a", "1"}};
  KeyValues b;
  b["a"] = "1";
  b["b"] = "2";
  EXPECT_EQ(canonical(a), "a=1;b=2;");
  EXPECT_EQ(canonical(a), canonical(b));
  SimConfig x, y;
  EXPECT_EQ(canonical(x), canonical(y));
  y.noise_ticks = 1;
  EXPECT_NE(canonical(x), canonical(y));
}

}  // namespace
}  // namespace dfetch
