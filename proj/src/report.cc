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

#include "dfetch/report.h"

#include <cstdio>
#include <sstream>

namespace dfetch {

using nlohmann::json;

std::string config_hash(std::string_view canonical_config) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a(canonical_config)));
  return buf;
}

json envelope(std::string_view kind, std::uint64_t seed, std::string_view hash) {
  return json{{"schema_version", kSchemaVersion},
              {"kind", kind},
              {"seed", seed},
              {"config_hash", hash}};
}

std::string csv_preamble(std::uint64_t seed, std::string_view hash) {
  return "# seed=" + std::to_string(seed) + ",config_hash=" + std::string(hash) +
         "\n";
}

namespace {

json histogram(const Histogram& h) {
  json out = json::array();
  for (const auto& [latency, n] : h) out.push_back({latency, n});
  return out;
}

}  // namespace

json to_json(const CalibrationProfile& p) {
  return json{{"threshold", p.threshold},
              {"fr_cycle_cost", p.fr_cycle_cost},
              {"misclassification", p.misclassification},
              {"hit_latencies", histogram(p.hit_latencies)},
              {"miss_latencies", histogram(p.miss_latencies)}};
}

json to_json(const InvokeResult& r) {
  return json{{"verdict", to_string(r.verdict)},
              {"ret", r.ret},
              {"rejected", r.rejected},
              {"wrong_case", r.wrong_case},
              {"attempts", r.attempts}};
}

json to_json(const MonitorReport& r) {
  json params = json::array();
  for (const ParamReport& p : r.per_param) {
    params.push_back({{"target", r.target},
                      {"param", p.param},
                      {"fetch_count", p.fetch_count},
                      {"fetch_starts", p.fetch_starts},
                      {"hits", p.hits}});
  }
  return json{{"target", r.target},
              {"params", params},
              {"result", to_json(r.result)},
              {"start", r.start},
              {"end", r.end}};
}

json to_json(const ExploitOutcome& o) {
  json j{{"result", to_json(o.result)},
         {"success", o.success()},
         {"triggered", o.triggered},
         {"mutation_noop", o.mutation_noop},
         {"busy_delay", o.busy_delay}};
  j["flip_time"] = o.flip_time ? json(*o.flip_time) : json(nullptr);
  return j;
}

json to_json(const CampaignReport& r) {
  json cands = json::array();
  for (const CandidateEntry& c : r.candidates) {
    json counts = json::object();
    for (const auto& [n, seen] : c.observed_fetch_counts) {
      counts[std::to_string(n)] = seen;
    }
    json exploits = json::array();
    for (const ExploitRecord& e : c.exploits) {
      exploits.push_back({{"iteration", e.iteration},
                          {"method", to_string(e.method)},
                          {"strategy", to_string(e.strategy)},
                          {"trigger_fetch", e.trigger_fetch},
                          {"verdict", to_string(e.verdict)},
                          {"triggered", e.triggered}});
    }
    cands.push_back({{"target", c.target},
                     {"param", c.param},
                     {"first_seen", c.first_seen},
                     {"observed_fetch_counts", counts},
                     {"exploits", exploits},
                     {"label", c.label}});
  }
  return json{{"budget", r.budget},
              {"invocations", r.invocations},
              {"rejected", r.rejected},
              {"candidates", cands},
              {"faults", r.faults},
              {"fault_messages", r.fault_messages}};
}

json to_json(const TxStats& s) {
  return json{{"executions", s.executions},
              {"attempts", s.attempts},
              {"commits", s.commits},
              {"aborts", s.aborts},
              {"conflict_aborts", s.conflict_aborts},
              {"explicit_aborts", s.explicit_aborts},
              {"capacity_aborts", 0},
              {"fallbacks", s.fallbacks}};
}

json to_json(const TxResult& r) {
  return json{{"status", to_string(r.status)}, {"attempts", r.attempts}};
}

json to_json(const InterleavingRun& r) {
  json outs = json::array();
  for (const ScheduleOutcome& o : r.outcomes) {
    outs.push_back({{"schedule", json::parse(o.schedule.to_json())},
                    {"result", to_json(o.result)}});
  }
  return json{{"target_steps", r.target_steps},
              {"adversary_steps", r.adversary_steps},
              {"schedule_count", r.schedule_count},
              {"sampled", r.sampled},
              {"outcomes", outs}};
}

json to_json(const TargetDescriptor& t, const ArgRecord& a) {
  json steps = json::array();
  for (const ScriptStep& s : t.access_script(a, {})) {
    steps.push_back({{"param", s.param},
                     {"line", s.line},
                     {"kind", s.kind == sim::AccessKind::Write ? "write" : "read"},
                     {"gap", s.gap}});
  }
  json params = json::array();
  for (const ParamSpec& p : t.params) {
    params.push_back({{"name", p.name},
                      {"kind", to_string(p.kind)},
                      {"size_bytes", p.size_bytes},
                      {"by_value", p.by_value},
                      {"lo", p.lo},
                      {"hi", p.hi}});
  }
  return json{{"id", t.id},
              {"summary", t.summary},
              {"annotation", to_string(t.annotation)},
              {"category", to_string(t.category)},
              {"params", params},
              {"access_script", steps}};
}

std::string trials_csv_header() {
  return "method,strategy,n_checks,verdict,flip_vtime\n";
}

std::string to_csv(const TrialRow& r) {
  std::ostringstream os;
  os << to_string(r.method) << ',' << to_string(r.strategy) << ',' << r.n_checks
     << ',' << to_string(r.verdict) << ',';
  if (r.flip_vtime) os << *r.flip_vtime;
  os << '\n';
  return os.str();
}

std::string bench_csv(const std::vector<BenchRow>& rows) {
  std::ostringstream os;
  os << "mode,mean_cost,stddev\n";
  for (const BenchRow& r : rows) {
    os << r.mode << ',' << r.mean_cost << ',' << r.stddev << '\n';
  }
  return os.str();
}

}  // namespace dfetch
