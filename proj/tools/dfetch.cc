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

// dfetch command-line front end.

#include <CLI11.hpp>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "dfetch/config.h"
#include "dfetch/dropit.h"
#include "dfetch/fuzzer.h"
#include "dfetch/monitor.h"
#include "dfetch/report.h"
#include "dfetch/schedule.h"
#include "dfetch/targets.h"
#include "dfetch/trigger.h"

namespace {

using dfetch::ErrorKind;
using dfetch::throw_error;
using nlohmann::json;

constexpr const char* kBackendEnv = "DFETCH_BACKEND";

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::Usage: return 2;
    case ErrorKind::Capability: return 3;
    case ErrorKind::Calibration: return 4;
    case ErrorKind::Config: return 5;
    case ErrorKind::State: return 6;
    case ErrorKind::Resource: return 7;
  }
  return 1;
}

struct Globals {
  std::string backend;
  std::optional<std::uint64_t> seed;
  std::string config_path;
  std::string out;
  std::optional<dfetch::Tick> noise;
  int calibration_rounds = 1000;
  double cycles_per_tick = dfetch::kDefaultCyclesPerTick;
};

// Effective settings after merging the config file under the flags.
struct Context {
  dfetch::BackendKind backend = dfetch::BackendKind::Sim;
  std::uint64_t seed = 0;
  dfetch::SimConfig sim;
  dfetch::KeyValues kv;
  int calibration_rounds = 1000;
  double cycles_per_tick = dfetch::kDefaultCyclesPerTick;
  std::optional<dfetch::CalibrationProfile> hw_profile;

  std::string hash(const dfetch::KeyValues& cmd) const {
    dfetch::KeyValues all = cmd;
    all["backend"] = std::string(dfetch::to_string(backend));
    if (backend == dfetch::BackendKind::Hardware) {
      all["cycles_per_tick"] = std::to_string(cycles_per_tick);
    }
    return dfetch::config_hash(dfetch::canonical(sim) + dfetch::canonical(all));
  }

  const dfetch::CalibrationProfile& profile() {
    if (!hw_profile) {
      dfetch::HwProbe probe;
      hw_profile = probe.calibrate(calibration_rounds);
    }
    return *hw_profile;
  }

  std::unique_ptr<dfetch::ProbeBackend> make_backend() {
    return factory()();
  }

  dfetch::BackendFactory factory() {
    if (backend == dfetch::BackendKind::Sim) return dfetch::sim_factory(sim);
    return dfetch::hw_factory(profile());
  }

  // fr_cycle_cost in target ticks.
  double cycle_cost_ticks() {
    if (backend == dfetch::BackendKind::Sim) {
      return static_cast<double>(sim.fr_cycle_cost());
    }
    return profile().fr_cycle_cost / cycles_per_tick;
  }
};

Context resolve(const Globals& g) {
  Context c;
  if (!g.config_path.empty()) c.kv = dfetch::load_key_values(g.config_path);
  std::string backend = g.backend;
  if (backend.empty() && c.kv.count("backend")) backend = c.kv.at("backend");
  if (backend.empty()) {
    const char* env = std::getenv(kBackendEnv);
    backend = env && *env ? env : "sim";
  }
  c.backend = dfetch::parse_backend(backend);
  if (g.seed) {
    c.seed = *g.seed;
  } else if (c.kv.count("seed")) {
    try {
      c.seed = std::stoull(c.kv.at("seed"));
    } catch (const std::exception&) {
      throw_error(ErrorKind::Config, "seed in config is not a number");
    }
  } else if (c.backend == dfetch::BackendKind::Sim) {
    throw_error(ErrorKind::Usage, "--seed is required with the sim backend");
  }
  dfetch::apply_sim_config(c.sim, c.kv);
  if (g.noise) c.sim.noise_ticks = *g.noise;
  if (c.sim.noise_ticks < 0) throw_error(ErrorKind::Config, "noise_ticks must be >= 0");
  c.calibration_rounds = g.calibration_rounds;
  c.cycles_per_tick = g.cycles_per_tick;
  return c;
}

void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw_error(ErrorKind::Usage, "cannot write '" + path + "'");
  f << text;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw_error(ErrorKind::Usage, "cannot read '" + path + "'");
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// One sweep bound: "3" is ticks, "3c" is probe cycles.
struct GapValue {
  double value = 0.0;
  bool cycles = false;
};

GapValue parse_gap_value(const std::string& s) {
  GapValue g;
  std::string num = s;
  if (!num.empty() && num.back() == 'c') {
    g.cycles = true;
    num.pop_back();
  }
  std::size_t used = 0;
  try {
    g.value = std::stod(num, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (num.empty() || used != num.size()) {
    throw_error(ErrorKind::Usage, "bad gap value '" + s + "'");
  }
  return g;
}

// "start:end:step"; returns gaps in probe cycles.
std::vector<double> parse_gaps(const std::string& spec, double cost_ticks) {
  const std::vector<std::string> parts = split(spec, ':');
  if (parts.size() != 3) {
    throw_error(ErrorKind::Usage, "gap sweep must be start:end:step");
  }
  auto cycles = [&](const std::string& s) {
    const GapValue g = parse_gap_value(s);
    return g.cycles ? g.value : g.value / cost_ticks;
  };
  const double a = cycles(parts[0]);
  const double b = cycles(parts[1]);
  const double step = cycles(parts[2]);
  if (step <= 0 || b < a || a < 0) {
    throw_error(ErrorKind::Usage, "gap sweep needs 0 <= start <= end and step > 0");
  }
  std::vector<double> out;
  const auto n = static_cast<long>(std::floor((b - a) / step + 1e-9));
  for (long i = 0; i <= n; ++i) out.push_back(a + static_cast<double>(i) * step);
  return out;
}

std::vector<dfetch::Method> parse_methods(const std::string& s) {
  if (s == "all") {
    return {dfetch::Method::CacheTrigger, dfetch::Method::BusyWait,
            dfetch::Method::ValueFlipping};
  }
  std::vector<dfetch::Method> out;
  for (const std::string& m : split(s, ',')) out.push_back(dfetch::parse_method(m));
  if (out.empty()) throw_error(ErrorKind::Usage, "no methods given");
  return out;
}

std::vector<dfetch::MutationKind> parse_strategies(const std::string& s,
                                                   dfetch::ParamKind kind) {
  const auto ok = dfetch::applicable_mutations(kind);
  if (s == "all") return ok;
  if (s.empty()) {
    return {kind == dfetch::ParamKind::IntScalar ? dfetch::MutationKind::Increment
                                                 : dfetch::MutationKind::FlipLSB};
  }
  std::vector<dfetch::MutationKind> out;
  for (const std::string& m : split(s, ',')) {
    const dfetch::MutationKind k = dfetch::parse_mutation(m);
    if (std::find(ok.begin(), ok.end(), k) == ok.end()) {
      throw_error(ErrorKind::Usage, "strategy " + m + " does not apply to " +
                                        std::string(dfetch::to_string(kind)));
    }
    out.push_back(k);
  }
  return out;
}

int bug_param_or(const dfetch::TargetDescriptor& t, int requested) {
  if (requested >= 0) return requested;
  if (t.bug_param >= 0) return t.bug_param;
  for (std::size_t i = 0; i < t.params.size(); ++i) {
    if (!t.params[i].by_value) return static_cast<int>(i);
  }
  throw_error(ErrorKind::Usage, t.id + " has no shared parameter");
}

// --- commands ------------------------------------------------------------

void cmd_calibrate(Context& c, const Globals& g) {
  std::unique_ptr<dfetch::ProbeBackend> backend;
  dfetch::CalibrationProfile p;
  if (c.backend == dfetch::BackendKind::Sim) {
    dfetch::SimProbe probe(c.sim);
    p = probe.calibrate(c.calibration_rounds);
  } else {
    p = c.profile();
  }
  json j = dfetch::envelope("calibration", c.seed,
                            c.hash({{"rounds", std::to_string(c.calibration_rounds)}}));
  j["backend"] = dfetch::to_string(c.backend);
  j["profile"] = dfetch::to_json(p);
  std::cerr << "threshold=" << p.threshold << " fr_cycle_cost=" << p.fr_cycle_cost
            << "\n";
  emit(g.out, dump(j));
}

struct DetectOpts {
  std::string target;
  std::optional<dfetch::Tick> gap;
  dfetch::Tick period = 0;
  dfetch::Tick max_duration = 0;
  bool all_lines = false;
  int close_after = 2;
};

void cmd_detect(Context& c, const Globals& g, const DetectOpts& o) {
  const dfetch::TargetDescriptor& t = dfetch::find_target(o.target);
  auto backend = c.make_backend();
  const dfetch::ArgRecord args = dfetch::generate_args(*backend, t.params, c.seed, {true});
  dfetch::MonitorConfig mc;
  mc.probe_period = o.period;
  mc.max_duration = o.max_duration;
  mc.monitor_all_lines = o.all_lines;
  mc.close_after_misses = o.close_after;
  mc.cycles_per_tick = c.cycles_per_tick;
  dfetch::TargetOptions to;
  to.gap = o.gap;
  const dfetch::MonitorReport r = dfetch::monitor_invoke(*backend, t, args, mc, c.seed, to);
  json j = dfetch::envelope(
      "detect", c.seed,
      c.hash({{"target", o.target},
              {"gap", o.gap ? std::to_string(*o.gap) : "default"},
              {"period", std::to_string(o.period)},
              {"all_lines", o.all_lines ? "1" : "0"}}));
  j["report"] = dfetch::to_json(r);
  emit(g.out, dump(j));
}

struct SweepOpts {
  std::string target = "two_fetch";
  std::string gaps = "0:12c:0.5c";
  int trials = 1000;
  int param = -1;
  dfetch::Tick period = 0;
  int close_after = 2;
};

void cmd_sweep(Context& c, const Globals& g, const SweepOpts& o) {
  if (o.trials <= 0) throw_error(ErrorKind::Usage, "trials must be positive");
  const dfetch::TargetDescriptor& t = dfetch::find_target(o.target);
  const int param = bug_param_or(t, o.param);
  const double cost = c.cycle_cost_ticks();
  const std::vector<double> gaps = parse_gaps(o.gaps, cost);
  const dfetch::BackendFactory make = c.factory();
  dfetch::MonitorConfig mc;
  mc.probe_period = o.period;
  mc.close_after_misses = o.close_after;
  mc.cycles_per_tick = c.cycles_per_tick;

  std::ostringstream os;
  os << dfetch::csv_preamble(
      c.seed, c.hash({{"target", o.target}, {"gaps", o.gaps},
                      {"trials", std::to_string(o.trials)},
                      {"period", std::to_string(o.period)}}));
  os << "gap_c,gap_ticks,trials,detected,detection_probability\n";
  for (double gc : gaps) {
    dfetch::TargetOptions to;
    to.gap = std::max(c.sim.access_ticks, dfetch::gap_ticks(gc, cost));
    int detected = 0;
    for (int i = 0; i < o.trials; ++i) {
      const std::uint64_t s = dfetch::mix64(c.seed, static_cast<std::uint64_t>(i));
      auto backend = make();
      const auto args = dfetch::generate_args(*backend, t.params, s, {true});
      detected += dfetch::is_double_fetch(
          dfetch::monitor_invoke(*backend, t, args, mc, s, to), param);
    }
    os << gc << ',' << *to.gap << ',' << o.trials << ',' << detected << ','
       << static_cast<double>(detected) / o.trials << '\n';
  }
  emit(g.out, os.str());
}

struct ExploitOpts {
  std::string target;
  std::string methods = "CacheTrigger";
  std::string strategies;
  int trials = 1000;
  int param = -1;
  int trigger_fetch = 1;
  dfetch::Tick period = 0;
  std::string trials_csv;
  bool interleave = false;
  std::size_t max_schedules = 100000;
  int writes = 1;
  std::string replay;
};

dfetch::ScheduledBody body_of(const dfetch::TargetDescriptor& t) {
  return [&t](dfetch::UserMemory& m, const dfetch::ArgRecord& a) {
    return t.invoke(m, a, {});
  };
}

void cmd_interleave(Context& c, const Globals& g, const ExploitOpts& o) {
  if (c.backend != dfetch::BackendKind::Sim) {
    throw_error(ErrorKind::Capability, "schedule exploration needs the sim backend");
  }
  const dfetch::TargetDescriptor& t = dfetch::find_target(o.target);
  const int param = bug_param_or(t, o.param);
  const auto kinds = parse_strategies(o.strategies, t.params[param].kind);
  const std::uint64_t seed = c.seed;
  const dfetch::ArgFactory make_args = [&t, seed](dfetch::ProbeBackend& b) {
    return dfetch::generate_args(b, t.params, seed, {true});
  };
  dfetch::SimProbe scratch(c.sim);
  const dfetch::AdversaryProgram prog = dfetch::flip_program(
      scratch, make_args(scratch), param, {kinds.front(), seed}, o.writes);
  const dfetch::KeyValues h{{"target", o.target},
                            {"strategy", std::string(dfetch::to_string(kinds.front()))},
                            {"writes", std::to_string(o.writes)},
                            {"max_schedules", std::to_string(o.max_schedules)}};
  if (!o.replay.empty()) {
    const dfetch::Schedule s = dfetch::Schedule::from_json(read_file(o.replay));
    const dfetch::InvokeResult r =
        dfetch::replay_schedule(c.sim, body_of(t), make_args, prog, s);
    json j = dfetch::envelope("replay", c.seed, c.hash(h));
    j["schedule"] = json::parse(s.to_json());
    j["result"] = dfetch::to_json(r);
    emit(g.out, dump(j));
    return;
  }
  const dfetch::InterleavingRun run = dfetch::run_interleavings(
      c.sim, body_of(t), make_args, prog, o.max_schedules, c.seed);
  std::size_t corrupted = 0;
  for (const auto& out : run.outcomes) {
    corrupted += out.result.verdict == dfetch::Verdict::Corrupted;
  }
  json j = dfetch::envelope("interleavings", c.seed, c.hash(h));
  j["target"] = o.target;
  j["corrupted"] = corrupted;
  j["run"] = dfetch::to_json(run);
  emit(g.out, dump(j));
}

void cmd_exploit(Context& c, const Globals& g, const ExploitOpts& o) {
  if (o.interleave || !o.replay.empty()) {
    cmd_interleave(c, g, o);
    return;
  }
  const dfetch::TargetDescriptor& t = dfetch::find_target(o.target);
  const int param = bug_param_or(t, o.param);
  const auto methods = parse_methods(o.methods);
  const auto kinds = parse_strategies(o.strategies, t.params[param].kind);
  int n_checks = 0;
  for (const dfetch::ParamSpec& p : t.params) {
    if (p.name == "n_checks") n_checks = static_cast<int>(p.lo);
  }
  const std::string hash = c.hash({{"target", o.target},
                                   {"methods", o.methods},
                                   {"strategies", o.strategies},
                                   {"trials", std::to_string(o.trials)},
                                   {"trigger_fetch", std::to_string(o.trigger_fetch)},
                                   {"period", std::to_string(o.period)}});
  std::ostringstream rates;
  std::ostringstream rows;
  rates << dfetch::csv_preamble(c.seed, hash)
        << "target,method,strategy,trials,successes,rate\n";
  rows << dfetch::csv_preamble(c.seed, hash) << dfetch::trials_csv_header();
  const dfetch::BackendFactory make = c.factory();
  for (dfetch::Method m : methods) {
    for (dfetch::MutationKind k : kinds) {
      dfetch::ExploitRequest req;
      req.param = param;
      req.method = m;
      req.strategy.kind = k;
      req.trigger_fetch = o.trigger_fetch;
      req.probe_period = o.period;
      req.cycles_per_tick = c.cycles_per_tick;
      const dfetch::RateResult r = dfetch::success_rate(
          make, t, req, o.trials, c.seed, {},
          [&](int, const dfetch::ExploitOutcome& out) {
            if (o.trials_csv.empty()) return;
            rows << dfetch::to_csv(
                {m, k, n_checks, out.result.verdict, out.flip_time});
          });
      rates << t.id << ',' << dfetch::to_string(m) << ',' << dfetch::to_string(k)
            << ',' << r.trials << ',' << r.successes << ',' << r.rate() << '\n';
    }
  }
  if (!o.trials_csv.empty()) emit(o.trials_csv, rows.str());
  emit(g.out, rates.str());
}

struct FuzzOpts {
  std::uint64_t budget = 1000;
  int workers = 1;
  bool table1 = false;
  std::string targets;
  std::string method = "CacheTrigger";
};

void cmd_fuzz(Context& c, const Globals& g, const FuzzOpts& o) {
  std::vector<const dfetch::TargetDescriptor*> reg;
  if (o.targets.empty()) {
    reg = dfetch::corpus();
  } else {
    for (const std::string& id : split(o.targets, ',')) {
      reg.push_back(&dfetch::find_target(id));
    }
  }
  dfetch::CampaignConfig cc;
  cc.budget = o.budget;
  cc.seed = c.seed;
  cc.workers = o.workers;
  cc.method = dfetch::parse_method(o.method);
  const dfetch::CampaignReport r = dfetch::run_campaign(c.factory(), reg, cc);
  json j = dfetch::envelope("campaign", c.seed,
                            c.hash({{"budget", std::to_string(o.budget)},
                                    {"targets", o.targets},
                                    {"method", o.method}}));
  j["report"] = dfetch::to_json(r);
  if (o.table1) {
    std::cout << dfetch::table1_text(r);
    if (!g.out.empty()) emit(g.out, dump(j));
  } else {
    emit(g.out, dump(j));
  }
}

struct ProtectOpts {
  std::string target = "naive_strcpy";
  std::string adversary = "trigger";
  std::string mode = "EmulatedTx";
  std::string strategy;
  int retries = 1000;
  int trigger_fetch = 1;
};

void cmd_protect(Context& c, const Globals& g, const ProtectOpts& o) {
  const dfetch::TargetDescriptor& base = dfetch::find_target(o.target);
  const int param = bug_param_or(base, -1);
  auto stats = std::make_shared<dfetch::TxStats>();
  const dfetch::TargetDescriptor t = dfetch::protect_target(
      base, {dfetch::parse_tx_mode(o.mode), o.retries}, stats);
  auto backend = c.make_backend();
  const auto args = dfetch::generate_args(*backend, t.params, c.seed, {true});
  dfetch::InvokeResult result;
  if (o.adversary == "none") {
    dfetch::MonitorConfig mc;
    mc.cycles_per_tick = c.cycles_per_tick;
    result = dfetch::monitor_invoke(*backend, t, args, mc, c.seed).result;
  } else {
    dfetch::ExploitRequest req;
    req.param = param;
    if (o.adversary == "trigger") {
      req.method = dfetch::Method::CacheTrigger;
    } else if (o.adversary == "busy") {
      req.method = dfetch::Method::BusyWait;
    } else if (o.adversary == "flip") {
      req.method = dfetch::Method::ValueFlipping;
    } else {
      throw_error(ErrorKind::Usage, "adversary must be trigger, busy, flip or none");
    }
    req.strategy = {parse_strategies(o.strategy, t.params[param].kind).front(), c.seed};
    req.trigger_fetch = o.trigger_fetch;
    req.cycles_per_tick = c.cycles_per_tick;
    result = dfetch::exploit_invoke(*backend, t, args, req, c.seed).result;
  }
  const dfetch::TxResult tr{stats->fallbacks ? dfetch::TxStatus::FellBack
                                             : dfetch::TxStatus::Committed,
                            result.attempts};
  json j = dfetch::envelope("protect", c.seed,
                            c.hash({{"target", o.target},
                                    {"adversary", o.adversary},
                                    {"mode", o.mode},
                                    {"strategy", o.strategy},
                                    {"retries", std::to_string(o.retries)}}));
  j["target"] = o.target;
  j["tx"] = dfetch::to_json(tr);
  j["result"] = dfetch::to_json(result);
  j["stats"] = dfetch::to_json(*stats);
  emit(g.out, dump(j));
}

struct BenchOpts {
  int trials = 100000;
  std::string mode = "EmulatedTx";
};

void cmd_bench(Context& c, const Globals& g, const BenchOpts& o) {
  auto backend = c.make_backend();
  const auto rows =
      dfetch::bench_switch(*backend, o.trials, dfetch::parse_tx_mode(o.mode), c.seed);
  emit(g.out, dfetch::csv_preamble(c.seed, c.hash({{"trials", std::to_string(o.trials)},
                                                  {"mode", o.mode}})) +
                  dfetch::bench_csv(rows));
}

void cmd_targets_list(const Globals& g, bool all, bool as_json) {
  std::vector<const dfetch::TargetDescriptor*> ts;
  for (const dfetch::TargetDescriptor& t : dfetch::registry()) {
    if (all || t.in_corpus) ts.push_back(&t);
  }
  if (as_json) {
    json arr = json::array();
    dfetch::SimProbe probe(dfetch::SimConfig{});
    for (const auto* t : ts) {
      arr.push_back(dfetch::to_json(*t, dfetch::generate_args(probe, t->params, 0, {true})));
    }
    json j{{"schema_version", dfetch::kSchemaVersion}, {"targets", arr}};
    emit(g.out, dump(j));
    return;
  }
  std::ostringstream os;
  for (const auto* t : ts) {
    os << t->id << '\t' << dfetch::to_string(t->annotation) << '\t'
       << dfetch::to_string(t->category) << '\t' << t->summary << '\n';
  }
  emit(g.out, os.str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dfetch: detect, exploit and eliminate double-fetch races"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--backend", g.backend,
                 std::string("sim or hw (default: $") + kBackendEnv + " or sim)");
  app.add_option("--seed", g.seed, "RNG seed; required for sim");
  app.add_option("--config", g.config_path, "flat key=value file, overridden by flags");
  app.add_option("-o,--out", g.out, "output file (default: stdout)");
  app.add_option("--noise-ticks", g.noise, "sim: uniform jitter added to probe cycles");
  app.add_option("--calibration-rounds", g.calibration_rounds)->check(CLI::PositiveNumber);
  app.add_option("--cycles-per-tick", g.cycles_per_tick, "hw: cycles per target work tick")
      ->check(CLI::PositiveNumber);

  auto* cal = app.add_subcommand("calibrate", "measure hit/miss latencies");

  DetectOpts det;
  auto* detect = app.add_subcommand("detect", "monitor one invocation");
  detect->add_option("--target", det.target)->required();
  detect->add_option("--gap", det.gap, "distance between double fetches, ticks");
  detect->add_option("--period", det.period, "probe period (0 = probe cycle cost)");
  detect->add_option("--max-duration", det.max_duration);
  detect->add_option("--close-after", det.close_after);
  detect->add_flag("--all-lines", det.all_lines);

  SweepOpts sw;
  auto* sweep = app.add_subcommand("sweep", "detection probability over gaps");
  sweep->add_option("--target", sw.target);
  sweep->add_option("--gaps", sw.gaps, "start:end:step, 'c' suffix = probe cycles");
  sweep->add_option("--trials", sw.trials);
  sweep->add_option("--param", sw.param);
  sweep->add_option("--period", sw.period);
  sweep->add_option("--close-after", sw.close_after);

  ExploitOpts ex;
  auto* exploit = app.add_subcommand("exploit", "success rate of exploit methods");
  exploit->add_option("--target", ex.target)->required();
  exploit->add_option("--methods", ex.methods, "all or comma list");
  exploit->add_option("--strategies", ex.strategies, "all or comma list");
  exploit->add_option("--trials", ex.trials);
  exploit->add_option("--param", ex.param);
  exploit->add_option("--trigger-fetch", ex.trigger_fetch);
  exploit->add_option("--period", ex.period);
  exploit->add_option("--trials-csv", ex.trials_csv, "per-trial outcomes");
  exploit->add_flag("--interleave", ex.interleave, "enumerate schedules (sim)");
  exploit->add_option("--max-schedules", ex.max_schedules);
  exploit->add_option("--writes", ex.writes, "adversary writes per schedule");
  exploit->add_option("--replay", ex.replay, "replay one schedule JSON file");

  FuzzOpts fz;
  auto* fuzz = app.add_subcommand("fuzz", "fuzzing campaign");
  fuzz->add_option("--budget", fz.budget);
  fuzz->add_option("--workers", fz.workers)->check(CLI::PositiveNumber);
  fuzz->add_flag("--table1", fz.table1, "print the category table");
  fuzz->add_option("--targets", fz.targets, "comma list (default: corpus)");
  fuzz->add_option("--method", fz.method);

  ProtectOpts pr;
  auto* protect = app.add_subcommand("protect", "run a target inside a region");
  protect->add_option("--target", pr.target);
  protect->add_option("--adversary", pr.adversary, "trigger, busy, flip or none");
  protect->add_option("--mode", pr.mode, "EmulatedTx, LockFallback or HardwareTx");
  protect->add_option("--strategy", pr.strategy);
  protect->add_option("--retries", pr.retries);
  protect->add_option("--trigger-fetch", pr.trigger_fetch);

  BenchOpts bo;
  auto* bench = app.add_subcommand("bench", "switch dispatch cost per protection");
  bench->add_option("--trials", bo.trials);
  bench->add_option("--mode", bo.mode);

  auto* targets = app.add_subcommand("targets", "target registry");
  targets->require_subcommand(1);
  bool list_all = false;
  bool list_json = false;
  auto* list = targets->add_subcommand("list", "list registered targets");
  list->add_flag("--all", list_all, "include targets outside the corpus");
  list->add_flag("--json", list_json, "descriptors with access scripts");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (list->parsed()) {
      cmd_targets_list(g, list_all, list_json);
      return 0;
    }
    Context c = resolve(g);
    if (cal->parsed()) cmd_calibrate(c, g);
    if (detect->parsed()) cmd_detect(c, g, det);
    if (sweep->parsed()) cmd_sweep(c, g, sw);
    if (exploit->parsed()) cmd_exploit(c, g, ex);
    if (fuzz->parsed()) cmd_fuzz(c, g, fz);
    if (protect->parsed()) cmd_protect(c, g, pr);
    if (bench->parsed()) cmd_bench(c, g, bo);
  } catch (const dfetch::Error& e) {
    std::cerr << "dfetch: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "dfetch: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
