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

#include "dfetch/config.h"

#include <fstream>
#include <sstream>

namespace dfetch {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

Tick parse_tick(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long long x = std::stoll(v, &used);
    if (used != v.size() || x < 0) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw_error(ErrorKind::Config, "bad value for " + key + ": '" + v + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "no") return false;
  throw_error(ErrorKind::Config, "bad boolean for " + key + ": '" + v + "'");
}

}  // namespace

KeyValues parse_key_values(const std::string& text) {
  KeyValues kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw_error(ErrorKind::Config,
                  "line " + std::to_string(lineno) + ": expected key = value");
    }
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

KeyValues load_key_values(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw_error(ErrorKind::Config, "cannot open config file " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_key_values(ss.str());
}

void apply_sim_config(SimConfig& cfg, const KeyValues& kv) {
  for (const auto& [k, v] : kv) {
    if (k == "hit_latency") cfg.hit_latency = parse_tick(k, v);
    else if (k == "miss_latency") cfg.miss_latency = parse_tick(k, v);
    else if (k == "flush_ticks") cfg.flush_ticks = parse_tick(k, v);
    else if (k == "reload_ticks") cfg.reload_ticks = parse_tick(k, v);
    else if (k == "access_ticks") cfg.access_ticks = parse_tick(k, v);
    else if (k == "write_ticks") cfg.write_ticks = parse_tick(k, v);
    else if (k == "noise_ticks") cfg.noise_ticks = parse_tick(k, v);
    else if (k == "record_events") cfg.record_events = parse_bool(k, v);
  }
  if (cfg.hit_latency >= cfg.miss_latency) {
    throw_error(ErrorKind::Config, "hit_latency must be below miss_latency");
  }
  if (cfg.fr_cycle_cost() <= 0 || cfg.access_ticks <= 0) {
    throw_error(ErrorKind::Config, "probe and access costs must be positive");
  }
}

std::string canonical(const KeyValues& kv) {
  std::string out;
  for (const auto& [k, v] : kv) out += k + "=" + v + ";";
  return out;
}

std::string canonical(const SimConfig& c) {
  KeyValues kv{
      {"hit_latency", std::to_string(c.hit_latency)},
      {"miss_latency", std::to_string(c.miss_latency)},
      {"flush_ticks", std::to_string(c.flush_ticks)},
      {"reload_ticks", std::to_string(c.reload_ticks)},
      {"access_ticks", std::to_string(c.access_ticks)},
      {"write_ticks", std::to_string(c.write_ticks)},
      {"noise_ticks", std::to_string(c.noise_ticks)},
  };
  return canonical(kv);
}

}  // namespace dfetch
