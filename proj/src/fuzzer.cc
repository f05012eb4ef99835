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

#include "dfetch/fuzzer.h"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <optional>
#include <random>
#include <sstream>
#include <thread>

namespace dfetch {

// --- argument generation ---------------------------------------------------

namespace {

constexpr std::string_view kNameChars = "abcdefghijklmnopqrstuvwxyz0123456789/._-";

std::int64_t draw_int(const ParamSpec& s, bool valid, std::mt19937_64& rng) {
  if (valid || s.lo > s.hi) {
    return std::uniform_int_distribution<std::int64_t>(s.lo, s.hi)(rng);
  }
  // Just outside the bounds, where off-by-one checks live.
  const std::int64_t off = std::uniform_int_distribution<std::int64_t>(1, 16)(rng);
  return (rng() & 1) ? s.hi + off : s.lo - off;
}

void fill_text(std::span<std::byte> dst, std::size_t len, bool name,
               std::mt19937_64& rng) {
  std::uniform_int_distribution<int> letter(0, 25);
  std::uniform_int_distribution<std::size_t> any(0, kNameChars.size() - 1);
  for (std::size_t i = 0; i < len; ++i) {
    const char c = name ? kNameChars[any(rng)] : static_cast<char>('a' + letter(rng));
    dst[i] = static_cast<std::byte>(c);
  }
  dst[len] = std::byte{0};
}

}  // namespace

ArgRecord generate_args(ProbeBackend& backend,
                        const std::vector<ParamSpec>& specs, std::uint64_t seed,
                        GenOptions opts) {
  ArgRecord rec;
  rec.seed = seed;
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const ParamSpec& s = specs[i];
    Argument a;
    a.index = static_cast<int>(i);
    a.spec = s;
    a.valid = opts.valid_only || s.invalid_rate <= 0.0 ||
              !std::bernoulli_distribution(s.invalid_rate)(rng);
    if (!s.by_value) a.buffer = backend.allocate_shared(s.size_bytes);
    const std::span<std::byte> bytes =
        s.by_value ? std::span<std::byte>{} : backend.bytes(a.buffer);
    switch (s.kind) {
      case ParamKind::IntScalar: {
        a.value = draw_int(s, a.valid, rng);
        if (!s.by_value) {
          const auto raw = std::bit_cast<std::array<std::byte, 8>>(a.value);
          std::memcpy(bytes.data(), raw.data(), std::min<std::size_t>(8, bytes.size()));
        }
        break;
      }
      case ParamKind::CString:
      case ParamKind::FileNameLike: {
        // Invalid draws are still terminated inside the buffer, just longer
        // than the target accepts.
        const auto cap = static_cast<std::int64_t>(s.size_bytes) - 1;
        std::int64_t len;
        if (a.valid || s.hi >= cap) {
          len = std::uniform_int_distribution<std::int64_t>(s.lo, std::min(s.hi, cap))(rng);
        } else {
          len = std::uniform_int_distribution<std::int64_t>(s.hi + 1, cap)(rng);
        }
        a.value = len;
        fill_text(bytes, static_cast<std::size_t>(len),
                  s.kind == ParamKind::FileNameLike, rng);
        break;
      }
      case ParamKind::InOutBuffer: {
        std::uniform_int_distribution<int> b(0, 255);
        for (std::size_t k = 0; k < std::min<std::size_t>(8, s.size_bytes); ++k) {
          bytes[k] = static_cast<std::byte>(b(rng));
        }
        break;
      }
      case ParamKind::Buffer:
      case ParamKind::StructWithMembers: {
        // Members are packed back to back, so small structs share a line.
        std::uniform_int_distribution<int> b(0, 255);
        for (std::size_t k = 0; k < s.size_bytes; ++k) {
          bytes[k] = static_cast<std::byte>(b(rng));
        }
        break;
      }
    }
    rec.args.push_back(std::move(a));
  }
  return rec;
}

void set_int_arg(ProbeBackend& backend, Argument& a, std::int64_t v) {
  if (a.spec.kind != ParamKind::IntScalar) {
    throw_error(ErrorKind::Usage, "parameter '" + a.spec.name + "' is not an integer");
  }
  a.value = v;
  if (a.spec.by_value) return;
  const std::span<std::byte> bytes = backend.bytes(a.buffer);
  const auto raw = std::bit_cast<std::array<std::byte, 8>>(v);
  std::memcpy(bytes.data(), raw.data(), std::min<std::size_t>(8, bytes.size()));
}

// --- campaign ----------------------------------------------------------------

bool CandidateEntry::corrupted() const {
  return std::any_of(exploits.begin(), exploits.end(), [](const ExploitRecord& e) {
    return e.verdict == Verdict::Corrupted;
  });
}

int CandidateEntry::typical_fetch_count() const {
  int best = 0;
  std::uint64_t n = 0;
  for (const auto& [count, seen] : observed_fetch_counts) {
    if (seen > n) {
      best = count;
      n = seen;
    }
  }
  return best;
}

const CandidateEntry* CampaignReport::find(std::string_view target,
                                           int param) const {
  for (const CandidateEntry& c : candidates) {
    if (c.target == target && (param < 0 || c.param == param)) return &c;
  }
  return nullptr;
}

std::string candidate_label(const TargetDescriptor& t, bool corrupted) {
  if (corrupted) return std::string(to_string(Category::ExploitableBug));
  // An exploitable annotation without a corruption says nothing about what
  // kind of double fetch it is.
  if (t.category == Category::None || t.category == Category::ExploitableBug) {
    return "SanityCheck-or-unknown";
  }
  return std::string(to_string(t.category));
}

namespace {

struct Job {
  std::uint64_t iteration = 0;
  const TargetDescriptor* target = nullptr;
  std::optional<std::size_t> candidate;  // set for exploit jobs
  int param = 0;
  int trigger_fetch = 1;
  MutationKind strategy = MutationKind::SetZero;
};

struct JobResult {
  std::optional<MonitorReport> monitor;
  std::optional<ExploitRecord> exploit;
  std::optional<std::string> fault;
};

JobResult run_job(const BackendFactory& make, const Job& job,
                  const CampaignConfig& cfg) {
  JobResult out;
  const std::uint64_t s = mix64(cfg.seed, job.iteration, 0x66757a7aULL);
  try {
    std::unique_ptr<ProbeBackend> backend = make();
    const ArgRecord args = generate_args(*backend, job.target->params, s);
    if (job.candidate) {
      ExploitRequest req;
      req.param = job.param;
      req.method = cfg.method;
      req.strategy = {job.strategy, s};
      req.trigger_fetch = job.trigger_fetch;
      req.probe_period = cfg.probe_period;
      req.close_after_misses = cfg.close_after_misses;
      req.trial_index = job.iteration;
      const ExploitOutcome o = exploit_invoke(*backend, *job.target, args, req, s);
      out.exploit = ExploitRecord{job.iteration, cfg.method,   job.strategy,
                                  job.trigger_fetch, o.result.verdict, o.triggered};
    } else {
      MonitorConfig mc;
      mc.probe_period = cfg.probe_period;
      mc.close_after_misses = cfg.close_after_misses;
      out.monitor = monitor_invoke(*backend, *job.target, args, mc, s);
    }
  } catch (const std::exception& e) {
    out.fault = job.target->id + ": " + e.what();
  }
  return out;
}

class Campaign {
 public:
  Campaign(const BackendFactory& make,
           const std::vector<const TargetDescriptor*>& registry,
           const CampaignConfig& cfg)
      : make_(make), registry_(registry), cfg_(cfg) {
    rep_.budget = cfg.budget;
    rep_.seed = cfg.seed;
  }

  CampaignReport run() {
    const auto workers = static_cast<std::uint64_t>(std::max(cfg_.workers, 1));
    for (std::uint64_t i = 0; i < cfg_.budget; i += workers) {
      // Jobs in a batch are planned from the state at batch start, so the
      // result does not depend on thread timing.
      std::vector<Job> jobs;
      for (std::uint64_t k = i; k < std::min(cfg_.budget, i + workers); ++k) {
        jobs.push_back(plan(k));
      }
      run_batch(jobs);
    }
    // Candidates found late still get one attempt per strategy.
    std::uint64_t extra = cfg_.budget;
    for (std::size_t c = 0; c < rep_.candidates.size(); ++c) {
      if (!rep_.candidates[c].exploits.empty()) continue;
      std::vector<Job> jobs;
      for (MutationKind k : strategies(c)) {
        jobs.push_back(exploit_job(extra++, c, k));
      }
      run_batch(jobs);
    }
    for (CandidateEntry& c : rep_.candidates) {
      c.label = candidate_label(*target(c.target), c.corrupted());
    }
    return std::move(rep_);
  }

 private:
  const TargetDescriptor* target(const std::string& id) const {
    for (const TargetDescriptor* t : registry_) {
      if (t->id == id) return t;
    }
    return &find_target(id);
  }

  std::vector<MutationKind> strategies(std::size_t c) const {
    const CandidateEntry& e = rep_.candidates[c];
    return applicable_mutations(target(e.target)->params[e.param].kind);
  }

  Job exploit_job(std::uint64_t iteration, std::size_t c, MutationKind k) const {
    const CandidateEntry& e = rep_.candidates[c];
    Job j;
    j.iteration = iteration;
    j.target = target(e.target);
    j.candidate = c;
    j.param = e.param;
    j.trigger_fetch = std::max(1, e.typical_fetch_count() - 1);
    j.strategy = k;
    return j;
  }

  Job plan(std::uint64_t i) const {
    const std::uint64_t r = mix64(cfg_.seed, i);
    if (!rep_.candidates.empty() && cfg_.exploit_every > 0 &&
        i % cfg_.exploit_every == cfg_.exploit_every - 1) {
      const std::size_t c = r % rep_.candidates.size();
      const std::vector<MutationKind> ks = strategies(c);
      return exploit_job(i, c, ks[mix64(r, 1) % ks.size()]);
    }
    Job j;
    j.iteration = i;
    j.target = registry_[r % registry_.size()];
    return j;
  }

  void run_batch(const std::vector<Job>& jobs) {
    std::vector<JobResult> results(jobs.size());
    if (jobs.size() == 1) {
      results[0] = run_job(make_, jobs[0], cfg_);
    } else {
      std::vector<std::thread> threads;
      for (std::size_t k = 0; k < jobs.size(); ++k) {
        threads.emplace_back([&, k] { results[k] = run_job(make_, jobs[k], cfg_); });
      }
      for (std::thread& t : threads) t.join();
    }
    for (std::size_t k = 0; k < jobs.size(); ++k) merge(jobs[k], results[k]);
  }

  void merge(const Job& job, const JobResult& r) {
    if (r.fault) {
      ++rep_.faults;
      if (rep_.fault_messages.size() < 32) rep_.fault_messages.push_back(*r.fault);
      return;
    }
    if (r.exploit) {
      rep_.candidates[*job.candidate].exploits.push_back(*r.exploit);
      return;
    }
    const MonitorReport& m = *r.monitor;
    ++rep_.invocations[job.target->id];
    if (m.result.rejected) ++rep_.rejected[job.target->id];
    for (const ParamReport& p : m.per_param) {
      if (p.fetch_count < 2) continue;
      CandidateEntry* e = nullptr;
      for (CandidateEntry& c : rep_.candidates) {
        if (c.target == job.target->id && c.param == p.param) e = &c;
      }
      if (!e) {
        rep_.candidates.push_back({});
        e = &rep_.candidates.back();
        e->target = job.target->id;
        e->param = p.param;
        e->first_seen = job.iteration;
      }
      ++e->observed_fetch_counts[p.fetch_count];
    }
  }

  const BackendFactory& make_;
  const std::vector<const TargetDescriptor*>& registry_;
  const CampaignConfig& cfg_;
  CampaignReport rep_;
};

}  // namespace

CampaignReport run_campaign(const BackendFactory& make,
                            const std::vector<const TargetDescriptor*>& registry,
                            const CampaignConfig& cfg) {
  if (cfg.budget < 1) throw_error(ErrorKind::Usage, "budget must be >= 1");
  if (registry.empty()) throw_error(ErrorKind::Usage, "registry is empty");
  return Campaign(make, registry, cfg).run();
}

std::string table1_text(const CampaignReport& r) {
  std::map<std::string, std::vector<std::string>> rows;
  for (const CandidateEntry& c : r.candidates) {
    rows[c.label].push_back(c.target + "(arg " + std::to_string(c.param) + ")");
  }
  std::size_t w = 8;
  for (const auto& [label, _] : rows) w = std::max(w, label.size());
  std::ostringstream os;
  os << "Double fetches found (budget " << r.budget << ", seed " << r.seed << ")\n";
  os << std::string(w, '-') << "  -----  -------\n";
  os << "Category" << std::string(w - 8, ' ') << "  Count  Targets\n";
  os << std::string(w, '-') << "  -----  -------\n";
  std::size_t total = 0;
  for (const auto& [label, targets] : rows) {
    os << label << std::string(w - label.size(), ' ') << "  ";
    const std::string n = std::to_string(targets.size());
    os << std::string(5 - std::min<std::size_t>(5, n.size()), ' ') << n << "  ";
    for (std::size_t k = 0; k < targets.size(); ++k) {
      os << (k ? ", " : "") << targets[k];
    }
    os << "\n";
    total += targets.size();
  }
  os << std::string(w, '-') << "  -----  -------\n";
  const std::string n = std::to_string(total);
  os << "Total" << std::string(w - 5, ' ') << "  "
     << std::string(5 - std::min<std::size_t>(5, n.size()), ' ') << n << "\n";
  return os.str();
}

}  // namespace dfetch
