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

#include "dfetch/dropit.h"

#include <array>
#include <atomic>
#include <bitset>
#include <cmath>
#include <random>
#include <set>

#if defined(__x86_64__)
#include <cpuid.h>
#include <immintrin.h>
#define DFETCH_RTM 1
#endif

namespace dfetch {
namespace {

thread_local bool in_region = false;

struct TxAbort {};

// Read set of line versions, validated on every fetch and at commit. Writes
// are buffered per line and only reach the inner memory on commit.
class TxMemory final : public UserMemory {
 public:
  explicit TxMemory(UserMemory& inner) : inner_(inner) {}

  Tick fetch(const Argument& a, std::size_t offset,
             std::span<std::byte> out) override {
    Tick first = -1;
    for (const LineChunk& c : split_lines(a.buffer, offset, out.size())) {
      const std::span<std::byte> piece = out.subspan(c.buf_offset, c.len);
      const auto it = reads_.find(c.line.value);
      std::uint64_t seen = 0;
      // A writer racing the load shows up as a version change across it.
      for (int tries = 0;; ++tries) {
        const std::uint64_t v0 = inner_.version(c.line);
        const Tick t = inner_.fetch(a, offset + c.buf_offset, piece);
        if (first < 0) first = t;
        const std::uint64_t v1 = inner_.version(c.line);
        if (v0 == v1) {
          seen = v1;
          break;
        }
        if (it != reads_.end() || tries == 3) throw TxAbort{};
      }
      if (it == reads_.end()) {
        reads_.emplace(c.line.value, seen);
      } else if (it->second != seen) {
        throw TxAbort{};
      }
      const auto w = writes_.find(c.line.value);
      if (w != writes_.end()) {
        for (std::size_t i = 0; i < c.len; ++i) {
          if (w->second.mask[c.line_offset + i]) {
            piece[i] = w->second.data[c.line_offset + i];
          }
        }
      }
    }
    validate();
    return first < 0 ? now() : first;
  }

  void store(const Argument& a, std::size_t offset,
             std::span<const std::byte> in) override {
    for (const LineChunk& c : split_lines(a.buffer, offset, in.size())) {
      PendingLine& w = writes_[c.line.value];
      w.arg = &a;
      w.line_start = offset + c.buf_offset - c.line_offset;
      for (std::size_t i = 0; i < c.len; ++i) {
        w.data[c.line_offset + i] = in[c.buf_offset + i];
        w.mask.set(c.line_offset + i);
      }
    }
  }

  void work(Tick ticks) override { inner_.work(ticks); }
  Tick now() const override { return inner_.now(); }
  std::uint64_t version(LineId line) const override {
    return inner_.version(line);
  }
  void lock_line(LineId line) override { inner_.lock_line(line); }
  void unlock_line(LineId line) override { inner_.unlock_line(line); }

  void validate() const {
    for (const auto& [line, v] : reads_) {
      if (inner_.version(LineId{line}) != v) throw TxAbort{};
    }
  }

  void commit() {
    validate();
    for (const auto& [line, w] : writes_) {
      std::size_t i = 0;
      while (i < kLineSize) {
        if (!w.mask[i]) {
          ++i;
          continue;
        }
        std::size_t j = i;
        while (j < kLineSize && w.mask[j]) ++j;
        inner_.store(*w.arg, w.line_start + i,
                     std::span(w.data).subspan(i, j - i));
        i = j;
      }
    }
  }

 private:
  struct PendingLine {
    const Argument* arg = nullptr;
    std::size_t line_start = 0;  // buffer offset of the line's first byte
    std::array<std::byte, kLineSize> data{};
    std::bitset<kLineSize> mask;
  };

  UserMemory& inner_;
  std::map<std::uint32_t, std::uint64_t> reads_;
  std::map<std::uint32_t, PendingLine> writes_;
};

// Locks each line on first touch and holds it until release().
class LockMemory final : public UserMemory {
 public:
  explicit LockMemory(UserMemory& inner) : inner_(inner) {}
  ~LockMemory() override { release(); }

  Tick fetch(const Argument& a, std::size_t offset,
             std::span<std::byte> out) override {
    hold(a, offset, out.size());
    return inner_.fetch(a, offset, out);
  }
  void store(const Argument& a, std::size_t offset,
             std::span<const std::byte> in) override {
    hold(a, offset, in.size());
    inner_.store(a, offset, in);
  }
  void work(Tick ticks) override { inner_.work(ticks); }
  Tick now() const override { return inner_.now(); }
  std::uint64_t version(LineId line) const override {
    return inner_.version(line);
  }
  void lock_line(LineId line) override { inner_.lock_line(line); }
  void unlock_line(LineId line) override { inner_.unlock_line(line); }

  void release() {
    for (std::uint32_t l : held_) inner_.unlock_line(LineId{l});
    held_.clear();
  }

 private:
  void hold(const Argument& a, std::size_t offset, std::size_t len) {
    for (const LineChunk& c : split_lines(a.buffer, offset, len)) {
      if (held_.insert(c.line.value).second) inner_.lock_line(c.line);
    }
  }

  UserMemory& inner_;
  std::set<std::uint32_t> held_;
};

struct RegionGuard {
  RegionGuard() {
    if (in_region) throw_error(ErrorKind::Usage, "protect regions do not nest");
    in_region = true;
  }
  ~RegionGuard() { in_region = false; }
};

}  // namespace

std::string_view to_string(TxMode m) {
  switch (m) {
    case TxMode::HardwareTx: return "HardwareTx";
    case TxMode::EmulatedTx: return "EmulatedTx";
    case TxMode::LockFallback: return "LockFallback";
  }
  return "?";
}

TxMode parse_tx_mode(std::string_view s) {
  for (TxMode m : {TxMode::HardwareTx, TxMode::EmulatedTx, TxMode::LockFallback}) {
    if (s == to_string(m)) return m;
  }
  throw_error(ErrorKind::Usage, "unknown transaction mode '" + std::string(s) + "'");
}

std::string_view to_string(TxStatus s) {
  return s == TxStatus::Committed ? "Committed" : "FellBack";
}

bool rtm_supported() {
#if DFETCH_RTM
  unsigned a, b, c, d;
  if (!__get_cpuid_count(7, 0, &a, &b, &c, &d)) return false;
  return b & (1u << 11);
#else
  return false;
#endif
}

TxRegion::TxRegion(TxRegionConfig cfg) : cfg_(cfg) {
  if (cfg_.retries < 0) throw_error(ErrorKind::Usage, "retries must be >= 0");
  if (cfg_.mode == TxMode::HardwareTx && !rtm_supported()) {
    throw_error(ErrorKind::Capability,
                "hardware transactions (RTM) are not available on this CPU");
  }
}

TxResult protect(TxRegion& region, UserMemory& mem, const TxBody& body,
                 const std::function<void()>& fallback) {
  RegionGuard guard;
  TxStats& st = region.mutable_stats();
  ++st.executions;
  const int budget = region.retries() + 1;

  if (region.mode() == TxMode::LockFallback) {
    ++st.attempts;
    LockMemory locked(mem);
    body(locked);
    locked.release();
    ++st.commits;
    return {TxStatus::Committed, 1};
  }

  if (region.mode() == TxMode::HardwareTx) {
#if DFETCH_RTM
    for (int attempt = 1; attempt <= budget; ++attempt) {
      ++st.attempts;
      const unsigned status = _xbegin();
      if (status == _XBEGIN_STARTED) {
        body(mem);
        _xend();
        ++st.commits;
        return {TxStatus::Committed, attempt};
      }
      ++st.aborts;
      if (status & _XABORT_CONFLICT) {
        ++st.conflict_aborts;
      } else {
        ++st.explicit_aborts;
      }
    }
    fallback();
    ++st.fallbacks;
    return {TxStatus::FellBack, budget};
#else
    throw_error(ErrorKind::Capability, "hardware transactions not compiled in");
#endif
  }

  for (int attempt = 1; attempt <= budget; ++attempt) {
    ++st.attempts;
    TxMemory tx(mem);
    try {
      body(tx);
      tx.commit();
      ++st.commits;
      return {TxStatus::Committed, attempt};
    } catch (const TxAbort&) {
      ++st.aborts;
      ++st.conflict_aborts;
    } catch (...) {
      ++st.aborts;
      ++st.explicit_aborts;
      throw;
    }
  }
  fallback();
  ++st.fallbacks;
  return {TxStatus::FellBack, budget};
}

InvokeResult protected_strcpy(UserMemory& mem, const Argument& src,
                              TxRegion& region, Tick gap) {
  const TargetDescriptor& t = find_target("naive_strcpy");
  ArgRecord args;
  args.args = {src};
  args.args[0].index = 0;
  TargetOptions opts;
  opts.gap = gap;
  InvokeResult r;
  protect(
      region, mem, [&](UserMemory& tx) { r = t.invoke(tx, args, opts); },
      [&] {
        r = InvokeResult{};
        r.verdict = Verdict::FaultDetected;
        r.ret = -4;
      });
  return r;
}

TargetDescriptor protect_target(const TargetDescriptor& t, TxRegionConfig cfg,
                                std::shared_ptr<TxStats> stats) {
  TargetDescriptor p = t;
  p.id = t.id + "+dropit";
  p.summary = t.summary + " (protected)";
  if (p.annotation == Annotation::Exploitable) {
    p.annotation = Annotation::NonExploitableDoubleFetch;
  }
  const InvokeFn inner = t.invoke;
  p.invoke = [inner, cfg, stats](UserMemory& mem, const ArgRecord& a,
                                 const TargetOptions& o) {
    TxRegion region(cfg);
    InvokeResult r;
    const TxResult tr = protect(
        region, mem, [&](UserMemory& tx) { r = inner(tx, a, o); },
        [&] {
          r = InvokeResult{};
          r.verdict = Verdict::FaultDetected;
          r.ret = -4;
        });
    r.attempts = tr.attempts;
    if (stats) {
      const TxStats& s = region.stats();
      stats->executions += s.executions;
      stats->attempts += s.attempts;
      stats->commits += s.commits;
      stats->aborts += s.aborts;
      stats->conflict_aborts += s.conflict_aborts;
      stats->explicit_aborts += s.explicit_aborts;
      stats->fallbacks += s.fallbacks;
    }
    return r;
  };
  return p;
}

namespace {

volatile std::int64_t bench_sink = 0;

void switch_body(UserMemory& mem, const Argument& sel) {
  const std::int64_t s = mem.fetch_i64(sel);
  std::int64_t v;
  switch (s) {
    case 0: v = 11; break;
    case 1: v = 23; break;
    case 2: v = 37; break;
    case 3: v = 41; break;
    case 4: v = 53; break;
    default: v = -1; break;
  }
  bench_sink = bench_sink + v;
}

BenchRow summarize(std::string mode, const std::vector<double>& xs) {
  double sum = 0.0;
  for (double x : xs) sum += x;
  const double mean = sum / static_cast<double>(xs.size());
  double sq = 0.0;
  for (double x : xs) sq += (x - mean) * (x - mean);
  return {std::move(mode), mean, std::sqrt(sq / static_cast<double>(xs.size()))};
}

}  // namespace

std::vector<BenchRow> bench_switch(ProbeBackend& backend, int trials,
                                   TxMode dropit_mode, std::uint64_t seed) {
  if (trials < 10000) {
    throw_error(ErrorKind::Usage, "bench needs at least 10000 trials");
  }
  TxRegion region({dropit_mode, 1000});
  ArgRecord args;
  {
    ParamSpec spec;
    spec.name = "selector";
    spec.kind = ParamKind::IntScalar;
    spec.lo = 0;
    spec.hi = 4;
    ParamSpec lock = spec;
    lock.name = "lock";
    args = generate_args(backend, {spec, lock}, seed, {true});
    set_int_arg(backend, args.args[1], 0);
  }
  const Argument& sel = args.args[0];
  const Argument& lock_word = args.args[1];
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::int64_t> pick(0, 4);

  std::vector<double> costs[3];
  const bool hw = backend.kind() == BackendKind::Hardware;
  std::unique_ptr<sim::Timeline> tl;
  std::unique_ptr<UserMemory> mem;
  if (hw) {
    mem = std::make_unique<HwMemory>(static_cast<HwProbe&>(backend),
                                      kDefaultCyclesPerTick);
  } else {
    tl = std::make_unique<sim::Timeline>(
        static_cast<SimProbe&>(backend).machine(), seed);
    mem = std::make_unique<SimMemory>(*tl, Actor::Target,
                                      static_cast<SimProbe&>(backend).machine().now());
  }
  std::atomic_flag spin = ATOMIC_FLAG_INIT;

  auto measure = [&](auto&& fn) -> double {
    if (hw) {
      const std::uint64_t t0 = read_cycles();
      fn();
      return static_cast<double>(read_cycles() - t0);
    }
    const Tick t0 = mem->now();
    fn();
    return static_cast<double>(mem->now() - t0);
  };

  for (int i = 0; i < trials; ++i) {
    set_int_arg(backend, args.args[0], pick(rng));
    costs[0].push_back(measure([&] { switch_body(*mem, sel); }));
    costs[1].push_back(measure([&] {
      if (hw) {
        while (spin.test_and_set(std::memory_order_acquire)) {
        }
        switch_body(*mem, sel);
        spin.clear(std::memory_order_release);
      } else {
        // On the simulator the lock word lives in shared memory, so its
        // acquire and release cost accesses like any other.
        while (mem->fetch_i64(lock_word) != 0) {
        }
        mem->store_i64(lock_word, 0, 1);
        switch_body(*mem, sel);
        mem->store_i64(lock_word, 0, 0);
      }
    }));
    costs[2].push_back(measure([&] {
      protect(region, *mem, [&](UserMemory& tx) { switch_body(tx, sel); },
              [] { bench_sink = bench_sink - 1; });
    }));
  }
  return {summarize("unprotected", costs[0]), summarize("spinlock", costs[1]),
          summarize("dropit", costs[2])};
}

}  // namespace dfetch
