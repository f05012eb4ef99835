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

#include "dfetch/targets.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>

namespace dfetch {
namespace {

using sim::AccessKind;

// Every target idles this long before its first access and after its last,
// so that adversaries started at invocation time get a few ticks of lead.
constexpr Tick kEntry = 4;
constexpr Tick kTail = 4;
// Spacing of follow-up accesses in the control targets. Comfortably above
// the debounce window of the monitor at the default probe period.
constexpr Tick kControlGap = 12;

constexpr std::size_t kStrCap = 32;
constexpr std::int64_t kMaxRecords = 16;
constexpr std::size_t kRecordSize = 4;
constexpr Tick kDedupeEntry = 16;
constexpr Tick kDedupeGap = 101;
constexpr Tick kRecordLag = 2;
constexpr std::int64_t kCases = 6;
constexpr Tick kMultiUse = kEntry + 8 * kControlGap;

InvokeResult rejected(std::int64_t ret = -1) {
  InvokeResult r;
  r.rejected = true;
  r.ret = ret;
  return r;
}

// strlen over user memory, one line per access. Returns the length and the
// time of the first access; strings without a terminator run to the end of
// the allocation.
std::size_t user_strlen(UserMemory& mem, const Argument& s, Tick* first) {
  std::array<std::byte, kLineSize> line{};
  for (std::size_t off = 0; off < s.buffer.alloc_bytes; off += kLineSize) {
    const Tick t = mem.fetch(s, off, line);
    if (off == 0 && first) *first = t;
    for (std::size_t i = 0; i < kLineSize; ++i) {
      if (line[i] == std::byte{0}) return off + i;
    }
  }
  return s.buffer.alloc_bytes;
}

ParamSpec int_param(std::string name, std::int64_t lo, std::int64_t hi) {
  ParamSpec p;
  p.name = std::move(name);
  p.kind = ParamKind::IntScalar;
  p.size_bytes = 8;
  p.lo = lo;
  p.hi = hi;
  return p;
}

ParamSpec text_param(std::string name, ParamKind kind, std::int64_t lo,
                     std::int64_t hi) {
  ParamSpec p;
  p.name = std::move(name);
  p.kind = kind;
  p.size_bytes = kLineSize;
  p.lo = lo;
  p.hi = hi;
  return p;
}

ParamSpec block_param(std::string name, ParamKind kind, std::size_t size) {
  ParamSpec p;
  p.name = std::move(name);
  p.kind = kind;
  p.size_bytes = size;
  return p;
}

std::vector<ScriptStep> two_reads(int param, Tick entry, Tick gap) {
  return {{param, 0, AccessKind::Read, entry}, {param, 0, AccessKind::Read, gap}};
}

// --- exploitable -----------------------------------------------------------

InvokeResult naive_strcpy(UserMemory& mem, const ArgRecord& a,
                          const TargetOptions& o) {
  const Argument& src = a.at(0);
  mem.work_until(kEntry);
  Tick t1 = 0;
  const std::size_t len = user_strlen(mem, src, &t1);
  if (len >= kStrCap) {
    mem.work(kTail);
    return rejected();
  }
  mem.work_until(t1 + o.gap.value_or(20));
  // Copy up to and including the terminator, however far away it now is.
  const std::size_t copied = user_strlen(mem, src, nullptr) + 1;
  mem.work(kTail);
  InvokeResult r;
  r.ret = static_cast<std::int64_t>(len);
  if (copied > kStrCap) r.verdict = Verdict::Corrupted;
  return r;
}

InvokeResult safe_retry_copy(UserMemory& mem, const ArgRecord& a,
                             const TargetOptions& o) {
  constexpr int kAttempts = 5;
  const Argument& src = a.at(0);
  mem.work_until(kEntry);
  for (int attempt = 0; attempt < kAttempts; ++attempt) {
    Tick t1 = 0;
    const std::size_t len = user_strlen(mem, src, &t1);
    if (len >= kStrCap) {
      mem.work(kTail);
      return rejected();
    }
    mem.work_until(t1 + o.gap.value_or(20));
    std::array<std::byte, kStrCap> copy{};
    mem.fetch(src, 0, std::span(copy).first(len + 1));
    if (copy[len] == std::byte{0}) {
      mem.work(kTail);
      InvokeResult r;
      r.ret = static_cast<std::int64_t>(len);
      r.attempts = attempt + 1;
      return r;
    }
    mem.work(kEntry);
  }
  mem.work(kTail);
  InvokeResult r;
  r.verdict = Verdict::FaultDetected;
  r.ret = -2;
  r.attempts = kAttempts;
  return r;
}

InvokeResult dedupe_analog(UserMemory& mem, const ArgRecord& a,
                           const TargetOptions& o) {
  const Argument& count = a.at(0);
  const Argument& records = a.at(1);
  mem.work_until(kDedupeEntry);
  Tick t1 = 0;
  std::int64_t first = 0;
  {
    std::array<std::byte, 8> b{};
    t1 = mem.fetch(count, 0, b);
    std::memcpy(&first, b.data(), 8);
  }
  if (first < 1 || first > kMaxRecords) {
    mem.work(kTail);
    return rejected();
  }
  // The kernel-side table is sized from the first read.
  mem.work_until(t1 + o.gap.value_or(kDedupeGap));
  const Tick t2 = mem.now();
  const auto second = static_cast<std::uint64_t>(mem.fetch_i64(count));
  mem.work_until(t2 + kRecordLag);
  const std::size_t cap = records.buffer.alloc_bytes / kRecordSize;
  const std::size_t n = static_cast<std::size_t>(
      std::min<std::uint64_t>(second, cap));
  std::vector<std::byte> recs(n * kRecordSize);
  if (n > 0) mem.fetch(records, 0, recs);
  std::vector<std::uint32_t> ids(n);
  if (n > 0) std::memcpy(ids.data(), recs.data(), recs.size());
  std::sort(ids.begin(), ids.end());
  mem.work(kTail);
  InvokeResult r;
  r.ret = std::unique(ids.begin(), ids.end()) - ids.begin();
  if (second > static_cast<std::uint64_t>(first)) r.verdict = Verdict::Corrupted;
  return r;
}

InvokeResult switch_jump_table(UserMemory& mem, const ArgRecord& a,
                               const TargetOptions& o) {
  const Argument& sel = a.at(0);
  mem.work_until(kEntry);
  const Tick t1 = mem.now();
  const std::int64_t s1 = mem.fetch_i64(sel);
  if (s1 < 0 || s1 >= kCases) {
    mem.work(kTail);
    return rejected();
  }
  mem.work_until(t1 + o.gap.value_or(kControlGap));
  const auto s2 = static_cast<std::uint64_t>(mem.fetch_i64(sel));
  mem.work(kTail);
  InvokeResult r;
  if (s2 >= static_cast<std::uint64_t>(kCases)) {
    r.verdict = Verdict::Corrupted;
    r.ret = -3;
  } else {
    r.ret = static_cast<std::int64_t>(s2) * 10;
    r.wrong_case = static_cast<std::int64_t>(s2) != s1;
  }
  return r;
}

InvokeResult multi_check(int n, UserMemory& mem, const ArgRecord& a) {
  const Argument& value = a.at(0);
  std::int64_t v0 = 0;
  for (int i = 0; i < n; ++i) {
    mem.work_until(kEntry + i * kControlGap);
    const std::int64_t v = mem.fetch_i64(value);
    if (i == 0) {
      v0 = v;
      if (v0 < 1 || v0 > kMaxRecords) return rejected();
    } else if (v != v0) {
      return rejected();
    }
  }
  mem.work_until(kMultiUse);
  const auto use = static_cast<std::uint64_t>(mem.fetch_i64(value));
  mem.work(kTail);
  InvokeResult r;
  r.ret = v0;
  if (use > static_cast<std::uint64_t>(v0)) r.verdict = Verdict::Corrupted;
  return r;
}

InvokeResult two_fetch(UserMemory& mem, const ArgRecord& a,
                       const TargetOptions& o) {
  const Argument& value = a.at(0);
  mem.work_until(kEntry);
  const Tick t1 = mem.now();
  const std::int64_t v1 = mem.fetch_i64(value);
  mem.work_until(t1 + o.gap.value_or(20));
  const std::int64_t v2 = mem.fetch_i64(value);
  mem.work(kTail);
  InvokeResult r;
  r.ret = v1;
  if (v1 != v2) r.verdict = Verdict::Corrupted;
  return r;
}

// --- controls --------------------------------------------------------------

InvokeResult single_fetch(UserMemory& mem, const ArgRecord& a,
                          const TargetOptions&) {
  mem.work_until(kEntry);
  InvokeResult r;
  r.ret = mem.fetch_i64(a.at(0));
  mem.work(kTail);
  return r;
}

InvokeResult inout_buffer(UserMemory& mem, const ArgRecord& a,
                          const TargetOptions&) {
  const Argument& buf = a.at(0);
  mem.work_until(kEntry);
  const Tick t1 = mem.now();
  const std::int64_t in = mem.fetch_i64(buf, 0);
  mem.work_until(t1 + kControlGap);
  mem.store_i64(buf, 8, in * 2 + 1);
  mem.work(kTail);
  InvokeResult r;
  r.ret = in;
  return r;
}

InvokeResult struct_members(UserMemory& mem, const ArgRecord& a,
                            const TargetOptions&) {
  const Argument& s = a.at(0);
  mem.work_until(kEntry);
  const Tick t1 = mem.now();
  const std::int64_t x = mem.fetch_i64(s, 0);
  mem.work_until(t1 + kControlGap);
  const std::int64_t y = mem.fetch_i64(s, 8);
  mem.work(kTail);
  InvokeResult r;
  r.ret = x ^ y;
  return r;
}

int filename_reads(std::size_t len) { return 2 + static_cast<int>(len % 6); }

InvokeResult filename_cache(UserMemory& mem, const ArgRecord& a,
                            const TargetOptions&) {
  const Argument& name = a.at(0);
  mem.work_until(kEntry);
  std::array<std::byte, kLineSize> snap{};
  const Tick t1 = mem.fetch(name, 0, snap);
  std::size_t len = 0;
  while (len < kLineSize && snap[len] != std::byte{0}) ++len;
  // Later lookups re-read the name but always act on the snapshot.
  const int reads = filename_reads(len);
  for (int i = 1; i < reads; ++i) {
    mem.work_until(t1 + i * kControlGap);
    std::array<std::byte, kLineSize> again{};
    mem.fetch(name, 0, again);
  }
  mem.work(kTail);
  InvokeResult r;
  r.ret = static_cast<std::int64_t>(len);
  return r;
}

InvokeResult sanity_ok(UserMemory& mem, const ArgRecord& a,
                       const TargetOptions&) {
  const Argument& value = a.at(0);
  const ParamSpec& spec = value.spec;
  mem.work_until(kEntry);
  const Tick t1 = mem.now();
  const std::int64_t v1 = mem.fetch_i64(value);
  if (v1 < spec.lo || v1 > spec.hi) {
    mem.work(kTail);
    return rejected();
  }
  mem.work_until(t1 + kControlGap);
  // The second read is checked again before use.
  const std::int64_t v2 = mem.fetch_i64(value);
  mem.work(kTail);
  if (v2 < spec.lo || v2 > spec.hi) return rejected();
  InvokeResult r;
  r.ret = v2;
  return r;
}

// Generators record a string argument's length in its value.
std::size_t arg_strlen(const ArgRecord& a, int idx) {
  return static_cast<std::size_t>(a.at(idx).value);
}

std::vector<TargetDescriptor> build_registry() {
  std::vector<TargetDescriptor> reg;

  {
    TargetDescriptor t;
    t.id = "naive_strcpy";
    t.summary = "measures a string, then copies it into a 32-byte buffer";
    t.params = {text_param("src", ParamKind::CString, 1, kStrCap - 1)};
    t.invoke = naive_strcpy;
    t.access_script = [](const ArgRecord&, const TargetOptions& o) {
      return two_reads(0, kEntry, o.gap.value_or(20));
    };
    t.annotation = Annotation::Exploitable;
    t.category = Category::ExploitableBug;
    t.bug_param = 0;
    t.default_gap = 20;
    reg.push_back(std::move(t));
  }
  {
    TargetDescriptor t;
    t.id = "safe_retry_copy";
    t.summary = "string copy that re-validates and retries on change";
    t.params = {text_param("src", ParamKind::CString, 1, kStrCap - 1)};
    t.invoke = safe_retry_copy;
    t.access_script = [](const ArgRecord&, const TargetOptions& o) {
      return two_reads(0, kEntry, o.gap.value_or(20));
    };
    t.annotation = Annotation::NonExploitableDoubleFetch;
    t.category = Category::Strings;
    t.bug_param = 0;
    t.default_gap = 20;
    reg.push_back(std::move(t));
  }
  {
    TargetDescriptor t;
    t.id = "dedupe_analog";
    t.summary = "sizes a table from a count, re-reads the count to fill it";
    ParamSpec recs = block_param("records", ParamKind::Buffer,
                                 kMaxRecords * kRecordSize);
    recs.count_param = 0;
    t.params = {int_param("count", 1, kMaxRecords), recs};
    t.invoke = dedupe_analog;
    t.access_script = [](const ArgRecord&, const TargetOptions& o) {
      auto s = two_reads(0, kDedupeEntry, o.gap.value_or(kDedupeGap));
      s.push_back({1, 0, AccessKind::Read, kRecordLag});
      return s;
    };
    t.annotation = Annotation::Exploitable;
    t.category = Category::ExploitableBug;
    t.bug_param = 0;
    t.default_gap = kDedupeGap;
    reg.push_back(std::move(t));
  }
  {
    TargetDescriptor t;
    t.id = "switch_jump_table";
    t.summary = "bounds-checks a selector, re-reads it to index a jump table";
    t.params = {int_param("selector", 0, kCases - 1)};
    t.invoke = switch_jump_table;
    t.access_script = [](const ArgRecord&, const TargetOptions& o) {
      return two_reads(0, kEntry, o.gap.value_or(kControlGap));
    };
    t.annotation = Annotation::Exploitable;
    t.category = Category::ExploitableBug;
    t.bug_param = 0;
    t.default_gap = kControlGap;
    reg.push_back(std::move(t));
  }
  for (int n = 1; n <= 8; ++n) {
    TargetDescriptor t;
    t.id = "multi_check_" + std::to_string(n);
    t.summary = "runs " + std::to_string(n) +
                " check(s) on a value before using it as a bound";
    ParamSpec checks = int_param("n_checks", n, n);
    checks.by_value = true;
    checks.invalid_rate = 0.0;
    t.params = {int_param("value", 1, kMaxRecords), checks};
    t.invoke = [n](UserMemory& mem, const ArgRecord& a, const TargetOptions&) {
      return multi_check(n, mem, a);
    };
    t.access_script = [n](const ArgRecord&, const TargetOptions&) {
      std::vector<ScriptStep> s;
      for (int i = 0; i < n; ++i) {
        s.push_back({0, 0, AccessKind::Read, i == 0 ? kEntry : kControlGap});
      }
      s.push_back({0, 0, AccessKind::Read,
                   kMultiUse - kEntry - (n - 1) * kControlGap});
      return s;
    };
    t.annotation = Annotation::Exploitable;
    t.category = Category::ExploitableBug;
    t.bug_param = 0;
    t.in_corpus = n == 3;
    t.default_gap = kControlGap;
    reg.push_back(std::move(t));
  }
  {
    TargetDescriptor t;
    t.id = "two_fetch";
    t.summary = "reads a value twice at a configurable distance";
    t.params = {int_param("value", 0, 100)};
    t.invoke = two_fetch;
    t.access_script = [](const ArgRecord&, const TargetOptions& o) {
      return two_reads(0, kEntry, o.gap.value_or(20));
    };
    t.annotation = Annotation::Exploitable;
    t.category = Category::ExploitableBug;
    t.bug_param = 0;
    t.in_corpus = false;
    t.default_gap = 20;
    reg.push_back(std::move(t));
  }
  {
    TargetDescriptor t;
    t.id = "single_fetch";
    t.summary = "reads its argument once";
    t.params = {int_param("value", 0, 100)};
    t.invoke = single_fetch;
    t.access_script = [](const ArgRecord&, const TargetOptions&) {
      return std::vector<ScriptStep>{{0, 0, AccessKind::Read, kEntry}};
    };
    t.annotation = Annotation::SingleFetch;
    reg.push_back(std::move(t));
  }
  {
    TargetDescriptor t;
    t.id = "inout_buffer";
    t.summary = "reads a request and writes the reply into the same buffer";
    t.params = {block_param("io", ParamKind::InOutBuffer, kLineSize)};
    t.invoke = inout_buffer;
    t.access_script = [](const ArgRecord&, const TargetOptions&) {
      return std::vector<ScriptStep>{{0, 0, AccessKind::Read, kEntry},
                                     {0, 0, AccessKind::Write, kControlGap}};
    };
    t.annotation = Annotation::NonExploitableDoubleFetch;
    t.category = Category::SharedInOut;
    t.bug_param = 0;
    reg.push_back(std::move(t));
  }
  {
    TargetDescriptor t;
    t.id = "struct_members";
    t.summary = "reads two members of one struct separately";
    t.params = {block_param("s", ParamKind::StructWithMembers, 16)};
    t.invoke = struct_members;
    t.access_script = [](const ArgRecord&, const TargetOptions&) {
      return two_reads(0, kEntry, kControlGap);
    };
    t.annotation = Annotation::NonExploitableDoubleFetch;
    t.category = Category::StructureElements;
    t.bug_param = 0;
    reg.push_back(std::move(t));
  }
  {
    TargetDescriptor t;
    t.id = "filename_cache";
    t.summary = "looks a path up repeatedly, acting on its first snapshot";
    t.params = {text_param("name", ParamKind::FileNameLike, 1, 40)};
    t.invoke = filename_cache;
    t.access_script = [](const ArgRecord& a, const TargetOptions&) {
      std::vector<ScriptStep> s{{0, 0, AccessKind::Read, kEntry}};
      const int reads = filename_reads(arg_strlen(a, 0));
      for (int i = 1; i < reads; ++i) {
        s.push_back({0, 0, AccessKind::Read, kControlGap});
      }
      return s;
    };
    t.annotation = Annotation::NonExploitableDoubleFetch;
    t.category = Category::Filenames;
    t.bug_param = 0;
    reg.push_back(std::move(t));
  }
  {
    TargetDescriptor t;
    t.id = "sanity_ok";
    t.summary = "re-reads a value and checks it again before use";
    t.params = {int_param("value", 0, 100)};
    t.invoke = sanity_ok;
    t.access_script = [](const ArgRecord&, const TargetOptions&) {
      return two_reads(0, kEntry, kControlGap);
    };
    t.annotation = Annotation::NonExploitableDoubleFetch;
    t.category = Category::SanityCheck;
    t.bug_param = 0;
    reg.push_back(std::move(t));
  }
  return reg;
}

}  // namespace

std::string_view to_string(Annotation a) {
  switch (a) {
    case Annotation::Exploitable: return "exploitable";
    case Annotation::NonExploitableDoubleFetch: return "non-exploitable";
    case Annotation::SingleFetch: return "single-fetch";
  }
  return "?";
}

std::string_view to_string(Category c) {
  switch (c) {
    case Category::Filenames: return "Filenames";
    case Category::SharedInOut: return "Shared I/O";
    case Category::Strings: return "Strings";
    case Category::SanityCheck: return "Sanity Checks";
    case Category::StructureElements: return "Structure Elements";
    case Category::ExploitableBug: return "Exploitable bug";
    case Category::None: return "None";
  }
  return "?";
}

const std::vector<TargetDescriptor>& registry() {
  static const std::vector<TargetDescriptor> reg = build_registry();
  return reg;
}

const TargetDescriptor& find_target(std::string_view id) {
  for (const TargetDescriptor& t : registry()) {
    if (t.id == id) return t;
  }
  throw_error(ErrorKind::Usage, "unknown target '" + std::string(id) + "'");
}

std::vector<const TargetDescriptor*> corpus() {
  std::vector<const TargetDescriptor*> out;
  for (const TargetDescriptor& t : registry()) {
    if (t.in_corpus) out.push_back(&t);
  }
  return out;
}

std::vector<Tick> access_times(const TargetDescriptor& t, const ArgRecord& a,
                               int param, const TargetOptions& opts) {
  std::vector<Tick> out;
  Tick at = 0;
  for (const ScriptStep& s : t.access_script(a, opts)) {
    at += s.gap;
    if (s.param == param) out.push_back(at);
  }
  return out;
}

InvokeResult invoke_plain(sim::Machine& m, const TargetDescriptor& t,
                          const ArgRecord& a, const TargetOptions& opts) {
  sim::Timeline tl(m, a.seed);
  SimMemory mem(tl, Actor::Target, m.now());
  const InvokeResult r = t.invoke(mem, a, opts);
  tl.finish(mem.clock(), 0);
  m.set_now(mem.clock());
  return r;
}

Tick gap_ticks(double fr_cycles, double fr_cycle_cost) {
  return std::llround(fr_cycles * fr_cycle_cost);
}

Tick dedupe_gap(const SimConfig& cfg) {
  return gap_ticks(10000.0 / 298.0, static_cast<double>(cfg.fr_cycle_cost()));
}

}  // namespace dfetch
