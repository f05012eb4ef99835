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

#include <atomic>
#include <cstdlib>
#include <cstring>
#include <deque>
#include <mutex>
#include <shared_mutex>

#include "dfetch/probe.h"

#if defined(__x86_64__) || defined(__i386__)
#include <cpuid.h>
#include <x86intrin.h>
#define DFETCH_X86 1
#elif defined(__aarch64__)
#define DFETCH_ARM64 1
#endif

namespace dfetch {
namespace {

inline void full_fence() {
#if DFETCH_X86
  _mm_mfence();
#elif DFETCH_ARM64
  asm volatile("dsb ish" ::: "memory");
#else
  std::atomic_thread_fence(std::memory_order_seq_cst);
#endif
}

inline void flush_line(const void* p) {
#if DFETCH_X86
  _mm_clflush(p);
#elif DFETCH_ARM64
  asm volatile("dc civac, %0" ::"r"(p) : "memory");
#else
  (void)p;
#endif
}

// Ordered cycle counter read: nothing before it is still in flight.
inline std::uint64_t fenced_cycles() {
#if DFETCH_X86
  _mm_lfence();
  const std::uint64_t t = __rdtsc();
  _mm_lfence();
  return t;
#elif DFETCH_ARM64
  std::uint64_t t;
  asm volatile("isb; mrs %0, cntvct_el0; isb" : "=r"(t)::"memory");
  return t;
#else
  return 0;
#endif
}

inline void touch(std::byte* p) {
  std::atomic_ref<unsigned char>(*reinterpret_cast<unsigned char*>(p))
      .load(std::memory_order_relaxed);
}

}  // namespace

std::uint64_t read_cycles() { return fenced_cycles(); }

struct HwProbe::Impl {
  struct Free {
    void operator()(std::byte* p) const { std::free(p); }
  };
  std::vector<std::unique_ptr<std::byte, Free>> blocks;
  std::vector<std::byte*> lines;
  std::deque<std::atomic<std::uint64_t>> versions;
  std::deque<std::atomic<bool>> locks;
  // Probes share, calibration is exclusive.
  mutable std::shared_mutex mu;
};

bool HwProbe::supported() {
#if DFETCH_X86
  unsigned a, b, c, d;
  if (!__get_cpuid(1, &a, &b, &c, &d)) return false;
  const bool clflush = d & (1u << 19);
  const bool tsc = d & (1u << 4);
  return clflush && tsc;
#elif DFETCH_ARM64
  return true;
#else
  return false;
#endif
}

HwProbe::HwProbe() : impl_(std::make_unique<Impl>()) {
  if (!supported()) {
    throw_error(ErrorKind::Capability,
                "host CPU lacks a user-mode cache flush or cycle counter");
  }
}

HwProbe::~HwProbe() = default;

SharedBuffer HwProbe::allocate_shared(std::size_t size_bytes) {
  if (size_bytes == 0) throw_error(ErrorKind::Usage, "zero-sized buffer");
  const std::size_t alloc = (size_bytes + kPageSize - 1) / kPageSize * kPageSize;
  std::unique_lock lk(impl_->mu);
  auto* raw = static_cast<std::byte*>(std::aligned_alloc(kPageSize, alloc));
  if (!raw) throw_error(ErrorKind::Resource, "out of memory");
  std::memset(raw, 0, alloc);
  impl_->blocks.emplace_back(raw);

  SharedBuffer buf;
  buf.base = LineId{static_cast<std::uint32_t>(impl_->lines.size())};
  buf.size_bytes = size_bytes;
  buf.alloc_bytes = alloc;
  for (std::size_t i = 0; i < alloc / kLineSize; ++i) {
    impl_->lines.push_back(raw + i * kLineSize);
    impl_->versions.emplace_back(0);
    impl_->locks.emplace_back(false);
  }
  const std::size_t used = (size_bytes + kLineSize - 1) / kLineSize;
  for (std::size_t i = 0; i < used; ++i) {
    buf.line_ids.push_back(LineId{buf.base.value + static_cast<std::uint32_t>(i)});
  }
  return buf;
}

std::byte* HwProbe::address(LineId line) const {
  if (line.value >= impl_->lines.size()) {
    throw_error(ErrorKind::Usage,
                "line " + std::to_string(line.value) + " is not registered");
  }
  return impl_->lines[line.value];
}

void HwProbe::flush(LineId line) {
  std::shared_lock lk(impl_->mu);
  flush_line(address(line));
  full_fence();
}

ProbeSample HwProbe::timed_reload(LineId line) {
  const CalibrationProfile& p = require_profile();
  std::shared_lock lk(impl_->mu);
  std::byte* addr = address(line);
  full_fence();
  const std::uint64_t t0 = fenced_cycles();
  touch(addr);
  const std::uint64_t t1 = fenced_cycles();
  ProbeSample s;
  s.timestamp = static_cast<Tick>(t0);
  s.latency = static_cast<Tick>(t1 - t0);
  s.classification = p.classify(s.latency);
  return s;
}

CalibrationProfile HwProbe::calibrate(int rounds) {
  if (rounds < 1) throw_error(ErrorKind::Usage, "calibration rounds must be >= 1");
  std::unique_lock lk(impl_->mu);
  auto* line = static_cast<std::byte*>(std::aligned_alloc(kPageSize, kPageSize));
  if (!line) throw_error(ErrorKind::Resource, "out of memory");
  std::unique_ptr<std::byte, Impl::Free> guard(line);
  std::memset(line, 1, kPageSize);

  std::vector<Tick> hits, misses;
  std::uint64_t fr_total = 0;
  for (int i = 0; i < rounds; ++i) {
    touch(line);
    full_fence();
    std::uint64_t t0 = fenced_cycles();
    touch(line);
    std::uint64_t t1 = fenced_cycles();
    hits.push_back(static_cast<Tick>(t1 - t0));

    const std::uint64_t start = fenced_cycles();
    flush_line(line);
    full_fence();
    t0 = fenced_cycles();
    touch(line);
    t1 = fenced_cycles();
    misses.push_back(static_cast<Tick>(t1 - t0));
    fr_total += t1 - start;
  }
  profile_ = build_profile(hits, misses,
                           static_cast<double>(fr_total) / rounds);
  return *profile_;
}

std::span<std::byte> HwProbe::bytes(const SharedBuffer& buf) {
  return {address(buf.base), buf.alloc_bytes};
}

std::uint64_t HwProbe::version(LineId line) const {
  address(line);
  return impl_->versions[line.value].load(std::memory_order_acquire);
}

void HwProbe::versioned_store(LineId line, std::size_t offset,
                              std::span<const std::byte> in) {
  std::byte* base = address(line);
  if (offset + in.size() > kLineSize) {
    throw_error(ErrorKind::Usage, "store crosses a line boundary");
  }
  auto& v = impl_->versions[line.value];
  v.fetch_add(1, std::memory_order_acq_rel);
  for (std::size_t i = 0; i < in.size(); ++i) {
    std::atomic_ref<unsigned char>(
        *reinterpret_cast<unsigned char*>(base + offset + i))
        .store(static_cast<unsigned char>(in[i]), std::memory_order_relaxed);
  }
  v.fetch_add(1, std::memory_order_release);
}

void HwProbe::versioned_load(LineId line, std::size_t offset,
                             std::span<std::byte> out) const {
  std::byte* base = address(line);
  if (offset + out.size() > kLineSize) {
    throw_error(ErrorKind::Usage, "load crosses a line boundary");
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<std::byte>(
        std::atomic_ref<unsigned char>(
            *reinterpret_cast<unsigned char*>(base + offset + i))
            .load(std::memory_order_relaxed));
  }
}

void HwProbe::lock_line(LineId line) {
  address(line);
  bool expected = false;
  while (!impl_->locks[line.value].compare_exchange_weak(
      expected, true, std::memory_order_acquire)) {
    expected = false;
  }
}

void HwProbe::unlock_line(LineId line) {
  address(line);
  impl_->locks[line.value].store(false, std::memory_order_release);
}

bool HwProbe::line_locked(LineId line) const {
  address(line);
  return impl_->locks[line.value].load(std::memory_order_acquire);
}

}  // namespace dfetch
