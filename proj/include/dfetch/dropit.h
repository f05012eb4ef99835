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

// Transactional protection of a code region against concurrent changes to
// the memory it reads.
//
//   TxRegion region({TxMode::EmulatedTx, 1000});
//   TxResult r = protect(region, mem,
//                        [&](UserMemory& tx) { /* reads through tx */ },
//                        [&] { /* runs once if every attempt aborted */ });

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "dfetch/memory.h"
#include "dfetch/targets.h"

namespace dfetch {

enum class TxMode : std::uint8_t { HardwareTx, EmulatedTx, LockFallback };

std::string_view to_string(TxMode m);
TxMode parse_tx_mode(std::string_view s);

struct TxStats {
  std::uint64_t executions = 0;
  std::uint64_t attempts = 0;
  std::uint64_t commits = 0;
  std::uint64_t aborts = 0;
  std::uint64_t conflict_aborts = 0;
  std::uint64_t explicit_aborts = 0;
  std::uint64_t fallbacks = 0;
};

struct TxRegionConfig {
  TxMode mode = TxMode::EmulatedTx;
  int retries = 1000;
};

// Used by one thread at a time. HardwareTx on a CPU without RTM is a
// capability error here, not at protect time.
class TxRegion {
 public:
  explicit TxRegion(TxRegionConfig cfg = {});

  TxMode mode() const { return cfg_.mode; }
  int retries() const { return cfg_.retries; }
  const TxStats& stats() const { return stats_; }
  TxStats& mutable_stats() { return stats_; }

 private:
  TxRegionConfig cfg_;
  TxStats stats_;
};

enum class TxStatus : std::uint8_t { Committed, FellBack };

std::string_view to_string(TxStatus s);

struct TxResult {
  TxStatus status = TxStatus::Committed;
  int attempts = 0;
};

using TxBody = std::function<void(UserMemory&)>;

// Runs `body` until one attempt commits, at most retries + 1 times, then
// `fallback` once. An exception from the body discards its buffered writes
// and propagates. Nested calls on one thread are a usage error.
TxResult protect(TxRegion& region, UserMemory& mem, const TxBody& body,
                 const std::function<void()>& fallback);

bool rtm_supported();

// Copy of naive_strcpy's measure-then-copy, inside a region. Returns
// FaultDetected from the fallback, otherwise Benign or Corrupted from the
// copy's own bound check.
InvokeResult protected_strcpy(UserMemory& mem, const Argument& src,
                              TxRegion& region, Tick gap = 20);

// The target with its whole invocation wrapped in a region. The fallback
// reports FaultDetected. When `stats` is set, every execution adds to it.
TargetDescriptor protect_target(const TargetDescriptor& t, TxRegionConfig cfg,
                                std::shared_ptr<TxStats> stats = nullptr);

struct BenchRow {
  std::string mode;
  double mean_cost = 0.0;
  double stddev = 0.0;
};

// Cost of a 5-case switch dispatch over a shared selector, unprotected,
// under a spinlock, and in a region. Hardware: cycles. Simulator: virtual
// ticks, which only reflect the configured access costs.
std::vector<BenchRow> bench_switch(ProbeBackend& backend, int trials,
                                   TxMode dropit_mode, std::uint64_t seed);

}  // namespace dfetch
