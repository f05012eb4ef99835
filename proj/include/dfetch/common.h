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

#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace dfetch {

inline constexpr std::size_t kLineSize = 64;
inline constexpr std::size_t kPageSize = 4096;

// Virtual ticks on the simulator, cycles on hardware.
using Tick = std::int64_t;

// Opaque cache-line token. On the simulator it indexes the line table; on
// hardware it indexes the backend's line registry.
struct LineId {
  std::uint32_t value = 0;
  friend constexpr bool operator==(LineId, LineId) = default;
  friend constexpr auto operator<=>(LineId, LineId) = default;
};

enum class ErrorKind { Usage, State, Capability, Calibration, Resource, Config };

std::string_view to_string(ErrorKind kind);

// Every failure the library reports carries one of the kinds above; the CLI
// maps them onto distinct exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void throw_error(ErrorKind kind, const std::string& what);

enum class Actor : std::uint8_t { Target, Monitor, Trigger, TxBody };
enum class Verdict : std::uint8_t { Benign, Corrupted, FaultDetected };
enum class BackendKind : std::uint8_t { Sim, Hardware };

std::string_view to_string(Actor a);
std::string_view to_string(Verdict v);
std::string_view to_string(BackendKind b);
BackendKind parse_backend(std::string_view s);

// splitmix64 finalizer; used to derive per-trial seeds and same-tick ordering
// keys without threading generator state through the scheduler.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t mix64(std::uint64_t a, std::uint64_t b) {
  return mix64(a ^ mix64(b + 0x632be59bd9b4e019ULL));
}

constexpr std::uint64_t mix64(std::uint64_t a, std::uint64_t b,
                              std::uint64_t c) {
  return mix64(mix64(a, b), c);
}

// FNV-1a, used for config hashes in report headers.
std::uint64_t fnv1a(std::string_view data);

}  // namespace dfetch
