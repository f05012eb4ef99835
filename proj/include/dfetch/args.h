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

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "dfetch/probe.h"

namespace dfetch {

enum class ParamKind : std::uint8_t {
  IntScalar,
  Buffer,
  CString,
  StructWithMembers,
  FileNameLike,
  InOutBuffer,
};

std::string_view to_string(ParamKind k);

// Declarative description of one black-box parameter. Generators read the
// bounds below; `invalid_rate` is the share of draws deliberately outside
// them, so the target's own checks get exercised too.
struct ParamSpec {
  std::string name;
  ParamKind kind = ParamKind::IntScalar;
  std::size_t size_bytes = 8;
  // Passed by value: never placed in shared memory, so nothing to monitor.
  bool by_value = false;
  // IntScalar: value range. CString/FileNameLike: length range.
  std::int64_t lo = 0;
  std::int64_t hi = 0;
  // Buffer of fixed-size records whose count is the value of this parameter.
  int count_param = -1;
  double invalid_rate = 0.1;
};

struct Argument {
  int index = 0;
  ParamSpec spec;
  SharedBuffer buffer;  // empty for by-value parameters
  std::int64_t value = 0;  // IntScalar value as generated
  bool valid = true;  // drawn inside the declared bounds

  bool shared() const { return !spec.by_value; }
};

struct ArgRecord {
  std::vector<Argument> args;
  std::uint64_t seed = 0;

  const Argument& at(int index) const;
};

struct GenOptions {
  // Never draw outside the declared bounds.
  bool valid_only = false;
};

// Allocates one shared buffer per by-reference parameter on `backend` and
// fills it from its ParamSpec. Deterministic in `seed`.
ArgRecord generate_args(ProbeBackend& backend,
                        const std::vector<ParamSpec>& specs, std::uint64_t seed,
                        GenOptions opts = {});

// Overwrites an IntScalar argument's value in place, host side.
void set_int_arg(ProbeBackend& backend, Argument& a, std::int64_t v);

}  // namespace dfetch
