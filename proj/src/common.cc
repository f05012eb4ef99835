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

#include "dfetch/common.h"

namespace dfetch {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Usage: return "usage";
    case ErrorKind::State: return "state";
    case ErrorKind::Capability: return "capability";
    case ErrorKind::Calibration: return "calibration";
    case ErrorKind::Resource: return "resource";
    case ErrorKind::Config: return "config";
  }
  return "unknown";
}

void throw_error(ErrorKind kind, const std::string& what) {
  throw Error(kind, std::string(to_string(kind)) + " error: " + what);
}

std::string_view to_string(Actor a) {
  switch (a) {
    case Actor::Target: return "Target";
    case Actor::Monitor: return "Monitor";
    case Actor::Trigger: return "Trigger";
    case Actor::TxBody: return "TxBody";
  }
  return "?";
}

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::Benign: return "Benign";
    case Verdict::Corrupted: return "Corrupted";
    case Verdict::FaultDetected: return "FaultDetected";
  }
  return "?";
}

std::string_view to_string(BackendKind b) {
  return b == BackendKind::Sim ? "sim" : "hw";
}

BackendKind parse_backend(std::string_view s) {
  if (s == "sim") return BackendKind::Sim;
  if (s == "hw") return BackendKind::Hardware;
  throw_error(ErrorKind::Usage, "unknown backend '" + std::string(s) +
                                    "' (expected hw or sim)");
}

std::uint64_t fnv1a(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace dfetch
