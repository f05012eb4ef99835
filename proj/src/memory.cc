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

#include "dfetch/memory.h"

#include <array>
#include <bit>
#include <cstring>

namespace dfetch {

std::string_view to_string(ParamKind k) {
  switch (k) {
    case ParamKind::IntScalar: return "IntScalar";
    case ParamKind::Buffer: return "Buffer";
    case ParamKind::CString: return "CString";
    case ParamKind::StructWithMembers: return "StructWithMembers";
    case ParamKind::FileNameLike: return "FileNameLike";
    case ParamKind::InOutBuffer: return "InOutBuffer";
  }
  return "?";
}

const Argument& ArgRecord::at(int index) const {
  if (index < 0 || static_cast<std::size_t>(index) >= args.size()) {
    throw_error(ErrorKind::Usage,
                "no parameter with index " + std::to_string(index));
  }
  return args[static_cast<std::size_t>(index)];
}

std::vector<LineChunk> split_lines(const SharedBuffer& buf, std::size_t offset,
                                   std::size_t len) {
  if (buf.alloc_bytes == 0) {
    throw_error(ErrorKind::Usage, "by-value parameter has no shared memory");
  }
  if (offset + len > buf.alloc_bytes) {
    throw_error(ErrorKind::Usage, "access past the end of the allocation");
  }
  std::vector<LineChunk> out;
  std::size_t done = 0;
  while (done < len) {
    const std::size_t pos = offset + done;
    const std::size_t in_line = pos % kLineSize;
    const std::size_t n = std::min(len - done, kLineSize - in_line);
    out.push_back({buf.line_at(pos), in_line, done, n});
    done += n;
  }
  return out;
}

std::int64_t UserMemory::fetch_i64(const Argument& a, std::size_t offset) {
  std::array<std::byte, 8> b{};
  fetch(a, offset, b);
  return std::bit_cast<std::int64_t>(b);
}

void UserMemory::store_i64(const Argument& a, std::size_t offset,
                           std::int64_t v) {
  const auto b = std::bit_cast<std::array<std::byte, 8>>(v);
  store(a, offset, b);
}

Tick SimMemory::fetch(const Argument& a, std::size_t offset,
                      std::span<std::byte> out) {
  sim::Machine& m = tl_.machine();
  Tick first = -1;
  for (const LineChunk& c : split_lines(a.buffer, offset, out.size())) {
    tl_.run_before(t_, sim::Timeline::kTargetId);
    if (first < 0) first = t_ - start_;
    m.access(c.line, sim::AccessKind::Read, actor_);
    std::memcpy(out.data() + c.buf_offset,
                m.line_bytes(c.line).data() + c.line_offset, c.len);
    t_ += m.config().access_ticks;
  }
  return first < 0 ? now() : first;
}

void SimMemory::store(const Argument& a, std::size_t offset,
                      std::span<const std::byte> in) {
  sim::Machine& m = tl_.machine();
  for (const LineChunk& c : split_lines(a.buffer, offset, in.size())) {
    tl_.run_before(t_, sim::Timeline::kTargetId);
    m.access(c.line, sim::AccessKind::Write, actor_);
    std::memcpy(m.line_bytes(c.line).data() + c.line_offset,
                in.data() + c.buf_offset, c.len);
    t_ += m.config().access_ticks;
  }
}

HwMemory::HwMemory(HwProbe& probe, double cycles_per_tick)
    : probe_(probe), cycles_per_tick_(cycles_per_tick), start_(read_cycles()) {}

Tick HwMemory::fetch(const Argument& a, std::size_t offset,
                     std::span<std::byte> out) {
  const Tick first = now();
  for (const LineChunk& c : split_lines(a.buffer, offset, out.size())) {
    probe_.versioned_load(c.line, c.line_offset,
                          out.subspan(c.buf_offset, c.len));
  }
  return first;
}

void HwMemory::store(const Argument& a, std::size_t offset,
                     std::span<const std::byte> in) {
  for (const LineChunk& c : split_lines(a.buffer, offset, in.size())) {
    probe_.versioned_store(c.line, c.line_offset,
                           in.subspan(c.buf_offset, c.len));
  }
}

void HwMemory::work(Tick ticks) {
  const auto until =
      read_cycles() + static_cast<std::uint64_t>(ticks * cycles_per_tick_);
  while (read_cycles() < until) {
  }
}

Tick HwMemory::now() const {
  return static_cast<Tick>(static_cast<double>(read_cycles() - start_) /
                           cycles_per_tick_);
}

}  // namespace dfetch
