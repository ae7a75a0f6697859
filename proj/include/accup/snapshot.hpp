/*
 * Copyright 2026 The accup Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Named-tensor snapshot container ("TTAW").
//
//   magic   "TTAW"
//   version u32 (= 1)
//   count   u32
//   count x { name_len u16, name utf-8, rank u8, extents u64[rank],
//             values f64[prod(extents)] }
//
// All integers and floats little-endian.

#ifndef ACCUP_SNAPSHOT_HPP_
#define ACCUP_SNAPSHOT_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "accup/tensor.hpp"

namespace accup {

inline constexpr char kSnapshotMagic[4] = {'T', 'T', 'A', 'W'};
inline constexpr std::uint32_t kSnapshotVersion = 1;

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

std::vector<std::uint8_t> EncodeSnapshot(std::span<const NamedTensor> tensors);
std::vector<NamedTensor> DecodeSnapshot(std::span<const std::uint8_t> bytes);

void WriteSnapshot(const std::string& path, std::span<const NamedTensor> tensors);
std::vector<NamedTensor> ReadSnapshot(const std::string& path);

}  // namespace accup

#endif  // ACCUP_SNAPSHOT_HPP_
