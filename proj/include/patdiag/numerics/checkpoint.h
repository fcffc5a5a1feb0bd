// Copyright 2026 The patdiag Authors
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

// Parameter checkpoints: an ordered list of named tensors.
//
// Layout (little-endian):
//   "PDCKPT\0\0"  u32 version  u32 count
//   per tensor: u32 name_len, name bytes, u32 rank, u64 dims[rank],
//               f64 values[prod(dims)] in row-major order

#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "patdiag/numerics/autograd.h"
#include "patdiag/numerics/tensor.h"

namespace patdiag::numerics {

inline constexpr std::uint32_t kCheckpointVersion = 1;

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

std::string encode_checkpoint(const NamedTensors& tensors);
NamedTensors decode_checkpoint(const std::string& bytes);

void save_checkpoint(const std::filesystem::path& path, const NamedTensors& tensors);
NamedTensors load_checkpoint(const std::filesystem::path& path);

NamedTensors snapshot(std::span<const Parameter* const> params);
/// Copies values into params by name; every parameter must be present with
/// an identical shape.
void restore(std::span<Parameter* const> params, const NamedTensors& tensors);

}  // namespace patdiag::numerics
