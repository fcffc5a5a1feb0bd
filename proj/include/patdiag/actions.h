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

#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

namespace patdiag {

/// Per-token agent decisions: 0 retains the token, 1 erases it.
struct ActionSequence {
  static constexpr std::uint8_t kRetain = 0;
  static constexpr std::uint8_t kErase = 1;

  std::vector<std::uint8_t> actions;

  ActionSequence() = default;
  explicit ActionSequence(std::vector<std::uint8_t> a) : actions(std::move(a)) {}
  static ActionSequence retain_all(std::size_t n) {
    return ActionSequence(std::vector<std::uint8_t>(n, kRetain));
  }

  std::size_t size() const { return actions.size(); }
  bool erased(std::size_t i) const { return actions[i] == kErase; }
  std::size_t retained_count() const {
    return static_cast<std::size_t>(std::count(actions.begin(), actions.end(), kRetain));
  }
  bool operator==(const ActionSequence&) const = default;
};

}  // namespace patdiag
