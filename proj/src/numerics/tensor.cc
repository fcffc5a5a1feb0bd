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

#include "patdiag/numerics/tensor.h"

#include <cmath>
#include <numeric>
#include <sstream>

namespace patdiag::numerics {

namespace {

void check_finite(const Matrix& m) {
  if (!m.allFinite()) throw NumericError("tensor contains NaN or Inf");
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)) {
  if (shape_.empty() || shape_.size() > 2)
    throw NumericError("tensor rank must be 1 or 2, got shape " + shape_string(shape_));
  std::size_t n = 1;
  for (auto d : shape_) {
    if (d == 0) throw NumericError("zero dimension in shape " + shape_string(shape_));
    n *= d;
  }
  if (n != data.size())
    throw NumericError("shape " + shape_string(shape_) + " does not match " +
                       std::to_string(data.size()) + " values");
  const auto r = static_cast<Eigen::Index>(shape_[0]);
  const auto c = static_cast<Eigen::Index>(shape_.size() == 2 ? shape_[1] : 1);
  m_ = Eigen::Map<const Matrix>(data.data(), r, c);
  check_finite(m_);
}

Tensor::Tensor(Matrix m) : m_(std::move(m)) {
  if (m_.size() == 0) throw NumericError("empty tensor");
  check_finite(m_);
  shape_ = {static_cast<std::size_t>(m_.rows()), static_cast<std::size_t>(m_.cols())};
}

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
  std::size_t n = std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                                  std::multiplies<>());
  return Tensor(std::move(shape), std::vector<double>(n, 0.0));
}

std::string shape_string(const std::vector<std::size_t>& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

}  // namespace patdiag::numerics
