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

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace patdiag::numerics {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dense row-major tensor of rank 1 or 2. A rank-1 tensor of length n is
/// stored as an n x 1 column so every tensor can be viewed as a matrix.
class Tensor {
 public:
  Tensor() = default;

  /// Validates the shape against the data length and rejects NaN/Inf.
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  /// Wraps a matrix; values are checked for finiteness.
  explicit Tensor(Matrix m);

  static Tensor zeros(std::vector<std::size_t> shape);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return static_cast<std::size_t>(m_.size()); }
  std::size_t rows() const { return static_cast<std::size_t>(m_.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(m_.cols()); }

  const Matrix& mat() const { return m_; }
  const double* data() const { return m_.data(); }

  double operator()(std::size_t r, std::size_t c) const { return m_(r, c); }
  double at(std::size_t i) const { return m_.data()[i]; }

  bool operator==(const Tensor& other) const {
    return shape_ == other.shape_ && m_ == other.m_;
  }

 private:
  std::vector<std::size_t> shape_;
  Matrix m_;
};

std::string shape_string(const std::vector<std::size_t>& shape);

}  // namespace patdiag::numerics
