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

#include <string>
#include <vector>

#include "patdiag/numerics/autograd.h"
#include "patdiag/numerics/rng.h"

namespace patdiag::numerics {

/// Matrix initialised uniform(-0.1, 0.1).
Parameter uniform_parameter(std::string name, Eigen::Index rows, Eigen::Index cols, Rng& rng);
Parameter zero_parameter(std::string name, Eigen::Index rows, Eigen::Index cols);

/// LSTM recurrence over precomputed input projections (4H x T) as a single
/// graph node. Column t of the result is the hidden state after token t.
Var lstm_scan(Var projected, Var w_rec, bool reverse);

/// Single-direction LSTM with gate order (input, forget, cell, output).
struct LstmCell {
  LstmCell() = default;
  LstmCell(const std::string& prefix, Eigen::Index input_size, Eigen::Index hidden, Rng& rng);

  Parameter input_weights;      // 4H x D
  Parameter recurrent_weights;  // 4H x H
  Parameter bias;               // 4H x 1

  Eigen::Index hidden() const { return recurrent_weights.value.cols(); }

  /// Runs over the columns of x (D x T), left to right or right to left.
  /// Column t of the result is the hidden state after reading token t.
  Var run(Graph& g, Var x, bool reverse, bool trainable = true);
};

/// Forward and backward LSTMs; output column t is [h_fwd_t; h_bwd_t].
struct BiLstm {
  BiLstm() = default;
  BiLstm(const std::string& prefix, Eigen::Index input_size, Eigen::Index hidden, Rng& rng);

  LstmCell forward;
  LstmCell backward;

  Var encode(Graph& g, Var x, bool trainable = true);
  void collect(std::vector<Parameter*>& out);
};

}  // namespace patdiag::numerics
