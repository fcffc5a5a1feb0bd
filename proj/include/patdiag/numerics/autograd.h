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

// Tape-based reverse-mode differentiation over dense matrices.
//
// A Graph records every operation in creation order, which is already a
// topological order, so backward() is a single reverse sweep. Parameters live
// outside the graph; their gradients accumulate into Parameter::grad until
// zero_grad() is called.

#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "patdiag/numerics/tensor.h"

namespace patdiag::numerics {

class Rng;

struct Parameter {
  Parameter() = default;
  Parameter(std::string n, Matrix v)
      : name(std::move(n)), value(std::move(v)), grad(Matrix::Zero(value.rows(), value.cols())) {}

  std::string name;
  Matrix value;
  Matrix grad;

  void zero_grad() { grad.setZero(); }
  Tensor tensor() const { return Tensor(value); }
};

class Graph;

/// Handle to a node of a Graph.
struct Var {
  Graph* graph = nullptr;
  int id = -1;

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
};

class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Matrix value);
  Var param(Parameter& p);
  /// Parameter read without gradient tracking (inference).
  Var frozen(const Parameter& p);

  /// Seeds d(output)=1 and propagates to every parameter leaf. Throws
  /// NumericError when output is not 1x1 or does not belong to this graph.
  void backward(Var output);

  std::size_t size() const { return nodes_.size(); }
  const Matrix& value(int id) const {
    const Node& n = nodes_[id];
    return n.external ? *n.external : n.value;
  }

  // Used by op implementations.
  using BackwardFn = std::function<void(Graph&, const Matrix& grad)>;
  Var record(Matrix value, std::vector<int> parents, BackwardFn fn);
  /// A node without graph parents whose backward writes to external state.
  Var record_leaf(Matrix value, BackwardFn fn);
  void accumulate(int id, const Matrix& g);
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }

 private:
  struct Node {
    Matrix value;
    const Matrix* external = nullptr;  // parameter leaves alias the parameter value
    Matrix grad;
    bool requires_grad = false;
    bool has_grad = false;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
};

inline Var bind(Graph& g, Parameter& p, bool trainable) {
  return trainable ? g.param(p) : g.frozen(p);
}

// Primitive operations. Shapes follow matrix algebra; vectors are columns.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);  // elementwise
Var scale(Var a, double c);
Var add_bias(Var a, Var bias);  // bias (r x 1) added to every column of a (r x c)
Var matmul(Var a, Var b);
Var transpose(Var a);
Var tanh(Var a);
Var sigmoid(Var a);
Var exp(Var a);
Var log(Var a);
Var concat_rows(std::span<const Var> parts);
Var concat_cols(std::span<const Var> parts);
Var slice_rows(Var a, Eigen::Index start, Eigen::Index count);
Var slice_cols(Var a, Eigen::Index start, Eigen::Index count);
Var sum(Var a);
Var softmax(Var a);       // over all elements
Var softmax_rows(Var a);  // independently per row

/// Columns of the result are rows of the table selected by ids. Gradients are
/// scattered straight into the parameter rows that were read.
Var embedding_lookup(Graph& g, Parameter& table, std::span<const int> ids);

/// Multiplies by a fixed mask (inverted dropout when mask entries are 0 or 1/(1-p)).
Var apply_mask(Var a, Matrix mask);
Var dropout(Var a, double p, Rng& rng);

/// Sum over elements of softplus(l) - y*l, the binary cross-entropy of
/// sigmoid(l) against targets y in [0,1]. Numerically stable for large |l|.
Var bce_with_logits(Var logits, const Matrix& targets);

/// S(i, j) = v^T tanh(A.col(i) + B.col(j)); A and B are d x T, v is d x 1.
Var pairwise_additive_scores(Var a, Var b, Var v);

}  // namespace patdiag::numerics
