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

#include "patdiag/numerics/autograd.h"

#include <cmath>

#include "patdiag/numerics/rng.h"

namespace patdiag::numerics {

namespace {

Graph& graph_of(Var a) {
  if (a.graph == nullptr) throw NumericError("detached variable");
  return *a.graph;
}

Graph& graph_of(Var a, Var b) {
  if (a.graph == nullptr || a.graph != b.graph)
    throw NumericError("variables belong to different graphs");
  return *a.graph;
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw NumericError(std::string(op) + ": shape mismatch");
}

// log(1 + exp(x)) without overflow.
double softplus(double x) {
  return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

const Matrix& Var::value() const {
  if (graph == nullptr) throw NumericError("detached variable");
  return graph->value(id);
}

Var Graph::constant(Matrix value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Graph::param(Parameter& p) {
  Node n;
  n.external = &p.value;
  n.requires_grad = true;
  Parameter* target = &p;
  n.backward = [target](Graph&, const Matrix& g) { target->grad += g; };
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Graph::frozen(const Parameter& p) {
  Node n;
  n.external = &p.value;
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Graph::record(Matrix value, std::vector<int> parents, BackwardFn fn) {
  Node n;
  n.value = std::move(value);
  for (int p : parents) n.requires_grad = n.requires_grad || nodes_[p].requires_grad;
  if (n.requires_grad) n.backward = std::move(fn);
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Graph::record_leaf(Matrix value, BackwardFn fn) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = true;
  n.backward = std::move(fn);
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

void Graph::accumulate(int id, const Matrix& g) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return;
  if (!n.has_grad) {
    n.grad = g;
    n.has_grad = true;
  } else {
    n.grad += g;
  }
}

void Graph::backward(Var output) {
  if (output.graph != this || output.id < 0 || output.id >= static_cast<int>(nodes_.size()))
    throw NumericError("backward: output is detached from this graph");
  if (value(output.id).size() != 1)
    throw NumericError("backward: output must be a scalar");
  accumulate(output.id, Matrix::Ones(1, 1));
  for (int i = output.id; i >= 0; --i) {
    Node& n = nodes_[i];
    if (!n.has_grad || !n.backward) continue;
    n.backward(*this, n.grad);
  }
}

Var add(Var a, Var b) {
  Graph& g = graph_of(a, b);
  require_same_shape(a.value(), b.value(), "add");
  const int ia = a.id, ib = b.id;
  return g.record(a.value() + b.value(), {ia, ib}, [ia, ib](Graph& gr, const Matrix& d) {
    gr.accumulate(ia, d);
    gr.accumulate(ib, d);
  });
}

Var sub(Var a, Var b) {
  Graph& g = graph_of(a, b);
  require_same_shape(a.value(), b.value(), "sub");
  const int ia = a.id, ib = b.id;
  return g.record(a.value() - b.value(), {ia, ib}, [ia, ib](Graph& gr, const Matrix& d) {
    gr.accumulate(ia, d);
    gr.accumulate(ib, -d);
  });
}

Var mul(Var a, Var b) {
  Graph& g = graph_of(a, b);
  require_same_shape(a.value(), b.value(), "mul");
  const int ia = a.id, ib = b.id;
  return g.record(a.value().cwiseProduct(b.value()), {ia, ib},
                  [ia, ib](Graph& gr, const Matrix& d) {
                    if (gr.requires_grad(ia)) gr.accumulate(ia, d.cwiseProduct(gr.value(ib)));
                    if (gr.requires_grad(ib)) gr.accumulate(ib, d.cwiseProduct(gr.value(ia)));
                  });
}

Var scale(Var a, double c) {
  Graph& g = graph_of(a);
  const int ia = a.id;
  return g.record(a.value() * c, {ia},
                  [ia, c](Graph& gr, const Matrix& d) { gr.accumulate(ia, d * c); });
}

Var add_bias(Var a, Var bias) {
  Graph& g = graph_of(a, bias);
  const Matrix& av = a.value();
  const Matrix& bv = bias.value();
  if (bv.cols() != 1 || bv.rows() != av.rows()) throw NumericError("add_bias: shape mismatch");
  Matrix out = av;
  out.colwise() += bv.col(0);
  const int ia = a.id, ib = bias.id;
  return g.record(std::move(out), {ia, ib}, [ia, ib](Graph& gr, const Matrix& d) {
    gr.accumulate(ia, d);
    if (gr.requires_grad(ib)) gr.accumulate(ib, d.rowwise().sum());
  });
}

Var matmul(Var a, Var b) {
  Graph& g = graph_of(a, b);
  if (a.value().cols() != b.value().rows()) throw NumericError("matmul: inner dimension mismatch");
  const int ia = a.id, ib = b.id;
  Matrix out = a.value() * b.value();
  return g.record(std::move(out), {ia, ib}, [ia, ib](Graph& gr, const Matrix& d) {
    if (gr.requires_grad(ia)) gr.accumulate(ia, d * gr.value(ib).transpose());
    if (gr.requires_grad(ib)) gr.accumulate(ib, gr.value(ia).transpose() * d);
  });
}

Var transpose(Var a) {
  Graph& g = graph_of(a);
  const int ia = a.id;
  Matrix out = a.value().transpose();
  return g.record(std::move(out), {ia}, [ia](Graph& gr, const Matrix& d) {
    Matrix dt = d.transpose();
    gr.accumulate(ia, dt);
  });
}

Var tanh(Var a) {
  Graph& g = graph_of(a);
  const int ia = a.id;
  Matrix out = a.value().array().tanh().matrix();
  const int self = static_cast<int>(g.size());
  return g.record(std::move(out), {ia}, [ia, self](Graph& gr, const Matrix& d) {
    const Matrix& y = gr.value(self);
    gr.accumulate(ia, (d.array() * (1.0 - y.array().square())).matrix());
  });
}

Var sigmoid(Var a) {
  Graph& g = graph_of(a);
  const int ia = a.id;
  Matrix out = a.value().unaryExpr([](double x) { return stable_sigmoid(x); });
  const int self = static_cast<int>(g.size());
  return g.record(std::move(out), {ia}, [ia, self](Graph& gr, const Matrix& d) {
    const Matrix& y = gr.value(self);
    gr.accumulate(ia, (d.array() * y.array() * (1.0 - y.array())).matrix());
  });
}

Var exp(Var a) {
  Graph& g = graph_of(a);
  const int ia = a.id;
  Matrix out = a.value().array().exp().matrix();
  const int self = static_cast<int>(g.size());
  return g.record(std::move(out), {ia}, [ia, self](Graph& gr, const Matrix& d) {
    gr.accumulate(ia, d.cwiseProduct(gr.value(self)));
  });
}

Var log(Var a) {
  Graph& g = graph_of(a);
  if ((a.value().array() <= 0.0).any()) throw NumericError("log of non-positive value");
  const int ia = a.id;
  Matrix out = a.value().array().log().matrix();
  return g.record(std::move(out), {ia}, [ia](Graph& gr, const Matrix& d) {
    gr.accumulate(ia, d.cwiseQuotient(gr.value(ia)));
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw NumericError("concat_rows: no inputs");
  Graph& g = graph_of(parts[0]);
  Eigen::Index rows = 0;
  const Eigen::Index cols = parts[0].value().cols();
  std::vector<int> ids;
  std::vector<Eigen::Index> offsets;
  for (const Var& p : parts) {
    graph_of(parts[0], p);
    if (p.value().cols() != cols) throw NumericError("concat_rows: column mismatch");
    ids.push_back(p.id);
    offsets.push_back(rows);
    rows += p.value().rows();
  }
  Matrix out(rows, cols);
  for (std::size_t k = 0; k < parts.size(); ++k)
    out.middleRows(offsets[k], parts[k].value().rows()) = parts[k].value();
  return g.record(std::move(out), ids, [ids, offsets](Graph& gr, const Matrix& d) {
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (!gr.requires_grad(ids[k])) continue;
      gr.accumulate(ids[k], d.middleRows(offsets[k], gr.value(ids[k]).rows()));
    }
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw NumericError("concat_cols: no inputs");
  Graph& g = graph_of(parts[0]);
  const Eigen::Index rows = parts[0].value().rows();
  Eigen::Index cols = 0;
  std::vector<int> ids;
  std::vector<Eigen::Index> offsets;
  for (const Var& p : parts) {
    graph_of(parts[0], p);
    if (p.value().rows() != rows) throw NumericError("concat_cols: row mismatch");
    ids.push_back(p.id);
    offsets.push_back(cols);
    cols += p.value().cols();
  }
  Matrix out(rows, cols);
  for (std::size_t k = 0; k < parts.size(); ++k)
    out.middleCols(offsets[k], parts[k].value().cols()) = parts[k].value();
  return g.record(std::move(out), ids, [ids, offsets](Graph& gr, const Matrix& d) {
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (!gr.requires_grad(ids[k])) continue;
      gr.accumulate(ids[k], d.middleCols(offsets[k], gr.value(ids[k]).cols()));
    }
  });
}

Var slice_rows(Var a, Eigen::Index start, Eigen::Index count) {
  Graph& g = graph_of(a);
  const Matrix& av = a.value();
  if (start < 0 || count <= 0 || start + count > av.rows())
    throw NumericError("slice_rows: out of range");
  const int ia = a.id;
  const Eigen::Index rows = av.rows();
  return g.record(av.middleRows(start, count), {ia},
                  [ia, start, count, rows](Graph& gr, const Matrix& d) {
                    Matrix full = Matrix::Zero(rows, d.cols());
                    full.middleRows(start, count) = d;
                    gr.accumulate(ia, full);
                  });
}

Var slice_cols(Var a, Eigen::Index start, Eigen::Index count) {
  Graph& g = graph_of(a);
  const Matrix& av = a.value();
  if (start < 0 || count <= 0 || start + count > av.cols())
    throw NumericError("slice_cols: out of range");
  const int ia = a.id;
  const Eigen::Index cols = av.cols();
  return g.record(av.middleCols(start, count), {ia},
                  [ia, start, count, cols](Graph& gr, const Matrix& d) {
                    Matrix full = Matrix::Zero(d.rows(), cols);
                    full.middleCols(start, count) = d;
                    gr.accumulate(ia, full);
                  });
}

Var sum(Var a) {
  Graph& g = graph_of(a);
  const int ia = a.id;
  const Eigen::Index r = a.value().rows(), c = a.value().cols();
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return g.record(std::move(out), {ia}, [ia, r, c](Graph& gr, const Matrix& d) {
    gr.accumulate(ia, Matrix::Constant(r, c, d(0, 0)));
  });
}

Var softmax(Var a) {
  Graph& g = graph_of(a);
  const int ia = a.id;
  const Matrix& av = a.value();
  Matrix out = (av.array() - av.maxCoeff()).exp().matrix();
  out /= out.sum();
  const int self = static_cast<int>(g.size());
  return g.record(std::move(out), {ia}, [ia, self](Graph& gr, const Matrix& d) {
    const Matrix& y = gr.value(self);
    const double dot = d.cwiseProduct(y).sum();
    gr.accumulate(ia, (y.array() * (d.array() - dot)).matrix());
  });
}

Var softmax_rows(Var a) {
  Graph& g = graph_of(a);
  const int ia = a.id;
  const Matrix& av = a.value();
  Matrix out(av.rows(), av.cols());
  for (Eigen::Index r = 0; r < av.rows(); ++r) {
    auto row = (av.row(r).array() - av.row(r).maxCoeff()).exp();
    out.row(r) = row / row.sum();
  }
  const int self = static_cast<int>(g.size());
  return g.record(std::move(out), {ia}, [ia, self](Graph& gr, const Matrix& d) {
    const Matrix& y = gr.value(self);
    Matrix da(y.rows(), y.cols());
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
      const double dot = d.row(r).dot(y.row(r));
      da.row(r) = y.row(r).array() * (d.row(r).array() - dot);
    }
    gr.accumulate(ia, da);
  });
}

Var embedding_lookup(Graph& g, Parameter& table, std::span<const int> ids) {
  const Matrix& tv = table.value;
  Matrix out(tv.cols(), static_cast<Eigen::Index>(ids.size()));
  for (std::size_t j = 0; j < ids.size(); ++j) {
    if (ids[j] < 0 || ids[j] >= tv.rows())
      throw NumericError("embedding_lookup: index out of range in " + table.name);
    out.col(static_cast<Eigen::Index>(j)) = tv.row(ids[j]).transpose();
  }
  Parameter* target = &table;
  std::vector<int> index(ids.begin(), ids.end());
  return g.record_leaf(std::move(out), [target, index](Graph&, const Matrix& d) {
    for (std::size_t j = 0; j < index.size(); ++j)
      target->grad.row(index[j]) += d.col(static_cast<Eigen::Index>(j)).transpose();
  });
}

Var apply_mask(Var a, Matrix mask) {
  Graph& g = graph_of(a);
  require_same_shape(a.value(), mask, "apply_mask");
  const int ia = a.id;
  Matrix out = a.value().cwiseProduct(mask);
  return g.record(std::move(out), {ia}, [ia, mask = std::move(mask)](Graph& gr, const Matrix& d) {
    gr.accumulate(ia, d.cwiseProduct(mask));
  });
}

Var dropout(Var a, double p, Rng& rng) {
  if (p <= 0.0) return a;
  if (p >= 1.0) throw NumericError("dropout rate must be below 1");
  const double keep = 1.0 / (1.0 - p);
  Matrix mask(a.value().rows(), a.value().cols());
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = rng.bernoulli(p) ? 0.0 : keep;
  return apply_mask(a, std::move(mask));
}

Var bce_with_logits(Var logits, const Matrix& targets) {
  Graph& g = graph_of(logits);
  const Matrix& lv = logits.value();
  require_same_shape(lv, targets, "bce_with_logits");
  double total = 0.0;
  for (Eigen::Index i = 0; i < lv.size(); ++i)
    total += softplus(lv.data()[i]) - targets.data()[i] * lv.data()[i];
  Matrix out(1, 1);
  out(0, 0) = total;
  const int il = logits.id;
  return g.record(std::move(out), {il}, [il, targets](Graph& gr, const Matrix& d) {
    const Matrix& l = gr.value(il);
    Matrix dl(l.rows(), l.cols());
    for (Eigen::Index i = 0; i < l.size(); ++i)
      dl.data()[i] = d(0, 0) * (stable_sigmoid(l.data()[i]) - targets.data()[i]);
    gr.accumulate(il, dl);
  });
}

Var pairwise_additive_scores(Var a, Var b, Var v) {
  Graph& g = graph_of(a, b);
  graph_of(a, v);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  const Matrix& vv = v.value();
  if (av.rows() != bv.rows() || vv.rows() != av.rows() || vv.cols() != 1)
    throw NumericError("pairwise_additive_scores: shape mismatch");
  const Eigen::Index n = av.cols(), m = bv.cols(), dim = av.rows();
  // Column-major copies keep the inner loops contiguous.
  const Eigen::MatrixXd ac = av, bc = bv;
  const Eigen::VectorXd vc = vv.col(0);
  Matrix out(n, m);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < m; ++j)
      out(i, j) = vc.dot((ac.col(i) + bc.col(j)).array().tanh().matrix());
  const int ia = a.id, ib = b.id, iv = v.id;
  return g.record(std::move(out), {ia, ib, iv},
                  [ia, ib, iv, n, m, dim](Graph& gr, const Matrix& d) {
                    const Eigen::MatrixXd ac = gr.value(ia), bc = gr.value(ib);
                    const Eigen::VectorXd vc = gr.value(iv).col(0);
                    Eigen::MatrixXd da = Eigen::MatrixXd::Zero(dim, n);
                    Eigen::MatrixXd db = Eigen::MatrixXd::Zero(dim, m);
                    Eigen::VectorXd dv = Eigen::VectorXd::Zero(dim);
                    for (Eigen::Index i = 0; i < n; ++i) {
                      for (Eigen::Index j = 0; j < m; ++j) {
                        const double dij = d(i, j);
                        if (dij == 0.0) continue;
                        const Eigen::ArrayXd t = (ac.col(i) + bc.col(j)).array().tanh();
                        dv.array() += dij * t;
                        const Eigen::VectorXd inner =
                            (dij * vc.array() * (1.0 - t.square())).matrix();
                        da.col(i) += inner;
                        db.col(j) += inner;
                      }
                    }
                    if (gr.requires_grad(ia)) gr.accumulate(ia, Matrix(da));
                    if (gr.requires_grad(ib)) gr.accumulate(ib, Matrix(db));
                    if (gr.requires_grad(iv)) gr.accumulate(iv, Matrix(dv));
                  });
}

}  // namespace patdiag::numerics
