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

#include "patdiag/numerics/lstm.h"

#include <cmath>
#include <memory>

namespace patdiag::numerics {

Parameter uniform_parameter(std::string name, Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-0.1, 0.1);
  return Parameter(std::move(name), std::move(m));
}

Parameter zero_parameter(std::string name, Eigen::Index rows, Eigen::Index cols) {
  return Parameter(std::move(name), Matrix::Zero(rows, cols));
}

LstmCell::LstmCell(const std::string& prefix, Eigen::Index input_size, Eigen::Index hidden,
                   Rng& rng)
    : input_weights(uniform_parameter(prefix + ".w_in", 4 * hidden, input_size, rng)),
      recurrent_weights(uniform_parameter(prefix + ".w_rec", 4 * hidden, hidden, rng)),
      bias(zero_parameter(prefix + ".bias", 4 * hidden, 1)) {}

namespace {

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// Activated gates and cell states, stored in processing order.
struct ScanCache {
  Eigen::MatrixXd gates;   // 4H x T: i, f, g, o
  Eigen::MatrixXd cells;   // H x T
  Eigen::MatrixXd hidden;  // H x T
};

}  // namespace

// The whole recurrence is one graph node; its backward pass is explicit
// back-propagation through time.
Var lstm_scan(Var projected, Var w_rec, bool reverse) {
  Graph& g = *projected.graph;
  if (w_rec.graph != &g) throw NumericError("lstm_scan: operands from different graphs");
  const Matrix& P = projected.value();
  const Matrix& W = w_rec.value();
  const Eigen::Index H = W.cols();
  const Eigen::Index T = P.cols();
  if (W.rows() != 4 * H || P.rows() != 4 * H) throw NumericError("lstm_scan: shape mismatch");

  auto cache = std::make_shared<ScanCache>();
  cache->gates.resize(4 * H, T);
  cache->cells.resize(H, T);
  cache->hidden.resize(H, T);
  Matrix out(H, T);
  Eigen::VectorXd h = Eigen::VectorXd::Zero(H), c = Eigen::VectorXd::Zero(H);
  for (Eigen::Index step = 0; step < T; ++step) {
    const Eigen::Index t = reverse ? T - 1 - step : step;
    Eigen::VectorXd pre = P.col(t);
    if (step > 0) pre.noalias() += W * h;
    for (Eigen::Index k = 0; k < H; ++k) {
      const double i = sigmoid(pre(k));
      const double f = sigmoid(pre(H + k));
      const double gg = std::tanh(pre(2 * H + k));
      const double o = sigmoid(pre(3 * H + k));
      cache->gates(k, step) = i;
      cache->gates(H + k, step) = f;
      cache->gates(2 * H + k, step) = gg;
      cache->gates(3 * H + k, step) = o;
      c(k) = f * c(k) + i * gg;
      h(k) = o * std::tanh(c(k));
    }
    cache->cells.col(step) = c;
    cache->hidden.col(step) = h;
    out.col(t) = h;
  }

  const int ip = projected.id, iw = w_rec.id;
  return g.record(std::move(out), {ip, iw}, [ip, iw, H, T, reverse, cache](Graph& gr, const Matrix& d) {
    const Matrix& W = gr.value(iw);
    Eigen::MatrixXd dpre_steps(4 * H, T);  // processing order
    Eigen::VectorXd dh_next = Eigen::VectorXd::Zero(H), dc_next = Eigen::VectorXd::Zero(H);
    Eigen::VectorXd dpre(4 * H);
    for (Eigen::Index step = T - 1; step >= 0; --step) {
      const Eigen::Index t = reverse ? T - 1 - step : step;
      for (Eigen::Index k = 0; k < H; ++k) {
        const double i = cache->gates(k, step);
        const double f = cache->gates(H + k, step);
        const double gg = cache->gates(2 * H + k, step);
        const double o = cache->gates(3 * H + k, step);
        const double c = cache->cells(k, step);
        const double c_prev = step > 0 ? cache->cells(k, step - 1) : 0.0;
        const double tc = std::tanh(c);
        const double dh = d(k, t) + dh_next(k);
        const double dc = dc_next(k) + dh * o * (1.0 - tc * tc);
        dpre(k) = dc * gg * i * (1.0 - i);
        dpre(H + k) = dc * c_prev * f * (1.0 - f);
        dpre(2 * H + k) = dc * i * (1.0 - gg * gg);
        dpre(3 * H + k) = dh * tc * o * (1.0 - o);
        dc_next(k) = dc * f;
      }
      dpre_steps.col(step) = dpre;
      if (step > 0) dh_next.noalias() = W.transpose() * dpre;
    }
    if (gr.requires_grad(ip)) {
      Matrix dP(4 * H, T);
      for (Eigen::Index step = 0; step < T; ++step) dP.col(reverse ? T - 1 - step : step) = dpre_steps.col(step);
      gr.accumulate(ip, dP);
    }
    if (gr.requires_grad(iw)) {
      Matrix dW = Matrix::Zero(4 * H, H);
      if (T > 1) dW.noalias() = dpre_steps.rightCols(T - 1) * cache->hidden.leftCols(T - 1).transpose();
      gr.accumulate(iw, dW);
    }
  });
}

Var LstmCell::run(Graph& g, Var x, bool reverse, bool trainable) {
  Var projected = add_bias(matmul(bind(g, input_weights, trainable), x),
                           bind(g, bias, trainable));
  return lstm_scan(projected, bind(g, recurrent_weights, trainable), reverse);
}

BiLstm::BiLstm(const std::string& prefix, Eigen::Index input_size, Eigen::Index hidden,
               Rng& rng)
    : forward(prefix + ".fwd", input_size, hidden, rng),
      backward(prefix + ".bwd", input_size, hidden, rng) {}

Var BiLstm::encode(Graph& g, Var x, bool trainable) {
  const Var parts[] = {forward.run(g, x, false, trainable), backward.run(g, x, true, trainable)};
  return concat_rows(parts);
}

void BiLstm::collect(std::vector<Parameter*>& out) {
  for (LstmCell* cell : {&forward, &backward}) {
    out.push_back(&cell->input_weights);
    out.push_back(&cell->recurrent_weights);
    out.push_back(&cell->bias);
  }
}

}  // namespace patdiag::numerics
