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

// Token-erasing agent.
//
// A bidirectional LSTM reads the classifier input x. Every token attends over
// all hidden states,
//   e_ij = v^T tanh(W_x x_i + W_h h_j),  alpha_i = softmax_j(e_i.),
//   c_i  = sum_j alpha_ij h_j,
// and o_i = sigmoid(W_o^T [x_i; c_i] + b_o) is the probability of erasing
// token i. Erased tokens lose their word vector but keep their position rows.
// The policy is trained with REINFORCE on
//   R = log P(r | x_hat) - log P(r | x) + eta * (T - T_hat) / T.
// Tokens inside the two entity spans are always retained and contribute
// nothing to log pi.

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "patdiag/actions.h"
#include "patdiag/corpus.h"
#include "patdiag/nre_model.h"
#include "patdiag/numerics/autograd.h"
#include "patdiag/numerics/checkpoint.h"
#include "patdiag/numerics/lstm.h"
#include "patdiag/numerics/rng.h"

namespace patdiag::agent {

using numerics::Graph;
using numerics::Matrix;
using numerics::Parameter;
using numerics::Var;

class AgentError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AgentConfig {
  int hidden = 200;
  double learning_rate = 0.001;
  int batch = 5;
  int epochs = 10;
  double epsilon = 0.1;
  double eta = 0.5;
  int top_k = 10000;
  bool baseline = false;  // subtract a running mean reward

  void validate() const;
};

/// The sparsity weights tried in turn; one agent is trained per value.
inline const std::vector<double> kDefaultEtaGrid = {0.05, 0.1, 0.5, 1.0, 1.5};

class PolicyNetwork {
 public:
  PolicyNetwork() = default;
  PolicyNetwork(int input_dim, int hidden, std::uint64_t seed);

  int input_dim() const { return input_dim_; }
  int hidden() const { return hidden_; }

  /// Per-token erase logits (1 x T).
  Var logits(Graph& g, Var x, bool trainable);
  /// Attention weights (T x T, row i over j) for inspection.
  Matrix attention(const Matrix& x) const;
  /// Erase probabilities o_1..o_T.
  std::vector<double> forward(const Matrix& x) const;

  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
  numerics::NamedTensors snapshot() const;
  void restore(const numerics::NamedTensors& tensors);
  void save(const std::filesystem::path& path) const;
  void load(const std::filesystem::path& path);

 private:
  Var attention_weights(Graph& g, Var x, Var h, bool trainable);

  int input_dim_ = 0;
  int hidden_ = 0;
  numerics::BiLstm encoder_;
  Parameter w_x_;    // 2H x d_x
  Parameter w_h_;    // 2H x 2H
  Parameter v_att_;  // 2H x 1
  Parameter w_o_;    // 1 x (d_x + 2H)
  Parameter b_o_;    // 1 x 1
};

/// True for tokens inside the head or tail span.
std::vector<bool> entity_tokens(const corpus::Instance& inst);

/// log pi(a | x) over the tokens that are not locked (locked may be empty).
Var log_policy(Graph& g, Var logits, const ActionSequence& a, const std::vector<bool>& locked);
double log_policy(std::span<const double> o, const ActionSequence& a, const std::vector<bool>& locked);

/// Copies x and zeroes the word rows (the first word_dim) of erased columns.
Matrix transform_input(const Matrix& x, const ActionSequence& a, int word_dim);

/// log(P(x_hat) / P(x)) + eta * (T - T_hat) / T from the two log-probabilities.
double reward_from_log_probs(double log_p_hat, double log_p, double eta, int T, int T_hat);
/// Throws when P(r | x) is zero.
double reward(const nre::NreModel& model, const Matrix& x, const Matrix& x_hat, double eta, int T,
              int T_hat);

/// Per token: with probability epsilon a fair coin, else Bernoulli(o_i).
ActionSequence sample_actions(std::span<const double> o, double epsilon, numerics::Rng& rng);
/// Erase iff o_i > 0.5.
ActionSequence threshold_actions(std::span<const double> o);
/// Sets every locked position to retain.
void lock_actions(ActionSequence& a, const std::vector<bool>& locked);

ActionSequence greedy_actions(const PolicyNetwork& agent, const Matrix& x,
                              const std::vector<bool>& locked = {});

/// R * log pi(a | x) as a graph node; its gradient is the REINFORCE estimate.
Var reinforce_surrogate(Graph& g, PolicyNetwork& agent, const Matrix& x, const ActionSequence& a,
                        double reward, const std::vector<bool>& locked, bool trainable = true);

/// Indices of the min(top_k, n) instances with the highest P(r | x), highest first
/// (ties by corpus order).
std::vector<int> filter_top_k(const nre::NreModel& model, const corpus::Corpus& corpus, int top_k);

struct AgentEpoch {
  int epoch = 0;
  double mean_reward = 0.0;
  double mean_retained = 0.0;  // fraction of tokens kept
};

struct AgentTrainResult {
  PolicyNetwork policy;
  std::vector<AgentEpoch> epochs;
  std::vector<int> instances;  // the filtered training set
};

/// The classifier is only read. Deterministic for a given seed.
AgentTrainResult train_agent(const nre::NreModel& model, const corpus::Corpus& corpus,
                             const AgentConfig& config, std::uint64_t seed);

struct ExtractionRecord {
  std::string instance_id;
  double eta = 0.0;
  ActionSequence actions;
  double reward = 0.0;
  std::vector<int> retained;
};

/// Greedy actions of a trained agent on each listed instance.
std::vector<ExtractionRecord> extract(const nre::NreModel& model, const PolicyNetwork& agent,
                                      const corpus::Corpus& corpus, std::span<const int> instances,
                                      double eta);

std::string extractions_jsonl(std::span<const ExtractionRecord> records);
std::vector<ExtractionRecord> parse_extractions(std::string_view jsonl);

std::string agent_log_jsonl(const AgentTrainResult& result, double eta);

}  // namespace patdiag::agent
