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

// Sentence-level binary relation classifier.
//
// Token i is represented as [word_i; head_pos_i; tail_pos_i]. A bidirectional
// LSTM encodes the sentence, attention pooling collapses it to one vector
//   u = v^T tanh(W_a H),  a = softmax(u),  pooled = H a
// and a logistic head gives P(r | x) = sigmoid(w^T pooled + b).

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "patdiag/corpus.h"
#include "patdiag/numerics/autograd.h"
#include "patdiag/numerics/checkpoint.h"
#include "patdiag/numerics/lstm.h"
#include "patdiag/numerics/rng.h"

namespace patdiag::nre {

using numerics::Graph;
using numerics::Matrix;
using numerics::Parameter;
using numerics::Var;

class NreError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct NreConfig {
  int word_dim = 100;
  int pos_dim = 5;  // per entity anchor; two tables
  int max_rel_dist = 60;
  int hidden = 200;
  double dropout_embed = 0.3;
  double dropout_encoder = 0.3;
  double dropout_final = 0.5;
  double learning_rate = 0.001;
  int batch = 50;
  int max_epochs = 30;
  double validation_fraction = 0.1;

  int input_dim() const { return word_dim + 2 * pos_dim; }
  void validate() const;
};

class NreModel {
 public:
  NreModel(const NreConfig& config, int vocab_size, std::uint64_t seed);

  const NreConfig& config() const { return config_; }
  int input_dim() const { return config_.input_dim(); }
  int word_dim() const { return config_.word_dim; }

  /// Input representation (input_dim x T). Unknown tokens use the UNK row.
  Matrix embed(const corpus::Instance& inst, const corpus::Vocabulary& vocab) const;

  /// P(r | x) with dropout disabled. x may be an agent-modified representation.
  double predict(const Matrix& x) const;
  double logit(const Matrix& x) const;
  /// log P(r | x), accurate even when P underflows.
  double log_predict(const Matrix& x) const;
  std::vector<double> predict_batch(std::span<const Matrix> xs) const;

  /// Training graph for one instance: embeddings are looked up as trainable
  /// parameters and dropout is drawn from rng. Returns the 1x1 logit.
  Var training_logit(Graph& g, const corpus::Instance& inst, const corpus::Vocabulary& vocab,
                     numerics::Rng* dropout_rng);
  /// Logit from an input representation node.
  Var logit_from_input(Graph& g, Var x, bool trainable, numerics::Rng* dropout_rng);

  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
  numerics::NamedTensors snapshot() const;
  void restore(const numerics::NamedTensors& tensors);
  void save(const std::filesystem::path& path) const;
  void load(const std::filesystem::path& path);

  /// Overwrites word vectors from a whitespace separated text file
  /// ("token v1 ... v_d" per line); tokens outside the vocabulary are ignored.
  /// Returns the number of rows replaced.
  int load_word_vectors(const std::filesystem::path& path, const corpus::Vocabulary& vocab);

  Parameter& word_table() { return word_; }

 private:
  std::vector<int> position_ids(const corpus::Instance& inst, bool head) const;

  NreConfig config_;
  Parameter word_;
  Parameter head_pos_;
  Parameter tail_pos_;
  numerics::BiLstm encoder_;
  Parameter att_w_;
  Parameter att_v_;
  Parameter out_w_;
  Parameter out_b_;
};

struct EpochLog {
  int epoch = 0;
  double loss = 0.0;
  double val_f1 = 0.0;
  double val_loss = 0.0;
};

struct TrainResult {
  std::vector<EpochLog> epochs;
  int best_epoch = 0;
};

/// Minimises binary cross-entropy against targets in [0,1] with Adam. The last
/// validation_fraction of a seeded shuffle is held out; the parameters of the
/// epoch with the best held-out F1 (ties: lower held-out loss, then earlier)
/// are restored into the model.
TrainResult train(NreModel& model, const corpus::Corpus& corpus, std::span<const double> targets,
                  std::uint64_t seed);

std::string training_log_jsonl(const TrainResult& result);

}  // namespace patdiag::nre
