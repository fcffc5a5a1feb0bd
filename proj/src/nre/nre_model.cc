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

#include "patdiag/nre_model.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "patdiag/evaluation.h"
#include "patdiag/numerics/adam.h"

namespace patdiag::nre {

using numerics::Rng;

void NreConfig::validate() const {
  if (word_dim <= 0 || pos_dim <= 0 || max_rel_dist <= 0 || hidden <= 0 || batch <= 0 ||
      max_epochs <= 0)
    throw NreError("NRE sizes must be positive");
  for (double p : {dropout_embed, dropout_encoder, dropout_final})
    if (p < 0.0 || p >= 1.0) throw NreError("dropout rates must lie in [0, 1)");
  if (validation_fraction < 0.0 || validation_fraction >= 1.0)
    throw NreError("validation_fraction must lie in [0, 1)");
  if (learning_rate <= 0.0) throw NreError("learning rate must be positive");
}

NreModel::NreModel(const NreConfig& config, int vocab_size, std::uint64_t seed) : config_(config) {
  config_.validate();
  if (vocab_size < 1) throw NreError("vocabulary is empty");
  Rng rng(seed);
  const int pos_rows = 2 * config_.max_rel_dist + 1;
  const int enc = 2 * config_.hidden;
  word_ = numerics::uniform_parameter("nre.word", vocab_size, config_.word_dim, rng);
  head_pos_ = numerics::uniform_parameter("nre.pos_head", pos_rows, config_.pos_dim, rng);
  tail_pos_ = numerics::uniform_parameter("nre.pos_tail", pos_rows, config_.pos_dim, rng);
  encoder_ = numerics::BiLstm("nre.encoder", config_.input_dim(), config_.hidden, rng);
  att_w_ = numerics::uniform_parameter("nre.att_w", enc, enc, rng);
  att_v_ = numerics::uniform_parameter("nre.att_v", 1, enc, rng);
  out_w_ = numerics::uniform_parameter("nre.out_w", 1, enc, rng);
  out_b_ = numerics::zero_parameter("nre.out_b", 1, 1);
}

std::vector<int> NreModel::position_ids(const corpus::Instance& inst, bool head) const {
  std::vector<int> ids;
  ids.reserve(inst.tokens.size());
  for (const auto& rp : corpus::relative_positions(inst, config_.max_rel_dist))
    ids.push_back((head ? rp.head : rp.tail) + config_.max_rel_dist);
  return ids;
}

Matrix NreModel::embed(const corpus::Instance& inst, const corpus::Vocabulary& vocab) const {
  const auto T = static_cast<Eigen::Index>(inst.tokens.size());
  Matrix x(input_dim(), T);
  const auto head = position_ids(inst, true);
  const auto tail = position_ids(inst, false);
  const int dw = config_.word_dim, dp = config_.pos_dim;
  for (Eigen::Index t = 0; t < T; ++t) {
    const int w = vocab.id(inst.tokens[static_cast<std::size_t>(t)]);
    const int row = w < word_.value.rows() ? w : corpus::Vocabulary::kUnk;
    x.col(t).head(dw) = word_.value.row(row).transpose();
    x.col(t).segment(dw, dp) = head_pos_.value.row(head[static_cast<std::size_t>(t)]).transpose();
    x.col(t).segment(dw + dp, dp) =
        tail_pos_.value.row(tail[static_cast<std::size_t>(t)]).transpose();
  }
  return x;
}

Var NreModel::logit_from_input(Graph& g, Var x, bool trainable, Rng* dropout_rng) {
  if (x.cols() == 0) throw NreError("predict on an empty input");
  if (x.rows() != input_dim())
    throw NreError("input has " + std::to_string(x.rows()) + " rows, expected " +
                   std::to_string(input_dim()));
  using namespace numerics;
  if (dropout_rng) x = dropout(x, config_.dropout_embed, *dropout_rng);
  Var h = encoder_.encode(g, x, trainable);
  if (dropout_rng) h = dropout(h, config_.dropout_encoder, *dropout_rng);
  Var scores = matmul(bind(g, att_v_, trainable), tanh(matmul(bind(g, att_w_, trainable), h)));
  Var weights = softmax(scores);
  Var pooled = matmul(h, transpose(weights));
  if (dropout_rng) pooled = dropout(pooled, config_.dropout_final, *dropout_rng);
  return add(matmul(bind(g, out_w_, trainable), pooled), bind(g, out_b_, trainable));
}

Var NreModel::training_logit(Graph& g, const corpus::Instance& inst,
                             const corpus::Vocabulary& vocab, Rng* dropout_rng) {
  std::vector<int> words;
  words.reserve(inst.tokens.size());
  for (const auto& tok : inst.tokens) {
    const int w = vocab.id(tok);
    words.push_back(w < word_.value.rows() ? w : corpus::Vocabulary::kUnk);
  }
  const auto head = position_ids(inst, true);
  const auto tail = position_ids(inst, false);
  const Var parts[] = {numerics::embedding_lookup(g, word_, words),
                       numerics::embedding_lookup(g, head_pos_, head),
                       numerics::embedding_lookup(g, tail_pos_, tail)};
  return logit_from_input(g, numerics::concat_rows(parts), true, dropout_rng);
}

namespace {

double log_sigmoid(double z) { return z >= 0 ? -std::log1p(std::exp(-z)) : z - std::log1p(std::exp(z)); }

}  // namespace

double NreModel::logit(const Matrix& x) const {
  Graph g;
  // Inference never binds parameters for gradients, so the mutable path is
  // only used to share the forward code.
  auto& self = const_cast<NreModel&>(*this);
  return self.logit_from_input(g, g.constant(x), false, nullptr).value()(0, 0);
}

double NreModel::log_predict(const Matrix& x) const { return log_sigmoid(logit(x)); }

double NreModel::predict(const Matrix& x) const { return std::exp(log_predict(x)); }

std::vector<double> NreModel::predict_batch(std::span<const Matrix> xs) const {
  std::vector<double> out;
  out.reserve(xs.size());
  for (const auto& x : xs) out.push_back(predict(x));
  return out;
}

std::vector<Parameter*> NreModel::parameters() {
  std::vector<Parameter*> out{&word_, &head_pos_, &tail_pos_};
  encoder_.collect(out);
  for (Parameter* p : {&att_w_, &att_v_, &out_w_, &out_b_}) out.push_back(p);
  return out;
}

std::vector<const Parameter*> NreModel::parameters() const {
  auto mut = const_cast<NreModel&>(*this).parameters();
  return {mut.begin(), mut.end()};
}

numerics::NamedTensors NreModel::snapshot() const {
  const auto params = parameters();
  return numerics::snapshot(params);
}

void NreModel::restore(const numerics::NamedTensors& tensors) {
  const auto params = parameters();
  numerics::restore(params, tensors);
}

void NreModel::save(const std::filesystem::path& path) const {
  numerics::save_checkpoint(path, snapshot());
}

void NreModel::load(const std::filesystem::path& path) { restore(numerics::load_checkpoint(path)); }

int NreModel::load_word_vectors(const std::filesystem::path& path,
                                const corpus::Vocabulary& vocab) {
  std::ifstream in(path);
  if (!in) throw NreError("cannot open word vectors " + path.string());
  int replaced = 0;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string token;
    if (!(ls >> token)) continue;
    const int id = vocab.id(token);
    if (id == corpus::Vocabulary::kUnk || id >= word_.value.rows()) continue;
    std::vector<double> values;
    double v;
    while (ls >> v) values.push_back(v);
    if (static_cast<int>(values.size()) != config_.word_dim)
      throw NreError("word vector for '" + token + "' has " + std::to_string(values.size()) +
                     " values, expected " + std::to_string(config_.word_dim));
    for (int k = 0; k < config_.word_dim; ++k) word_.value(id, k) = values[static_cast<std::size_t>(k)];
    ++replaced;
  }
  return replaced;
}

TrainResult train(NreModel& model, const corpus::Corpus& corpus, std::span<const double> targets,
                  std::uint64_t seed) {
  const NreConfig& cfg = model.config();
  if (corpus.instances.empty()) throw NreError("cannot train on an empty corpus");
  if (targets.size() != corpus.instances.size())
    throw NreError("got " + std::to_string(targets.size()) + " labels for " +
                   std::to_string(corpus.instances.size()) + " instances");
  for (double y : targets)
    if (!(y >= 0.0 && y <= 1.0)) throw NreError("training label outside [0, 1]");

  Rng rng(seed);
  std::vector<int> order(corpus.instances.size());
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(std::span<int>(order));
  auto n_val = static_cast<std::size_t>(std::floor(cfg.validation_fraction * static_cast<double>(order.size())));
  if (n_val >= order.size()) n_val = 0;
  std::vector<int> train_idx(order.begin(), order.end() - static_cast<std::ptrdiff_t>(n_val));
  std::vector<int> val_idx(order.end() - static_cast<std::ptrdiff_t>(n_val), order.end());

  auto params = model.parameters();
  numerics::AdamState adam({cfg.learning_rate});
  TrainResult result;
  numerics::NamedTensors best;
  double best_f1 = -1.0, best_val_loss = 0.0;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    rng.shuffle(std::span<int>(train_idx));
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < train_idx.size(); start += static_cast<std::size_t>(cfg.batch)) {
      const std::size_t end = std::min(train_idx.size(), start + static_cast<std::size_t>(cfg.batch));
      for (Parameter* p : params) p->zero_grad();
      const double inv = 1.0 / static_cast<double>(end - start);
      for (std::size_t k = start; k < end; ++k) {
        const int i = train_idx[k];
        Graph g;
        Var logit = model.training_logit(g, corpus.instances[static_cast<std::size_t>(i)],
                                         corpus.vocab, &rng);
        Matrix y(1, 1);
        y(0, 0) = targets[static_cast<std::size_t>(i)];
        Var loss = numerics::scale(numerics::bce_with_logits(logit, y), inv);
        epoch_loss += loss.value()(0, 0) / inv;
        g.backward(loss);
      }
      adam.step(params);
    }

    EpochLog log;
    log.epoch = epoch;
    log.loss = epoch_loss / static_cast<double>(train_idx.size());
    if (!val_idx.empty()) {
      std::vector<double> probs;
      std::vector<corpus::Label> gold;
      for (int i : val_idx) {
        const auto& inst = corpus.instances[static_cast<std::size_t>(i)];
        const double z = model.logit(model.embed(inst, corpus.vocab));
        const double y = targets[static_cast<std::size_t>(i)];
        log.val_loss -= y * log_sigmoid(z) + (1.0 - y) * log_sigmoid(-z);
        probs.push_back(std::exp(log_sigmoid(z)));
        gold.push_back(y > 0.5 ? corpus::Label::Positive : corpus::Label::Negative);
      }
      log.val_loss /= static_cast<double>(val_idx.size());
      log.val_f1 = evaluation::prf1(probs, gold).f1;
    }
    result.epochs.push_back(log);

    const bool better = val_idx.empty() ||
                        log.val_f1 > best_f1 ||
                        (log.val_f1 == best_f1 && log.val_loss < best_val_loss);
    if (better) {
      best_f1 = log.val_f1;
      best_val_loss = log.val_loss;
      best = model.snapshot();
      result.best_epoch = epoch;
    }
  }
  model.restore(best);
  return result;
}

std::string training_log_jsonl(const TrainResult& result) {
  std::string out;
  for (const auto& e : result.epochs) {
    nlohmann::ordered_json j;
    j["epoch"] = e.epoch;
    j["loss"] = e.loss;
    j["val_f1"] = e.val_f1;
    j["val_loss"] = e.val_loss;
    j["best"] = e.epoch == result.best_epoch;
    out += j.dump() + "\n";
  }
  return out;
}

}  // namespace patdiag::nre
