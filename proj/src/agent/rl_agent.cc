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

#include "patdiag/rl_agent.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"
#include "patdiag/numerics/adam.h"

namespace patdiag::agent {

using json = nlohmann::ordered_json;
using numerics::Rng;

void AgentConfig::validate() const {
  if (hidden <= 0 || batch <= 0 || epochs <= 0) throw AgentError("agent sizes must be positive");
  if (epsilon < 0.0 || epsilon > 1.0) throw AgentError("epsilon must lie in [0, 1]");
  if (eta < 0.0) throw AgentError("eta must be non-negative");
  if (top_k < 1) throw AgentError("top_k must be at least 1");
  if (learning_rate <= 0.0) throw AgentError("learning rate must be positive");
}

PolicyNetwork::PolicyNetwork(int input_dim, int hidden, std::uint64_t seed)
    : input_dim_(input_dim), hidden_(hidden) {
  if (input_dim < 1 || hidden < 1) throw AgentError("policy sizes must be positive");
  Rng rng(seed);
  const int enc = 2 * hidden;
  encoder_ = numerics::BiLstm("agent.encoder", input_dim, hidden, rng);
  w_x_ = numerics::uniform_parameter("agent.w_x", enc, input_dim, rng);
  w_h_ = numerics::uniform_parameter("agent.w_h", enc, enc, rng);
  v_att_ = numerics::uniform_parameter("agent.v_att", enc, 1, rng);
  w_o_ = numerics::uniform_parameter("agent.w_o", 1, input_dim + enc, rng);
  b_o_ = numerics::zero_parameter("agent.b_o", 1, 1);
}

Var PolicyNetwork::attention_weights(Graph& g, Var x, Var h, bool trainable) {
  using numerics::bind;
  Var a = numerics::matmul(bind(g, w_x_, trainable), x);
  Var b = numerics::matmul(bind(g, w_h_, trainable), h);
  return numerics::softmax_rows(numerics::pairwise_additive_scores(a, b, bind(g, v_att_, trainable)));
}

Var PolicyNetwork::logits(Graph& g, Var x, bool trainable) {
  if (x.rows() != input_dim_)
    throw AgentError("policy input has " + std::to_string(x.rows()) + " rows, expected " +
                     std::to_string(input_dim_));
  if (x.cols() == 0) throw AgentError("policy input is empty");
  using numerics::bind;
  Var h = encoder_.encode(g, x, trainable);
  Var alpha = attention_weights(g, x, h, trainable);
  Var context = numerics::matmul(h, numerics::transpose(alpha));
  const Var parts[] = {x, context};
  Var z = numerics::concat_rows(parts);
  return numerics::add_bias(numerics::matmul(bind(g, w_o_, trainable), z), bind(g, b_o_, trainable));
}

Matrix PolicyNetwork::attention(const Matrix& x) const {
  Graph g;
  auto& self = const_cast<PolicyNetwork&>(*this);
  Var xv = g.constant(x);
  return self.attention_weights(g, xv, self.encoder_.encode(g, xv, false), false).value();
}

namespace {

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double log_sigmoid(double z) { return z >= 0 ? -std::log1p(std::exp(-z)) : z - std::log1p(std::exp(z)); }

std::vector<double> to_probs(const Matrix& logits) {
  std::vector<double> o(static_cast<std::size_t>(logits.cols()));
  for (Eigen::Index i = 0; i < logits.cols(); ++i) o[static_cast<std::size_t>(i)] = sigmoid(logits(0, i));
  return o;
}

bool is_locked(const std::vector<bool>& locked, std::size_t i) { return !locked.empty() && locked[i]; }

void check_lengths(std::size_t T, const ActionSequence& a, const std::vector<bool>& locked) {
  if (a.size() != T) throw AgentError("action sequence length does not match the input");
  if (!locked.empty() && locked.size() != T) throw AgentError("lock mask length does not match the input");
}

std::vector<double> log_probs(const nre::NreModel& model, const corpus::Corpus& corpus) {
  std::vector<double> out;
  out.reserve(corpus.size());
  for (const auto& inst : corpus.instances) out.push_back(model.log_predict(model.embed(inst, corpus.vocab)));
  return out;
}

}  // namespace

std::vector<double> PolicyNetwork::forward(const Matrix& x) const {
  Graph g;
  auto& self = const_cast<PolicyNetwork&>(*this);
  return to_probs(self.logits(g, g.constant(x), false).value());
}

std::vector<Parameter*> PolicyNetwork::parameters() {
  std::vector<Parameter*> out;
  encoder_.collect(out);
  for (Parameter* p : {&w_x_, &w_h_, &v_att_, &w_o_, &b_o_}) out.push_back(p);
  return out;
}

std::vector<const Parameter*> PolicyNetwork::parameters() const {
  auto mut = const_cast<PolicyNetwork&>(*this).parameters();
  return {mut.begin(), mut.end()};
}

numerics::NamedTensors PolicyNetwork::snapshot() const {
  const auto params = parameters();
  return numerics::snapshot(params);
}

void PolicyNetwork::restore(const numerics::NamedTensors& tensors) {
  const auto params = parameters();
  numerics::restore(params, tensors);
}

void PolicyNetwork::save(const std::filesystem::path& path) const {
  numerics::save_checkpoint(path, snapshot());
}

void PolicyNetwork::load(const std::filesystem::path& path) { restore(numerics::load_checkpoint(path)); }

std::vector<bool> entity_tokens(const corpus::Instance& inst) {
  std::vector<bool> out(inst.tokens.size(), false);
  for (const auto* span : {&inst.head, &inst.tail})
    for (int i = span->start; i < span->end; ++i) out[static_cast<std::size_t>(i)] = true;
  return out;
}

Var log_policy(Graph& g, Var logits, const ActionSequence& a, const std::vector<bool>& locked) {
  const auto T = static_cast<std::size_t>(logits.cols());
  check_lengths(T, a, locked);
  std::vector<Eigen::Index> free;
  for (std::size_t i = 0; i < T; ++i)
    if (!is_locked(locked, i)) free.push_back(static_cast<Eigen::Index>(i));
  if (free.empty()) return g.constant(Matrix::Zero(1, 1));
  // Gather the free columns with a 0/1 selection matrix.
  const auto F = static_cast<Eigen::Index>(free.size());
  Matrix select = Matrix::Zero(static_cast<Eigen::Index>(T), F);
  Matrix targets(1, F);
  for (Eigen::Index k = 0; k < F; ++k) {
    select(free[static_cast<std::size_t>(k)], k) = 1.0;
    targets(0, k) = a.erased(static_cast<std::size_t>(free[static_cast<std::size_t>(k)])) ? 1.0 : 0.0;
  }
  Var picked = numerics::matmul(logits, g.constant(std::move(select)));
  return numerics::scale(numerics::bce_with_logits(picked, targets), -1.0);
}

double log_policy(std::span<const double> o, const ActionSequence& a, const std::vector<bool>& locked) {
  check_lengths(o.size(), a, locked);
  double total = 0.0;
  for (std::size_t i = 0; i < o.size(); ++i) {
    if (is_locked(locked, i)) continue;
    total += std::log(a.erased(i) ? o[i] : 1.0 - o[i]);
  }
  return total;
}

Matrix transform_input(const Matrix& x, const ActionSequence& a, int word_dim) {
  if (a.size() != static_cast<std::size_t>(x.cols()))
    throw AgentError("action sequence has " + std::to_string(a.size()) + " entries for " +
                     std::to_string(x.cols()) + " tokens");
  if (word_dim < 0 || word_dim > x.rows()) throw AgentError("word_dim exceeds the input height");
  Matrix out = x;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a.erased(i)) out.col(static_cast<Eigen::Index>(i)).head(word_dim).setZero();
  return out;
}

double reward_from_log_probs(double log_p_hat, double log_p, double eta, int T, int T_hat) {
  if (T <= 0 || T_hat < 0 || T_hat > T) throw AgentError("invalid token counts for the reward");
  if (std::isinf(log_p) && log_p < 0) throw AgentError("reward undefined: P(r | x) is zero");
  return (log_p_hat - log_p) + eta * (static_cast<double>(T - T_hat) / static_cast<double>(T));
}

double reward(const nre::NreModel& model, const Matrix& x, const Matrix& x_hat, double eta, int T,
              int T_hat) {
  return reward_from_log_probs(model.log_predict(x_hat), model.log_predict(x), eta, T, T_hat);
}

ActionSequence sample_actions(std::span<const double> o, double epsilon, Rng& rng) {
  if (epsilon < 0.0 || epsilon > 1.0) throw AgentError("epsilon must lie in [0, 1]");
  ActionSequence a;
  a.actions.reserve(o.size());
  for (double p : o) {
    const bool explore = rng.uniform() < epsilon;
    const bool erase = rng.bernoulli(explore ? 0.5 : p);
    a.actions.push_back(erase ? ActionSequence::kErase : ActionSequence::kRetain);
  }
  return a;
}

ActionSequence threshold_actions(std::span<const double> o) {
  ActionSequence a;
  for (double p : o) a.actions.push_back(p > 0.5 ? ActionSequence::kErase : ActionSequence::kRetain);
  return a;
}

void lock_actions(ActionSequence& a, const std::vector<bool>& locked) {
  for (std::size_t i = 0; i < a.size(); ++i)
    if (is_locked(locked, i)) a.actions[i] = ActionSequence::kRetain;
}

ActionSequence greedy_actions(const PolicyNetwork& agent, const Matrix& x, const std::vector<bool>& locked) {
  ActionSequence a = threshold_actions(agent.forward(x));
  lock_actions(a, locked);
  return a;
}

Var reinforce_surrogate(Graph& g, PolicyNetwork& agent, const Matrix& x, const ActionSequence& a,
                        double reward, const std::vector<bool>& locked, bool trainable) {
  return numerics::scale(log_policy(g, agent.logits(g, g.constant(x), trainable), a, locked), reward);
}

std::vector<int> filter_top_k(const nre::NreModel& model, const corpus::Corpus& corpus, int top_k) {
  const auto lp = log_probs(model, corpus);
  std::vector<int> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return lp[static_cast<std::size_t>(a)] > lp[static_cast<std::size_t>(b)];
  });
  if (static_cast<std::size_t>(top_k) < order.size()) order.resize(static_cast<std::size_t>(top_k));
  return order;
}

AgentTrainResult train_agent(const nre::NreModel& model, const corpus::Corpus& corpus,
                             const AgentConfig& config, std::uint64_t seed) {
  config.validate();
  AgentTrainResult result;
  result.instances = filter_top_k(model, corpus, config.top_k);
  if (result.instances.empty()) throw AgentError("no instances left after top-k filtering");

  Rng rng(seed);
  result.policy = PolicyNetwork(model.input_dim(), config.hidden, rng.fork());
  PolicyNetwork& policy = result.policy;
  auto params = policy.parameters();
  numerics::AdamState adam({config.learning_rate});

  std::vector<double> log_p(corpus.size(), 0.0);
  std::vector<Matrix> inputs(corpus.size());
  for (int i : result.instances) {
    const auto k = static_cast<std::size_t>(i);
    inputs[k] = model.embed(corpus.instances[k], corpus.vocab);
    log_p[k] = model.log_predict(inputs[k]);
  }

  std::vector<int> order = result.instances;
  double running_mean = 0.0;
  long seen = 0;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    rng.shuffle(std::span<int>(order));
    double reward_sum = 0.0, kept_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch));
      for (Parameter* p : params) p->zero_grad();
      const double inv = 1.0 / static_cast<double>(end - start);
      for (std::size_t b = start; b < end; ++b) {
        const auto k = static_cast<std::size_t>(order[b]);
        const auto& inst = corpus.instances[k];
        const Matrix& x = inputs[k];
        const auto locked = entity_tokens(inst);

        Graph g;
        Var logits = policy.logits(g, g.constant(x), true);
        ActionSequence a = sample_actions(to_probs(logits.value()), config.epsilon, rng);
        lock_actions(a, locked);
        const int T = inst.length();
        const int T_hat = static_cast<int>(a.retained_count());
        const Matrix x_hat = transform_input(x, a, model.word_dim());
        const double R = reward_from_log_probs(model.log_predict(x_hat), log_p[k], config.eta, T, T_hat);
        reward_sum += R;
        kept_sum += static_cast<double>(T_hat) / static_cast<double>(T);

        double advantage = R;
        if (config.baseline) {
          advantage -= running_mean;
          running_mean += (R - running_mean) / static_cast<double>(++seen);
        }
        // Gradient ascent on E[R log pi] is descent on its negation.
        Var loss = numerics::scale(log_policy(g, logits, a, locked), -advantage * inv);
        g.backward(loss);
      }
      adam.step(params);
    }
    const double n = static_cast<double>(order.size());
    result.epochs.push_back({epoch, reward_sum / n, kept_sum / n});
  }
  return result;
}

std::vector<ExtractionRecord> extract(const nre::NreModel& model, const PolicyNetwork& agent,
                                      const corpus::Corpus& corpus, std::span<const int> instances,
                                      double eta) {
  std::vector<ExtractionRecord> out;
  out.reserve(instances.size());
  for (int i : instances) {
    const auto& inst = corpus.instances.at(static_cast<std::size_t>(i));
    const Matrix x = model.embed(inst, corpus.vocab);
    ExtractionRecord r;
    r.instance_id = inst.id;
    r.eta = eta;
    r.actions = greedy_actions(agent, x, entity_tokens(inst));
    const Matrix x_hat = transform_input(x, r.actions, model.word_dim());
    r.reward = reward(model, x, x_hat, eta, inst.length(), static_cast<int>(r.actions.retained_count()));
    for (std::size_t t = 0; t < r.actions.size(); ++t)
      if (!r.actions.erased(t)) r.retained.push_back(static_cast<int>(t));
    out.push_back(std::move(r));
  }
  return out;
}

std::string extractions_jsonl(std::span<const ExtractionRecord> records) {
  std::string out;
  for (const auto& r : records) {
    json j;
    j["id"] = r.instance_id;
    j["eta"] = r.eta;
    j["actions"] = r.actions.actions;
    j["reward"] = r.reward;
    j["retained"] = r.retained;
    out += j.dump() + "\n";
  }
  return out;
}

std::vector<ExtractionRecord> parse_extractions(std::string_view jsonl) {
  std::vector<ExtractionRecord> out;
  std::size_t pos = 0;
  int line_no = 0;
  while (pos < jsonl.size()) {
    std::size_t end = jsonl.find('\n', pos);
    if (end == std::string_view::npos) end = jsonl.size();
    const std::string_view line = jsonl.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      const json j = json::parse(line);
      ExtractionRecord r;
      r.instance_id = j.at("id").get<std::string>();
      r.eta = j.at("eta").get<double>();
      r.actions.actions = j.at("actions").get<std::vector<std::uint8_t>>();
      for (auto v : r.actions.actions)
        if (v > 1) throw AgentError("action must be 0 or 1");
      r.reward = j.at("reward").get<double>();
      r.retained = j.at("retained").get<std::vector<int>>();
      out.push_back(std::move(r));
    } catch (const std::exception& e) {
      throw AgentError("extraction line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::string agent_log_jsonl(const AgentTrainResult& result, double eta) {
  std::string out;
  for (const auto& e : result.epochs) {
    json j;
    j["eta"] = eta;
    j["epoch"] = e.epoch;
    j["mean_reward"] = e.mean_reward;
    j["mean_retained"] = e.mean_retained;
    out += j.dump() + "\n";
  }
  return out;
}

}  // namespace patdiag::agent
