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

#include <cmath>
#include <filesystem>
#include <vector>

#include "doctest.h"
#include "gradcheck.h"
#include "patdiag/evaluation.h"
#include "patdiag/nre_model.h"
#include "patdiag/numerics/adam.h"
#include "patdiag/numerics/checkpoint.h"
#include "patdiag/util/io.h"
#include "toy_data.h"

using namespace patdiag;
using nre::NreModel;

namespace {

std::vector<double> predict_all(const NreModel& m, const corpus::Corpus& c) {
  std::vector<double> p;
  for (const auto& inst : c.instances) p.push_back(m.predict(m.embed(inst, c.vocab)));
  return p;
}

std::vector<corpus::Label> gold_of(const corpus::Corpus& c) {
  std::vector<corpus::Label> g;
  for (const auto& inst : c.instances) g.push_back(inst.ds_label);
  return g;
}

}  // namespace

TEST_CASE("embed") {
  const auto c = testing::separable_corpus(4, 1);
  SUBCASE("default width") {
    NreModel m(nre::NreConfig{}, c.vocab.size(), 0);
    corpus::Instance one;
    one.tokens = {"x"};
    one.head = {0, 1, "PER"};
    one.tail = {0, 1, "CITY"};
    const auto x = m.embed(one, c.vocab);
    CHECK(x.rows() == 110);
    CHECK(x.cols() == 1);
  }
  NreModel m(testing::small_nre_config(), c.vocab.size(), 0);
  SUBCASE("identical instances embed identically") {
    auto copy = c.instances[0];
    copy.id = "other";
    CHECK(m.embed(copy, c.vocab) == m.embed(c.instances[0], c.vocab));
  }
  SUBCASE("moving the head changes only position rows") {
    corpus::Instance a;
    a.tokens = {"P1", "born", "born", "C2"};
    a.head = {0, 1, "PER"};
    a.tail = {3, 4, "CITY"};
    auto b = a;
    b.head = {1, 2, "PER"};
    const auto xa = m.embed(a, c.vocab), xb = m.embed(b, c.vocab);
    const int dw = m.word_dim();
    CHECK(xa.topRows(dw) == xb.topRows(dw));
    CHECK(xa.bottomRows(m.config().pos_dim) == xb.bottomRows(m.config().pos_dim));
    CHECK(xa.middleRows(dw, m.config().pos_dim) != xb.middleRows(dw, m.config().pos_dim));
  }
  SUBCASE("unknown tokens use the UNK row") {
    corpus::Instance a;
    a.tokens = {"never-seen", "also-unseen"};
    a.head = {0, 1, "PER"};
    a.tail = {1, 2, "CITY"};
    const auto x = m.embed(a, c.vocab);
    CHECK(x.col(0).head(m.word_dim()) == x.col(1).head(m.word_dim()));
  }
}

TEST_CASE("predict") {
  const auto c = testing::separable_corpus(6, 2);
  NreModel m(testing::small_nre_config(), c.vocab.size(), 3);
  const auto x = m.embed(c.instances[0], c.vocab);
  SUBCASE("zero parameters give one half") {
    for (auto* p : m.parameters()) p->value.setZero();
    CHECK(m.predict(x) == 0.5);
  }
  SUBCASE("repeatable and inside (0,1)") {
    const double p = m.predict(x);
    CHECK(p == m.predict(x));
    CHECK(p > 0.0);
    CHECK(p < 1.0);
  }
  SUBCASE("batch composition does not matter") {
    std::vector<numerics::Matrix> xs;
    for (const auto& inst : c.instances) xs.push_back(m.embed(inst, c.vocab));
    const auto batch = m.predict_batch(xs);
    for (std::size_t i = 0; i < xs.size(); ++i) CHECK(std::abs(batch[i] - m.predict(xs[i])) <= 1e-12);
    std::vector<numerics::Matrix> reversed(xs.rbegin(), xs.rend());
    const auto rb = m.predict_batch(reversed);
    for (std::size_t i = 0; i < xs.size(); ++i) CHECK(std::abs(rb[xs.size() - 1 - i] - batch[i]) <= 1e-12);
  }
  SUBCASE("bad inputs") {
    CHECK_THROWS_AS(m.predict(numerics::Matrix(x.rows(), 0)), nre::NreError);
    CHECK_THROWS_AS(m.predict(numerics::Matrix::Zero(x.rows() + 1, 2)), nre::NreError);
  }
}

TEST_CASE("full loss passes the finite-difference check") {
  const auto c = testing::separable_corpus(3, 4);
  for (std::uint64_t draw = 0; draw < 5; ++draw) {
    auto cfg = testing::small_nre_config();
    NreModel m(cfg, c.vocab.size(), 100 + draw);
    // Larger weights than the default init so every nonlinearity is exercised.
    numerics::Rng rng(200 + draw);
    for (auto* p : m.parameters())
      for (Eigen::Index k = 0; k < p->value.size(); ++k) p->value.data()[k] = rng.uniform(-0.5, 0.5);
    const std::vector<double> targets = {1.0, 0.0, 0.3};
    auto loss = [&](numerics::Graph& g) {
      std::vector<numerics::Var> terms;
      for (std::size_t i = 0; i < c.size(); ++i) {
        numerics::Matrix y(1, 1);
        y(0, 0) = targets[i];
        terms.push_back(numerics::bce_with_logits(m.training_logit(g, c.instances[i], c.vocab, nullptr), y));
      }
      numerics::Var total = terms[0];
      for (std::size_t i = 1; i < terms.size(); ++i) total = numerics::add(total, terms[i]);
      return total;
    };
    const auto r = testing::check_gradients(m.parameters(), loss);
    CAPTURE(draw);
    CHECK(r.checked > 500);
    CHECK(r.max_rel_error < 1e-4);
  }
}

TEST_CASE("training") {
  SUBCASE("overfits a separable toy corpus") {
    const auto c = testing::separable_corpus(50, 5);
    auto cfg = testing::small_nre_config();
    cfg.validation_fraction = 0.0;
    cfg.max_epochs = 200;
    cfg.learning_rate = 0.01;
    NreModel m(cfg, c.vocab.size(), 0);
    nre::train(m, c, testing::hard_targets(c), 0);
    CHECK(evaluation::prf1(predict_all(m, c), gold_of(c)).f1 == 1.0);
  }
  SUBCASE("uninformative targets keep predictions near one half") {
    const auto c = testing::separable_corpus(50, 6);
    auto cfg = testing::small_nre_config();
    cfg.max_epochs = 20;
    NreModel m(cfg, c.vocab.size(), 0);
    const std::vector<double> half(c.size(), 0.5);
    nre::train(m, c, half, 0);
    double dev = 0.0;
    for (double p : predict_all(m, c)) dev += std::abs(p - 0.5);
    CHECK(dev / static_cast<double>(c.size()) < 0.05);
  }
  SUBCASE("same seed gives identical checkpoint bytes") {
    const auto c = testing::separable_corpus(40, 7);
    auto run = [&] {
      NreModel m(testing::small_nre_config(), c.vocab.size(), 0);
      const auto r = nre::train(m, c, testing::hard_targets(c), 0);
      return std::make_pair(numerics::encode_checkpoint(m.snapshot()), nre::training_log_jsonl(r));
    };
    const auto a = run(), b = run();
    CHECK(a.first == b.first);
    CHECK(a.second == b.second);
  }
  SUBCASE("best epoch is restored") {
    const auto c = testing::separable_corpus(40, 8);
    NreModel m(testing::small_nre_config(), c.vocab.size(), 0);
    const auto r = nre::train(m, c, testing::hard_targets(c), 0);
    REQUIRE(r.epochs.size() == 5);
    const auto& best = r.epochs[static_cast<std::size_t>(r.best_epoch - 1)];
    for (const auto& e : r.epochs) {
      CHECK(e.val_f1 <= best.val_f1);
      if (e.val_f1 == best.val_f1) CHECK(e.val_loss >= best.val_loss);
    }
  }
  SUBCASE("loss does not increase at a small learning rate") {
    const auto c = testing::separable_corpus(20, 9);
    auto cfg = testing::small_nre_config();
    NreModel m(cfg, c.vocab.size(), 1);
    numerics::AdamState adam({1e-4});
    const auto targets = testing::hard_targets(c);
    auto params = m.parameters();
    double prev = 1e300;
    for (int step = 0; step < 30; ++step) {
      for (auto* p : params) p->zero_grad();
      double total = 0.0;
      for (std::size_t i = 0; i < c.size(); ++i) {
        numerics::Graph g;
        numerics::Matrix y(1, 1);
        y(0, 0) = targets[i];
        auto loss = numerics::bce_with_logits(m.training_logit(g, c.instances[i], c.vocab, nullptr), y);
        total += loss.value()(0, 0);
        g.backward(loss);
      }
      CHECK(total <= prev);
      prev = total;
      adam.step(params);
    }
  }
  SUBCASE("bad inputs") {
    const auto c = testing::separable_corpus(4, 1);
    NreModel m(testing::small_nre_config(), c.vocab.size(), 0);
    CHECK_THROWS_AS(nre::train(m, c, std::vector<double>{1.0}, 0), nre::NreError);
    CHECK_THROWS_AS(nre::train(m, c, std::vector<double>{1.0, 0.0, 2.0, 0.0}, 0), nre::NreError);
    CHECK_THROWS_AS(nre::train(m, corpus::Corpus{}, std::vector<double>{}, 0), nre::NreError);
  }
}

TEST_CASE("persistence") {
  const auto c = testing::separable_corpus(4, 1);
  NreModel a(testing::small_nre_config(), c.vocab.size(), 1);
  NreModel b(testing::small_nre_config(), c.vocab.size(), 2);
  const auto dir = std::filesystem::temp_directory_path() / "patdiag_nre_test";
  a.save(dir / "m.ckpt");
  b.load(dir / "m.ckpt");
  const auto x = a.embed(c.instances[0], c.vocab);
  CHECK(a.predict(x) == b.predict(x));

  util::write_file(dir / "vec.txt", "born 1 2 3 4 5 6\nnot-in-vocab 1 1 1 1 1 1\n");
  CHECK(a.load_word_vectors(dir / "vec.txt", c.vocab) == (c.vocab.id("born") ? 1 : 0));
  util::write_file(dir / "bad.txt", "born 1 2\n");
  if (c.vocab.id("born")) CHECK_THROWS_AS(a.load_word_vectors(dir / "bad.txt", c.vocab), nre::NreError);
  std::filesystem::remove_all(dir);

  CHECK_THROWS_AS(NreModel(nre::NreConfig{.dropout_embed = 1.0}, 5, 0), nre::NreError);
}
