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

#include "doctest.h"
#include "dp_oracle.h"
#include "patdiag/wlf.h"

using namespace patdiag;
using corpus::Label;

namespace {

corpus::Corpus small_corpus() {
  std::vector<corpus::Instance> v;
  const std::vector<std::vector<std::string>> sentences = {
      {"A", "born", "in", "B"}, {"C", "mayor", "of", "D"}, {"E", "and", "F"}};
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    corpus::Instance inst;
    inst.id = "s" + std::to_string(i);
    inst.tokens = sentences[i];
    inst.head = {0, 1, "PER"};
    inst.tail = {static_cast<int>(sentences[i].size()) - 1, static_cast<int>(sentences[i].size()), "CITY"};
    inst.ds_label = i == 0 ? Label::Negative : Label::Positive;
    inst.relation = "r";
    v.push_back(inst);
  }
  return corpus::make_corpus(std::move(v));
}

wlf::WlfParams params(std::vector<double> alpha, std::vector<double> beta) {
  wlf::WlfParams p;
  p.alpha = std::move(alpha);
  p.beta = std::move(beta);
  p.lf_names.assign(p.alpha.size(), "lf");
  return p;
}

}  // namespace

TEST_CASE("apply_lfs") {
  const auto c = small_corpus();
  const auto born = pattern::Pattern::parse("ENTITY1:PER born");
  const auto mayor = pattern::Pattern::parse("ENTITY1:PER mayor");

  const auto ds_only = wlf::apply_lfs(c, {}, {});
  CHECK(ds_only.lf_names == std::vector<std::string>{"DS"});
  CHECK(ds_only.rows == std::vector<wlf::LfRow>{{-1}, {1}, {1}});

  const auto m = wlf::apply_lfs(c, {born}, {mayor});
  CHECK(m.rows[0] == wlf::LfRow{-1, 1, 0});
  CHECK(m.rows[1] == wlf::LfRow{1, 0, -1});
  CHECK(m.rows[2] == wlf::LfRow{1, 0, 0});
  for (const auto& row : m.rows) CHECK(row[0] != 0);
  CHECK(m.rows == wlf::apply_lfs(c, {born}, {mayor}).rows);
  CHECK_THROWS_AS(wlf::apply_lfs(c, {born}, {born}), wlf::WlfError);
}

TEST_CASE("estimate") {
  SUBCASE("closed form") {
    // Fires on three of four items and agrees on two.
    const std::vector<wlf::LfRow> rows = {{1, 0}, {1, 0}, {-1, 0}, {0, 0}};
    const std::vector<Label> y = {Label::Positive, Label::Positive, Label::Positive, Label::Negative};
    const auto p = wlf::estimate(rows, y);
    CHECK(p.alpha[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(p.beta[0] == 0.75);
    CHECK(p.alpha[1] == 0.5);
    CHECK(p.beta[1] == 1e-3);
  }
  SUBCASE("clamped") {
    const std::vector<wlf::LfRow> rows = {{1}, {-1}};
    const std::vector<Label> y = {Label::Positive, Label::Negative};
    const auto p = wlf::estimate(rows, y);
    CHECK(p.alpha[0] == 1.0 - 1e-3);
    CHECK(p.beta[0] == 1.0 - 1e-3);
  }
  SUBCASE("recovers generating parameters") {
    numerics::Rng rng(4);
    const auto s = testing::sample_generative(rng, 10000, {0.8, 0.8, 0.8}, {0.6, 0.6, 0.6});
    const auto p = wlf::estimate(s.rows, s.labels);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(std::abs(p.alpha[i] - 0.8) <= 0.05);
      CHECK(std::abs(p.beta[i] - 0.6) <= 0.05);
    }
  }
  SUBCASE("fit beats uninformative parameters") {
    numerics::Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<double> alpha, beta;
      for (int i = 0; i < 4; ++i) {
        alpha.push_back(rng.uniform(0.1, 0.9));
        beta.push_back(rng.uniform(0.1, 0.9));
      }
      const auto s = testing::sample_generative(rng, 200, alpha, beta);
      const auto fit = wlf::estimate(s.rows, s.labels);
      const auto flat = params(std::vector<double>(4, 0.5), std::vector<double>(4, 0.5));
      CHECK(wlf::mean_log_likelihood(s.rows, s.labels, fit) >= wlf::mean_log_likelihood(s.rows, s.labels, flat));
    }
  }
  CHECK_THROWS_AS(wlf::estimate({}, {}), wlf::WlfError);
}

TEST_CASE("posterior") {
  SUBCASE("all abstain") {
    CHECK(wlf::posterior(std::vector<int>{0, 0}, params({0.9, 0.7}, {0.3, 0.8})) == 0.5);
  }
  SUBCASE("single LF") {
    CHECK(wlf::posterior(std::vector<int>{1}, params({0.9}, {1.0})) == doctest::Approx(0.9).epsilon(1e-14));
  }
  SUBCASE("matches the enumerated joint") {
    numerics::Rng rng(6);
    for (int trial = 0; trial < 1000; ++trial) {
      const auto c = testing::random_dp_case(rng);
      const double expected = testing::brute_force_posterior(c.L, c.params.alpha, c.params.beta);
      CHECK(std::abs(wlf::posterior(c.L, c.params) - expected) <= 1e-12);
    }
  }
  SUBCASE("abstaining LFs cancel") {
    numerics::Rng rng(7);
    for (int trial = 0; trial < 200; ++trial) {
      auto c = testing::random_dp_case(rng, 5);
      const double before = wlf::posterior(c.L, c.params);
      c.L.push_back(0);
      c.params.alpha.push_back(rng.uniform(0.1, 0.9));
      c.params.beta.push_back(rng.uniform(0.1, 0.9));
      CHECK(std::abs(wlf::posterior(c.L, c.params) - before) <= 1e-12);
    }
  }
  SUBCASE("firing an accurate LF raises the posterior") {
    numerics::Rng rng(8);
    for (int trial = 0; trial < 500; ++trial) {
      auto c = testing::random_dp_case(rng);
      const auto k = static_cast<std::size_t>(rng.integer(0, static_cast<int>(c.L.size()) - 1));
      c.L[k] = 0;
      c.params.alpha[k] = rng.uniform(0.51, 0.95);
      const double off = wlf::posterior(c.L, c.params);
      c.L[k] = 1;
      CHECK(wlf::posterior(c.L, c.params) > off);
    }
  }
  SUBCASE("negating L mirrors the posterior") {
    numerics::Rng rng(9);
    for (int trial = 0; trial < 500; ++trial) {
      auto c = testing::random_dp_case(rng);
      const double p = wlf::posterior(c.L, c.params);
      for (int& v : c.L) v = -v;
      CHECK(std::abs(wlf::posterior(c.L, c.params) - (1.0 - p)) <= 1e-12);
    }
  }
  SUBCASE("strong pattern overrides DS") {
    CHECK(wlf::posterior(std::vector<int>{-1, 1}, params({0.6, 0.95}, {1.0 - 1e-3, 1.0})) > 0.5);
  }
  SUBCASE("extreme evidence stays finite") {
    std::vector<int> L(400, 1);
    const auto p = params(std::vector<double>(400, 0.999), std::vector<double>(400, 0.999));
    CHECK(wlf::posterior(L, p) == 1.0);
    for (int& v : L) v = -v;
    const double q = wlf::posterior(L, p);
    CHECK(q >= 0.0);
    CHECK(q < 1e-100);
  }
  CHECK_THROWS_AS(wlf::posterior(std::vector<int>{1, 1}, params({0.9}, {0.5})), wlf::WlfError);
}

TEST_CASE("denoise and label files") {
  const auto c = small_corpus();
  SUBCASE("perfect DS") {
    const auto m = wlf::apply_lfs(c, {}, {});
    const auto soft = wlf::denoise(m, params({1.0}, {1.0}));
    for (std::size_t i = 0; i < c.size(); ++i)
      CHECK(soft[i] == (c.instances[i].ds_label == Label::Positive ? 1.0 : 0.0));
  }
  SUBCASE("gold mix overrides annotated instances") {
    const std::vector<double> soft = {0.3, 0.6, 0.9};
    const auto mixed = wlf::gold_mix(c, soft, {{"s1", Label::Negative}});
    CHECK(mixed == std::vector<double>{0.3, 0.0, 0.9});
    CHECK_THROWS_AS(wlf::gold_mix(c, soft, {{"zz", Label::Negative}}), wlf::WlfError);
  }
  SUBCASE("annotated rows") {
    const auto m = wlf::apply_lfs(c, {}, {});
    const auto r = wlf::annotated_rows(c, m, {{"s2", Label::Negative}, {"s0", Label::Positive}});
    CHECK(r.rows == std::vector<wlf::LfRow>{{-1}, {1}});
    CHECK(r.labels == std::vector<Label>{Label::Positive, Label::Negative});
  }
  SUBCASE("round trips") {
    const std::vector<double> soft = {0.25, 1.0, 1.0 / 3.0};
    CHECK(wlf::parse_label_file(wlf::label_file(c, soft), c) == soft);
    CHECK_THROWS_AS(wlf::parse_label_file("{\"instance_id\":\"s0\",\"soft_label\":0.5}\n", c), wlf::WlfError);
    auto p = params({0.7, 0.2}, {0.4, 0.9});
    const auto back = wlf::parse_params(wlf::params_json(p));
    CHECK(back.alpha == p.alpha);
    CHECK(back.beta == p.beta);
    CHECK(back.lf_names == p.lf_names);
  }
}
