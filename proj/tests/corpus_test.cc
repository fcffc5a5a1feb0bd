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

#include <filesystem>
#include <string>

#include "doctest.h"
#include "patdiag/corpus.h"
#include "patdiag/pattern.h"
#include "patdiag/util/io.h"

using namespace patdiag;
using corpus::Label;

namespace {

const char* kRecord =
    R"({"id":"a","tokens":["Marjorie_Kellogg","was","born","in","Santa_Barbara","."],)"
    R"("head":{"start":0,"end":1,"type":"PER"},"tail":{"start":4,"end":5,"type":"CITY"},)"
    R"("relation":"born_in","ds_label":-1,"gold_label":1})";

corpus::SyntheticSpec planted_spec() {
  corpus::SyntheticSpec spec;
  spec.n_instances = 5000;
  spec.positive_templates = {"ENTITY1:PER PAD{1,3} born PAD{1,3} ENTITY2:CITY",
                             "ENTITY1:PER native of ENTITY2:CITY"};
  spec.distractor_templates = {"mayor ENTITY1:PER PAD{1,3} ENTITY2:CITY"};
  spec.fn_rate = 0.6;
  spec.fp_rate = 0.1;
  spec.seed = 7;
  return spec;
}

}  // namespace

TEST_CASE("empty input gives an empty corpus") {
  CHECK(corpus::parse_corpus("").size() == 0);
  CHECK(corpus::parse_corpus("\n\n").size() == 0);
}

TEST_CASE("single record is ingested as is") {
  auto c = corpus::parse_corpus(kRecord);
  REQUIRE(c.size() == 1);
  const auto& inst = c.instances[0];
  CHECK(inst.length() == 6);
  CHECK(inst.head == corpus::EntitySpan{0, 1, "PER"});
  CHECK(inst.tail == corpus::EntitySpan{4, 5, "CITY"});
  CHECK(inst.ds_label == Label::Negative);
  CHECK(inst.gold_label == Label::Positive);
  CHECK(c.relation == "born_in");
  CHECK(c.vocab.id("born") != corpus::Vocabulary::kUnk);
  CHECK(c.vocab.id("unseen") == corpus::Vocabulary::kUnk);
  CHECK(c.find("a") == &c.instances[0]);
  CHECK(c.find("b") == nullptr);
}

TEST_CASE("span past the sentence end is rejected") {
  std::string bad = kRecord;
  bad.replace(bad.find(R"("end":1)"), 7, R"("end":7)");
  CHECK_THROWS_AS(corpus::parse_corpus(bad), corpus::CorpusError);
}

TEST_CASE("ingestion errors") {
  SUBCASE("duplicate id") {
    const std::string two = std::string(kRecord) + "\n" + kRecord;
    CHECK_THROWS_AS(corpus::parse_corpus(two), corpus::CorpusError);
  }
  SUBCASE("parse error names the line") {
    const std::string text = std::string(kRecord) + "\n{oops";
    try {
      corpus::parse_corpus(text);
      FAIL("expected an error");
    } catch (const corpus::CorpusError& e) {
      CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
  }
  SUBCASE("overlapping spans") {
    std::string bad = kRecord;
    bad.replace(bad.find(R"("start":4,"end":5)"), 17, R"("start":0,"end":2)");
    CHECK_THROWS_AS(corpus::parse_corpus(bad), corpus::CorpusError);
  }
  SUBCASE("label outside {1,-1}") {
    std::string bad = kRecord;
    bad.replace(bad.find(R"("ds_label":-1)"), 13, R"("ds_label":0)");
    CHECK_THROWS_AS(corpus::parse_corpus(bad), corpus::CorpusError);
  }
  SUBCASE("sentence over the length cap") {
    corpus::CorpusOptions opts;
    opts.max_sentence_len = 5;
    CHECK_THROWS_AS(corpus::parse_corpus(kRecord, opts), corpus::CorpusError);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(corpus::load_corpus("/nonexistent/corpus.jsonl"), corpus::CorpusError);
  }
}

TEST_CASE("relative positions") {
  corpus::Instance inst;
  inst.tokens.assign(110, "x");
  inst.head = {105, 106, "PER"};
  inst.tail = {2, 3, "CITY"};
  const auto pos = corpus::relative_positions(inst, 60);
  REQUIRE(pos.size() == 110);
  CHECK(pos[105].head == 0);
  CHECK(pos[5].head == -60);  // 100 before the head
  CHECK(pos[5].tail == 3);
  for (const auto& p : pos) {
    CHECK(p.head >= -60);
    CHECK(p.head <= 60);
    CHECK(p.tail >= -60);
    CHECK(p.tail <= 60);
  }
}

TEST_CASE("save and load round trip") {
  auto spec = planted_spec();
  spec.n_instances = 300;
  const auto c = corpus::generate_synthetic(spec);
  const auto dir = std::filesystem::temp_directory_path() / "patdiag_corpus_test";
  const auto path = dir / "c.jsonl";
  corpus::save_corpus(path, c);
  const auto back = corpus::load_corpus(path);
  REQUIRE(back.size() == c.size());
  for (std::size_t i = 0; i < c.size(); ++i) CHECK(back.instances[i] == c.instances[i]);
  CHECK(corpus::serialize_corpus(back) == corpus::serialize_corpus(c));
  std::filesystem::remove_all(dir);
}

TEST_CASE("synthetic generation") {
  SUBCASE("no noise keeps labels") {
    auto spec = planted_spec();
    spec.fn_rate = spec.fp_rate = 0.0;
    spec.n_instances = 1000;
    for (const auto& inst : corpus::generate_synthetic(spec).instances)
      CHECK(inst.ds_label == *inst.gold_label);
  }
  SUBCASE("same seed gives identical bytes") {
    auto spec = planted_spec();
    spec.n_instances = 500;
    CHECK(corpus::serialize_corpus(corpus::generate_synthetic(spec)) ==
          corpus::serialize_corpus(corpus::generate_synthetic(spec)));
    auto other = spec;
    other.seed = spec.seed + 1;
    CHECK(corpus::serialize_corpus(corpus::generate_synthetic(spec)) !=
          corpus::serialize_corpus(corpus::generate_synthetic(other)));
  }
  SUBCASE("flip rates") {
    const auto c = corpus::generate_synthetic(planted_spec());
    long pos = 0, fn = 0, neg = 0, fp = 0;
    for (const auto& inst : c.instances) {
      if (*inst.gold_label == Label::Positive) {
        ++pos;
        fn += inst.ds_label == Label::Negative;
      } else {
        ++neg;
        fp += inst.ds_label == Label::Positive;
      }
    }
    REQUIRE(pos > 0);
    CHECK(std::abs(static_cast<double>(fn) / pos - 0.6) <= 0.03);
    CHECK(std::abs(static_cast<double>(fp) / neg - 0.1) <= 0.03);
  }
  SUBCASE("every gold positive realises a planted template") {
    const auto spec = planted_spec();
    const auto c = corpus::generate_synthetic(spec);
    std::vector<pattern::Pattern> planted;
    for (const auto& t : spec.positive_templates) planted.push_back(pattern::Pattern::parse(t));
    for (const auto& inst : c.instances) {
      bool any = false;
      for (const auto& p : planted) any = any || pattern::match(p, inst);
      CHECK(any == (*inst.gold_label == Label::Positive));
    }
  }
  SUBCASE("bad specs") {
    auto spec = planted_spec();
    spec.positive_templates.clear();
    CHECK_THROWS_AS(corpus::generate_synthetic(spec), corpus::CorpusError);
    spec = planted_spec();
    spec.fn_rate = 1.5;
    CHECK_THROWS_AS(corpus::generate_synthetic(spec), corpus::CorpusError);
    spec = planted_spec();
    spec.positive_templates = {"PAD{1,3}"};
    CHECK_THROWS_AS(corpus::generate_synthetic(spec), corpus::CorpusError);
  }
}
