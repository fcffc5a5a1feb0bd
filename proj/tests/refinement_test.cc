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
#include <numeric>
#include <set>

#include "doctest.h"
#include "patdiag/refinement.h"
#include "patdiag/util/io.h"

using namespace patdiag;
using refinement::VerdictClass;

namespace {

// n instances "x<i> born y<i>" so any literal pattern matches everything.
corpus::Corpus flat_corpus(int n) {
  std::vector<corpus::Instance> v;
  for (int i = 0; i < n; ++i) {
    corpus::Instance inst;
    inst.id = "c" + std::to_string(i);
    inst.tokens = {"x", "born", "y"};
    inst.head = {0, 1, "PER"};
    inst.tail = {2, 3, "CITY"};
    inst.relation = "r";
    inst.gold_label = i % 2 ? corpus::Label::Negative : corpus::Label::Positive;
    v.push_back(inst);
  }
  return corpus::make_corpus(std::move(v));
}

pattern::PatternStats stats(const std::string& text, std::vector<int> matched) {
  return {pattern::Pattern::parse(text), 1, std::move(matched)};
}

std::vector<int> range(int lo, int hi) {
  std::vector<int> v(static_cast<std::size_t>(hi - lo));
  std::iota(v.begin(), v.end(), lo);
  return v;
}

refinement::AnnotationSession one_pattern_session(const corpus::Corpus& c) {
  return refinement::create_session({stats("ENTITY1:PER born", range(0, 10))}, c, 10, 0);
}

}  // namespace

TEST_CASE("create_session") {
  const auto c = flat_corpus(300);
  SUBCASE("few matches are all sampled") {
    const auto s = refinement::create_session({stats("ENTITY1:PER born", {4, 7, 9})}, c, 10, 0);
    REQUIRE(s.patterns.size() == 1);
    std::set<std::string> got(s.patterns[0].items.begin(), s.patterns[0].items.end());
    CHECK(got == std::set<std::string>{"c4", "c7", "c9"});
  }
  SUBCASE("budget n_r * n_a") {
    std::vector<pattern::PatternStats> ps;
    for (int k = 0; k < 20; ++k) ps.push_back(stats("w" + std::to_string(k) + " ENTITY1:PER", range(0, 300)));
    const auto s = refinement::create_session(ps, c, 10, 1);
    CHECK(s.items().size() <= 200);
    for (const auto& p : s.patterns) {
      CHECK(p.items.size() == 10);
      CHECK(std::set<std::string>(p.items.begin(), p.items.end()).size() == 10);
    }
  }
  SUBCASE("samples come from the matched set and are seeded") {
    const auto ps = std::vector<pattern::PatternStats>{stats("ENTITY1:PER born", range(100, 150))};
    const auto a = refinement::create_session(ps, c, 10, 3);
    const auto b = refinement::create_session(ps, c, 10, 3);
    const auto other = refinement::create_session(ps, c, 10, 4);
    CHECK(a.patterns[0].items == b.patterns[0].items);
    CHECK(a.patterns[0].items != other.patterns[0].items);
    for (const auto& id : a.patterns[0].items) {
      const int idx = c.index_of(id);
      CHECK(idx >= 100);
      CHECK(idx < 150);
    }
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(refinement::create_session({stats("ENTITY1:PER born", {})}, c, 10, 0),
                    refinement::RefinementError);
    CHECK_THROWS_AS(refinement::create_session({stats("ENTITY1:PER born", {1})}, c, 10, 0, {0.5, 0.5}),
                    refinement::RefinementError);
  }
}

TEST_CASE("record") {
  const auto c = flat_corpus(10);
  auto s = one_pattern_session(c);
  const auto id = s.patterns[0].items[0];
  CHECK(refinement::record(s, id, 1) == 1);
  CHECK(refinement::record(s, id, -1) == 2);
  CHECK(s.annotations.at(id) == corpus::Label::Negative);
  CHECK_THROWS_AS(refinement::record(s, "nope", 1), refinement::UnknownItem);
  CHECK_THROWS_AS(refinement::record(s, id, 0), refinement::RefinementError);
  CHECK_FALSE(s.complete());
  for (const auto& item : s.items()) refinement::record(s, item, 1);
  CHECK(s.complete());
  CHECK_FALSE(s.next_pending().has_value());
}

TEST_CASE("verdicts") {
  const auto c = flat_corpus(10);
  auto label_positives = [&](int positives) {
    auto s = one_pattern_session(c);
    int k = 0;
    for (const auto& id : s.patterns[0].items) refinement::record(s, id, k++ < positives ? 1 : -1);
    return refinement::verdicts(s).at(0);
  };
  const auto v9 = label_positives(9);
  CHECK(v9.accuracy == 0.9);
  CHECK(v9.cls == VerdictClass::Positive);
  CHECK(label_positives(0).cls == VerdictClass::Negative);
  CHECK(label_positives(5).cls == VerdictClass::Discarded);
  CHECK(label_positives(8).cls == VerdictClass::Discarded);  // exactly p_h
  CHECK(label_positives(1).cls == VerdictClass::Discarded);  // exactly p_l
  CHECK(label_positives(10).accuracy == 1.0);

  auto s = one_pattern_session(c);
  refinement::record(s, s.patterns[0].items[0], 1);
  try {
    refinement::verdicts(s);
    FAIL("expected incomplete");
  } catch (const refinement::IncompletePatterns& e) {
    CHECK(e.patterns() == std::vector<std::string>{"ENTITY1:PER born"});
  }
  for (const auto& id : s.items()) refinement::record(s, id, 1);
  CHECK(refinement::verdicts_json(refinement::verdicts(s)) == refinement::verdicts_json(refinement::verdicts(s)));
}

TEST_CASE("shared items are labelled once") {
  const auto c = flat_corpus(4);
  auto s = refinement::create_session(
      {stats("ENTITY1:PER born", {0, 1, 2}), stats("born ENTITY2:CITY", {1, 2, 3})}, c, 10, 0);
  CHECK(s.items().size() == 4);
  for (const auto& id : s.items()) refinement::record(s, id, id == "c1" ? -1 : 1);
  const auto v = refinement::verdicts(s);
  CHECK(v[0].accuracy == doctest::Approx(2.0 / 3.0));
  CHECK(v[1].accuracy == doctest::Approx(2.0 / 3.0));
  CHECK(s.revision == 4);
}

TEST_CASE("oracle annotation") {
  corpus::SyntheticSpec spec;
  spec.n_instances = 400;
  spec.positive_templates = {"ENTITY1:PER PAD{1,3} born PAD{1,3} ENTITY2:CITY"};
  spec.distractor_templates = {"mayor ENTITY1:PER PAD{1,3} ENTITY2:CITY"};
  spec.seed = 2;
  const auto c = corpus::generate_synthetic(spec);
  std::vector<pattern::PatternStats> ps;
  for (const auto& t : {"ENTITY1:PER PAD{1,3} born PAD{1,3} ENTITY2:CITY", "mayor ENTITY1:PER"}) {
    auto p = pattern::Pattern::parse(t);
    ps.push_back({p, 1, pattern::matched_indices(p, c)});
  }
  auto s = refinement::create_session(ps, c, 10, 0);
  refinement::oracle_annotate(s, c);
  CHECK(s.complete());
  const auto v = refinement::verdicts(s);
  CHECK(v[0].accuracy == 1.0);
  CHECK(v[0].cls == VerdictClass::Positive);
  CHECK(v[1].accuracy == 0.0);
  CHECK(v[1].cls == VerdictClass::Negative);

  auto stripped = c;
  for (auto& inst : stripped.instances) inst.gold_label.reset();
  auto s2 = refinement::create_session(ps, c, 10, 0);
  CHECK_THROWS_AS(refinement::oracle_annotate(s2, stripped), refinement::RefinementError);
}

TEST_CASE("journal and store") {
  const auto c = flat_corpus(10);
  const auto dir = std::filesystem::temp_directory_path() / "patdiag_refinement_test";
  std::filesystem::remove_all(dir);
  auto session = one_pattern_session(c);

  SUBCASE("replay reproduces the labels") {
    auto labelled = session;
    refinement::oracle_annotate(labelled, c);
    auto replayed = session;
    refinement::replay_journal(replayed, refinement::journal_for(labelled));
    CHECK(replayed.annotations == labelled.annotations);
    CHECK_THROWS_AS(refinement::replay_journal(replayed, "{bad\n"), refinement::RefinementError);
  }
  SUBCASE("labels survive reopening") {
    auto store = refinement::SessionStore::create(dir, session);
    const auto items = store.session().items();
    store.record(items[0], 1);
    store.record(items[1], -1);
    store.record(items[0], -1);
    auto reopened = refinement::SessionStore::open(dir);
    CHECK(reopened.session().annotations == store.session().annotations);
    CHECK(reopened.session().revision == 3);
    CHECK_THROWS_AS(reopened.finalize(), refinement::IncompletePatterns);
    for (const auto& id : items) reopened.record(id, 1);
    const auto v = reopened.finalize();
    CHECK(util::read_file(reopened.verdicts_path()) == refinement::verdicts_json(v));
    CHECK_THROWS_AS(reopened.record(items[0], 1), refinement::SessionClosed);
    CHECK(refinement::SessionStore::open(dir).session().finalized);
  }
  SUBCASE("journal bytes are reproducible") {
    auto a = refinement::SessionStore::create(dir / "a", session);
    auto b = refinement::SessionStore::create(dir / "b", session);
    for (const auto& id : session.items()) {
      a.record(id, 1);
      b.record(id, 1);
    }
    CHECK(util::read_file(a.journal_path()) == util::read_file(b.journal_path()));
    CHECK(util::read_file(a.journal_path()) == refinement::journal_for(a.session()));
  }
  std::filesystem::remove_all(dir);
}
