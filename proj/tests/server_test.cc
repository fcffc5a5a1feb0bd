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


#include <atomic>
#include <filesystem>
#include <set>
#include <thread>

#include "doctest.h"
#include "json.hpp"
#include "patdiag/pattern.h"
#include "patdiag/pipeline/server.h"
#include "patdiag/refinement.h"
#include "patdiag/util/io.h"
#include "toy_data.h"

// After Eigen: <resolv.h> defines a _res macro that clashes with Eigen internals.
#include "httplib.h"

using namespace patdiag;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::vector<pattern::PatternStats> toy_patterns(const corpus::Corpus& c) {
  std::vector<pattern::PatternStats> out;
  int count = 30;
  for (const char* text : {"ENTITY1:PER born", "ENTITY1:PER PAD{1,3} ENTITY2:CITY", "born ENTITY2:CITY"}) {
    pattern::PatternStats s;
    s.pattern = pattern::Pattern::parse(text);
    s.induction_count = count--;
    s.matched = pattern::matched_indices(s.pattern, c);
    REQUIRE(s.matched.size() >= 3);
    out.push_back(std::move(s));
  }
  return out;
}

struct Harness {
  fs::path dir;
  corpus::Corpus corpus;
  refinement::AnnotationSession fresh;
  std::unique_ptr<pipeline::AnnotationService> service;
  std::thread thread;
  int port = 0;

  explicit Harness(const std::string& name) : corpus(testing::separable_corpus(40, 3)) {
    dir = fs::temp_directory_path() / ("patdiag_server_test_" + name);
    fs::remove_all(dir);
    fresh = refinement::create_session(toy_patterns(corpus), corpus, 3, 7);
    service = std::make_unique<pipeline::AnnotationService>(refinement::SessionStore::create(dir, fresh), corpus);
    port = service->bind("127.0.0.1", 0);
    thread = std::thread([this] { service->serve(); });
    httplib::Client probe("127.0.0.1", port);
    for (int i = 0; i < 200 && !probe.Get("/api/session"); ++i) std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  ~Harness() {
    service->stop();
    thread.join();
  }

  httplib::Client client() const { return httplib::Client("127.0.0.1", port); }
};

json body(const httplib::Result& r) {
  REQUIRE(r);
  return json::parse(r->body);
}

httplib::Result post_label(httplib::Client& cli, const std::string& id, const json& payload) {
  return cli.Post("/api/item/" + id + "/label", payload.dump(), "application/json");
}

}  // namespace

TEST_CASE("read endpoints") {
  Harness h("read");
  auto cli = h.client();

  auto s = cli.Get("/api/session");
  REQUIRE(s);
  CHECK(s->status == 200);
  auto js = body(s);
  CHECK(js["revision"] == 0);
  CHECK(js["relation"] == "toy");
  CHECK(js["labeled"] == 0);
  CHECK(js["total"] == h.fresh.items().size());
  CHECK(js["finalized"] == false);
  CHECK(js["thresholds"]["p_h"] == 0.8);

  auto next = body(cli.Get("/api/session/next"));
  CHECK(next["revision"] == 0);
  const std::string first = h.fresh.items().front();
  CHECK(next["item"]["id"] == first);
  const corpus::Instance* inst = h.corpus.find(first);
  CHECK(next["item"]["tokens"] == inst->tokens);
  CHECK(next["item"]["head"]["start"] == inst->head.start);
  CHECK(next["item"]["tail"]["end"] == inst->tail.end);
  CHECK(next["item"]["label"].is_null());
  REQUIRE(next["item"]["patterns"].size() >= 1);
  CHECK(next["item"]["patterns"][0]["pattern"] == h.fresh.patterns[0].text);
  for (const auto& p : next["item"]["patterns"]) CHECK(p["matched"] == true);

  auto item = cli.Get("/api/item/" + first);
  CHECK(item->status == 200);
  CHECK(body(item)["item"]["id"] == first);

  auto pats = body(cli.Get("/api/patterns"));
  REQUIRE(pats["patterns"].size() == 3);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(pats["patterns"][k]["pattern"] == h.fresh.patterns[k].text);
    CHECK(pats["patterns"][k]["labeled"] == 0);
    CHECK(pats["patterns"][k]["class"] == "INCOMPLETE");
    CHECK(pats["patterns"][k]["accuracy"].is_null());
  }
}

TEST_CASE("error statuses") {
  Harness h("errors");
  auto cli = h.client();
  const std::string id = h.fresh.items().front();

  auto missing = cli.Get("/api/item/no-such-item");
  CHECK(missing->status == 404);
  CHECK(body(missing).contains("revision"));
  CHECK(post_label(cli, "no-such-item", {{"label", 1}})->status == 404);

  for (const std::string bad : {"{\"label\": 0}", "{\"label\": 2}", "{\"label\": \"yes\"}", "{}", "not json", "[1]",
                                "{\"label\": 1.5}"}) {
    auto r = cli.Post("/api/item/" + id + "/label", bad, "application/json");
    CHECK_MESSAGE(r->status == 400, bad);
  }
  CHECK(body(cli.Get("/api/session"))["revision"] == 0);

  auto stale = post_label(cli, id, {{"label", 1}, {"revision", 5}});
  CHECK(stale->status == 409);
  CHECK(body(stale)["revision"] == 0);
  auto ok = post_label(cli, id, {{"label", 1}, {"revision", 0}});
  CHECK(ok->status == 200);
  CHECK(body(ok)["revision"] == 1);

  auto early = cli.Post("/api/session/finalize", "", "application/json");
  CHECK(early->status == 409);
  const auto incomplete = body(early)["incomplete"];
  CHECK(incomplete.size() == 3);
  CHECK_FALSE(fs::exists(h.dir / "verdicts.json"));
}

TEST_CASE("labeling everything then finalizing matches the direct computation") {
  Harness h("finalize");
  auto cli = h.client();
  long expected_rev = 0;
  while (true) {
    auto next = body(cli.Get("/api/session/next"));
    if (next["item"].is_null()) break;
    const std::string id = next["item"]["id"];
    const int label = corpus::to_int(*h.corpus.find(id)->gold_label);
    auto r = post_label(cli, id, {{"label", label}, {"revision", next["revision"]}});
    REQUIRE(r->status == 200);
    CHECK(body(r)["revision"] == ++expected_rev);
    // The label is on disk before the response.
    CHECK(refinement::SessionStore::open(h.dir).session().annotations.count(id) == 1);
  }
  CHECK(expected_rev == static_cast<long>(h.fresh.items().size()));

  auto direct = h.fresh;
  refinement::oracle_annotate(direct, h.corpus);
  const std::string expected = refinement::verdicts_json(refinement::verdicts(direct));

  auto pats = body(cli.Get("/api/patterns"));
  for (const auto& p : pats["patterns"]) CHECK(p["class"] != "INCOMPLETE");

  auto fin = cli.Post("/api/session/finalize", "", "application/json");
  REQUIRE(fin->status == 200);
  CHECK(body(fin)["verdicts"] == json::parse(expected));
  CHECK(util::read_file(h.dir / "verdicts.json") == expected);
  CHECK(util::read_file(h.dir / "journal.jsonl") == refinement::journal_for(direct));

  const std::string id = h.fresh.items().front();
  CHECK(post_label(cli, id, {{"label", 1}})->status == 409);
  CHECK(body(cli.Get("/api/session"))["finalized"] == true);
  CHECK(cli.Post("/api/session/finalize", "", "application/json")->status == 200);
}

TEST_CASE("concurrent writers are serialized") {
  Harness h("concurrent");
  const auto items = h.fresh.items();
  std::vector<std::thread> workers;
  std::atomic<int> ok{0};
  std::vector<long> revisions(items.size(), -1);
  for (std::size_t w = 0; w < 4; ++w) {
    workers.emplace_back([&, w] {
      auto cli = h.client();
      for (std::size_t i = w; i < items.size(); i += 4) {
        auto r = post_label(cli, items[i], {{"label", 1}});
        if (r && r->status == 200) {
          ++ok;
          revisions[i] = json::parse(r->body)["revision"].get<long>();
        }
      }
    });
  }
  for (auto& t : workers) t.join();
  CHECK(ok == static_cast<int>(items.size()));
  std::set<long> distinct(revisions.begin(), revisions.end());
  CHECK(distinct.size() == items.size());
  CHECK(*distinct.begin() == 1);
  CHECK(*distinct.rbegin() == static_cast<long>(items.size()));
  const auto reopened = refinement::SessionStore::open(h.dir).session();
  CHECK(reopened.labeled_count() == items.size());
  CHECK(reopened.revision == static_cast<long>(items.size()));
}

TEST_CASE("a busy port is reported") {
  Harness h("busy");
  auto other = refinement::SessionStore::create(h.dir / "other", h.fresh);
  pipeline::AnnotationService second(std::move(other), h.corpus);
  CHECK_THROWS_AS(second.bind("127.0.0.1", h.port), pipeline::ServiceError);
}

TEST_CASE("session items must exist in the corpus") {
  const auto c = testing::separable_corpus(40, 3);
  auto session = refinement::create_session(toy_patterns(c), c, 3, 7);
  const auto other = testing::separable_corpus(4, 3);
  const auto dir = fs::temp_directory_path() / "patdiag_server_test_mismatch";
  fs::remove_all(dir);
  CHECK_THROWS_AS(pipeline::AnnotationService(refinement::SessionStore::create(dir, session), other),
                  pipeline::ServiceError);
}
