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


#include "patdiag/pipeline/server.h"

#include <map>
#include <mutex>

#include "httplib.h"
#include "json.hpp"
#include "patdiag/pattern.h"

namespace patdiag::pipeline {

using json = nlohmann::ordered_json;

struct AnnotationService::Impl {
  Impl(refinement::SessionStore s, corpus::Corpus c) : store(std::move(s)), corpus(std::move(c)) {
    for (const auto& sp : store.session().patterns) {
      patterns.push_back(pattern::Pattern::parse(sp.text));
      for (const auto& id : sp.items) item_patterns[id].push_back(patterns.size() - 1);
    }
  }

  httplib::Server server;
  mutable std::mutex mu;
  refinement::SessionStore store;
  corpus::Corpus corpus;
  std::vector<pattern::Pattern> patterns;
  std::map<std::string, std::vector<std::size_t>> item_patterns;
  bool bound = false;

  long revision() const { return store.session().revision; }

  json item_view(const std::string& id) const {
    const corpus::Instance* inst = corpus.find(id);
    auto span = [](const corpus::EntitySpan& s) { return json{{"start", s.start}, {"end", s.end}, {"type", s.type}}; };
    json j;
    j["id"] = id;
    j["tokens"] = inst->tokens;
    j["head"] = span(inst->head);
    j["tail"] = span(inst->tail);
    const auto& ann = store.session().annotations;
    auto it = ann.find(id);
    j["label"] = it == ann.end() ? json(nullptr) : json(corpus::to_int(it->second));
    json pats = json::array();
    for (std::size_t k : item_patterns.at(id))
      pats.push_back({{"pattern", patterns[k].canonical_text()}, {"matched", pattern::match(patterns[k], *inst)}});
    j["patterns"] = std::move(pats);
    return j;
  }

  json patterns_view() const {
    json arr = json::array();
    const auto& s = store.session();
    const auto prog = refinement::progress(s);
    for (std::size_t k = 0; k < prog.size(); ++k) {
      const auto& p = prog[k];
      json j;
      j["pattern"] = p.pattern;
      j["induction_count"] = s.patterns[k].induction_count;
      j["labeled"] = p.labeled;
      j["total"] = p.total;
      j["positive"] = p.positive;
      j["accuracy"] = p.verdict ? json(p.verdict->accuracy) : json(nullptr);
      j["class"] = p.verdict ? refinement::to_string(p.verdict->cls) : "INCOMPLETE";
      arr.push_back(std::move(j));
    }
    return arr;
  }

  json summary() const {
    const auto& s = store.session();
    json j;
    j["revision"] = s.revision;
    j["relation"] = s.relation;
    j["finalized"] = s.finalized;
    j["thresholds"] = {{"p_h", s.thresholds.p_h}, {"p_l", s.thresholds.p_l}};
    j["labeled"] = s.labeled_count();
    j["total"] = s.items().size();
    j["complete"] = s.complete();
    return j;
  }

  void reply(httplib::Response& res, int status, json body) const {
    if (!body.contains("revision")) body["revision"] = revision();
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  void error(httplib::Response& res, int status, const std::string& message) const {
    reply(res, status, json{{"error", message}, {"revision", revision()}});
  }

  void routes() {
    server.Get("/api/session", [this](const httplib::Request&, httplib::Response& res) {
      std::lock_guard lock(mu);
      reply(res, 200, summary());
    });

    server.Get("/api/session/next", [this](const httplib::Request&, httplib::Response& res) {
      std::lock_guard lock(mu);
      const auto& s = store.session();
      const auto next = s.next_pending();
      json j;
      j["revision"] = s.revision;
      j["item"] = next ? item_view(*next) : json(nullptr);
      j["labeled"] = s.labeled_count();
      j["total"] = s.items().size();
      reply(res, 200, std::move(j));
    });

    server.Get(R"(/api/item/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      std::lock_guard lock(mu);
      const std::string id = req.matches[1];
      if (!store.session().has_item(id)) return error(res, 404, "unknown item " + id);
      reply(res, 200, json{{"revision", revision()}, {"item", item_view(id)}});
    });

    server.Post(R"(/api/item/([^/]+)/label)", [this](const httplib::Request& req, httplib::Response& res) {
      std::lock_guard lock(mu);
      const std::string id = req.matches[1];
      if (!store.session().has_item(id)) return error(res, 404, "unknown item " + id);
      json body = json::parse(req.body, nullptr, false);
      if (body.is_discarded() || !body.is_object()) return error(res, 400, "body must be a JSON object");
      if (!body.contains("label") || !body["label"].is_number_integer())
        return error(res, 400, "label must be 1 or -1");
      const auto label = body["label"].get<long long>();
      if (label != 1 && label != -1) return error(res, 400, "label must be 1 or -1");
      if (store.session().finalized) return error(res, 409, "session is finalized");
      if (body.contains("revision")) {
        if (!body["revision"].is_number_integer()) return error(res, 400, "revision must be an integer");
        if (body["revision"].get<long>() != revision())
          return error(res, 409, "stale revision " + body["revision"].dump());
      }
      try {
        const long rev = store.record(id, static_cast<int>(label));
        const auto& s = store.session();
        reply(res, 200,
              json{{"revision", rev},
                   {"instance_id", id},
                   {"label", label},
                   {"labeled", s.labeled_count()},
                   {"total", s.items().size()}});
      } catch (const refinement::SessionClosed& e) {
        error(res, 409, e.what());
      } catch (const refinement::UnknownItem& e) {
        error(res, 404, e.what());
      } catch (const std::exception& e) {
        error(res, 500, e.what());
      }
    });

    server.Get("/api/patterns", [this](const httplib::Request&, httplib::Response& res) {
      std::lock_guard lock(mu);
      reply(res, 200, json{{"revision", revision()}, {"patterns", patterns_view()}});
    });

    server.Post("/api/session/finalize", [this](const httplib::Request&, httplib::Response& res) {
      std::lock_guard lock(mu);
      try {
        const auto v = store.finalize();
        reply(res, 200, json{{"revision", revision()}, {"verdicts", json::parse(refinement::verdicts_json(v))}});
      } catch (const refinement::IncompletePatterns& e) {
        reply(res, 409, json{{"error", e.what()}, {"incomplete", e.patterns()}, {"revision", revision()}});
      } catch (const std::exception& e) {
        error(res, 500, e.what());
      }
    });
  }
};

AnnotationService::AnnotationService(refinement::SessionStore store, corpus::Corpus corpus,
                                     std::filesystem::path static_dir)
    : impl_(std::make_unique<Impl>(std::move(store), std::move(corpus))) {
  for (const auto& id : impl_->store.session().items())
    if (!impl_->corpus.find(id)) throw ServiceError("session item " + id + " is not in the corpus");
  // SO_REUSEADDR only: the library default adds SO_REUSEPORT, which would let
  // a second service share a busy port silently.
  impl_->server.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof(yes));
  });
  impl_->routes();
  if (!static_dir.empty() && !impl_->server.set_mount_point("/", static_dir.string()))
    throw ServiceError("cannot serve static files from " + static_dir.string());
}

AnnotationService::~AnnotationService() { stop(); }

int AnnotationService::bind(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = impl_->server.bind_to_any_port(host);
  } else if (!impl_->server.bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound <= 0) throw ServiceError("cannot listen on " + host + ":" + std::to_string(port) + " (port busy?)");
  impl_->bound = true;
  return bound;
}

void AnnotationService::serve() {
  if (!impl_->bound) throw ServiceError("serve() before bind()");
  impl_->server.listen_after_bind();
}

void AnnotationService::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

refinement::AnnotationSession AnnotationService::session() const {
  std::lock_guard lock(impl_->mu);
  return impl_->store.session();
}

}  // namespace patdiag::pipeline
