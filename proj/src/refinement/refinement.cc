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

#include "patdiag/refinement.h"

#include <algorithm>
#include <set>

#include "json.hpp"
#include "patdiag/numerics/rng.h"
#include "patdiag/util/io.h"

namespace patdiag::refinement {

using json = nlohmann::ordered_json;

namespace {

std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (const auto& s : v) out += (out.empty() ? "" : "; ") + s;
  return out;
}

}  // namespace

IncompletePatterns::IncompletePatterns(std::vector<std::string> patterns)
    : RefinementError("incomplete patterns: " + join(patterns)), patterns_(std::move(patterns)) {}

std::vector<std::string> AnnotationSession::items() const {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& p : patterns)
    for (const auto& id : p.items)
      if (seen.insert(id).second) out.push_back(id);
  return out;
}

bool AnnotationSession::has_item(const std::string& id) const {
  for (const auto& p : patterns)
    if (std::find(p.items.begin(), p.items.end(), id) != p.items.end()) return true;
  return false;
}

bool AnnotationSession::complete() const { return !next_pending().has_value(); }

std::optional<std::string> AnnotationSession::next_pending() const {
  for (const auto& p : patterns)
    for (const auto& id : p.items)
      if (!annotations.count(id)) return id;
  return std::nullopt;
}

std::size_t AnnotationSession::labeled_count() const {
  std::size_t n = 0;
  for (const auto& id : items()) n += annotations.count(id);
  return n;
}

AnnotationSession create_session(const std::vector<pattern::PatternStats>& patterns,
                                 const corpus::Corpus& corpus, int n_a, std::uint64_t seed,
                                 Thresholds thresholds) {
  if (n_a < 1) throw RefinementError("n_a must be at least 1");
  if (!(0.0 <= thresholds.p_l && thresholds.p_l < thresholds.p_h && thresholds.p_h <= 1.0))
    throw RefinementError("thresholds must satisfy 0 <= p_l < p_h <= 1");
  AnnotationSession s;
  s.relation = corpus.relation;
  s.thresholds = thresholds;
  numerics::Rng rng(seed);
  for (const auto& ps : patterns) {
    if (ps.matched.empty())
      throw RefinementError("pattern matches no instance: " + ps.pattern.canonical_text());
    std::vector<int> pool = ps.matched;
    const std::size_t take = std::min(pool.size(), static_cast<std::size_t>(n_a));
    // Partial Fisher-Yates: the first `take` entries are the sample.
    for (std::size_t i = 0; i < take; ++i) {
      const auto j = static_cast<std::size_t>(rng.integer(static_cast<std::int64_t>(i),
                                                          static_cast<std::int64_t>(pool.size()) - 1));
      std::swap(pool[i], pool[j]);
    }
    SessionPattern sp;
    sp.text = ps.pattern.canonical_text();
    sp.induction_count = ps.induction_count;
    for (std::size_t i = 0; i < take; ++i)
      sp.items.push_back(corpus.instances.at(static_cast<std::size_t>(pool[i])).id);
    s.patterns.push_back(std::move(sp));
  }
  return s;
}

long record(AnnotationSession& session, const std::string& instance_id, int label) {
  if (session.finalized) throw SessionClosed("session is finalized");
  if (!session.has_item(instance_id)) throw UnknownItem("not a session item: " + instance_id);
  if (label != 1 && label != -1) throw RefinementError("label must be 1 or -1");
  session.annotations[instance_id] = corpus::label_from_int(label);
  return ++session.revision;
}

std::string to_string(VerdictClass c) {
  switch (c) {
    case VerdictClass::Positive: return "POSITIVE";
    case VerdictClass::Negative: return "NEGATIVE";
    case VerdictClass::Discarded: return "DISCARDED";
  }
  return "";
}

VerdictClass classify(double accuracy, const Thresholds& t) {
  if (accuracy > t.p_h) return VerdictClass::Positive;
  if (accuracy < t.p_l) return VerdictClass::Negative;
  return VerdictClass::Discarded;
}

std::vector<PatternProgress> progress(const AnnotationSession& session) {
  std::vector<PatternProgress> out;
  for (const auto& p : session.patterns) {
    PatternProgress pr;
    pr.pattern = p.text;
    pr.total = static_cast<int>(p.items.size());
    for (const auto& id : p.items) {
      auto it = session.annotations.find(id);
      if (it == session.annotations.end()) continue;
      ++pr.labeled;
      pr.positive += it->second == corpus::Label::Positive;
    }
    if (pr.labeled == pr.total && pr.total > 0) {
      const double acc = static_cast<double>(pr.positive) / static_cast<double>(pr.total);
      pr.verdict = PatternVerdict{p.text, acc, classify(acc, session.thresholds)};
    }
    out.push_back(std::move(pr));
  }
  return out;
}

std::vector<PatternVerdict> verdicts(const AnnotationSession& session) {
  std::vector<PatternVerdict> out;
  std::vector<std::string> incomplete;
  for (auto& pr : progress(session)) {
    if (pr.verdict) out.push_back(*pr.verdict);
    else incomplete.push_back(pr.pattern);
  }
  if (!incomplete.empty()) throw IncompletePatterns(std::move(incomplete));
  return out;
}

void oracle_annotate(AnnotationSession& session, const corpus::Corpus& corpus) {
  for (const auto& id : session.items()) {
    const auto* inst = corpus.find(id);
    if (!inst) throw UnknownItem("session item missing from corpus: " + id);
    if (!inst->gold_label) throw RefinementError("no gold label for " + id);
    record(session, id, corpus::to_int(*inst->gold_label));
  }
}

std::string session_json(const AnnotationSession& session) {
  json j;
  j["relation"] = session.relation;
  j["p_h"] = session.thresholds.p_h;
  j["p_l"] = session.thresholds.p_l;
  json ps = json::array();
  for (const auto& p : session.patterns) {
    json e;
    e["pattern"] = p.text;
    e["induction_count"] = p.induction_count;
    e["items"] = p.items;
    ps.push_back(std::move(e));
  }
  j["patterns"] = std::move(ps);
  return j.dump(1) + "\n";
}

AnnotationSession parse_session(std::string_view text) {
  try {
    const json j = json::parse(text);
    AnnotationSession s;
    s.relation = j.at("relation").get<std::string>();
    s.thresholds.p_h = j.at("p_h").get<double>();
    s.thresholds.p_l = j.at("p_l").get<double>();
    for (const auto& e : j.at("patterns")) {
      SessionPattern p;
      p.text = e.at("pattern").get<std::string>();
      p.induction_count = e.at("induction_count").get<int>();
      p.items = e.at("items").get<std::vector<std::string>>();
      s.patterns.push_back(std::move(p));
    }
    return s;
  } catch (const json::exception& e) {
    throw RefinementError(std::string("malformed session: ") + e.what());
  }
}

std::string journal_line(long revision, const std::string& instance_id, corpus::Label label) {
  json j;
  j["timestamp"] = revision;
  j["instance_id"] = instance_id;
  j["label"] = corpus::to_int(label);
  return j.dump();
}

std::vector<JournalEntry> parse_journal(std::string_view journal) {
  std::vector<JournalEntry> out;
  std::size_t pos = 0;
  int line_no = 0;
  while (pos < journal.size()) {
    std::size_t end = journal.find('\n', pos);
    if (end == std::string_view::npos) end = journal.size();
    const std::string_view line = journal.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      json j = json::parse(line);
      out.push_back({j.at("instance_id").get<std::string>(), j.at("label").get<int>()});
    } catch (const json::exception& e) {
      throw RefinementError("journal line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

void replay_journal(AnnotationSession& session, std::string_view journal) {
  for (const auto& e : parse_journal(journal)) record(session, e.instance_id, e.label);
}

std::string journal_for(const AnnotationSession& session) {
  std::string out;
  long rev = 0;
  for (const auto& id : session.items()) {
    auto it = session.annotations.find(id);
    if (it != session.annotations.end()) out += journal_line(++rev, id, it->second) + "\n";
  }
  return out;
}

std::string verdicts_json(const std::vector<PatternVerdict>& v) {
  json arr = json::array();
  for (const auto& pv : v) {
    json j;
    j["pattern"] = pv.pattern;
    j["accuracy"] = pv.accuracy;
    j["class"] = to_string(pv.cls);
    arr.push_back(std::move(j));
  }
  return arr.dump(1) + "\n";
}

SessionStore SessionStore::create(const std::filesystem::path& dir, const AnnotationSession& session) {
  AnnotationSession fresh = session;
  fresh.annotations.clear();
  fresh.revision = 0;
  fresh.finalized = false;
  std::filesystem::create_directories(dir);
  util::write_file(dir / "session.json", session_json(fresh));
  util::write_file(dir / "journal.jsonl", "");
  std::filesystem::remove(dir / "verdicts.json");
  return SessionStore(dir, std::move(fresh));
}

SessionStore SessionStore::open(const std::filesystem::path& dir) {
  if (!std::filesystem::exists(dir / "session.json"))
    throw RefinementError("no session in " + dir.string());
  AnnotationSession s = parse_session(util::read_file(dir / "session.json"));
  if (std::filesystem::exists(dir / "journal.jsonl")) replay_journal(s, util::read_file(dir / "journal.jsonl"));
  s.finalized = std::filesystem::exists(dir / "verdicts.json");
  return SessionStore(dir, std::move(s));
}

long SessionStore::record(const std::string& instance_id, int label) {
  AnnotationSession next = session_;
  const long rev = refinement::record(next, instance_id, label);
  util::append_line(journal_path(), journal_line(rev, instance_id, next.annotations.at(instance_id)));
  session_ = std::move(next);
  return rev;
}

std::vector<PatternVerdict> SessionStore::finalize() {
  if (session_.finalized) return verdicts(session_);
  auto v = verdicts(session_);
  util::write_file(verdicts_path(), verdicts_json(v));
  session_.finalized = true;
  return v;
}

}  // namespace patdiag::refinement
