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

#include "patdiag/corpus.h"

#include <algorithm>
#include <cctype>
#include <unordered_set>

#include "json.hpp"
#include "patdiag/util/io.h"

namespace patdiag::corpus {

using json = nlohmann::ordered_json;

Label label_from_int(long long v) {
  if (v == 1) return Label::Positive;
  if (v == -1) return Label::Negative;
  throw CorpusError("label must be 1 or -1, got " + std::to_string(v));
}

Vocabulary::Vocabulary() {
  tokens_.emplace_back(kUnkToken);
  ids_.emplace(std::string(kUnkToken), kUnk);
}

int Vocabulary::add(const std::string& token) {
  auto [it, inserted] = ids_.emplace(token, static_cast<int>(tokens_.size()));
  if (inserted) tokens_.push_back(token);
  return it->second;
}

int Vocabulary::id(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? kUnk : it->second;
}

int Corpus::index_of(const std::string& id) const {
  auto it = index.find(id);
  return it == index.end() ? -1 : it->second;
}

const Instance* Corpus::find(const std::string& id) const {
  const int i = index_of(id);
  return i < 0 ? nullptr : &instances[static_cast<std::size_t>(i)];
}

namespace {

bool has_space(const std::string& s) {
  return std::any_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

void validate_span(const EntitySpan& s, int length, const std::string& id, const char* which) {
  if (s.start < 0 || s.start >= s.end || s.end > length)
    throw CorpusError("instance " + id + ": " + which + " span [" + std::to_string(s.start) + ", " +
                      std::to_string(s.end) + ") out of bounds for " + std::to_string(length) +
                      " tokens");
  if (s.type.empty() || has_space(s.type))
    throw CorpusError("instance " + id + ": " + which + " entity type must be a non-empty word");
}

EntitySpan span_from_json(const json& j) {
  EntitySpan s;
  s.start = j.at("start").get<int>();
  s.end = j.at("end").get<int>();
  s.type = j.at("type").get<std::string>();
  return s;
}

json span_to_json(const EntitySpan& s) {
  json j;
  j["start"] = s.start;
  j["end"] = s.end;
  j["type"] = s.type;
  return j;
}

Instance instance_from_json(const json& j) {
  Instance inst;
  inst.id = j.at("id").get<std::string>();
  inst.tokens = j.at("tokens").get<std::vector<std::string>>();
  inst.head = span_from_json(j.at("head"));
  inst.tail = span_from_json(j.at("tail"));
  inst.relation = j.at("relation").get<std::string>();
  inst.ds_label = label_from_int(j.at("ds_label").get<long long>());
  if (auto it = j.find("gold_label"); it != j.end() && !it->is_null())
    inst.gold_label = label_from_int(it->get<long long>());
  return inst;
}

}  // namespace

void validate(const Instance& inst, const CorpusOptions& options) {
  if (inst.id.empty()) throw CorpusError("instance with empty id");
  if (inst.tokens.empty()) throw CorpusError("instance " + inst.id + " has no tokens");
  if (inst.length() > options.max_sentence_len)
    throw CorpusError("instance " + inst.id + " has " + std::to_string(inst.length()) +
                      " tokens, above the limit of " + std::to_string(options.max_sentence_len));
  for (const auto& t : inst.tokens)
    if (t.empty()) throw CorpusError("instance " + inst.id + " contains an empty token");
  validate_span(inst.head, inst.length(), inst.id, "head");
  validate_span(inst.tail, inst.length(), inst.id, "tail");
  if (inst.head.start < inst.tail.end && inst.tail.start < inst.head.end)
    throw CorpusError("instance " + inst.id + ": head and tail spans overlap");
}

Corpus make_corpus(std::vector<Instance> instances, const CorpusOptions& options) {
  Corpus c;
  std::unordered_set<std::string> seen;
  for (const auto& inst : instances) {
    validate(inst, options);
    if (!seen.insert(inst.id).second) throw CorpusError("duplicate instance id " + inst.id);
    if (c.relation.empty()) {
      c.relation = inst.relation;
    } else if (inst.relation != c.relation) {
      throw CorpusError("instance " + inst.id + " has relation " + inst.relation +
                        " but the corpus relation is " + c.relation);
    }
    for (const auto& t : inst.tokens) c.vocab.add(t);
    c.index.emplace(inst.id, static_cast<int>(c.index.size()));
  }
  c.instances = std::move(instances);
  return c;
}

Corpus parse_corpus(std::string_view jsonl, const CorpusOptions& options) {
  std::vector<Instance> instances;
  std::unordered_set<std::string> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < jsonl.size()) {
    std::size_t nl = jsonl.find('\n', pos);
    if (nl == std::string_view::npos) nl = jsonl.size();
    std::string_view line = jsonl.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    Instance inst;
    try {
      inst = instance_from_json(json::parse(line));
      validate(inst, options);
    } catch (const json::exception& e) {
      throw CorpusError("line " + std::to_string(line_no) + ": parse error: " + e.what());
    } catch (const CorpusError& e) {
      throw CorpusError("line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!seen.insert(inst.id).second)
      throw CorpusError("line " + std::to_string(line_no) + ": duplicate instance id " + inst.id);
    instances.push_back(std::move(inst));
  }
  return make_corpus(std::move(instances), options);
}

Corpus load_corpus(const std::filesystem::path& path, const CorpusOptions& options) {
  if (!std::filesystem::exists(path)) throw CorpusError("corpus file not found: " + path.string());
  return parse_corpus(util::read_file(path), options);
}

std::string instance_to_json(const Instance& inst) {
  json j;
  j["id"] = inst.id;
  j["tokens"] = inst.tokens;
  j["head"] = span_to_json(inst.head);
  j["tail"] = span_to_json(inst.tail);
  j["relation"] = inst.relation;
  j["ds_label"] = to_int(inst.ds_label);
  j["gold_label"] = inst.gold_label ? json(to_int(*inst.gold_label)) : json(nullptr);
  return j.dump();
}

std::string serialize_corpus(const Corpus& corpus) {
  std::string out;
  for (const auto& inst : corpus.instances) {
    out += instance_to_json(inst);
    out += '\n';
  }
  return out;
}

void save_corpus(const std::filesystem::path& path, const Corpus& corpus) {
  util::write_file(path, serialize_corpus(corpus));
}

std::vector<RelativePosition> relative_positions(const Instance& inst, int max_dist) {
  std::vector<RelativePosition> out(inst.tokens.size());
  for (int i = 0; i < inst.length(); ++i) {
    out[static_cast<std::size_t>(i)].head = std::clamp(i - inst.head.start, -max_dist, max_dist);
    out[static_cast<std::size_t>(i)].tail = std::clamp(i - inst.tail.start, -max_dist, max_dist);
  }
  return out;
}

}  // namespace patdiag::corpus
