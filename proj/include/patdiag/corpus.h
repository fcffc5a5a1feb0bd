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

// Instances, corpora and their JSONL representation.
//
// One record per line:
//   {"id": str, "tokens": [str], "head": {"start": int, "end": int, "type": str},
//    "tail": {...}, "relation": str, "ds_label": 1|-1, "gold_label": 1|-1|null}

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace patdiag::corpus {

class CorpusError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Label : std::int8_t { Negative = -1, Positive = 1 };

inline int to_int(Label l) { return static_cast<int>(l); }
Label label_from_int(long long v);

struct EntitySpan {
  int start = 0;
  int end = 0;  // exclusive
  std::string type;

  bool contains(int i) const { return i >= start && i < end; }
  int length() const { return end - start; }
  bool operator==(const EntitySpan&) const = default;
};

struct Instance {
  std::string id;
  std::vector<std::string> tokens;
  EntitySpan head;
  EntitySpan tail;
  std::string relation;
  Label ds_label = Label::Negative;
  std::optional<Label> gold_label;

  int length() const { return static_cast<int>(tokens.size()); }
  /// Span for entity slot 1 (head) or 2 (tail).
  const EntitySpan& slot(int k) const { return k == 1 ? head : tail; }
  bool operator==(const Instance&) const = default;
};

/// Token to id map; id 0 is reserved for unknown tokens.
class Vocabulary {
 public:
  static constexpr int kUnk = 0;
  static constexpr std::string_view kUnkToken = "<unk>";

  Vocabulary();

  int add(const std::string& token);
  int id(const std::string& token) const;
  const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  int size() const { return static_cast<int>(tokens_.size()); }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
};

struct Corpus {
  std::vector<Instance> instances;
  Vocabulary vocab;
  std::string relation;

  std::unordered_map<std::string, int> index;  // id -> position in instances

  std::size_t size() const { return instances.size(); }
  const Instance* find(const std::string& id) const;
  /// Position of the instance with this id, or -1.
  int index_of(const std::string& id) const;
};

struct CorpusOptions {
  int max_sentence_len = 120;
};

/// Throws CorpusError when the instance violates a span or length invariant.
void validate(const Instance& inst, const CorpusOptions& options = {});

/// Builds a corpus from already-parsed instances (validates, checks ids and
/// relation, builds the vocabulary in first-appearance order).
Corpus make_corpus(std::vector<Instance> instances, const CorpusOptions& options = {});

Corpus parse_corpus(std::string_view jsonl, const CorpusOptions& options = {});
Corpus load_corpus(const std::filesystem::path& path, const CorpusOptions& options = {});

std::string instance_to_json(const Instance& inst);
std::string serialize_corpus(const Corpus& corpus);
void save_corpus(const std::filesystem::path& path, const Corpus& corpus);

struct RelativePosition {
  int head = 0;
  int tail = 0;
};

/// Signed distance of every token to the start of each entity span, clipped
/// to [-max_dist, max_dist].
std::vector<RelativePosition> relative_positions(const Instance& inst, int max_dist = 60);

/// Parameters of the noisy synthetic corpus generator.
struct SyntheticSpec {
  int vocab_size = 200;  // filler words; entity names come from a separate pool
  int n_instances = 1000;
  std::vector<std::string> positive_templates;
  std::vector<std::string> distractor_templates;
  double positive_fraction = 0.3;
  double distractor_fraction = 0.5;  // share of negatives realised from a distractor
  double fn_rate = 0.0;
  double fp_rate = 0.0;
  int entity_pool = 40;  // distinct names per entity type
  std::string relation = "synthetic";
  std::uint64_t seed = 0;
};

void validate(const SyntheticSpec& spec);

/// Gold labels are kept on every instance; ds_label is gold flipped with
/// probability fn_rate (gold +1) or fp_rate (gold -1).
Corpus generate_synthetic(const SyntheticSpec& spec);

}  // namespace patdiag::corpus
