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

// Relational patterns: literal tokens and typed entity slots separated by
// gap buckets, e.g.
//
//   ENTITY1:PER PAD{1,3} born PAD{1,3} ENTITY2:CITY
//
// Adjacent elements have no PAD between them. A pattern matches an instance
// when its elements can be aligned in order, each literal to an identical
// token and each entity slot to the instance's span for that slot, with every
// intervening token count inside the declared bucket. Both ends are free.

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "patdiag/actions.h"
#include "patdiag/corpus.h"

namespace patdiag::pattern {

class PatternError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class GapBucket { Zero = 0, Short = 1, Medium = 2, Long = 3 };

/// 0 -> Zero, 1..3 -> Short, 4..9 -> Medium, >= 10 -> Long.
GapBucket gap_bucket(int intervening);
bool in_bucket(int intervening, GapBucket bucket);
/// Inclusive bounds; hi is nullopt for Long.
std::pair<int, std::optional<int>> bucket_range(GapBucket bucket);

struct Literal {
  std::string token;
  bool operator==(const Literal&) const = default;
};

struct EntitySlot {
  int slot = 1;  // 1 = head, 2 = tail
  std::string type;
  bool operator==(const EntitySlot&) const = default;
};

using Element = std::variant<Literal, EntitySlot>;

class Pattern {
 public:
  Pattern() = default;
  /// Throws PatternError if gaps.size() != elements.size() - 1, elements is
  /// empty, or a slot appears twice.
  Pattern(std::vector<Element> elements, std::vector<GapBucket> gaps);

  static Pattern parse(std::string_view text);

  const std::vector<Element>& elements() const { return elements_; }
  const std::vector<GapBucket>& gaps() const { return gaps_; }
  const std::string& canonical_text() const { return text_; }
  bool has_entity() const;

  bool operator==(const Pattern& o) const { return text_ == o.text_; }
  bool operator<(const Pattern& o) const { return text_ < o.text_; }

 private:
  std::vector<Element> elements_;
  std::vector<GapBucket> gaps_;
  std::string text_;
};

std::string render(const Pattern& p);

/// Builds the pattern for the tokens the agent kept. Entity spans are always
/// kept and rendered as their slot and type.
Pattern induce(const corpus::Instance& inst, const ActionSequence& actions);

bool match(const Pattern& p, const corpus::Instance& inst);

struct PatternStats {
  Pattern pattern;
  int induction_count = 0;
  std::vector<int> matched;  // sorted corpus indices
};

struct Extraction {
  int instance_index = 0;  // index into the corpus
  ActionSequence actions;
};

/// Keyed by canonical text. Patterns without any entity slot are dropped.
using PatternTable = std::map<std::string, PatternStats>;

PatternTable aggregate(const corpus::Corpus& corpus, const std::vector<Extraction>& extractions);

/// Indices of instances in the corpus that p matches.
std::vector<int> matched_indices(const Pattern& p, const corpus::Corpus& corpus);

/// parent -> children, where a child's matched set is a strict subset of the
/// parent's. Keys are canonical texts.
struct Hierarchy {
  std::map<std::string, std::vector<std::string>> children;
  std::map<std::string, std::vector<std::string>> parents;

  bool is_child(const std::string& text) const {
    auto it = parents.find(text);
    return it != parents.end() && !it->second.empty();
  }
};

Hierarchy build_hierarchy(const PatternTable& table);

/// Drops children and duplicate matched sets, orders the rest by induction
/// count (descending, then canonical text) and keeps the first n_r.
std::vector<PatternStats> select_top(const PatternTable& table, const Hierarchy& hierarchy,
                                     std::size_t n_r = 20);

/// One canonical text per line.
std::string patterns_text(const std::vector<PatternStats>& patterns);
/// JSON array of {pattern, induction_count, matched_ids}.
std::string patterns_json(const std::vector<PatternStats>& patterns, const corpus::Corpus& corpus);
std::vector<PatternStats> parse_patterns_json(std::string_view json, const corpus::Corpus& corpus);

}  // namespace patdiag::pattern
