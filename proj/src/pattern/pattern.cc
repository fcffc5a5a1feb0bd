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

#include "patdiag/pattern.h"

#include <algorithm>
#include <cctype>
#include <unordered_map>

#include "json.hpp"

namespace patdiag::pattern {

using json = nlohmann::ordered_json;

GapBucket gap_bucket(int intervening) {
  if (intervening < 0) throw PatternError("negative gap " + std::to_string(intervening));
  if (intervening == 0) return GapBucket::Zero;
  if (intervening <= 3) return GapBucket::Short;
  if (intervening <= 9) return GapBucket::Medium;
  return GapBucket::Long;
}

bool in_bucket(int intervening, GapBucket bucket) {
  return intervening >= 0 && gap_bucket(intervening) == bucket;
}

std::pair<int, std::optional<int>> bucket_range(GapBucket bucket) {
  switch (bucket) {
    case GapBucket::Zero: return {0, 0};
    case GapBucket::Short: return {1, 3};
    case GapBucket::Medium: return {4, 9};
    case GapBucket::Long: return {10, std::nullopt};
  }
  throw PatternError("invalid gap bucket");
}

namespace {

constexpr std::string_view kEntityPrefix = "ENTITY";
constexpr std::string_view kPadPrefix = "PAD{";

std::string_view pad_text(GapBucket b) {
  switch (b) {
    case GapBucket::Short: return "PAD{1,3}";
    case GapBucket::Medium: return "PAD{4,9}";
    case GapBucket::Long: return "PAD{10,}";
    case GapBucket::Zero: break;
  }
  return "";
}

bool starts_with(std::string_view s, std::string_view prefix) {
  return s.substr(0, prefix.size()) == prefix;
}

// Literals are escaped so that rendering stays injective: backslash and
// whitespace become escape sequences, and a literal that would read as an
// entity slot or a PAD gets a leading backslash.
std::string escape_literal(const std::string& token) {
  std::string out;
  for (char c : token) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case ' ': out += "\\s"; break;
      case '\t': out += "\\t"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      default: out += c;
    }
  }
  if (starts_with(out, kEntityPrefix) || starts_with(out, kPadPrefix)) out.insert(0, "\\");
  return out;
}

std::string unescape_literal(std::string_view word) {
  std::string out;
  std::size_t i = 0;
  if (word.size() > 1 && word[0] == '\\' && (word[1] == 'E' || word[1] == 'P')) i = 1;
  for (; i < word.size(); ++i) {
    if (word[i] != '\\') {
      out += word[i];
      continue;
    }
    if (++i == word.size()) throw PatternError("dangling escape in literal");
    switch (word[i]) {
      case '\\': out += '\\'; break;
      case 's': out += ' '; break;
      case 't': out += '\t'; break;
      case 'n': out += '\n'; break;
      case 'r': out += '\r'; break;
      default: throw PatternError(std::string("unknown escape \\") + word[i]);
    }
  }
  if (out.empty()) throw PatternError("empty literal");
  return out;
}

std::optional<GapBucket> parse_pad(std::string_view word) {
  if (word == "PAD{1,3}") return GapBucket::Short;
  if (word == "PAD{4,9}") return GapBucket::Medium;
  if (word == "PAD{10,}") return GapBucket::Long;
  return std::nullopt;
}

}  // namespace

Pattern::Pattern(std::vector<Element> elements, std::vector<GapBucket> gaps)
    : elements_(std::move(elements)), gaps_(std::move(gaps)) {
  if (elements_.empty()) throw PatternError("pattern has no elements");
  if (gaps_.size() + 1 != elements_.size())
    throw PatternError("pattern needs exactly one gap between consecutive elements");
  bool seen[3] = {false, false, false};
  for (const auto& e : elements_) {
    if (const auto* slot = std::get_if<EntitySlot>(&e)) {
      if (slot->slot != 1 && slot->slot != 2) throw PatternError("entity slot must be 1 or 2");
      if (slot->type.empty()) throw PatternError("entity slot without a type");
      if (seen[slot->slot]) throw PatternError("entity slot repeated in pattern");
      seen[slot->slot] = true;
    } else if (std::get<Literal>(e).token.empty()) {
      throw PatternError("empty literal in pattern");
    }
  }
  text_ = render(*this);
}

bool Pattern::has_entity() const {
  return std::any_of(elements_.begin(), elements_.end(),
                     [](const Element& e) { return std::holds_alternative<EntitySlot>(e); });
}

std::string render(const Pattern& p) {
  std::string out;
  const auto& elements = p.elements();
  for (std::size_t k = 0; k < elements.size(); ++k) {
    if (k > 0) {
      out += ' ';
      if (p.gaps()[k - 1] != GapBucket::Zero) {
        out += pad_text(p.gaps()[k - 1]);
        out += ' ';
      }
    }
    if (const auto* slot = std::get_if<EntitySlot>(&elements[k])) {
      out += "ENTITY" + std::to_string(slot->slot) + ":" + slot->type;
    } else {
      out += escape_literal(std::get<Literal>(elements[k]).token);
    }
  }
  return out;
}

Pattern Pattern::parse(std::string_view text) {
  std::vector<std::string_view> words;
  std::size_t pos = 0;
  while (pos < text.size()) {
    if (text[pos] == ' ') {
      ++pos;
      continue;
    }
    std::size_t end = text.find(' ', pos);
    if (end == std::string_view::npos) end = text.size();
    words.push_back(text.substr(pos, end - pos));
    pos = end;
  }
  std::vector<Element> elements;
  std::vector<GapBucket> gaps;
  std::optional<GapBucket> pending;
  for (std::string_view w : words) {
    if (auto pad = parse_pad(w)) {
      if (elements.empty() || pending) throw PatternError("misplaced PAD in pattern: " + std::string(text));
      pending = pad;
      continue;
    }
    if (starts_with(w, kPadPrefix)) throw PatternError("malformed PAD: " + std::string(w));
    if (!elements.empty()) {
      gaps.push_back(pending.value_or(GapBucket::Zero));
      pending.reset();
    }
    if (starts_with(w, kEntityPrefix)) {
      if (w.size() < 9 || (w[6] != '1' && w[6] != '2') || w[7] != ':')
        throw PatternError("malformed entity slot: " + std::string(w));
      elements.push_back(EntitySlot{w[6] - '0', std::string(w.substr(8))});
    } else {
      elements.push_back(Literal{unescape_literal(w)});
    }
  }
  if (pending) throw PatternError("pattern ends with PAD: " + std::string(text));
  return Pattern(std::move(elements), std::move(gaps));
}

Pattern induce(const corpus::Instance& inst, const ActionSequence& actions) {
  if (actions.size() != inst.tokens.size())
    throw PatternError("action sequence length does not match instance " + inst.id);
  std::vector<Element> elements;
  std::vector<GapBucket> gaps;
  int prev_end = -1;
  auto push = [&](Element e, int start, int end) {
    if (prev_end >= 0) gaps.push_back(gap_bucket(start - prev_end));
    elements.push_back(std::move(e));
    prev_end = end;
  };
  for (int i = 0; i < inst.length();) {
    if (i == inst.head.start) {
      push(EntitySlot{1, inst.head.type}, inst.head.start, inst.head.end);
      i = inst.head.end;
    } else if (i == inst.tail.start) {
      push(EntitySlot{2, inst.tail.type}, inst.tail.start, inst.tail.end);
      i = inst.tail.end;
    } else {
      if (!actions.erased(static_cast<std::size_t>(i)))
        push(Literal{inst.tokens[static_cast<std::size_t>(i)]}, i, i + 1);
      ++i;
    }
  }
  return Pattern(std::move(elements), std::move(gaps));
}

namespace {

// Existential in-order alignment; memoised on (element, end of previous).
class Matcher {
 public:
  Matcher(const Pattern& p, const corpus::Instance& inst)
      : p_(p), inst_(inst), T_(inst.length()),
        failed_(p.elements().size() * static_cast<std::size_t>(T_ + 1), false) {}

  bool run() {
    for (int start = 0; start < T_; ++start)
      if (place(0, start)) return true;
    return false;
  }

 private:
  // Element k placed at start; returns true if the rest can be aligned.
  bool place(std::size_t k, int start) {
    const Element& e = p_.elements()[k];
    int end;
    if (const auto* slot = std::get_if<EntitySlot>(&e)) {
      const auto& span = inst_.slot(slot->slot);
      if (span.start != start || span.type != slot->type) return false;
      end = span.end;
    } else {
      if (inst_.tokens[static_cast<std::size_t>(start)] != std::get<Literal>(e).token) return false;
      end = start + 1;
    }
    if (k + 1 == p_.elements().size()) return true;
    return rest(k + 1, end);
  }

  bool rest(std::size_t k, int prev_end) {
    const std::size_t key = k * static_cast<std::size_t>(T_ + 1) + static_cast<std::size_t>(prev_end);
    if (failed_[key]) return false;
    const auto [lo, hi] = bucket_range(p_.gaps()[k - 1]);
    const int last = hi ? std::min(T_ - 1, prev_end + *hi) : T_ - 1;
    for (int start = prev_end + lo; start <= last; ++start)
      if (place(k, start)) return true;
    failed_[key] = true;
    return false;
  }

  const Pattern& p_;
  const corpus::Instance& inst_;
  int T_;
  std::vector<bool> failed_;
};

}  // namespace

bool match(const Pattern& p, const corpus::Instance& inst) {
  if (p.elements().empty() || inst.tokens.empty()) return false;
  return Matcher(p, inst).run();
}

std::vector<int> matched_indices(const Pattern& p, const corpus::Corpus& corpus) {
  std::vector<int> out;
  for (std::size_t i = 0; i < corpus.instances.size(); ++i)
    if (match(p, corpus.instances[i])) out.push_back(static_cast<int>(i));
  return out;
}

PatternTable aggregate(const corpus::Corpus& corpus, const std::vector<Extraction>& extractions) {
  PatternTable table;
  for (const auto& ex : extractions) {
    const auto& inst = corpus.instances.at(static_cast<std::size_t>(ex.instance_index));
    Pattern p = induce(inst, ex.actions);
    if (!p.has_entity()) continue;
    auto [it, inserted] = table.try_emplace(p.canonical_text());
    if (inserted) it->second.pattern = std::move(p);
    ++it->second.induction_count;
  }
  for (auto& [text, stats] : table) stats.matched = matched_indices(stats.pattern, corpus);
  return table;
}

Hierarchy build_hierarchy(const PatternTable& table) {
  std::vector<const PatternStats*> items;
  for (const auto& [text, stats] : table) items.push_back(&stats);

  // Any parent of c must match c's first instance.
  std::unordered_map<int, std::vector<std::size_t>> by_instance;
  for (std::size_t k = 0; k < items.size(); ++k)
    for (int idx : items[k]->matched) by_instance[idx].push_back(k);

  Hierarchy h;
  for (std::size_t c = 0; c < items.size(); ++c) {
    const auto& child = items[c]->matched;
    if (child.empty()) continue;
    for (std::size_t p : by_instance[child.front()]) {
      const auto& parent = items[p]->matched;
      if (p == c || parent.size() <= child.size()) continue;
      if (std::includes(parent.begin(), parent.end(), child.begin(), child.end())) {
        const auto& pt = items[p]->pattern.canonical_text();
        const auto& ct = items[c]->pattern.canonical_text();
        h.children[pt].push_back(ct);
        h.parents[ct].push_back(pt);
      }
    }
  }
  return h;
}

std::vector<PatternStats> select_top(const PatternTable& table, const Hierarchy& hierarchy,
                                     std::size_t n_r) {
  auto better = [](const PatternStats* a, const PatternStats* b) {
    if (a->induction_count != b->induction_count) return a->induction_count > b->induction_count;
    return a->pattern.canonical_text() < b->pattern.canonical_text();
  };
  // One representative per distinct matched set.
  std::map<std::vector<int>, const PatternStats*> by_set;
  for (const auto& [text, stats] : table) {
    if (stats.matched.empty() || hierarchy.is_child(text)) continue;
    auto [it, inserted] = by_set.try_emplace(stats.matched, &stats);
    if (!inserted && better(&stats, it->second)) it->second = &stats;
  }
  std::vector<const PatternStats*> survivors;
  for (const auto& [set, stats] : by_set) survivors.push_back(stats);
  std::sort(survivors.begin(), survivors.end(), better);
  if (survivors.size() > n_r) survivors.resize(n_r);
  std::vector<PatternStats> out;
  for (const auto* s : survivors) out.push_back(*s);
  return out;
}

std::string patterns_text(const std::vector<PatternStats>& patterns) {
  std::string out;
  for (const auto& s : patterns) out += s.pattern.canonical_text() + "\n";
  return out;
}

std::string patterns_json(const std::vector<PatternStats>& patterns, const corpus::Corpus& corpus) {
  json arr = json::array();
  for (const auto& s : patterns) {
    json ids = json::array();
    for (int idx : s.matched) ids.push_back(corpus.instances.at(static_cast<std::size_t>(idx)).id);
    json j;
    j["pattern"] = s.pattern.canonical_text();
    j["induction_count"] = s.induction_count;
    j["matched_ids"] = std::move(ids);
    arr.push_back(std::move(j));
  }
  return arr.dump(1) + "\n";
}

std::vector<PatternStats> parse_patterns_json(std::string_view text, const corpus::Corpus& corpus) {
  std::vector<PatternStats> out;
  const json arr = json::parse(text);
  for (const auto& j : arr) {
    PatternStats s;
    s.pattern = Pattern::parse(j.at("pattern").get<std::string>());
    s.induction_count = j.at("induction_count").get<int>();
    for (const auto& id : j.at("matched_ids")) {
      const int idx = corpus.index_of(id.get<std::string>());
      if (idx < 0) throw PatternError("pattern file references unknown instance " + id.get<std::string>());
      s.matched.push_back(idx);
    }
    std::sort(s.matched.begin(), s.matched.end());
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace patdiag::pattern
