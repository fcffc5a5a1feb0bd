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

// Noisy corpus generator.
//
// Positive instances realise one planted template: every PAD is filled with a
// number of filler words drawn inside its bucket and the sentence gets a
// random prefix and suffix. Negatives are either distractor realisations or
// filler sentences with the same entity types at a random distance and order.
// Filler words never coincide with template literals, so a negative can only
// match a planted template by construction error.

#include <algorithm>
#include <cstdio>
#include <set>

#include "patdiag/corpus.h"
#include "patdiag/numerics/rng.h"
#include "patdiag/pattern.h"

namespace patdiag::corpus {

namespace {

using numerics::Rng;
using pattern::EntitySlot;
using pattern::GapBucket;
using pattern::Literal;
using pattern::Pattern;

constexpr int kMaxPrefix = 4;
constexpr int kMaxSuffix = 4;
constexpr int kLongGapMax = 14;

struct Generator {
  const SyntheticSpec& spec;
  Rng rng;
  std::vector<Pattern> positives;
  std::vector<Pattern> distractors;
  std::vector<std::string> fillers;
  std::string head_type;
  std::string tail_type;

  std::string filler() {
    return fillers[static_cast<std::size_t>(rng.integer(0, static_cast<int>(fillers.size()) - 1))];
  }
  std::string entity_name(const std::string& type) {
    return type + "_" + std::to_string(rng.integer(0, spec.entity_pool - 1));
  }
  int gap_length(GapBucket b) {
    const auto [lo, hi] = pattern::bucket_range(b);
    return static_cast<int>(rng.integer(lo, hi.value_or(kLongGapMax)));
  }

  void add_fillers(std::vector<std::string>& tokens, int n) {
    for (int i = 0; i < n; ++i) tokens.push_back(filler());
  }

  Instance realise(const Pattern& p) {
    Instance inst;
    add_fillers(inst.tokens, static_cast<int>(rng.integer(0, kMaxPrefix)));
    const auto& elements = p.elements();
    bool has_head = false, has_tail = false;
    for (std::size_t k = 0; k < elements.size(); ++k) {
      if (k > 0) add_fillers(inst.tokens, gap_length(p.gaps()[k - 1]));
      const int at = static_cast<int>(inst.tokens.size());
      if (const auto* slot = std::get_if<EntitySlot>(&elements[k])) {
        inst.tokens.push_back(entity_name(slot->type));
        EntitySpan span{at, at + 1, slot->type};
        if (slot->slot == 1) {
          inst.head = span;
          has_head = true;
        } else {
          inst.tail = span;
          has_tail = true;
        }
      } else {
        inst.tokens.push_back(std::get<Literal>(elements[k]).token);
      }
    }
    // Templates missing a slot get that entity placed after the realisation.
    if (!has_head || !has_tail) {
      add_fillers(inst.tokens, static_cast<int>(rng.integer(1, 3)));
      const int at = static_cast<int>(inst.tokens.size());
      const std::string& type = has_head ? tail_type : head_type;
      inst.tokens.push_back(entity_name(type));
      (has_head ? inst.tail : inst.head) = EntitySpan{at, at + 1, type};
    }
    add_fillers(inst.tokens, static_cast<int>(rng.integer(0, kMaxSuffix)));
    inst.tokens.push_back(".");
    return inst;
  }

  Instance random_negative() {
    Instance inst;
    add_fillers(inst.tokens, static_cast<int>(rng.integer(0, kMaxPrefix)));
    const bool head_first = rng.bernoulli(0.5);
    const int gap = static_cast<int>(rng.integer(0, 12));
    auto place = [&](bool head) {
      const int at = static_cast<int>(inst.tokens.size());
      const std::string& type = head ? head_type : tail_type;
      inst.tokens.push_back(entity_name(type));
      (head ? inst.head : inst.tail) = EntitySpan{at, at + 1, type};
    };
    place(head_first);
    add_fillers(inst.tokens, gap);
    place(!head_first);
    add_fillers(inst.tokens, static_cast<int>(rng.integer(0, kMaxSuffix)));
    inst.tokens.push_back(".");
    return inst;
  }
};

}  // namespace

void validate(const SyntheticSpec& spec) {
  if (spec.positive_templates.empty())
    throw CorpusError("synthetic spec needs at least one planted template");
  auto rate_ok = [](double r) { return r >= 0.0 && r <= 1.0; };
  if (!rate_ok(spec.fn_rate) || !rate_ok(spec.fp_rate) || !rate_ok(spec.positive_fraction) ||
      !rate_ok(spec.distractor_fraction))
    throw CorpusError("synthetic rates must lie in [0, 1]");
  if (spec.vocab_size < 1 || spec.n_instances < 0 || spec.entity_pool < 1)
    throw CorpusError("synthetic sizes must be positive");
}

Corpus generate_synthetic(const SyntheticSpec& spec) {
  validate(spec);
  Generator gen{spec, Rng(spec.seed), {}, {}, {}, {}, {}};
  std::set<std::string> reserved{"."};
  auto load = [&](const std::vector<std::string>& texts, std::vector<Pattern>& out) {
    for (const auto& t : texts) {
      Pattern p = [&] {
        try {
          return Pattern::parse(t);
        } catch (const pattern::PatternError& e) {
          throw CorpusError("template '" + t + "' is not a valid pattern: " + e.what());
        }
      }();
      for (const auto& e : p.elements()) {
        if (const auto* lit = std::get_if<Literal>(&e)) reserved.insert(lit->token);
        if (const auto* slot = std::get_if<EntitySlot>(&e)) {
          std::string& type = slot->slot == 1 ? gen.head_type : gen.tail_type;
          if (type.empty()) type = slot->type;
        }
      }
      out.push_back(std::move(p));
    }
  };
  load(spec.positive_templates, gen.positives);
  load(spec.distractor_templates, gen.distractors);
  if (gen.head_type.empty()) gen.head_type = "HEAD";
  if (gen.tail_type.empty()) gen.tail_type = "TAIL";

  for (int w = 0; static_cast<int>(gen.fillers.size()) < spec.vocab_size; ++w) {
    std::string word = "w" + std::to_string(w);
    if (!reserved.count(word)) gen.fillers.push_back(std::move(word));
  }

  std::vector<Instance> instances;
  instances.reserve(static_cast<std::size_t>(spec.n_instances));
  for (int i = 0; i < spec.n_instances; ++i) {
    Instance inst;
    const bool positive = gen.rng.bernoulli(spec.positive_fraction);
    if (positive) {
      const auto k = gen.rng.integer(0, static_cast<int>(gen.positives.size()) - 1);
      inst = gen.realise(gen.positives[static_cast<std::size_t>(k)]);
    } else if (!gen.distractors.empty() && gen.rng.bernoulli(spec.distractor_fraction)) {
      const auto k = gen.rng.integer(0, static_cast<int>(gen.distractors.size()) - 1);
      inst = gen.realise(gen.distractors[static_cast<std::size_t>(k)]);
    } else {
      inst = gen.random_negative();
    }
    char id[32];
    std::snprintf(id, sizeof(id), "syn-%06d", i);
    inst.id = id;
    inst.relation = spec.relation;
    inst.gold_label = positive ? Label::Positive : Label::Negative;
    const double flip = positive ? spec.fn_rate : spec.fp_rate;
    const bool flipped = gen.rng.bernoulli(flip);
    inst.ds_label = (positive != flipped) ? Label::Positive : Label::Negative;
    instances.push_back(std::move(inst));
  }
  return make_corpus(std::move(instances));
}

}  // namespace patdiag::corpus
