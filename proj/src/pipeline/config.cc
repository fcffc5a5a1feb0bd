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


#include "patdiag/pipeline/config.h"

#include <charconv>
#include <functional>
#include <map>

#include "patdiag/util/io.h"

namespace patdiag::pipeline {

std::string to_string(FusionMode m) {
  switch (m) {
    case FusionMode::Wlf: return "wlf";
    case FusionMode::GoldMix: return "gold_mix";
    case FusionMode::DsOnly: return "ds_only";
  }
  return "wlf";
}

FusionMode fusion_mode_from_string(std::string_view s) {
  if (s == "wlf") return FusionMode::Wlf;
  if (s == "gold_mix") return FusionMode::GoldMix;
  if (s == "ds_only") return FusionMode::DsOnly;
  throw ConfigError("unknown fusion mode '" + std::string(s) + "' (wlf, gold_mix, ds_only)");
}

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  if (trim(s).empty()) return out;
  std::size_t pos = 0;
  while (true) {
    const auto next = s.find(sep, pos);
    out.push_back(trim(s.substr(pos, next == std::string_view::npos ? s.size() - pos : next - pos)));
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return out;
}

template <typename T>
T parse_number(std::string_view s) {
  T v{};
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size() || s.empty())
    throw ConfigError("not a number: '" + std::string(s) + "'");
  return v;
}

bool parse_bool(std::string_view s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw ConfigError("not a boolean: '" + std::string(s) + "'");
}

template <typename T>
std::string join_numbers(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    if constexpr (std::is_floating_point_v<T>) out += util::format_double(v[i]);
    else out += std::to_string(v[i]);
  }
  return out;
}

std::string join_strings(const std::vector<std::string>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "; " : "") + v[i];
  return out;
}

struct Field {
  std::string key;
  std::function<std::string(const PipelineConfig&)> get;
  std::function<void(PipelineConfig&, std::string_view)> set;
};

template <typename T>
Field number(std::string key, T PipelineConfig::*member) {
  return {key,
          [member](const PipelineConfig& c) {
            if constexpr (std::is_floating_point_v<T>) return util::format_double(c.*member);
            else return std::to_string(c.*member);
          },
          [member](PipelineConfig& c, std::string_view v) { c.*member = parse_number<T>(v); }};
}

template <typename S, typename T>
Field nested(std::string key, S PipelineConfig::*outer, T S::*member) {
  return {key,
          [outer, member](const PipelineConfig& c) {
            if constexpr (std::is_same_v<T, bool>) return std::string((c.*outer).*member ? "true" : "false");
            else if constexpr (std::is_same_v<T, std::string>) return (c.*outer).*member;
            else if constexpr (std::is_floating_point_v<T>) return util::format_double((c.*outer).*member);
            else return std::to_string((c.*outer).*member);
          },
          [outer, member](PipelineConfig& c, std::string_view v) {
            if constexpr (std::is_same_v<T, bool>) (c.*outer).*member = parse_bool(v);
            else if constexpr (std::is_same_v<T, std::string>) (c.*outer).*member = std::string(v);
            else (c.*outer).*member = parse_number<T>(v);
          }};
}

Field path(std::string key, std::filesystem::path PipelineConfig::*member) {
  return {key, [member](const PipelineConfig& c) { return (c.*member).string(); },
          [member](PipelineConfig& c, std::string_view v) { c.*member = std::filesystem::path(v); }};
}

Field templates(std::string key, std::vector<std::string> corpus::SyntheticSpec::*member) {
  return {key, [member](const PipelineConfig& c) { return join_strings(c.synth.*member); },
          [member](PipelineConfig& c, std::string_view v) {
            std::vector<std::string> out;
            for (auto part : split(v, ';'))
              if (!part.empty()) out.emplace_back(part);
            c.synth.*member = std::move(out);
          }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> all = [] {
    using C = PipelineConfig;
    using S = corpus::SyntheticSpec;
    using N = nre::NreConfig;
    using A = agent::AgentConfig;
    std::vector<Field> f;
    f.push_back(path("workdir", &C::workdir));
    f.push_back(path("corpus", &C::corpus));
    f.push_back(path("test_corpus", &C::test_corpus));
    f.push_back(nested("corpus.max_sentence_len", &C::corpus_options, &corpus::CorpusOptions::max_sentence_len));
    f.push_back(number("split.test_fraction", &C::test_fraction));
    f.push_back(number("split.seed", &C::split_seed));

    f.push_back(nested("synth.vocab_size", &C::synth, &S::vocab_size));
    f.push_back(nested("synth.n_instances", &C::synth, &S::n_instances));
    f.push_back(templates("synth.positive_templates", &S::positive_templates));
    f.push_back(templates("synth.distractor_templates", &S::distractor_templates));
    f.push_back(nested("synth.positive_fraction", &C::synth, &S::positive_fraction));
    f.push_back(nested("synth.distractor_fraction", &C::synth, &S::distractor_fraction));
    f.push_back(nested("synth.fn_rate", &C::synth, &S::fn_rate));
    f.push_back(nested("synth.fp_rate", &C::synth, &S::fp_rate));
    f.push_back(nested("synth.entity_pool", &C::synth, &S::entity_pool));
    f.push_back(nested("synth.relation", &C::synth, &S::relation));
    f.push_back(nested("synth.seed", &C::synth, &S::seed));

    f.push_back(nested("nre.word_dim", &C::nre, &N::word_dim));
    f.push_back(nested("nre.pos_dim", &C::nre, &N::pos_dim));
    f.push_back(nested("nre.max_rel_dist", &C::nre, &N::max_rel_dist));
    f.push_back(nested("nre.hidden", &C::nre, &N::hidden));
    f.push_back(nested("nre.dropout_embed", &C::nre, &N::dropout_embed));
    f.push_back(nested("nre.dropout_encoder", &C::nre, &N::dropout_encoder));
    f.push_back(nested("nre.dropout_final", &C::nre, &N::dropout_final));
    f.push_back(nested("nre.learning_rate", &C::nre, &N::learning_rate));
    f.push_back(nested("nre.batch", &C::nre, &N::batch));
    f.push_back(nested("nre.max_epochs", &C::nre, &N::max_epochs));
    f.push_back(nested("nre.validation_fraction", &C::nre, &N::validation_fraction));
    f.push_back(path("nre.word_vectors", &C::word_vectors));

    f.push_back(nested("agent.hidden", &C::agent, &A::hidden));
    f.push_back(nested("agent.learning_rate", &C::agent, &A::learning_rate));
    f.push_back(nested("agent.batch", &C::agent, &A::batch));
    f.push_back(nested("agent.epochs", &C::agent, &A::epochs));
    f.push_back(nested("agent.epsilon", &C::agent, &A::epsilon));
    f.push_back({"agent.eta_grid", [](const C& c) { return join_numbers(c.eta_grid); },
                 [](C& c, std::string_view v) {
                   c.eta_grid.clear();
                   for (auto part : split(v, ',')) c.eta_grid.push_back(parse_number<double>(part));
                 }});
    f.push_back(nested("agent.top_k", &C::agent, &A::top_k));
    f.push_back(nested("agent.baseline", &C::agent, &A::baseline));

    f.push_back(number("refine.n_r", &C::n_r));
    f.push_back(number("refine.n_a", &C::n_a));
    f.push_back(nested("refine.p_h", &C::thresholds, &refinement::Thresholds::p_h));
    f.push_back(nested("refine.p_l", &C::thresholds, &refinement::Thresholds::p_l));

    f.push_back({"fusion.mode", [](const C& c) { return to_string(c.fusion); },
                 [](C& c, std::string_view v) { c.fusion = fusion_mode_from_string(v); }});
    f.push_back(number("fusion.delta", &C::fusion_delta));

    f.push_back(number("seed", &C::seed));
    f.push_back({"seeds", [](const C& c) { return join_numbers(c.seeds); },
                 [](C& c, std::string_view v) {
                   c.seeds.clear();
                   for (auto part : split(v, ',')) c.seeds.push_back(parse_number<int>(part));
                 }});
    return f;
  }();
  return all;
}

const Field& field(std::string_view key) {
  static const std::map<std::string, const Field*, std::less<>> index = [] {
    std::map<std::string, const Field*, std::less<>> m;
    for (const auto& f : fields()) m[f.key] = &f;
    return m;
  }();
  auto it = index.find(key);
  if (it == index.end()) throw ConfigError("unknown config key '" + std::string(key) + "'");
  return *it->second;
}

}  // namespace

void PipelineConfig::validate() const {
  if (workdir.empty()) throw ConfigError("workdir must be set");
  if (eta_grid.empty()) throw ConfigError("agent.eta_grid must list at least one value");
  for (double eta : eta_grid)
    if (eta < 0.0) throw ConfigError("agent.eta_grid values must be non-negative");
  if (seeds.empty()) throw ConfigError("seeds must list at least one value");
  if (n_r <= 0 || n_a <= 0) throw ConfigError("refine.n_r and refine.n_a must be positive");
  if (!(thresholds.p_l >= 0.0 && thresholds.p_l < thresholds.p_h && thresholds.p_h <= 1.0))
    throw ConfigError("need 0 <= refine.p_l < refine.p_h <= 1");
  if (test_corpus.empty() && !(test_fraction > 0.0 && test_fraction < 1.0))
    throw ConfigError("split.test_fraction must lie in (0, 1) without a test_corpus");
  if (!(fusion_delta > 0.0 && fusion_delta < 0.5)) throw ConfigError("fusion.delta must lie in (0, 0.5)");
  try {
    nre.validate();
    agent.validate();
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& f : fields()) keys.push_back(f.key);
  return keys;
}

std::string get_value(const PipelineConfig& config, std::string_view key) { return field(key).get(config); }

void set_value(PipelineConfig& config, std::string_view key, std::string_view value) {
  try {
    field(key).set(config, trim(value));
  } catch (const ConfigError& e) {
    throw ConfigError(std::string(key) + ": " + e.what());
  }
}

PipelineConfig parse_config(std::string_view text, const std::filesystem::path& base_dir) {
  PipelineConfig c;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    try {
      set_value(c, trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!base_dir.empty()) {
    for (auto* p : {&c.workdir, &c.corpus, &c.test_corpus, &c.word_vectors})
      if (!p->empty() && p->is_relative()) *p = (base_dir / *p).lexically_normal();
  }
  c.validate();
  return c;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = util::read_file(path);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  return parse_config(text, path.parent_path());
}

std::string config_text(const PipelineConfig& config) {
  std::string out;
  for (const auto& f : fields()) out += f.key + " = " + f.get(config) + "\n";
  return out;
}

std::string section_text(const PipelineConfig& config, std::string_view prefix) {
  std::string out;
  for (const auto& f : fields())
    if (std::string_view(f.key).starts_with(prefix)) out += f.key + " = " + f.get(config) + "\n";
  return out;
}

}  // namespace patdiag::pipeline
