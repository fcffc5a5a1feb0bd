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


#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "patdiag/corpus.h"
#include "patdiag/nre_model.h"
#include "patdiag/refinement.h"
#include "patdiag/rl_agent.h"

namespace patdiag::pipeline {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class FusionMode { Wlf, GoldMix, DsOnly };

std::string to_string(FusionMode m);
FusionMode fusion_mode_from_string(std::string_view s);

/// Every tunable of a run. Read from a flat "key = value" file; see
/// config_keys() for the names.
struct PipelineConfig {
  std::filesystem::path workdir = "work";
  std::filesystem::path corpus;       // JSONL; empty means the synthetic corpus
  std::filesystem::path test_corpus;  // optional; otherwise split from corpus
  corpus::CorpusOptions corpus_options;
  double test_fraction = 0.2;
  std::uint64_t split_seed = 0;

  corpus::SyntheticSpec synth;
  nre::NreConfig nre;
  std::filesystem::path word_vectors;
  agent::AgentConfig agent;
  std::vector<double> eta_grid = agent::kDefaultEtaGrid;

  int n_r = 20;
  int n_a = 10;
  refinement::Thresholds thresholds;

  FusionMode fusion = FusionMode::Wlf;
  double fusion_delta = 1e-3;

  std::uint64_t seed = 0;
  std::vector<int> seeds = {0, 1, 2, 3, 4};

  bool synthetic() const { return corpus.empty(); }
  void validate() const;
};

/// Names of every key in file order.
std::vector<std::string> config_keys();

/// Relative paths in the file resolve against base_dir.
PipelineConfig parse_config(std::string_view text, const std::filesystem::path& base_dir = {});
PipelineConfig load_config(const std::filesystem::path& path);

/// Canonical text with every key; parse_config(config_text(c)) == c.
std::string config_text(const PipelineConfig& config);
/// The canonical lines whose key starts with prefix.
std::string section_text(const PipelineConfig& config, std::string_view prefix);

std::string get_value(const PipelineConfig& config, std::string_view key);
void set_value(PipelineConfig& config, std::string_view key, std::string_view value);

}  // namespace patdiag::pipeline
