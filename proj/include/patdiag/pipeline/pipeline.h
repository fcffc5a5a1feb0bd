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

#include <filesystem>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "patdiag/corpus.h"
#include "patdiag/evaluation.h"
#include "patdiag/pipeline/config.h"
#include "patdiag/refinement.h"

namespace patdiag::pipeline {

class PipelineError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A stage ran before one of its inputs was produced.
class MissingDependency : public PipelineError {
 public:
  MissingDependency(std::string stage, std::string needed, const std::string& detail);
  const std::string& stage() const { return stage_; }
  const std::string& needed() const { return needed_; }

 private:
  std::string stage_;
  std::string needed_;
};

enum class Stage { Ingest, Synth, TrainNre, Extract, Refine, Fuse, Retrain, Eval, Report, Diagnose };

std::string to_string(Stage s);
Stage stage_from_string(std::string_view s);

/// Directory layout under the work directory. Each stage output lives in
/// <category>/<key>/ and counts as present once its DONE marker exists.
class ArtifactStore {
 public:
  explicit ArtifactStore(std::filesystem::path root);

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path dir(std::string_view category, const std::string& key) const;
  bool done(std::string_view category, const std::string& key) const;
  /// Empties the directory so a rerun never sees partial output.
  std::filesystem::path begin(std::string_view category, const std::string& key) const;
  void mark_done(std::string_view category, const std::string& key) const;

  /// Key of the most recent successful run of a stage, if any.
  std::optional<std::string> latest(Stage stage) const;
  void set_latest(Stage stage, const std::string& key) const;

 private:
  std::filesystem::path root_;
};

enum class AnnotationSource { None, Oracle, Journal };

struct RefineOptions {
  AnnotationSource source = AnnotationSource::None;
  std::filesystem::path journal;
};

struct StageResult {
  Stage stage = Stage::Ingest;
  bool skipped = false;  // outputs already present for these inputs
  std::filesystem::path dir;
};

struct Diagnosis {
  std::string relation;
  int annotated = 0;
  int annotated_positive = 0;
  evaluation::Metrics ds;  // DS labels scored against the annotations
  double ds_accuracy = 0.0;
  int positive_patterns = 0;
  int negative_patterns = 0;
  int discarded_patterns = 0;
};

std::string diagnosis_json(const Diagnosis& d);
std::string diagnosis_table(const Diagnosis& d);

/// Runs stages against one config. Keys are hashes of the config sections a
/// stage reads plus the keys of its inputs, so a changed setting reruns
/// exactly the stages downstream of it.
class Pipeline {
 public:
  explicit Pipeline(PipelineConfig config, std::ostream* log = nullptr);

  const PipelineConfig& config() const { return config_; }
  const ArtifactStore& store() const { return store_; }

  StageResult run(Stage stage, const RefineOptions& refine = {});
  /// Every stage from the corpus through the report.
  std::vector<StageResult> run_all(const RefineOptions& refine);

  StageResult ingest();
  StageResult synth();
  StageResult train_nre();
  StageResult extract();
  /// Creates the session if needed, then applies the annotation source.
  /// With AnnotationSource::None the session is left for the HTTP service.
  StageResult refine(const RefineOptions& options);
  StageResult fuse();
  StageResult retrain();
  StageResult eval();
  StageResult report();
  StageResult diagnose();

  std::string corpus_key() const;
  std::string nre_key(int seed) const;
  std::string extract_key() const;
  std::string refine_key() const;
  std::string fuse_key() const;
  std::string retrain_key(int seed) const;
  std::string eval_key() const;
  std::string report_key() const;
  std::string diagnose_key() const;

  std::filesystem::path session_dir() const;
  bool refine_done() const;

  corpus::Corpus load_train() const;
  corpus::Corpus load_test() const;
  evaluation::SeedReport load_eval() const;
  Diagnosis load_diagnosis() const;

 private:
  void require(Stage stage, std::string_view category, const std::string& key, Stage needed) const;
  void note_key(Stage stage, const std::string& key) const;
  void info(const std::string& line) const;

  PipelineConfig config_;
  ArtifactStore store_;
  std::ostream* log_;
  mutable std::optional<std::string> corpus_key_;
};

}  // namespace patdiag::pipeline
