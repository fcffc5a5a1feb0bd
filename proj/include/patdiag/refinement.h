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

// Pattern refinement by annotation.
//
// Each selected pattern contributes up to n_a sampled matches. Labels are
// keyed by instance id, so an instance sampled under two patterns is asked
// once. A pattern's accuracy is the share of its sampled matches labelled +1;
// it is POSITIVE above p_h, NEGATIVE below p_l and DISCARDED otherwise.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "patdiag/corpus.h"
#include "patdiag/pattern.h"

namespace patdiag::refinement {

class RefinementError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UnknownItem : public RefinementError {
 public:
  using RefinementError::RefinementError;
};

class IncompletePatterns : public RefinementError {
 public:
  IncompletePatterns(std::vector<std::string> patterns);
  const std::vector<std::string>& patterns() const { return patterns_; }

 private:
  std::vector<std::string> patterns_;
};

class SessionClosed : public RefinementError {
 public:
  using RefinementError::RefinementError;
};

struct Thresholds {
  double p_h = 0.8;
  double p_l = 0.1;
};

struct SessionPattern {
  std::string text;                // canonical pattern text
  int induction_count = 0;
  std::vector<std::string> items;  // sampled instance ids
};

struct AnnotationSession {
  std::string relation;
  Thresholds thresholds;
  std::vector<SessionPattern> patterns;  // representativeness order
  std::map<std::string, corpus::Label> annotations;
  long revision = 0;
  bool finalized = false;

  /// Distinct item ids in presentation order (pattern by pattern).
  std::vector<std::string> items() const;
  bool has_item(const std::string& id) const;
  bool complete() const;
  std::optional<std::string> next_pending() const;
  std::size_t labeled_count() const;
};

/// Samples min(n_a, |matched|) instances per pattern without replacement.
AnnotationSession create_session(const std::vector<pattern::PatternStats>& patterns,
                                 const corpus::Corpus& corpus, int n_a, std::uint64_t seed,
                                 Thresholds thresholds = {});

/// Overwrites any previous label. Returns the new revision.
long record(AnnotationSession& session, const std::string& instance_id, int label);

enum class VerdictClass { Positive, Negative, Discarded };
std::string to_string(VerdictClass c);

struct PatternVerdict {
  std::string pattern;
  double accuracy = 0.0;
  VerdictClass cls = VerdictClass::Discarded;
};

VerdictClass classify(double accuracy, const Thresholds& t);

/// Throws IncompletePatterns naming every pattern with an unlabeled item.
std::vector<PatternVerdict> verdicts(const AnnotationSession& session);

struct PatternProgress {
  std::string pattern;
  int labeled = 0;
  int total = 0;
  int positive = 0;
  std::optional<PatternVerdict> verdict;  // set once every item is labeled
};
std::vector<PatternProgress> progress(const AnnotationSession& session);

/// Labels every item with its gold label.
void oracle_annotate(AnnotationSession& session, const corpus::Corpus& corpus);

/// Session definition without labels.
std::string session_json(const AnnotationSession& session);
AnnotationSession parse_session(std::string_view json);

/// One journal entry; the timestamp is the session revision after the write.
std::string journal_line(long revision, const std::string& instance_id, corpus::Label label);
struct JournalEntry {
  std::string instance_id;
  int label = 0;
};

std::vector<JournalEntry> parse_journal(std::string_view journal);
/// Applies every entry in order.
void replay_journal(AnnotationSession& session, std::string_view journal);
/// Journal that reproduces the session's current labels (presentation order).
std::string journal_for(const AnnotationSession& session);

std::string verdicts_json(const std::vector<PatternVerdict>& v);

/// A session persisted as session.json plus an append-only journal.jsonl.
/// Every label is on disk before record() returns.
class SessionStore {
 public:
  static SessionStore create(const std::filesystem::path& dir, const AnnotationSession& session);
  static SessionStore open(const std::filesystem::path& dir);

  const AnnotationSession& session() const { return session_; }
  long record(const std::string& instance_id, int label);
  /// Writes verdicts.json and closes the session to further labels.
  std::vector<PatternVerdict> finalize();

  const std::filesystem::path& dir() const { return dir_; }
  std::filesystem::path journal_path() const { return dir_ / "journal.jsonl"; }
  std::filesystem::path verdicts_path() const { return dir_ / "verdicts.json"; }

 private:
  SessionStore(std::filesystem::path dir, AnnotationSession s) : dir_(std::move(dir)), session_(std::move(s)) {}
  std::filesystem::path dir_;
  AnnotationSession session_;
};

}  // namespace patdiag::refinement
