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
#include <memory>
#include <stdexcept>
#include <string>

#include "patdiag/corpus.h"
#include "patdiag/refinement.h"

namespace patdiag::pipeline {

class ServiceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// JSON over HTTP for one annotation session. Reads and writes are
/// serialized; a label is in the journal before its response is sent.
///
///   GET  /api/session              summary and progress
///   GET  /api/session/next         next unlabeled item, or null
///   GET  /api/item/{id}            one item
///   POST /api/item/{id}/label      {"label": 1|-1, "revision": n (optional)}
///   GET  /api/patterns             per-pattern progress and verdicts
///   POST /api/session/finalize     verdicts, or 409 listing incomplete patterns
///
/// Every body carries "revision". A label posted with a revision other than
/// the current one gets 409.
class AnnotationService {
 public:
  AnnotationService(refinement::SessionStore store, corpus::Corpus corpus,
                    std::filesystem::path static_dir = {});
  ~AnnotationService();
  AnnotationService(const AnnotationService&) = delete;
  AnnotationService& operator=(const AnnotationService&) = delete;

  /// Port 0 picks a free port. Returns the bound port.
  int bind(const std::string& host, int port);
  /// Blocks until stop().
  void serve();
  void stop();

  refinement::AnnotationSession session() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace patdiag::pipeline
