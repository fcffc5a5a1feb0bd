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

#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "patdiag/corpus.h"

namespace patdiag::evaluation {

class EvaluationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Metrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  long tp = 0;
  long fp = 0;
  long fn = 0;
};

/// Metrics from raw counts; zero denominators give zero.
Metrics from_counts(long tp, long fp, long fn);

/// Predicts +1 iff prob > threshold.
Metrics prf1(std::span<const double> probs, std::span<const corpus::Label> gold,
             double threshold = 0.5);

/// Unweighted mean of precision, recall and F1; counts are summed.
Metrics macro(std::span<const Metrics> per_relation);

/// Runs fn for every seed and averages the metrics. Any exception from a run
/// propagates.
Metrics seed_mean(const std::function<Metrics(int seed)>& run, std::span<const int> seeds);

struct SeedReport {
  std::string relation;
  std::vector<std::pair<int, Metrics>> per_seed;
  Metrics mean;
};

std::string metrics_json(const Metrics& m);
std::string report_json(const SeedReport& report);
/// Plain-text table, one row per seed plus the mean.
std::string report_table(const SeedReport& report);

}  // namespace patdiag::evaluation
