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

#include "patdiag/evaluation.h"

#include <cstdio>

#include "json.hpp"

namespace patdiag::evaluation {

using json = nlohmann::ordered_json;

Metrics from_counts(long tp, long fp, long fn) {
  Metrics m;
  m.tp = tp;
  m.fp = fp;
  m.fn = fn;
  m.precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  m.recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  const double denom = m.precision + m.recall;
  m.f1 = denom > 0 ? 2.0 * m.precision * m.recall / denom : 0.0;
  return m;
}

Metrics prf1(std::span<const double> probs, std::span<const corpus::Label> gold, double threshold) {
  if (probs.size() != gold.size())
    throw EvaluationError("prf1: " + std::to_string(probs.size()) + " predictions for " +
                          std::to_string(gold.size()) + " gold labels");
  long tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const bool predicted = probs[i] > threshold;
    const bool actual = gold[i] == corpus::Label::Positive;
    if (predicted && actual) ++tp;
    else if (predicted) ++fp;
    else if (actual) ++fn;
  }
  return from_counts(tp, fp, fn);
}

Metrics macro(std::span<const Metrics> per_relation) {
  if (per_relation.empty()) throw EvaluationError("macro average of zero relations");
  Metrics out;
  for (const auto& m : per_relation) {
    out.precision += m.precision;
    out.recall += m.recall;
    out.f1 += m.f1;
    out.tp += m.tp;
    out.fp += m.fp;
    out.fn += m.fn;
  }
  const double n = static_cast<double>(per_relation.size());
  out.precision /= n;
  out.recall /= n;
  out.f1 /= n;
  return out;
}

Metrics seed_mean(const std::function<Metrics(int seed)>& run, std::span<const int> seeds) {
  std::vector<Metrics> all;
  for (int s : seeds) all.push_back(run(s));
  return macro(all);
}

namespace {

json to_json(const Metrics& m) {
  json j;
  j["precision"] = m.precision;
  j["recall"] = m.recall;
  j["f1"] = m.f1;
  j["tp"] = m.tp;
  j["fp"] = m.fp;
  j["fn"] = m.fn;
  return j;
}

}  // namespace

std::string metrics_json(const Metrics& m) { return to_json(m).dump(); }

std::string report_json(const SeedReport& report) {
  json j;
  j["relation"] = report.relation;
  json seeds = json::array();
  for (const auto& [seed, m] : report.per_seed) {
    json s = to_json(m);
    s["seed"] = seed;
    seeds.push_back(std::move(s));
  }
  j["per_seed"] = std::move(seeds);
  j["mean"] = to_json(report.mean);
  return j.dump(2) + "\n";
}

std::string report_table(const SeedReport& report) {
  std::string out = "relation " + report.relation + "\n";
  char line[128];
  std::snprintf(line, sizeof(line), "%-6s %9s %9s %9s\n", "seed", "prec", "recall", "f1");
  out += line;
  auto row = [&](const std::string& label, const Metrics& m) {
    std::snprintf(line, sizeof(line), "%-6s %9.2f %9.2f %9.2f\n", label.c_str(),
                  100.0 * m.precision, 100.0 * m.recall, 100.0 * m.f1);
    out += line;
  };
  for (const auto& [seed, m] : report.per_seed) row(std::to_string(seed), m);
  row("mean", report.mean);
  return out;
}

}  // namespace patdiag::evaluation
