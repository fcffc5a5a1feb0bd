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

#include "patdiag/wlf.h"

#include <algorithm>
#include <cmath>
#include <set>

#include "json.hpp"

namespace patdiag::wlf {

using json = nlohmann::ordered_json;

int LabelingFunction::apply(const corpus::Instance& inst) const {
  switch (kind) {
    case LfKind::Ds: return corpus::to_int(inst.ds_label);
    case LfKind::PositivePattern: return pattern::match(pattern, inst) ? 1 : 0;
    case LfKind::NegativePattern: return pattern::match(pattern, inst) ? -1 : 0;
  }
  return 0;
}

std::vector<LabelingFunction> make_lfs(const std::vector<pattern::Pattern>& positive,
                                       const std::vector<pattern::Pattern>& negative) {
  std::set<std::string> pos_texts;
  for (const auto& p : positive) pos_texts.insert(p.canonical_text());
  for (const auto& p : negative)
    if (pos_texts.count(p.canonical_text()))
      throw WlfError("pattern is both positive and negative: " + p.canonical_text());
  std::vector<LabelingFunction> lfs;
  lfs.push_back({LfKind::Ds, {}, "DS"});
  for (const auto& p : positive) lfs.push_back({LfKind::PositivePattern, p, "+" + p.canonical_text()});
  for (const auto& p : negative) lfs.push_back({LfKind::NegativePattern, p, "-" + p.canonical_text()});
  return lfs;
}

LabelMatrix apply_lfs(const corpus::Corpus& corpus, const std::vector<pattern::Pattern>& positive,
                      const std::vector<pattern::Pattern>& negative) {
  const auto lfs = make_lfs(positive, negative);
  LabelMatrix m;
  for (const auto& lf : lfs) m.lf_names.push_back(lf.name);
  m.rows.reserve(corpus.size());
  for (const auto& inst : corpus.instances) {
    LfRow row;
    row.reserve(lfs.size());
    for (const auto& lf : lfs) row.push_back(lf.apply(inst));
    m.rows.push_back(std::move(row));
  }
  return m;
}

WlfParams estimate(std::span<const LfRow> rows, std::span<const corpus::Label> labels, double delta) {
  if (rows.empty()) throw WlfError("cannot estimate from an empty annotated set");
  if (rows.size() != labels.size()) throw WlfError("rows and labels differ in length");
  if (!(delta > 0.0 && delta < 0.5)) throw WlfError("clamp margin must lie in (0, 0.5)");
  const std::size_t m = rows.front().size();
  std::vector<long> fired(m, 0), agreed(m, 0);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != m) throw WlfError("label rows differ in width");
    const int y = corpus::to_int(labels[r]);
    for (std::size_t i = 0; i < m; ++i) {
      if (rows[r][i] == 0) continue;
      ++fired[i];
      agreed[i] += rows[r][i] == y;
    }
  }
  auto clamp = [delta](double v) { return std::clamp(v, delta, 1.0 - delta); };
  WlfParams p;
  p.delta = delta;
  for (std::size_t i = 0; i < m; ++i) {
    const double a = fired[i] ? static_cast<double>(agreed[i]) / static_cast<double>(fired[i]) : 0.5;
    p.alpha.push_back(clamp(a));
    p.beta.push_back(clamp(static_cast<double>(fired[i]) / static_cast<double>(rows.size())));
  }
  return p;
}

namespace {

// log f_i(y) summed over LFs.
double log_joint(std::span<const int> L, const WlfParams& p, int y) {
  double s = 0.0;
  for (std::size_t i = 0; i < L.size(); ++i) {
    if (L[i] == 0) s += std::log1p(-p.beta[i]);
    else if (L[i] == y) s += std::log(p.beta[i]) + std::log(p.alpha[i]);
    else s += std::log(p.beta[i]) + std::log1p(-p.alpha[i]);
  }
  return s;
}

}  // namespace

double posterior(std::span<const int> L, const WlfParams& params) {
  if (L.size() != params.alpha.size() || L.size() != params.beta.size())
    throw WlfError("label vector has " + std::to_string(L.size()) + " entries for " +
                   std::to_string(params.alpha.size()) + " labeling functions");
  const double d = log_joint(L, params, -1) - log_joint(L, params, 1);
  // 1 / (1 + e^d), written to avoid overflow for either sign of d.
  if (d > 0) {
    const double e = std::exp(-d);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(d));
}

double mean_log_likelihood(std::span<const LfRow> rows, std::span<const corpus::Label> labels,
                           const WlfParams& params) {
  if (rows.empty() || rows.size() != labels.size()) throw WlfError("need matching non-empty rows and labels");
  double total = 0.0;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const int y = corpus::to_int(labels[r]);
    const double lp = log_joint(rows[r], params, y);
    const double lq = log_joint(rows[r], params, -y);
    const double hi = std::max(lp, lq);
    total += lp - (hi + std::log(std::exp(lp - hi) + std::exp(lq - hi)));
  }
  return total / static_cast<double>(rows.size());
}

std::vector<double> denoise(const LabelMatrix& matrix, const WlfParams& params) {
  std::vector<double> out;
  out.reserve(matrix.rows.size());
  for (const auto& row : matrix.rows) out.push_back(posterior(row, params));
  return out;
}

std::vector<double> gold_mix(const corpus::Corpus& corpus, std::span<const double> soft,
                             const std::map<std::string, corpus::Label>& annotations) {
  if (soft.size() != corpus.size()) throw WlfError("soft labels do not cover the corpus");
  std::vector<double> out(soft.begin(), soft.end());
  for (const auto& [id, label] : annotations) {
    const int idx = corpus.index_of(id);
    if (idx < 0) throw WlfError("annotation for unknown instance " + id);
    out[static_cast<std::size_t>(idx)] = label == corpus::Label::Positive ? 1.0 : 0.0;
  }
  return out;
}

std::vector<double> ds_targets(const corpus::Corpus& corpus) {
  std::vector<double> out;
  out.reserve(corpus.size());
  for (const auto& inst : corpus.instances) out.push_back(inst.ds_label == corpus::Label::Positive ? 1.0 : 0.0);
  return out;
}

AnnotatedRows annotated_rows(const corpus::Corpus& corpus, const LabelMatrix& matrix,
                             const std::map<std::string, corpus::Label>& annotations) {
  AnnotatedRows out;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    auto it = annotations.find(corpus.instances[i].id);
    if (it == annotations.end()) continue;
    out.rows.push_back(matrix.rows.at(i));
    out.labels.push_back(it->second);
  }
  return out;
}

std::string label_file(const corpus::Corpus& corpus, std::span<const double> soft) {
  if (soft.size() != corpus.size()) throw WlfError("soft labels do not cover the corpus");
  std::string out;
  for (std::size_t i = 0; i < soft.size(); ++i) {
    json j;
    j["instance_id"] = corpus.instances[i].id;
    j["soft_label"] = soft[i];
    out += j.dump() + "\n";
  }
  return out;
}

std::vector<double> parse_label_file(std::string_view text, const corpus::Corpus& corpus) {
  std::vector<double> out(corpus.size(), -1.0);
  std::size_t pos = 0;
  int line_no = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      const json j = json::parse(line);
      const auto id = j.at("instance_id").get<std::string>();
      const double y = j.at("soft_label").get<double>();
      const int idx = corpus.index_of(id);
      if (idx < 0) throw WlfError("unknown instance " + id);
      if (!(y >= 0.0 && y <= 1.0)) throw WlfError("soft label outside [0, 1]");
      out[static_cast<std::size_t>(idx)] = y;
    } catch (const std::exception& e) {
      throw WlfError("label file line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  for (std::size_t i = 0; i < out.size(); ++i)
    if (out[i] < 0.0) throw WlfError("label file has no entry for " + corpus.instances[i].id);
  return out;
}

std::string params_json(const WlfParams& params) {
  json j;
  j["alpha"] = params.alpha;
  j["beta"] = params.beta;
  j["lf_names"] = params.lf_names;
  j["delta"] = params.delta;
  return j.dump(1) + "\n";
}

WlfParams parse_params(std::string_view text) {
  try {
    const json j = json::parse(text);
    WlfParams p;
    p.alpha = j.at("alpha").get<std::vector<double>>();
    p.beta = j.at("beta").get<std::vector<double>>();
    p.lf_names = j.at("lf_names").get<std::vector<std::string>>();
    p.delta = j.value("delta", 1e-3);
    if (p.alpha.size() != p.beta.size() || p.alpha.size() != p.lf_names.size())
      throw WlfError("alpha, beta and lf_names differ in length");
    return p;
  } catch (const json::exception& e) {
    throw WlfError(std::string("malformed params: ") + e.what());
  }
}

}  // namespace patdiag::wlf
