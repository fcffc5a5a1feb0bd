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

// Weak label fusion.
//
// Labeling functions emit +1, -1 or 0 (abstain). The generative model is
//   P(L, Y) = 1/2 * prod_i f_i(Y),
//   f_i(y) = beta_i alpha_i        if L_i = y
//            beta_i (1 - alpha_i)  if L_i = -y
//            1 - beta_i            if L_i = 0
// with alpha the accuracy and beta the coverage of LF i. Both are estimated
// in closed form from the annotated instances; the posterior P(Y=+1 | L) is
// the soft training label.

#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "patdiag/corpus.h"
#include "patdiag/pattern.h"

namespace patdiag::wlf {

class WlfError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class LfKind { Ds, PositivePattern, NegativePattern };

struct LabelingFunction {
  LfKind kind = LfKind::Ds;
  pattern::Pattern pattern;  // unused for Ds
  std::string name;

  int apply(const corpus::Instance& inst) const;
};

/// DS first, then positive patterns, then negative patterns.
std::vector<LabelingFunction> make_lfs(const std::vector<pattern::Pattern>& positive,
                                       const std::vector<pattern::Pattern>& negative);

using LfRow = std::vector<int>;

struct LabelMatrix {
  std::vector<std::string> lf_names;
  std::vector<LfRow> rows;  // one per corpus instance
};

/// Throws when a pattern is in both sets.
LabelMatrix apply_lfs(const corpus::Corpus& corpus, const std::vector<pattern::Pattern>& positive,
                      const std::vector<pattern::Pattern>& negative);

struct WlfParams {
  std::vector<double> alpha;
  std::vector<double> beta;
  std::vector<std::string> lf_names;
  double delta = 1e-3;
};

/// Closed-form accuracy and coverage on the annotated rows, clamped to
/// [delta, 1 - delta]. An LF that never fires gets alpha = 0.5.
WlfParams estimate(std::span<const LfRow> rows, std::span<const corpus::Label> labels,
                   double delta = 1e-3);

/// P(Y = +1 | L), evaluated in log space.
double posterior(std::span<const int> L, const WlfParams& params);
/// Mean log P(Y | L) over labeled rows; used to compare parameter fits.
double mean_log_likelihood(std::span<const LfRow> rows, std::span<const corpus::Label> labels,
                           const WlfParams& params);

std::vector<double> denoise(const LabelMatrix& matrix, const WlfParams& params);

/// Hard human labels override the soft labels of annotated instances.
std::vector<double> gold_mix(const corpus::Corpus& corpus, std::span<const double> soft,
                             const std::map<std::string, corpus::Label>& annotations);

/// 1 for DS positives, 0 otherwise.
std::vector<double> ds_targets(const corpus::Corpus& corpus);

/// Rows and labels of the annotated instances, in corpus order.
struct AnnotatedRows {
  std::vector<LfRow> rows;
  std::vector<corpus::Label> labels;
};
AnnotatedRows annotated_rows(const corpus::Corpus& corpus, const LabelMatrix& matrix,
                             const std::map<std::string, corpus::Label>& annotations);

std::string label_file(const corpus::Corpus& corpus, std::span<const double> soft);
std::vector<double> parse_label_file(std::string_view jsonl, const corpus::Corpus& corpus);
std::string params_json(const WlfParams& params);
WlfParams parse_params(std::string_view json);

}  // namespace patdiag::wlf
