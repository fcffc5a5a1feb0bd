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

// Reference evaluation of the label model by direct enumeration of the joint,
// and a sampler that draws (L, Y) from it.

#pragma once

#include <vector>

#include "patdiag/corpus.h"
#include "patdiag/numerics/rng.h"
#include "patdiag/wlf.h"

namespace patdiag::testing {

// P(L, Y=y) = 1/2 prod_i f_i(y), multiplied out in plain arithmetic.
inline double joint(const std::vector<int>& L, const std::vector<double>& alpha,
                    const std::vector<double>& beta, int y) {
  double p = 0.5;
  for (std::size_t i = 0; i < L.size(); ++i) {
    if (L[i] == 0) p *= 1.0 - beta[i];
    else if (L[i] == y) p *= beta[i] * alpha[i];
    else p *= beta[i] * (1.0 - alpha[i]);
  }
  return p;
}

inline double brute_force_posterior(const std::vector<int>& L, const std::vector<double>& alpha,
                                    const std::vector<double>& beta) {
  double total = 0.0;
  for (int y : {-1, 1}) total += joint(L, alpha, beta, y);
  return joint(L, alpha, beta, 1) / total;
}

struct DpCase {
  std::vector<int> L;
  wlf::WlfParams params;
};

inline DpCase random_dp_case(numerics::Rng& rng, int max_m = 6) {
  DpCase c;
  const int m = static_cast<int>(rng.integer(1, max_m));
  for (int i = 0; i < m; ++i) {
    c.L.push_back(static_cast<int>(rng.integer(-1, 1)));
    c.params.alpha.push_back(rng.uniform(0.05, 0.95));
    c.params.beta.push_back(rng.uniform(0.05, 0.95));
    c.params.lf_names.push_back("lf" + std::to_string(i));
  }
  return c;
}

struct Sample {
  std::vector<wlf::LfRow> rows;
  std::vector<corpus::Label> labels;
};

// Y uniform; each LF fires with probability beta and then agrees with Y with
// probability alpha.
inline Sample sample_generative(numerics::Rng& rng, int n, const std::vector<double>& alpha,
                                const std::vector<double>& beta) {
  Sample s;
  for (int r = 0; r < n; ++r) {
    const int y = rng.bernoulli(0.5) ? 1 : -1;
    wlf::LfRow row;
    for (std::size_t i = 0; i < alpha.size(); ++i) {
      if (!rng.bernoulli(beta[i])) row.push_back(0);
      else row.push_back(rng.bernoulli(alpha[i]) ? y : -y);
    }
    s.rows.push_back(std::move(row));
    s.labels.push_back(y == 1 ? corpus::Label::Positive : corpus::Label::Negative);
  }
  return s;
}

}  // namespace patdiag::testing
