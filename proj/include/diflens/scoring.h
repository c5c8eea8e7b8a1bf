/*
 * Copyright 2026 The diflens Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef DIFLENS_SCORING_H_
#define DIFLENS_SCORING_H_

#include <array>
#include <span>
#include <string>
#include <vector>

#include "diflens/sim.h"

namespace diflens::scoring {

// Equally spaced nodes on [lo, hi] with standard-normal prior weights.
struct QuadratureGrid {
  int points = 61;
  double lo = -5.0;
  double hi = 5.0;
};

struct AbilityEstimate {
  std::string examinee_id;
  double theta_hat = 0.0;
};

inline constexpr int kMissingScore = -1;

// EAP scorer with per-item log-likelihood tables precomputed on the grid.
// Scores equal to kMissingScore are skipped.
class EapScorer {
 public:
  EapScorer(const sim::ItemBank& bank, const QuadratureGrid& grid);

  // scores[i] belongs to bank.items[i].
  double Estimate(std::span<const int> scores) const;

 private:
  std::vector<double> nodes_;
  std::vector<double> log_prior_;
  // log_prob_[item][score * nodes + q]
  std::vector<std::vector<double>> log_prob_;
  std::vector<int> max_score_;
};

AbilityEstimate estimate_theta_eap(const std::string& examinee_id,
                                   std::span<const int> scores,
                                   const sim::ItemBank& bank,
                                   const QuadratureGrid& grid = {});

std::vector<AbilityEstimate> score_all(const sim::ResponseTable& responses,
                                       const sim::ItemBank& bank,
                                       const QuadratureGrid& grid = {});

inline constexpr int kStrata = 10;

// Nine decile cutpoints of reference-group theta-hat.
struct StrataBoundaries {
  std::array<double, kStrata - 1> cutpoints{};
};

// Nearest-rank deciles: cutpoint j is the ceil(j * n / 10)-th smallest value.
StrataBoundaries build_strata(std::span<const double> reference_theta_hat);
StrataBoundaries build_strata(std::span<const AbilityEstimate> reference);

// 1 + number of cutpoints strictly below theta_hat, so a value equal to
// cutpoint j falls in stratum j.
int assign_stratum(double theta_hat, const StrataBoundaries& bounds);

}  // namespace diflens::scoring

#endif  // DIFLENS_SCORING_H_
