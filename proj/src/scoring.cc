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

#include "diflens/scoring.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "diflens/error.h"
#include "diflens/numeric.h"

namespace diflens::scoring {

EapScorer::EapScorer(const sim::ItemBank& bank, const QuadratureGrid& grid) {
  if (grid.points < 2 || !(grid.hi > grid.lo)) {
    throw ConfigError("quadrature grid needs >= 2 points and hi > lo");
  }
  const int nq = grid.points;
  nodes_.resize(nq);
  log_prior_.resize(nq);
  for (int q = 0; q < nq; ++q) {
    nodes_[q] = grid.lo + (grid.hi - grid.lo) * q / (nq - 1);
    log_prior_[q] = -0.5 * nodes_[q] * nodes_[q];
  }
  log_prob_.reserve(bank.items.size());
  for (const auto& item : bank.items) {
    const int ms = item.max_score();
    std::vector<double> table(static_cast<std::size_t>(ms + 1) * nq);
    for (int q = 0; q < nq; ++q) {
      if (item.kind == sim::ItemKind::kDichotomous) {
        if (!(item.a > 0)) throw DomainError("item " + item.item_id + ": a <= 0");
        const double x = item.a * (nodes_[q] - item.b);
        table[q] = LogLogistic(-x);
        table[nq + q] = LogLogistic(x);
      } else {
        const auto p = sim::prob_categories_gpcm(item.a, item.thresholds, 0.0,
                                                 nodes_[q]);
        for (int s = 0; s <= ms; ++s) table[s * nq + q] = std::log(p[s]);
      }
    }
    log_prob_.push_back(std::move(table));
    max_score_.push_back(ms);
  }
}

double EapScorer::Estimate(std::span<const int> scores) const {
  if (scores.size() != log_prob_.size()) {
    throw DataError("EAP: response vector length differs from bank size");
  }
  const std::size_t nq = nodes_.size();
  std::vector<double> log_post(log_prior_);
  int answered = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const int s = scores[i];
    if (s == kMissingScore) continue;
    if (s < 0 || s > max_score_[i]) {
      throw DataError("EAP: score out of range for item index " +
                      std::to_string(i));
    }
    ++answered;
    const double* row = log_prob_[i].data() + static_cast<std::size_t>(s) * nq;
    for (std::size_t q = 0; q < nq; ++q) log_post[q] += row[q];
  }
  if (answered == 0) throw DataError("EAP: no answered items");

  // Posterior weights are normalised in log space so the estimate survives
  // likelihoods far below the smallest double.
  double peak = -std::numeric_limits<double>::infinity();
  for (const double v : log_post) {
    if (std::isfinite(v)) peak = std::max(peak, v);
  }
  if (!std::isfinite(peak)) {
    throw NumericalError("EAP: likelihood vanished on every quadrature node");
  }
  double num = 0, den = 0;
  for (std::size_t q = 0; q < nq; ++q) {
    const double w = std::exp(log_post[q] - peak);
    num += nodes_[q] * w;
    den += w;
  }
  const double theta = num / den;
  if (!std::isfinite(theta) || !(den > 0)) {
    throw NumericalError("EAP: non-finite posterior mean");
  }
  return theta;
}

AbilityEstimate estimate_theta_eap(const std::string& examinee_id,
                                   std::span<const int> scores,
                                   const sim::ItemBank& bank,
                                   const QuadratureGrid& grid) {
  return {examinee_id, EapScorer(bank, grid).Estimate(scores)};
}

std::vector<AbilityEstimate> score_all(const sim::ResponseTable& responses,
                                       const sim::ItemBank& bank,
                                       const QuadratureGrid& grid) {
  if (responses.item_ids.size() != bank.items.size()) {
    throw DataError("score_all: response table and bank disagree on item count");
  }
  for (std::size_t i = 0; i < bank.items.size(); ++i) {
    if (responses.item_ids[i] != bank.items[i].item_id) {
      throw DataError("score_all: item order differs at column " +
                      responses.item_ids[i]);
    }
  }
  const EapScorer scorer(bank, grid);
  std::vector<AbilityEstimate> out;
  out.reserve(responses.examinees.size());
  for (std::size_t e = 0; e < responses.examinees.size(); ++e) {
    out.push_back({responses.examinees[e].examinee_id,
                   scorer.Estimate(responses.row(e))});
  }
  return out;
}

StrataBoundaries build_strata(std::span<const double> reference_theta_hat) {
  const std::size_t n = reference_theta_hat.size();
  if (n < static_cast<std::size_t>(kStrata)) {
    throw DataError("build_strata: need at least 10 reference examinees");
  }
  std::vector<double> sorted(reference_theta_hat.begin(),
                             reference_theta_hat.end());
  for (const double v : sorted) {
    if (!std::isfinite(v)) throw DataError("build_strata: non-finite theta_hat");
  }
  std::sort(sorted.begin(), sorted.end());
  StrataBoundaries b;
  for (int j = 1; j < kStrata; ++j) {
    const std::size_t rank = (j * n + kStrata - 1) / kStrata;  // ceil(j n / 10)
    b.cutpoints[j - 1] = sorted[rank - 1];
  }
  return b;
}

StrataBoundaries build_strata(std::span<const AbilityEstimate> reference) {
  std::vector<double> v;
  v.reserve(reference.size());
  for (const auto& r : reference) v.push_back(r.theta_hat);
  return build_strata(v);
}

int assign_stratum(double theta_hat, const StrataBoundaries& bounds) {
  int k = 1;
  for (const double c : bounds.cutpoints) {
    if (c < theta_hat) ++k;
  }
  return k;
}

}  // namespace diflens::scoring
