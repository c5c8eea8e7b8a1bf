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

// Mantel-Haenszel D-DIF (dichotomous items) and the standardized mean
// difference effect size (polytomous items), with standard errors and the
// A/B/C strength classification.
//
// Conventions:
//  * MH strata with n_{++k} = 0 are skipped.
//  * SMD weights default to p_k = n_{F+k} / N_F. SmdWeighting::kLiteral uses
//    n_{F+k} / n_{++k} instead.
//  * A stratum that lacks either group contributes nothing to SMD or SE(SMD);
//    a stratum with n_{++k} <= 1 contributes nothing to SE(SMD).
//  * "Significantly different from zero" is |Y| / SE > 1.96; "significantly
//    greater than 1 in absolute value" is (|Y| - 1) / SE > 1.645.

#ifndef DIFLENS_DIFSTATS_H_
#define DIFLENS_DIFSTATS_H_

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "diflens/scoring.h"
#include "diflens/sim.h"

namespace diflens::dif {

enum class Group { kReference = 0, kFocal = 1 };

// n[G][s][k]: examinees of group G with score index s in stratum k
// (0-based stratum index here; strata are numbered 1..K elsewhere).
class StratifiedCounts {
 public:
  explicit StratifiedCounts(std::vector<double> score_values,
                            int n_strata = scoring::kStrata);

  int n_scores() const { return static_cast<int>(score_values_.size()); }
  int n_strata() const { return n_strata_; }
  const std::vector<double>& score_values() const { return score_values_; }

  std::int64_t n(Group g, int s, int k) const { return cells_[Index(g, s, k)]; }
  void add(Group g, int s, int k, std::int64_t count = 1);

  std::int64_t group_stratum_total(Group g, int k) const;  // n_{G+k}
  std::int64_t stratum_total(int k) const;                 // n_{++k}
  std::int64_t score_stratum_total(int s, int k) const;    // n_{+sk}
  std::int64_t group_total(Group g) const;                 // N_G
  std::int64_t total() const;

  // Same table with the reference and focal labels exchanged.
  StratifiedCounts swapped() const;

  bool operator==(const StratifiedCounts&) const = default;

 private:
  std::size_t Index(Group g, int s, int k) const;

  std::vector<double> score_values_;
  int n_strata_;
  std::vector<std::int64_t> cells_;
};

enum class Scale { kMhDelta, kEsRaw, kEsRescaled };
enum class Classification { kA, kB, kC };
enum class Direction { kFavorsReference, kNone, kFavorsFocal };

struct DifResult {
  double statistic = 0.0;
  double se = 0.0;
  Scale scale = Scale::kMhDelta;
  std::int64_t n_focal = 0;
  std::int64_t n_reference = 0;
  Classification classification = Classification::kA;
  Direction direction = Direction::kNone;
};

enum class MhVariance {
  kAsPrinted,  // 2 (sum A D)^-2 sum (AD + aBC)(A + D + a(B + C))
  kStandard,   // sum (AD + aBC)(A + D + a(B + C)) / n^2 / (2 (sum AD / n)^2)
};
enum class SmdWeighting { kFocalTotal, kLiteral };

struct DifOptions {
  MhVariance mh_variance = MhVariance::kAsPrinted;
  SmdWeighting smd_weighting = SmdWeighting::kFocalTotal;
  // Adds 0.5 to every cell of each occupied stratum before the MH sums.
  bool continuity_correction = false;
};

inline constexpr double kMhScale = 2.35;
inline constexpr double kEsRescale = 0.17;
inline constexpr double kZTwoSided05 = 1.959963984540054;
inline constexpr double kZOneSided05 = 1.6448536269514722;

StratifiedCounts tabulate(const sim::ResponseTable& responses,
                          std::span<const double> theta_hat,
                          const scoring::StrataBoundaries& bounds,
                          const sim::GroupPair& pair, std::size_t item_index,
                          int max_score);

struct MhDetail {
  double alpha = 0.0;
  double var_log_alpha = 0.0;
};

DifResult mh_d_dif(const StratifiedCounts& counts,
                   const DifOptions& options = {}, MhDetail* detail = nullptr);

struct SmdDetail {
  double smd = 0.0;
  double se_smd = 0.0;
  double sigma_pooled = 0.0;
};

DifResult es_smd(const StratifiedCounts& counts, const DifOptions& options = {},
                 SmdDetail* detail = nullptr);

DifResult rescale_es(const DifResult& result);

std::pair<Classification, Direction> classify(double statistic, double se,
                                              Scale scale);

// MH D-DIF for dichotomous items, rescaled ES for polytomous ones.
DifResult item_dif(const StratifiedCounts& counts, sim::ItemKind kind,
                   const DifOptions& options = {});

std::string to_string(Scale s);
std::string to_string(Classification c);
std::string to_string(Direction d);
Scale scale_from_string(const std::string& s);
Classification classification_from_string(const std::string& s);
Direction direction_from_string(const std::string& s);

}  // namespace diflens::dif

#endif  // DIFLENS_DIFSTATS_H_
