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

#include "diflens/difstats.h"

#include <cmath>
#include <limits>

#include "diflens/error.h"

namespace diflens::dif {

StratifiedCounts::StratifiedCounts(std::vector<double> score_values,
                                   int n_strata)
    : score_values_(std::move(score_values)), n_strata_(n_strata) {
  if (score_values_.size() < 2) {
    throw DataError("StratifiedCounts: need at least two score values");
  }
  for (std::size_t s = 1; s < score_values_.size(); ++s) {
    if (!(score_values_[s] > score_values_[s - 1])) {
      throw DataError("StratifiedCounts: score values must increase strictly");
    }
  }
  if (n_strata_ < 1) throw DataError("StratifiedCounts: need >= 1 stratum");
  cells_.assign(2 * score_values_.size() * n_strata_, 0);
}

std::size_t StratifiedCounts::Index(Group g, int s, int k) const {
  return (static_cast<std::size_t>(g) * score_values_.size() + s) * n_strata_ +
         k;
}

void StratifiedCounts::add(Group g, int s, int k, std::int64_t count) {
  if (s < 0 || s >= n_scores() || k < 0 || k >= n_strata_) {
    throw DataError("StratifiedCounts: cell index out of range");
  }
  if (count < 0) throw DataError("StratifiedCounts: negative count");
  cells_[Index(g, s, k)] += count;
}

std::int64_t StratifiedCounts::group_stratum_total(Group g, int k) const {
  std::int64_t t = 0;
  for (int s = 0; s < n_scores(); ++s) t += n(g, s, k);
  return t;
}

std::int64_t StratifiedCounts::stratum_total(int k) const {
  return group_stratum_total(Group::kReference, k) +
         group_stratum_total(Group::kFocal, k);
}

std::int64_t StratifiedCounts::score_stratum_total(int s, int k) const {
  return n(Group::kReference, s, k) + n(Group::kFocal, s, k);
}

std::int64_t StratifiedCounts::group_total(Group g) const {
  std::int64_t t = 0;
  for (int k = 0; k < n_strata_; ++k) t += group_stratum_total(g, k);
  return t;
}

std::int64_t StratifiedCounts::total() const {
  return group_total(Group::kReference) + group_total(Group::kFocal);
}

StratifiedCounts StratifiedCounts::swapped() const {
  StratifiedCounts out(score_values_, n_strata_);
  for (int s = 0; s < n_scores(); ++s) {
    for (int k = 0; k < n_strata_; ++k) {
      out.cells_[out.Index(Group::kReference, s, k)] = n(Group::kFocal, s, k);
      out.cells_[out.Index(Group::kFocal, s, k)] = n(Group::kReference, s, k);
    }
  }
  return out;
}

StratifiedCounts tabulate(const sim::ResponseTable& responses,
                          std::span<const double> theta_hat,
                          const scoring::StrataBoundaries& bounds,
                          const sim::GroupPair& pair, std::size_t item_index,
                          int max_score) {
  if (theta_hat.size() != responses.examinees.size()) {
    throw DataError("tabulate: theta_hat length differs from examinee count");
  }
  if (item_index >= responses.n_items()) {
    throw DataError("tabulate: item index out of range");
  }
  std::vector<double> values(max_score + 1);
  for (int s = 0; s <= max_score; ++s) values[s] = s;
  StratifiedCounts counts(std::move(values));
  for (std::size_t e = 0; e < responses.examinees.size(); ++e) {
    const auto& group = responses.examinees[e].group;
    Group g;
    if (group == pair.focal) {
      g = Group::kFocal;
    } else if (group == pair.reference) {
      g = Group::kReference;
    } else {
      continue;
    }
    const int score = responses.score(e, item_index);
    if (score == scoring::kMissingScore) continue;
    const int k = scoring::assign_stratum(theta_hat[e], bounds) - 1;
    counts.add(g, score, k);
  }
  return counts;
}

DifResult mh_d_dif(const StratifiedCounts& counts, const DifOptions& options,
                   MhDetail* detail) {
  if (counts.n_scores() != 2) {
    throw DomainError("mh_d_dif: dichotomous table required");
  }
  const double cc = options.continuity_correction ? 0.5 : 0.0;
  struct Cells {
    double a, b, c, d, n;  // n_R1, n_R0, n_F1, n_F0, n_++
  };
  std::vector<Cells> strata;
  for (int k = 0; k < counts.n_strata(); ++k) {
    if (counts.stratum_total(k) == 0) continue;
    Cells x{static_cast<double>(counts.n(Group::kReference, 1, k)) + cc,
            static_cast<double>(counts.n(Group::kReference, 0, k)) + cc,
            static_cast<double>(counts.n(Group::kFocal, 1, k)) + cc,
            static_cast<double>(counts.n(Group::kFocal, 0, k)) + cc, 0.0};
    x.n = x.a + x.b + x.c + x.d;
    strata.push_back(x);
  }
  double num = 0, den = 0;
  for (const auto& x : strata) {
    num += x.a * x.d / x.n;
    den += x.c * x.b / x.n;
  }
  if (num == 0 || den == 0) {
    const ZeroSide side = num == 0 && den == 0 ? ZeroSide::kBoth
                          : num == 0           ? ZeroSide::kNumerator
                                               : ZeroSide::kDenominator;
    throw UndefinedStatisticError(
        std::string("mh_d_dif: common odds ratio undefined, zero ") +
            (side == ZeroSide::kBoth          ? "numerator and denominator"
             : side == ZeroSide::kNumerator ? "numerator"
                                              : "denominator"),
        side);
  }
  const double alpha = num / den;

  double var = 0;
  if (options.mh_variance == MhVariance::kAsPrinted) {
    double sum_ad = 0, sum = 0;
    for (const auto& x : strata) {
      sum_ad += x.a * x.d;
      sum += (x.a * x.d + alpha * x.b * x.c) *
             (x.a + x.d + alpha * (x.b + x.c));
    }
    var = 2.0 * sum / (sum_ad * sum_ad);
  } else {
    double sum = 0;
    for (const auto& x : strata) {
      sum += (x.a * x.d + alpha * x.b * x.c) *
             (x.a + x.d + alpha * (x.b + x.c)) / (x.n * x.n);
    }
    var = sum / (2.0 * num * num);
  }

  DifResult r;
  // ln(num) - ln(den) keeps the group swap an exact sign flip.
  r.statistic = -kMhScale * (std::log(num) - std::log(den));
  r.se = kMhScale * std::sqrt(var);
  r.scale = Scale::kMhDelta;
  r.n_focal = counts.group_total(Group::kFocal);
  r.n_reference = counts.group_total(Group::kReference);
  std::tie(r.classification, r.direction) =
      classify(r.statistic, r.se, r.scale);
  if (detail) *detail = {alpha, var};
  return r;
}

DifResult es_smd(const StratifiedCounts& counts, const DifOptions& options,
                 SmdDetail* detail) {
  if (counts.n_scores() < 3) {
    throw DomainError("es_smd: polytomous table (>= 3 categories) required");
  }
  const auto& z = counts.score_values();
  const double nf_total = static_cast<double>(counts.group_total(Group::kFocal));
  const double nr_total =
      static_cast<double>(counts.group_total(Group::kReference));
  if (nf_total < 2 || nr_total < 2) {
    throw DataError("es_smd: need at least two examinees per group");
  }

  double weighted_focal = 0, weighted_reference = 0, var_smd = 0;
  for (int k = 0; k < counts.n_strata(); ++k) {
    const double nf = static_cast<double>(counts.group_stratum_total(Group::kFocal, k));
    const double nr =
        static_cast<double>(counts.group_stratum_total(Group::kReference, k));
    const double n = nf + nr;
    if (nf == 0 || nr == 0) continue;
    const double p = options.smd_weighting == SmdWeighting::kFocalTotal
                         ? nf / nf_total
                         : nf / n;
    double sum_f = 0, sum_r = 0, sum_z = 0, sum_z2 = 0;
    for (int s = 0; s < counts.n_scores(); ++s) {
      sum_f += z[s] * static_cast<double>(counts.n(Group::kFocal, s, k));
      sum_r += z[s] * static_cast<double>(counts.n(Group::kReference, s, k));
      const double m = static_cast<double>(counts.score_stratum_total(s, k));
      sum_z += z[s] * m;
      sum_z2 += z[s] * z[s] * m;
    }
    weighted_focal += p * (sum_f / nf);
    weighted_reference += p * (sum_r / nr);
    if (n > 1) {
      const double var_f =
          nr * nf / (n * n * (n - 1)) * (n * sum_z2 - sum_z * sum_z);
      const double inv = 1.0 / nf + 1.0 / nr;
      var_smd += p * p * inv * inv * var_f;
    }
  }
  const double smd = weighted_focal - weighted_reference;

  // Pooled SD from the group score variances over all strata.
  double mean_f = 0, mean_r = 0;
  for (int k = 0; k < counts.n_strata(); ++k) {
    for (int s = 0; s < counts.n_scores(); ++s) {
      mean_f += z[s] * static_cast<double>(counts.n(Group::kFocal, s, k));
      mean_r += z[s] * static_cast<double>(counts.n(Group::kReference, s, k));
    }
  }
  mean_f /= nf_total;
  mean_r /= nr_total;
  double ss_f = 0, ss_r = 0;
  for (int k = 0; k < counts.n_strata(); ++k) {
    for (int s = 0; s < counts.n_scores(); ++s) {
      ss_f += (z[s] - mean_f) * (z[s] - mean_f) *
              static_cast<double>(counts.n(Group::kFocal, s, k));
      ss_r += (z[s] - mean_r) * (z[s] - mean_r) *
              static_cast<double>(counts.n(Group::kReference, s, k));
    }
  }
  const double sigma = std::sqrt((ss_f + ss_r) / (nf_total + nr_total - 2));
  if (!(sigma > 0)) {
    throw UndefinedStatisticError("es_smd: pooled standard deviation is zero",
                                  ZeroSide::kDenominator);
  }
  const double se_smd = std::sqrt(var_smd);

  DifResult r;
  r.statistic = smd / sigma;
  r.se = se_smd / sigma;
  r.scale = Scale::kEsRaw;
  r.n_focal = static_cast<std::int64_t>(nf_total);
  r.n_reference = static_cast<std::int64_t>(nr_total);
  std::tie(r.classification, r.direction) =
      classify(r.statistic, r.se, r.scale);
  if (detail) *detail = {smd, se_smd, sigma};
  return r;
}

DifResult rescale_es(const DifResult& result) {
  if (result.scale != Scale::kEsRaw) {
    throw DataError("rescale_es: input must be on the es_raw scale");
  }
  DifResult r = result;
  r.statistic = result.statistic / kEsRescale;
  r.se = result.se / kEsRescale;
  r.scale = Scale::kEsRescaled;
  std::tie(r.classification, r.direction) =
      classify(r.statistic, r.se, r.scale);
  return r;
}

std::pair<Classification, Direction> classify(double statistic, double se,
                                              Scale scale) {
  const double mag = std::abs(statistic);
  // A zero SE makes any nonzero statistic certain.
  auto z = [se](double x) {
    if (se > 0) return x / se;
    return x > 0 ? std::numeric_limits<double>::infinity() : 0.0;
  };
  const bool sig_zero = z(mag) > kZTwoSided05;

  Classification c;
  if (scale == Scale::kMhDelta) {
    if (mag < 1.0 || !sig_zero) {
      c = Classification::kA;
    } else if (mag >= 1.5 && z(mag - 1.0) > kZOneSided05) {
      c = Classification::kC;
    } else {
      c = Classification::kB;
    }
  } else {
    const double unit = scale == Scale::kEsRaw ? 1.0 : 1.0 / kEsRescale;
    const double low = 0.17 * unit;
    const double high = 0.25 * unit;
    if (mag < low || !sig_zero) {
      c = Classification::kA;
    } else if (mag >= high) {
      c = Classification::kC;
    } else {
      c = Classification::kB;
    }
  }
  Direction d = Direction::kNone;
  if (c != Classification::kA) {
    d = statistic < 0 ? Direction::kFavorsReference : Direction::kFavorsFocal;
  }
  return {c, d};
}

DifResult item_dif(const StratifiedCounts& counts, sim::ItemKind kind,
                   const DifOptions& options) {
  if (kind == sim::ItemKind::kDichotomous) return mh_d_dif(counts, options);
  return rescale_es(es_smd(counts, options));
}

std::string to_string(Scale s) {
  switch (s) {
    case Scale::kMhDelta:
      return "mh_delta";
    case Scale::kEsRaw:
      return "es_raw";
    case Scale::kEsRescaled:
      return "es_rescaled";
  }
  return "?";
}

std::string to_string(Classification c) {
  switch (c) {
    case Classification::kA:
      return "A";
    case Classification::kB:
      return "B";
    case Classification::kC:
      return "C";
  }
  return "?";
}

std::string to_string(Direction d) {
  switch (d) {
    case Direction::kFavorsReference:
      return "favors_reference";
    case Direction::kNone:
      return "none";
    case Direction::kFavorsFocal:
      return "favors_focal";
  }
  return "?";
}

Scale scale_from_string(const std::string& s) {
  if (s == "mh_delta") return Scale::kMhDelta;
  if (s == "es_raw") return Scale::kEsRaw;
  if (s == "es_rescaled") return Scale::kEsRescaled;
  throw DataError("unknown DIF scale: " + s);
}

Classification classification_from_string(const std::string& s) {
  if (s == "A") return Classification::kA;
  if (s == "B") return Classification::kB;
  if (s == "C") return Classification::kC;
  throw DataError("unknown DIF classification: " + s);
}

Direction direction_from_string(const std::string& s) {
  if (s == "favors_reference") return Direction::kFavorsReference;
  if (s == "none") return Direction::kNone;
  if (s == "favors_focal") return Direction::kFavorsFocal;
  throw DataError("unknown DIF direction: " + s);
}

}  // namespace diflens::dif
