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

// Evaluation battery: re-regression R^2, attribution summaries, reliability,
// token replacement and top-token extraction.

#ifndef DIFLENS_EVAL_H_
#define DIFLENS_EVAL_H_

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "diflens/model.h"
#include "diflens/targets.h"
#include "diflens/xai.h"

namespace diflens::eval {

using model::Triple;
using targets::Mode;

inline constexpr double kLogitClamp = 1e-9;

// OLS of y on the logits of the three probabilities, their pairwise and
// triple products, and an intercept. Needs at least 9 rows.
double r_squared_categorical(std::span<const Triple> predictions,
                             std::span<const double> y);
// OLS of y on yhat with intercept. Needs at least 3 rows.
double r_squared_continuous(std::span<const double> yhat,
                            std::span<const double> y);

// Every folded value of every token, in input order.
std::vector<double> pooled_folded(std::span<const xai::AttributionSet> attrs);

// Items chosen for the bias statistic: the n_items with smallest |y|, ties by
// item id.
std::vector<const xai::AttributionSet*> bias_items(
    std::span<const xai::AttributionSet> attrs,
    const std::map<std::string, double>& y, std::size_t n_items);

double attribution_bias(std::span<const xai::AttributionSet> attrs,
                        const std::map<std::string, double>& y,
                        std::size_t n_items = 100);

// Raw kurtosis m4 / m2^2.
double attribution_kurtosis(std::span<const double> values);

// Pearson correlation over token occurrences, each paired with its item's y.
double attribution_y_correlation(std::span<const xai::AttributionSet> attrs,
                                 const std::map<std::string, double>& y);

double spearman_brown(double r, int m = 2);

enum class Direction { kFavorsReference, kFavorsFocal };
std::string to_string(Direction d);

// What the output change is compared against: the replaced token's
// attribution for the affected class, or its folded value.
enum class Comparator { kClassAttribution, kFolded };

struct ReplacementStats {
  double r = 0.0;
  double rmse = 0.0;
  double bias = 0.0;
  std::size_t n_used = 0;
  std::size_t n_skipped = 0;
  std::vector<double> delta;
  std::vector<double> phi;
};

ReplacementStats replacement_test(const xai::OutputFn& model,
                                  std::span<const xai::AttributionSet> attrs,
                                  Direction direction,
                                  Comparator comparator = Comparator::kClassAttribution);

struct TopTokenOptions {
  double threshold = 0.01;
  std::size_t min_count = 3;
  std::size_t k = 10;
};

struct TokenScore {
  std::string token;
  double mean = 0.0;
  std::size_t count = 0;
};

std::vector<TokenScore> top_tokens(std::span<const xai::AttributionSet> attrs,
                                   Direction direction,
                                   const TopTokenOptions& options = {});

struct ClassSummary {
  double mean = 0.0;
  double sd = 0.0;
  double r = 0.0;
  double rmse = 0.0;
  double bias = 0.0;
};

struct PredictionSummary {
  ClassSummary reference;  // class 1
  ClassSummary focal;      // class 3
};

PredictionSummary prediction_summary(std::span<const Triple> predictions,
                                     std::span<const Triple> targets);

struct AttributionStats {
  double mean = 0.0;
  double sd = 0.0;
  double kurtosis = 0.0;
  double bias = 0.0;
  double bias_se = 0.0;  // standard error of the pooled mean behind bias
  double r_phi_y = 0.0;
  std::size_t n_tokens = 0;
  std::size_t n_bias_items = 0;
};

AttributionStats attribution_stats(std::span<const xai::AttributionSet> attrs,
                                   const std::map<std::string, double>& y,
                                   std::size_t n_bias_items);

struct EvalOptions {
  std::size_t bias_items = 100;  // capped at the number of test items
  TopTokenOptions top;
  Comparator replacement_comparator = Comparator::kClassAttribution;
};

struct EvalReport {
  Mode mode = Mode::kCategorical;
  std::size_t n_items = 0;
  double r_squared = 0.0;
  double loss = 0.0;  // cross-entropy (categorical) or MSE (continuous)
  std::optional<PredictionSummary> predictions;
  AttributionStats attributions;  // averaged over seeds
  std::vector<AttributionStats> per_seed;
  std::optional<double> seed_r;       // mean pairwise r of folded values
  std::optional<double> reliability;  // Spearman-Brown of seed_r
  std::optional<ReplacementStats> replace_reference;
  std::optional<ReplacementStats> replace_focal;
  std::vector<TokenScore> top_reference;
  std::vector<TokenScore> top_focal;
};

// test and averaged are aligned by position. per_seed may be empty; otherwise
// each entry is aligned with test as well. Predictions are read from the
// averaged sets' output field.
EvalReport evaluate(Mode mode, std::span<const targets::DatasetRecord> test,
                    std::span<const xai::AttributionSet> averaged,
                    const std::vector<std::vector<xai::AttributionSet>>& per_seed,
                    const xai::OutputFn& model, const EvalOptions& options = {});

}  // namespace diflens::eval

#endif  // DIFLENS_EVAL_H_
