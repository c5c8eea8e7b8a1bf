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

#include "diflens/eval.h"

#include <Eigen/Dense>
#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>

#include "diflens/error.h"
#include "diflens/numeric.h"

namespace diflens::eval {
namespace {

double Logit(double p) {
  p = std::clamp(p, kLogitClamp, 1.0 - kLogitClamp);
  return std::log(p) - std::log1p(-p);
}

double FitRSquared(const Eigen::MatrixXd& x, std::span<const double> y) {
  const auto n = static_cast<Eigen::Index>(y.size());
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = y[i];
  const double mean = v.mean();
  const double ss_tot = (v.array() - mean).square().sum();
  if (ss_tot == 0.0) return 0.0;
  const Eigen::VectorXd beta = x.completeOrthogonalDecomposition().solve(v);
  const double ss_res = (v - x * beta).squaredNorm();
  return std::clamp(1.0 - ss_res / ss_tot, 0.0, 1.0);
}

const std::map<std::string, double>::const_iterator FindY(
    const std::map<std::string, double>& y, const std::string& id) {
  auto it = y.find(id);
  if (it == y.end()) throw DataError("no DIF value for item '" + id + "'");
  return it;
}

}  // namespace

double r_squared_categorical(std::span<const Triple> predictions,
                             std::span<const double> y) {
  if (predictions.size() != y.size()) {
    throw DataError("r_squared_categorical: length mismatch");
  }
  constexpr Eigen::Index kCols = 8;
  if (y.size() < kCols + 1) {
    throw DataError("r_squared_categorical: need at least 9 items, got " +
                    std::to_string(y.size()));
  }
  Eigen::MatrixXd x(static_cast<Eigen::Index>(y.size()), kCols);
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double l1 = Logit(predictions[i][0]);
    const double l2 = Logit(predictions[i][1]);
    const double l3 = Logit(predictions[i][2]);
    x.row(static_cast<Eigen::Index>(i)) << 1.0, l1, l2, l3, l1 * l2, l1 * l3,
        l2 * l3, l1 * l2 * l3;
  }
  return FitRSquared(x, y);
}

double r_squared_continuous(std::span<const double> yhat,
                            std::span<const double> y) {
  if (yhat.size() != y.size()) {
    throw DataError("r_squared_continuous: length mismatch");
  }
  if (y.size() < 3) throw DataError("r_squared_continuous: need at least 3 items");
  Eigen::MatrixXd x(static_cast<Eigen::Index>(y.size()), 2);
  for (std::size_t i = 0; i < y.size(); ++i) {
    x.row(static_cast<Eigen::Index>(i)) << 1.0, yhat[i];
  }
  return FitRSquared(x, y);
}

std::vector<double> pooled_folded(std::span<const xai::AttributionSet> attrs) {
  std::vector<double> out;
  for (const auto& a : attrs) out.insert(out.end(), a.folded.begin(), a.folded.end());
  return out;
}

std::vector<const xai::AttributionSet*> bias_items(
    std::span<const xai::AttributionSet> attrs,
    const std::map<std::string, double>& y, std::size_t n_items) {
  if (attrs.size() < n_items || n_items == 0) {
    throw DataError("attribution_bias: need " + std::to_string(n_items) +
                    " items, got " + std::to_string(attrs.size()));
  }
  std::vector<std::pair<double, const xai::AttributionSet*>> keyed;
  keyed.reserve(attrs.size());
  for (const auto& a : attrs) {
    keyed.emplace_back(std::abs(FindY(y, a.item_id)->second), &a);
  }
  std::sort(keyed.begin(), keyed.end(), [](const auto& l, const auto& r) {
    if (l.first != r.first) return l.first < r.first;
    return l.second->item_id < r.second->item_id;
  });
  std::vector<const xai::AttributionSet*> out;
  for (std::size_t i = 0; i < n_items; ++i) out.push_back(keyed[i].second);
  return out;
}

double attribution_bias(std::span<const xai::AttributionSet> attrs,
                        const std::map<std::string, double>& y,
                        std::size_t n_items) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto* a : bias_items(attrs, y, n_items)) {
    for (const double v : a->folded) sum += v;
    n += a->folded.size();
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

double attribution_kurtosis(std::span<const double> values) {
  if (values.size() < 4) throw DataError("attribution_kurtosis: need 4 values");
  const double m = Mean(values);
  double m2 = 0.0, m4 = 0.0;
  for (const double v : values) {
    const double d = (v - m) * (v - m);
    m2 += d;
    m4 += d * d;
  }
  const double n = static_cast<double>(values.size());
  m2 /= n;
  m4 /= n;
  if (m2 == 0.0) throw NumericalError("attribution_kurtosis: zero variance");
  return m4 / (m2 * m2);
}

double attribution_y_correlation(std::span<const xai::AttributionSet> attrs,
                                 const std::map<std::string, double>& y) {
  std::vector<double> phi, yy;
  for (const auto& a : attrs) {
    const double v = FindY(y, a.item_id)->second;
    for (const double f : a.folded) {
      phi.push_back(f);
      yy.push_back(v);
    }
  }
  return Pearson(phi, yy);
}

double spearman_brown(double r, int m) {
  if (m < 1) throw DomainError("spearman_brown: m must be at least 1");
  if (!(r <= 1.0) || (m > 1 && r <= -1.0 / (m - 1)) || r <= -1.0) {
    throw DomainError("spearman_brown: r = " + std::to_string(r) +
                      " is outside the formula's domain");
  }
  return m * r / (1.0 + (m - 1) * r);
}

std::string to_string(Direction d) {
  return d == Direction::kFavorsReference ? "favors_reference" : "favors_focal";
}

ReplacementStats replacement_test(const xai::OutputFn& model,
                                  std::span<const xai::AttributionSet> attrs,
                                  Direction direction, Comparator comparator) {
  ReplacementStats out;
  const bool ref = direction == Direction::kFavorsReference;
  for (const auto& a : attrs) {
    std::size_t best = a.folded.size();
    for (std::size_t t = 0; t < a.folded.size(); ++t) {
      const double v = a.folded[t];
      const bool eligible = ref ? v < 0.0 : v > 0.0;
      if (!eligible) continue;
      if (best == a.folded.size() || (ref ? v < a.folded[best] : v > a.folded[best])) {
        best = t;
      }
    }
    if (best == a.folded.size()) {
      ++out.n_skipped;
      continue;
    }
    const std::size_t g = a.n_classes() == 3 ? (ref ? 0 : 2) : 0;
    std::vector<bool> present(a.tokens.size(), true);
    present[best] = false;
    const model::TokenSequence full(a.tokens, a.tokens.size());
    const double before = model(full)[g];
    const double after = model(full.masked(present))[g];
    out.delta.push_back(before - after);
    out.phi.push_back(comparator == Comparator::kFolded ? a.folded[best]
                                                        : a.phi[g][best]);
  }
  if (out.delta.empty()) {
    throw DataError("replacement_test: no item has a token " + to_string(direction));
  }
  out.n_used = out.delta.size();
  double se = 0.0, bias = 0.0;
  for (std::size_t i = 0; i < out.n_used; ++i) {
    const double d = out.delta[i] - out.phi[i];
    se += d * d;
    bias += d;
  }
  const double n = static_cast<double>(out.n_used);
  out.rmse = std::sqrt(se / n);
  out.bias = bias / n;
  out.r = Pearson(out.delta, out.phi);
  return out;
}

std::vector<TokenScore> top_tokens(std::span<const xai::AttributionSet> attrs,
                                   Direction direction,
                                   const TopTokenOptions& options) {
  const bool ref = direction == Direction::kFavorsReference;
  std::map<std::string, std::pair<double, std::size_t>> acc;
  for (const auto& a : attrs) {
    for (std::size_t t = 0; t < a.tokens.size(); ++t) {
      const double v = a.folded[t];
      if (ref ? !(v <= -options.threshold) : !(v >= options.threshold)) continue;
      const std::string& raw = a.tokens[t];
      if (raw.empty()) continue;
      std::string tok;
      bool alpha = true;
      for (const char c : raw) {
        const auto u = static_cast<unsigned char>(c);
        if (!std::isalpha(u)) {
          alpha = false;
          break;
        }
        tok.push_back(static_cast<char>(std::tolower(u)));
      }
      if (!alpha) continue;
      auto& slot = acc[tok];
      slot.first += v;
      ++slot.second;
    }
  }
  std::vector<TokenScore> out;
  for (const auto& [tok, s] : acc) {
    if (s.second < options.min_count) continue;
    out.push_back({tok, s.first / static_cast<double>(s.second), s.second});
  }
  std::sort(out.begin(), out.end(), [ref](const TokenScore& l, const TokenScore& r) {
    if (l.mean != r.mean) return ref ? l.mean < r.mean : l.mean > r.mean;
    return l.token < r.token;
  });
  if (out.size() > options.k) out.resize(options.k);
  return out;
}

namespace {

ClassSummary Summarize(std::span<const Triple> pred, std::span<const Triple> tgt,
                       std::size_t g) {
  std::vector<double> p, t;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    p.push_back(pred[i][g]);
    t.push_back(tgt[i][g]);
  }
  ClassSummary s;
  s.mean = Mean(p);
  s.sd = SampleSd(p);
  s.r = Pearson(p, t);
  double se = 0.0, bias = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    se += (p[i] - t[i]) * (p[i] - t[i]);
    bias += p[i] - t[i];
  }
  s.rmse = std::sqrt(se / static_cast<double>(p.size()));
  s.bias = bias / static_cast<double>(p.size());
  return s;
}

}  // namespace

PredictionSummary prediction_summary(std::span<const Triple> predictions,
                                     std::span<const Triple> targets) {
  if (predictions.size() != targets.size()) {
    throw DataError("prediction_summary: length mismatch");
  }
  if (predictions.empty()) throw DataError("prediction_summary: no items");
  return {Summarize(predictions, targets, 0), Summarize(predictions, targets, 2)};
}

AttributionStats attribution_stats(std::span<const xai::AttributionSet> attrs,
                                   const std::map<std::string, double>& y,
                                   std::size_t n_bias_items) {
  AttributionStats s;
  const std::vector<double> all = pooled_folded(attrs);
  s.n_tokens = all.size();
  s.mean = Mean(all);
  s.sd = SampleSd(all);
  s.kurtosis = attribution_kurtosis(all);
  s.r_phi_y = attribution_y_correlation(attrs, y);
  std::vector<double> pooled;
  for (const auto* a : bias_items(attrs, y, n_bias_items)) {
    pooled.insert(pooled.end(), a->folded.begin(), a->folded.end());
  }
  s.n_bias_items = n_bias_items;
  s.bias = Mean(pooled);
  s.bias_se = pooled.size() < 2
                  ? 0.0
                  : SampleSd(pooled) / std::sqrt(static_cast<double>(pooled.size()));
  return s;
}

EvalReport evaluate(Mode mode, std::span<const targets::DatasetRecord> test,
                    std::span<const xai::AttributionSet> averaged,
                    const std::vector<std::vector<xai::AttributionSet>>& per_seed,
                    const xai::OutputFn& model, const EvalOptions& options) {
  if (averaged.size() != test.size()) {
    throw DataError("evaluate: attributions do not match the test items");
  }
  for (std::size_t i = 0; i < test.size(); ++i) {
    if (averaged[i].item_id != test[i].item_id) {
      throw DataError("evaluate: attribution order differs at item '" +
                      test[i].item_id + "'");
    }
  }
  EvalReport rep;
  rep.mode = mode;
  rep.n_items = test.size();
  std::map<std::string, double> y;
  std::vector<double> ys;
  for (const auto& r : test) {
    y[r.item_id] = r.y;
    ys.push_back(r.y);
  }
  if (mode == Mode::kCategorical) {
    std::vector<Triple> pred, tgt;
    for (std::size_t i = 0; i < test.size(); ++i) {
      const auto& o = averaged[i].output;
      if (o.size() != 3) throw DataError("evaluate: expected three class outputs");
      pred.push_back({o[0], o[1], o[2]});
      tgt.push_back(test[i].target.p);
    }
    rep.r_squared = r_squared_categorical(pred, ys);
    rep.loss = model::cross_entropy(tgt, pred);
    rep.predictions = prediction_summary(pred, tgt);
  } else {
    std::vector<double> yhat;
    for (const auto& a : averaged) yhat.push_back(a.output.at(0));
    rep.r_squared = r_squared_continuous(yhat, ys);
    rep.loss = model::mse(ys, yhat);
  }

  const std::size_t n_bias = std::min(options.bias_items, test.size());
  rep.attributions = attribution_stats(averaged, y, n_bias);
  for (const auto& seed : per_seed) {
    rep.per_seed.push_back(attribution_stats(seed, y, n_bias));
  }
  if (per_seed.size() >= 2) {
    double sum = 0.0;
    int pairs = 0;
    for (std::size_t a = 0; a < per_seed.size(); ++a) {
      for (std::size_t b = a + 1; b < per_seed.size(); ++b) {
        sum += Pearson(pooled_folded(per_seed[a]), pooled_folded(per_seed[b]));
        ++pairs;
      }
    }
    rep.seed_r = sum / pairs;
    const int m = static_cast<int>(per_seed.size());
    if (*rep.seed_r > -1.0 / (m - 1)) rep.reliability = spearman_brown(*rep.seed_r, m);
  }

  try {
    rep.replace_reference = replacement_test(model, averaged, Direction::kFavorsReference,
                                             options.replacement_comparator);
  } catch (const DataError&) {
  }
  try {
    rep.replace_focal = replacement_test(model, averaged, Direction::kFavorsFocal,
                                         options.replacement_comparator);
  } catch (const DataError&) {
  }
  rep.top_reference = top_tokens(averaged, Direction::kFavorsReference, options.top);
  rep.top_focal = top_tokens(averaged, Direction::kFavorsFocal, options.top);
  return rep;
}

}  // namespace diflens::eval
