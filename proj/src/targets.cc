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

#include "diflens/targets.h"

#include <algorithm>
#include <cmath>

#include "diflens/error.h"
#include "diflens/numeric.h"
#include "diflens/rng.h"

namespace diflens::targets {

SoftTarget soft_probabilities(double y, double se, const Cutoffs& cutoffs) {
  if (!std::isfinite(y) || !std::isfinite(se)) {
    throw DataError("soft_probabilities: non-finite input");
  }
  if (se < 0) throw DomainError("soft_probabilities: negative se");
  if (!(cutoffs.low < cutoffs.high)) {
    throw ConfigError("soft_probabilities: cutoffs must satisfy low < high");
  }
  SoftTarget t;
  if (se == 0) {
    if (y <= cutoffs.low) {
      t.p = {1.0, 0.0, 0.0};
    } else if (y >= cutoffs.high) {
      t.p = {0.0, 0.0, 1.0};
    } else {
      t.p = {0.0, 1.0, 0.0};
    }
    return t;
  }
  const double p1 = NormalCdf((cutoffs.low - y) / se);
  const double p3 = NormalCdf((y - cutoffs.high) / se);
  t.p = {p1, std::max(0.0, 1.0 - p1 - p3), p3};
  return t;
}

std::string to_string(Split s) {
  switch (s) {
    case Split::kTrain:
      return "train";
    case Split::kValidation:
      return "validation";
    case Split::kTest:
      return "test";
  }
  return "?";
}

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "validation") return Split::kValidation;
  if (s == "test") return Split::kTest;
  throw DataError("unknown split: " + s);
}

std::string to_string(Mode m) {
  return m == Mode::kCategorical ? "categorical" : "continuous";
}

Mode mode_from_string(const std::string& s) {
  if (s == "categorical") return Mode::kCategorical;
  if (s == "continuous") return Mode::kContinuous;
  throw ConfigError("unknown mode: " + s);
}

DatasetSplit build_split(std::span<const ItemRef> items,
                         const SplitFractions& fractions, std::uint64_t seed) {
  if (items.empty()) throw DataError("build_split: empty item list");
  const double sum = fractions.train + fractions.validation + fractions.test;
  if (std::abs(sum - 1.0) > 1e-9 || fractions.train < 0 ||
      fractions.validation < 0 || fractions.test < 0) {
    throw ConfigError("build_split: fractions must be nonnegative and sum to 1");
  }

  // Group by testlet; the group key sorts deterministically regardless of the
  // input order.
  std::map<std::string, std::vector<std::string>> groups;
  for (const auto& item : items) {
    const std::string key =
        item.testlet_id ? "t:" + *item.testlet_id : "i:" + item.item_id;
    groups[key].push_back(item.item_id);
  }
  std::vector<std::vector<std::string>> units;
  units.reserve(groups.size());
  for (auto& [key, ids] : groups) units.push_back(std::move(ids));
  Stream::For(seed, {"split"}).Shuffle(units);
  std::stable_sort(units.begin(), units.end(),
                   [](const auto& a, const auto& b) { return a.size() > b.size(); });

  const double n = static_cast<double>(items.size());
  const std::array<double, 3> target = {fractions.train * n,
                                        fractions.validation * n,
                                        fractions.test * n};
  std::array<double, 3> filled = {0, 0, 0};
  DatasetSplit out;
  for (const auto& unit : units) {
    int best = 0;
    for (int b = 1; b < 3; ++b) {
      if (target[b] - filled[b] > target[best] - filled[best]) best = b;
    }
    filled[best] += static_cast<double>(unit.size());
    for (const auto& id : unit) out.assignment[id] = static_cast<Split>(best);
  }
  return out;
}

std::vector<const DatasetRecord*> ModelDataset::in_split(Split s) const {
  std::vector<const DatasetRecord*> out;
  for (const auto& r : records) {
    if (r.split == s) out.push_back(&r);
  }
  return out;
}

ModelDataset assemble(const sim::ItemBank& bank,
                      const std::map<std::string, dif::DifResult>& dif_results,
                      const DatasetSplit& split, Mode mode,
                      const AssembleOptions& options) {
  ModelDataset ds;
  ds.mode = mode;
  for (const auto& item : bank.items) {
    const auto it = dif_results.find(item.item_id);
    if (it == dif_results.end()) continue;
    const dif::DifResult& r = it->second;
    if (r.scale == dif::Scale::kEsRaw) {
      throw DataError("assemble: item " + item.item_id +
                      " has an es_raw result; rescale it first");
    }
    if (r.n_focal < options.min_n || r.n_reference < options.min_n) continue;
    const auto sp = split.assignment.find(item.item_id);
    if (sp == split.assignment.end()) {
      throw DataError("assemble: item " + item.item_id + " has no split");
    }
    DatasetRecord rec;
    rec.item_id = item.item_id;
    rec.split = sp->second;
    rec.tokens = item.tokens;
    rec.y = r.statistic;
    rec.se = r.se;
    rec.target = soft_probabilities(r.statistic, r.se, options.cutoffs);
    ds.records.push_back(std::move(rec));
  }
  return ds;
}

}  // namespace diflens::targets
