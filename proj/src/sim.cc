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

#include "diflens/sim.h"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "diflens/error.h"
#include "diflens/numeric.h"
#include "diflens/rng.h"

namespace diflens::sim {

namespace {

std::string MakeId(char prefix, int index, int total) {
  int width = 4;
  for (int t = total; t >= 10000; t /= 10) ++width;
  std::string digits = std::to_string(index);
  if (static_cast<int>(digits.size()) < width) {
    digits.insert(0, width - digits.size(), '0');
  }
  return prefix + digits;
}

void Validate(const BankConfig& c) {
  if (c.n_dichotomous < 0 || c.n_polytomous < 0 ||
      c.n_dichotomous + c.n_polytomous == 0) {
    throw ConfigError("bank config: item counts must be nonnegative and sum to at least 1");
  }
  if (c.n_polytomous > 0 && c.max_score < 1) {
    throw ConfigError("bank config: max_score must be >= 1 for polytomous items");
  }
  if (c.topic_pools.empty()) {
    throw ConfigError("bank config: empty token pool");
  }
  for (const auto& pool : c.topic_pools) {
    if (pool.empty()) throw ConfigError("bank config: empty token pool");
  }
  if (c.common_rate < 0 || c.common_rate > 1) {
    throw ConfigError("bank config: common_rate must lie in [0, 1]");
  }
  if (c.common_rate > 0 && c.common_pool.empty()) {
    throw ConfigError("bank config: empty token pool (common_pool)");
  }
  if (c.min_tokens < 1 || c.max_tokens < c.min_tokens) {
    throw ConfigError("bank config: need 1 <= min_tokens <= max_tokens");
  }
  if (!(c.a_min > 0) || c.a_max < c.a_min) {
    throw ConfigError("bank config: need 0 < a_min <= a_max");
  }
  if (c.b_sd < 0 || c.shift_sd < 0) {
    throw ConfigError("bank config: standard deviations must be nonnegative");
  }
  if (c.marker_fraction < 0 || c.marker_fraction > 1) {
    throw ConfigError("bank config: marker_fraction must lie in [0, 1]");
  }
  if (c.marker_fraction > 0) {
    if (c.markers_per_item < 1 ||
        static_cast<int>(c.marker_pool.size()) < c.markers_per_item) {
      throw ConfigError("bank config: marker_pool smaller than markers_per_item");
    }
    if (c.shift_values.empty()) {
      throw ConfigError("bank config: shift_values empty");
    }
  }
  if (c.testlet_fraction < 0 || c.testlet_fraction > 1 || c.testlet_min < 1 ||
      c.testlet_max < c.testlet_min) {
    throw ConfigError("bank config: invalid testlet settings");
  }
}

}  // namespace

double ItemSpec::shift_for(const std::string& pair) const {
  const auto it = dif_shift.find(pair);
  return it == dif_shift.end() ? 0.0 : it->second;
}

const ItemSpec& ItemBank::at(const std::string& item_id) const {
  for (const auto& item : items) {
    if (item.item_id == item_id) return item;
  }
  throw DataError("unknown item id: " + item_id);
}

BankConfig BankConfig::Default() {
  BankConfig c;
  c.topic_pools = {
      {"solve", "equation", "fraction", "number", "sum", "divide", "multiply",
       "rounded", "nearest", "value", "total", "graph", "table", "shade",
       "expression", "product", "difference", "estimate", "measure", "unit",
       "decimal", "angle", "area", "length", "minutes"},
      {"read", "passage", "author", "sentence", "paragraph", "detail", "word",
       "meaning", "select", "answer", "text", "evidence", "choose", "main",
       "idea", "character", "story", "support", "phrase", "underlined",
       "narrator", "reader", "summary", "claim", "source"},
  };
  c.common_pool = {"the", "a", "of", "to", "is", "what", "which", "for",
                   "and", "in", "that", "two", "each", "student", "best"};
  c.marker_pool = {"quotient"};
  return c;
}

bool item_is_marked(const BankConfig& config, std::uint64_t seed,
                    const std::string& item_id) {
  if (config.marker_fraction <= 0) return false;
  return Stream::For(seed, {"marker", item_id}).Uniform() <
         config.marker_fraction;
}

ItemBank generate_item_bank(const BankConfig& config, std::uint64_t seed) {
  Validate(config);
  const int n = config.n_dichotomous + config.n_polytomous;

  std::vector<ItemKind> kinds(config.n_dichotomous, ItemKind::kDichotomous);
  kinds.insert(kinds.end(), config.n_polytomous, ItemKind::kPolytomous);
  Stream::For(seed, {"kinds"}).Shuffle(kinds);

  ItemBank bank;
  bank.pairs = config.pairs;
  bank.items.resize(n);

  // Testlets are runs of consecutive items sharing one topic pool.
  std::vector<int> topic(n, -1);
  int testlet_count = 0;
  for (int i = 0; i < n;) {
    const std::string id = MakeId('I', i + 1, n);
    Stream ts = Stream::For(seed, {"testlet", id});
    int size = 1;
    if (ts.Uniform() < config.testlet_fraction) {
      size = std::min(ts.Between(config.testlet_min, config.testlet_max), n - i);
    }
    if (size > 1) {
      const std::string tid = MakeId('T', ++testlet_count, n);
      const int t = static_cast<int>(ts.Below(config.topic_pools.size()));
      for (int j = i; j < i + size; ++j) {
        bank.items[j].testlet_id = tid;
        topic[j] = t;
      }
    }
    i += size;
  }

  for (int i = 0; i < n; ++i) {
    ItemSpec& item = bank.items[i];
    item.item_id = MakeId('I', i + 1, n);
    item.kind = kinds[i];
    Stream s = Stream::For(seed, {"item", item.item_id});
    item.a = config.a_min + (config.a_max - config.a_min) * s.Uniform();
    if (item.kind == ItemKind::kDichotomous) {
      item.b = s.Normal(config.b_mean, config.b_sd);
    } else {
      item.b = 0.0;
      item.thresholds.resize(config.max_score);
      for (double& t : item.thresholds) t = s.Normal(config.b_mean, config.b_sd);
      std::sort(item.thresholds.begin(), item.thresholds.end());
    }

    const int t = topic[i] >= 0
                      ? topic[i]
                      : static_cast<int>(s.Below(config.topic_pools.size()));
    const auto& pool = config.topic_pools[t];
    const int count = s.Between(config.min_tokens, config.max_tokens);
    for (int k = 0; k < count; ++k) {
      if (config.common_rate > 0 && s.Uniform() < config.common_rate) {
        item.tokens.push_back(
            config.common_pool[s.Below(config.common_pool.size())]);
      } else {
        item.tokens.push_back(pool[s.Below(pool.size())]);
      }
    }

    for (const auto& pair : config.pairs) item.dif_shift[pair] = 0.0;

    if (item_is_marked(config, seed, item.item_id)) {
      Stream ms = Stream::For(seed, {"marker-content", item.item_id});
      std::vector<std::string> markers = config.marker_pool;
      ms.Shuffle(markers);
      markers.resize(config.markers_per_item);
      for (const auto& m : markers) {
        const auto pos = ms.Below(item.tokens.size() + 1);
        item.tokens.insert(item.tokens.begin() + static_cast<long>(pos), m);
      }
      item.marker_tokens = markers;
      for (const auto& pair : config.pairs) {
        double shift = config.shift_values[ms.Below(config.shift_values.size())];
        if (config.shift_sd > 0) shift += config.shift_sd * ms.Normal();
        item.dif_shift[pair] = shift;
      }
    }
  }
  return bank;
}

double prob_correct_2pl(double a, double b_effective, double theta) {
  if (!(a > 0) || !std::isfinite(a)) {
    throw DomainError("prob_correct_2pl: discrimination must be positive");
  }
  return Logistic(a * (theta - b_effective));
}

std::vector<double> prob_categories_gpcm(double a,
                                         std::span<const double> thresholds,
                                         double b_effective_offset,
                                         double theta) {
  if (thresholds.empty()) {
    throw DomainError("prob_categories_gpcm: empty thresholds");
  }
  if (!(a > 0) || !std::isfinite(a)) {
    throw DomainError("prob_categories_gpcm: discrimination must be positive");
  }
  std::vector<double> z(thresholds.size() + 1, 0.0);
  for (std::size_t v = 0; v < thresholds.size(); ++v) {
    if (!std::isfinite(thresholds[v])) {
      throw DomainError("prob_categories_gpcm: non-finite threshold");
    }
    z[v + 1] = z[v] + a * (theta - thresholds[v] - b_effective_offset);
  }
  const double zmax = *std::max_element(z.begin(), z.end());
  double total = 0;
  for (double& v : z) {
    v = std::exp(v - zmax);
    total += v;
  }
  for (double& v : z) v /= total;
  return z;
}

ResponseTable simulate_responses(const ItemBank& bank,
                                 const PopulationConfig& pop,
                                 const GroupPair& pair, std::uint64_t seed) {
  if (std::find(bank.pairs.begin(), bank.pairs.end(), pair.name) ==
      bank.pairs.end()) {
    throw ConfigError("simulate_responses: unknown pair '" + pair.name + "'");
  }
  if (pair.focal == pair.reference) {
    throw ConfigError("simulate_responses: focal and reference labels coincide");
  }
  if (pop.n_focal < 0 || pop.n_reference < 0 || !(pop.focal_sd > 0) ||
      !(pop.reference_sd > 0)) {
    throw ConfigError("simulate_responses: invalid population config");
  }

  ResponseTable table;
  for (const auto& item : bank.items) table.item_ids.push_back(item.item_id);

  const int total = pop.n_focal + pop.n_reference;
  table.examinees.reserve(total);
  for (int e = 0; e < total; ++e) {
    Examinee ex;
    ex.examinee_id = MakeId('E', e + 1, std::max(total, 100000));
    const bool focal = e < pop.n_focal;
    ex.group = focal ? pair.focal : pair.reference;
    Stream s = Stream::For(seed, {"theta", pair.name, ex.examinee_id});
    ex.theta = focal ? s.Normal(pop.focal_mean, pop.focal_sd)
                     : s.Normal(pop.reference_mean, pop.reference_sd);
    table.examinees.push_back(std::move(ex));
  }

  const std::size_t n_items = bank.items.size();
  table.scores.assign(static_cast<std::size_t>(total) * n_items, 0);
  const std::uint64_t response_hash = HashLabel("response");
  const std::uint64_t pair_hash = HashLabel(pair.name);
  std::vector<std::uint64_t> examinee_hash(total);
  for (int e = 0; e < total; ++e) {
    examinee_hash[e] = HashLabel(table.examinees[e].examinee_id);
  }

  for (std::size_t i = 0; i < n_items; ++i) {
    const ItemSpec& item = bank.items[i];
    const std::uint64_t item_hash = HashLabel(item.item_id);
    const double shift = item.shift_for(pair.name);
    for (int e = 0; e < total; ++e) {
      const Examinee& ex = table.examinees[e];
      const double offset = e < pop.n_focal ? -shift : 0.0;
      const double u =
          Stream::ForHashes(seed, {response_hash, pair_hash, item_hash,
                                   examinee_hash[e]})
              .Uniform();
      int score = 0;
      if (item.kind == ItemKind::kDichotomous) {
        score = u < prob_correct_2pl(item.a, item.b + offset, ex.theta) ? 1 : 0;
      } else {
        const auto p =
            prob_categories_gpcm(item.a, item.thresholds, offset, ex.theta);
        double cum = 0;
        score = item.max_score();
        for (int s = 0; s < item.max_score(); ++s) {
          cum += p[s];
          if (u < cum) {
            score = s;
            break;
          }
        }
      }
      table.scores[static_cast<std::size_t>(e) * n_items + i] = score;
    }
  }
  return table;
}

}  // namespace diflens::sim
