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

// Synthetic item banks and IRT response simulation.
//
// Items carry 2PL (dichotomous) or GPCM (polytomous) parameters plus a bag of
// text tokens. A configurable fraction of items receives marker tokens, and
// only those items get a nonzero focal-group difficulty shift, which gives the
// downstream explainer a causal token -> DIF link to recover.

#ifndef DIFLENS_SIM_H_
#define DIFLENS_SIM_H_

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace diflens::sim {

enum class ItemKind { kDichotomous, kPolytomous };

// A focal/reference comparison. DIF shifts in the bank are keyed by name.
struct GroupPair {
  std::string name;
  std::string focal;
  std::string reference;
};

struct ItemSpec {
  std::string item_id;
  std::optional<std::string> testlet_id;
  ItemKind kind = ItemKind::kDichotomous;
  double a = 1.0;
  double b = 0.0;                  // dichotomous only
  std::vector<double> thresholds;  // polytomous only, one per score step
  std::vector<std::string> tokens;
  std::map<std::string, double> dif_shift;  // pair name -> focal shift
  std::vector<std::string> marker_tokens;

  int max_score() const {
    return kind == ItemKind::kDichotomous ? 1
                                          : static_cast<int>(thresholds.size());
  }
  double shift_for(const std::string& pair) const;

  bool operator==(const ItemSpec&) const = default;
};

struct ItemBank {
  std::vector<std::string> pairs;  // pair names every item has a shift for
  std::vector<ItemSpec> items;

  const ItemSpec& at(const std::string& item_id) const;
  bool operator==(const ItemBank&) const = default;
};

struct BankConfig {
  int n_dichotomous = 160;
  int n_polytomous = 40;
  int max_score = 3;

  double a_min = 0.8;
  double a_max = 2.0;
  double b_mean = 0.0;
  double b_sd = 1.0;

  // Every item draws its content tokens from one topic pool, mixed with the
  // common pool at rate common_rate.
  std::vector<std::vector<std::string>> topic_pools;
  std::vector<std::string> common_pool;
  double common_rate = 0.3;
  int min_tokens = 8;
  int max_tokens = 16;

  std::vector<std::string> marker_pool;
  double marker_fraction = 0.0;
  int markers_per_item = 1;
  // A marked item's shift for each pair is a uniform pick from shift_values
  // plus Normal(0, shift_sd) jitter.
  std::vector<double> shift_values = {-0.5, 0.5};
  double shift_sd = 0.0;
  std::vector<std::string> pairs;

  // Probability that an item starts a testlet of testlet_min..testlet_max
  // consecutive items sharing a topic.
  double testlet_fraction = 0.0;
  int testlet_min = 2;
  int testlet_max = 4;

  // Defaults with a math pool, a reading pool, a function-word pool, and the
  // single marker token "quotient".
  static BankConfig Default();
};

ItemBank generate_item_bank(const BankConfig& config, std::uint64_t seed);

// The per-item marker draw used by generate_item_bank.
bool item_is_marked(const BankConfig& config, std::uint64_t seed,
                    const std::string& item_id);

double prob_correct_2pl(double a, double b_effective, double theta);

std::vector<double> prob_categories_gpcm(double a,
                                         std::span<const double> thresholds,
                                         double b_effective_offset,
                                         double theta);

struct PopulationConfig {
  int n_focal = 1000;
  int n_reference = 1000;
  double focal_mean = 0.0;
  double focal_sd = 1.0;
  double reference_mean = 0.0;
  double reference_sd = 1.0;
};

struct Examinee {
  std::string examinee_id;
  std::string group;
  double theta = 0.0;

  bool operator==(const Examinee&) const = default;
};

// Row-major examinee x item score matrix.
struct ResponseTable {
  std::vector<std::string> item_ids;
  std::vector<Examinee> examinees;
  std::vector<int> scores;

  std::size_t n_items() const { return item_ids.size(); }
  std::span<const int> row(std::size_t examinee) const {
    return {scores.data() + examinee * n_items(), n_items()};
  }
  int score(std::size_t examinee, std::size_t item) const {
    return scores[examinee * n_items() + item];
  }
  bool operator==(const ResponseTable&) const = default;
};

ResponseTable simulate_responses(const ItemBank& bank,
                                 const PopulationConfig& pop,
                                 const GroupPair& pair, std::uint64_t seed);

}  // namespace diflens::sim

#endif  // DIFLENS_SIM_H_
