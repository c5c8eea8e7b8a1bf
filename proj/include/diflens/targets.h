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

#ifndef DIFLENS_TARGETS_H_
#define DIFLENS_TARGETS_H_

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "diflens/difstats.h"
#include "diflens/sim.h"

namespace diflens::targets {

// (P_1 favors reference, P_2 no DIF, P_3 favors focal).
struct SoftTarget {
  std::array<double, 3> p{0.0, 1.0, 0.0};
};

struct Cutoffs {
  double low = -1.0;
  double high = 1.0;
};

// Class probabilities of N(y, se^2) falling below low, between, and above
// high. se == 0 returns the indicator of y's band, with y <= low and
// y >= high counting as the outer classes.
SoftTarget soft_probabilities(double y, double se, const Cutoffs& cutoffs = {});

enum class Split { kTrain, kValidation, kTest };
std::string to_string(Split s);
Split split_from_string(const std::string& s);

struct SplitFractions {
  double train = 0.8;
  double validation = 0.1;
  double test = 0.1;
};

struct ItemRef {
  std::string item_id;
  std::optional<std::string> testlet_id;
};

struct DatasetSplit {
  std::map<std::string, Split> assignment;
};

// Testlets (and singleton items) are shuffled by seed, stably ordered by
// descending size, then each goes to the bucket with the largest remaining
// deficit against its target count (ties: train, validation, test).
DatasetSplit build_split(std::span<const ItemRef> items,
                         const SplitFractions& fractions, std::uint64_t seed);

enum class Mode { kCategorical, kContinuous };
std::string to_string(Mode m);
Mode mode_from_string(const std::string& s);

struct DatasetRecord {
  std::string item_id;
  Split split = Split::kTrain;
  std::vector<std::string> tokens;
  SoftTarget target;  // categorical mode
  double y = 0.0;     // the DIF statistic; the target in continuous mode
  double se = 0.0;
};

struct ModelDataset {
  Mode mode = Mode::kCategorical;
  std::vector<DatasetRecord> records;

  std::vector<const DatasetRecord*> in_split(Split s) const;
};

struct AssembleOptions {
  Cutoffs cutoffs;
  std::int64_t min_n = 100;
};

// Items without a DIF result, or with fewer than min_n examinees in either
// group, are left out. Every result must be on the mh_delta or es_rescaled
// scale.
ModelDataset assemble(const sim::ItemBank& bank,
                      const std::map<std::string, dif::DifResult>& dif_results,
                      const DatasetSplit& split, Mode mode,
                      const AssembleOptions& options = {});

}  // namespace diflens::targets

#endif  // DIFLENS_TARGETS_H_
