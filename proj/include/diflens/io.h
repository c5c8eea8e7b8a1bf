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

// Artifact files. Line-delimited files start with a header record
// {"format": "diflens.<kind>", "version": 1, ...}; tab-separated files start
// with a "#format=diflens.<kind>/1" line. Reals are written with enough
// digits to round-trip exactly.

#ifndef DIFLENS_IO_H_
#define DIFLENS_IO_H_

#include <map>
#include <string>
#include <vector>

#include "diflens/difstats.h"
#include "diflens/scoring.h"
#include "diflens/sim.h"
#include "diflens/targets.h"
#include "diflens/xai.h"

namespace diflens::io {

inline constexpr int kFormatVersion = 1;

void save_bank(const sim::ItemBank& bank, const std::string& path);
sim::ItemBank load_bank(const std::string& path);

// Columns: examinee_id, group, theta, then one score column per item.
void save_responses(const sim::ResponseTable& table, const std::string& path);
sim::ResponseTable load_responses(const std::string& path);

void save_theta(const std::vector<scoring::AbilityEstimate>& est,
                const std::string& path);
std::vector<scoring::AbilityEstimate> load_theta(const std::string& path);

struct DifRecord {
  std::string item_id;
  std::string pair;
  dif::DifResult result;
};
void save_dif(const std::vector<DifRecord>& records, const std::string& path);
std::vector<DifRecord> load_dif(const std::string& path);

void save_dataset(const targets::ModelDataset& data, const std::string& path);
targets::ModelDataset load_dataset(const std::string& path);

void save_attributions(const std::vector<xai::AttributionSet>& sets,
                       const std::string& path);
std::vector<xai::AttributionSet> load_attributions(const std::string& path);

// Lowercase hex SHA-256 of a file's bytes.
std::string sha256_file(const std::string& path);
std::string sha256_string(const std::string& bytes);

void write_text(const std::string& path, const std::string& text);
std::string read_text(const std::string& path);

}  // namespace diflens::io

#endif  // DIFLENS_IO_H_
