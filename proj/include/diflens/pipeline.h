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

// Configuration and stage orchestration: simulate -> score -> dif -> targets
// -> train -> explain -> evaluate -> report. Stages hand off through files
// under output_dir:
//
//   bank.jsonl
//   <pair>/responses.tsv, theta.tsv, dif.jsonl
//   <pair>/<mode>/dataset.jsonl, model_seed<S>.json,
//       attributions_seed<S>.jsonl, attributions.jsonl, eval.txt, eval.jsonl,
//       report.html
//   manifest.json

#ifndef DIFLENS_PIPELINE_H_
#define DIFLENS_PIPELINE_H_

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "diflens/difstats.h"
#include "diflens/eval.h"
#include "diflens/model.h"
#include "diflens/scoring.h"
#include "diflens/sim.h"
#include "diflens/targets.h"
#include "diflens/xai.h"

namespace diflens::pipeline {

inline constexpr const char* kVersion = "0.1.0";

struct PairConfig {
  sim::GroupPair pair;
  sim::PopulationConfig population;
};

struct PipelineConfig {
  std::string output_dir = "diflens_out";
  sim::BankConfig bank = sim::BankConfig::Default();
  std::uint64_t bank_seed = 1;
  std::vector<PairConfig> pairs;
  std::uint64_t response_seed = 2;
  scoring::QuadratureGrid grid;
  dif::DifOptions dif;
  std::int64_t min_n = 100;
  targets::Cutoffs cutoffs;
  targets::SplitFractions fractions;
  std::uint64_t split_seed = 3;
  targets::Mode mode = targets::Mode::kCategorical;
  std::vector<std::uint64_t> seeds = {1, 2};
  model::Hyperparameters hp;
  // Optional continuous-mode settings from the model.continuous section; keys
  // left out there inherit from hp.
  std::optional<model::Hyperparameters> continuous_hp;
  xai::ContextMode context = xai::ContextMode::kFixedPresent;
  eval::EvalOptions eval;

  const PairConfig& pair(const std::string& name) const;
  const model::Hyperparameters& hyperparameters(targets::Mode mode) const;
};

// Parses the JSON configuration; every key is optional except pairs. Unknown
// keys and invalid values raise ConfigError.
PipelineConfig parse_config(const std::string& json_text);
PipelineConfig load_config(const std::string& path);
void validate(const PipelineConfig& config);
// Every effective setting, defaults included, as canonical JSON.
std::string config_to_json(const PipelineConfig& config);

struct PairPaths {
  std::string dir;
  std::string responses;
  std::string theta;
  std::string dif;
};

struct ModelPaths {
  std::string dir;
  std::string dataset;
  std::string averaged;
  std::string eval_text;
  std::string eval_records;
  std::string report;
  std::string model(std::uint64_t seed) const;
  std::string attributions(std::uint64_t seed) const;
};

std::string bank_path(const PipelineConfig& config);
std::string manifest_path(const PipelineConfig& config);
PairPaths pair_paths(const PipelineConfig& config, const std::string& pair);
ModelPaths model_paths(const PipelineConfig& config, const std::string& pair,
                       targets::Mode mode);

struct RunOptions {
  bool resume = false;        // keep artifacts that already exist
  std::ostream* log = nullptr;
};

// An empty pair list means every configured pair.
void stage_simulate(const PipelineConfig& config, const std::vector<std::string>& pairs,
                    const RunOptions& options = {});
void stage_score(const PipelineConfig& config, const std::string& pair,
                 const RunOptions& options = {});
void stage_dif(const PipelineConfig& config, const std::string& pair,
               const RunOptions& options = {});
void stage_targets(const PipelineConfig& config, const std::string& pair,
                   targets::Mode mode, const RunOptions& options = {});
void stage_train(const PipelineConfig& config, const std::string& pair,
                 targets::Mode mode, const RunOptions& options = {});
void stage_explain(const PipelineConfig& config, const std::string& pair,
                   targets::Mode mode, const RunOptions& options = {});
eval::EvalReport stage_evaluate(const PipelineConfig& config, const std::string& pair,
                                targets::Mode mode, const RunOptions& options = {});
void stage_report(const PipelineConfig& config, const std::string& pair,
                  targets::Mode mode, const RunOptions& options = {});

// Hashes every artifact under output_dir into manifest.json.
void write_manifest(const PipelineConfig& config);

struct PipelineResult {
  std::map<std::string, eval::EvalReport> reports;  // by pair name
};

PipelineResult run_pipeline(const PipelineConfig& config, const RunOptions& options = {});

struct Comparison {
  eval::EvalReport categorical;
  eval::EvalReport continuous;
  std::string table;
};

// Runs both modes on one pair's data and tabulates their attribution
// statistics per seed and averaged; the table is also written to
// <pair>/compare.txt.
Comparison compare_modes(const PipelineConfig& config, const std::string& pair,
                         const RunOptions& options = {});

// The ensemble of trained models for a pair and mode, as an output function.
xai::OutputFn load_ensemble(const PipelineConfig& config, const std::string& pair,
                            targets::Mode mode);

}  // namespace diflens::pipeline

#endif  // DIFLENS_PIPELINE_H_
