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

// diflens command-line driver. Exit codes: 0 success, 2 configuration error,
// 3 data error, 4 numerical error.

#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "diflens/error.h"
#include "diflens/io.h"
#include "diflens/pipeline.h"

namespace {

using diflens::pipeline::PipelineConfig;
using diflens::targets::Mode;

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;

struct Args {
  std::string config;
  std::vector<std::string> pairs;
  std::string mode;
  bool resume = false;
  bool quiet = false;
};

std::vector<std::string> Pairs(const PipelineConfig& c, const Args& a) {
  if (!a.pairs.empty()) {
    for (const auto& p : a.pairs) c.pair(p);
    return a.pairs;
  }
  std::vector<std::string> out;
  for (const auto& p : c.pairs) out.push_back(p.pair.name);
  return out;
}

Mode ModeFor(const PipelineConfig& c, const Args& a) {
  if (a.mode.empty()) return c.mode;
  try {
    return diflens::targets::mode_from_string(a.mode);
  } catch (const diflens::Error&) {
    throw diflens::ConfigError("--mode must be categorical or continuous");
  }
}

int Run(const std::string& command, const Args& a) {
  namespace pl = diflens::pipeline;
  const PipelineConfig c = pl::load_config(a.config);
  pl::RunOptions o;
  o.resume = a.resume;
  o.log = a.quiet ? nullptr : &std::cerr;
  const Mode mode = ModeFor(c, a);

  if (command == "pipeline") {
    PipelineConfig run = c;
    run.mode = mode;
    for (const auto& [pair, report] : pl::run_pipeline(run, o).reports) {
      std::cout << diflens::io::read_text(pl::model_paths(run, pair, mode).eval_text) << "\n";
    }
    return 0;
  }
  if (command == "simulate") {
    pl::stage_simulate(c, a.pairs, o);
    return 0;
  }
  for (const auto& pair : Pairs(c, a)) {
    if (command == "score") {
      pl::stage_score(c, pair, o);
    } else if (command == "dif") {
      pl::stage_dif(c, pair, o);
    } else if (command == "targets") {
      pl::stage_targets(c, pair, mode, o);
    } else if (command == "train") {
      pl::stage_train(c, pair, mode, o);
    } else if (command == "explain") {
      pl::stage_explain(c, pair, mode, o);
    } else if (command == "evaluate") {
      pl::stage_evaluate(c, pair, mode, o);
      std::cout << diflens::io::read_text(pl::model_paths(c, pair, mode).eval_text) << "\n";
    } else if (command == "report") {
      pl::stage_report(c, pair, mode, o);
    } else if (command == "compare") {
      std::cout << pl::compare_modes(c, pair, o).table << "\n";
    }
  }
  if (command == "manifest") pl::write_manifest(c);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"diflens: DIF detection and token attribution for item text"};
  app.require_subcommand(1);
  app.set_version_flag("--version", diflens::pipeline::kVersion);
  Args args;
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"simulate", "Generate the item bank and response tables"},
      {"score", "EAP ability estimates"},
      {"dif", "DIF statistics per item"},
      {"targets", "Soft targets and the train/validation/test split"},
      {"train", "Train one model per seed"},
      {"explain", "Partition attributions for the test split"},
      {"evaluate", "Evaluation tables for the test split"},
      {"report", "HTML highlight report"},
      {"pipeline", "Run every stage and write the manifest"},
      {"compare", "Categorical vs continuous attribution comparison"},
      {"manifest", "Rewrite the artifact manifest"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", args.config, "JSON configuration file")->required();
    sub->add_option("--pair", args.pairs, "Group pair name (repeatable; default all)");
    sub->add_option("--mode", args.mode, "categorical or continuous (default from config)");
    sub->add_flag("--resume", args.resume, "Keep artifacts that already exist");
    sub->add_flag("--quiet", args.quiet, "No progress messages");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }
  const std::string command = app.get_subcommands().front()->get_name();
  try {
    return Run(command, args);
  } catch (const diflens::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const diflens::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const diflens::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
