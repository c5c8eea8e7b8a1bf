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

#include <cstdlib>
#include <filesystem>
#include <map>
#include <string>

#include "diflens/error.h"
#include "diflens/io.h"
#include "diflens/pipeline.h"
#include "gtest/gtest.h"
#include "test_util.h"

namespace diflens::pipeline {
namespace {

namespace fs = std::filesystem;

std::string SmallConfig(const std::string& out, const std::string& extra_model = "") {
  return R"({
  "output_dir": ")" + out + R"(",
  "bank": {"seed": 4, "n_dichotomous": 90, "n_polytomous": 10,
           "marker_fraction": 0.2, "shift_values": [-0.6], "shift_sd": 0.0},
  "pairs": [{"name": "gender", "focal": "female", "reference": "male",
             "population": {"n_focal": 250, "n_reference": 250}}],
  "model": {"seeds": [1, 2], "embedding_dim": 8, "hidden": 8,
            "learning_rate": 1.0, "epochs": 4)" + extra_model + R"(},
  "eval": {"bias_items": 100}
})";
}

TEST(ConfigTest, DefaultsAndRoundTrip) {
  const auto c = parse_config(SmallConfig("out"));
  EXPECT_EQ(c.pairs.size(), 1u);
  EXPECT_EQ(c.pair("gender").pair.focal, "female");
  EXPECT_EQ(c.min_n, 100);
  EXPECT_EQ(c.hp.batch_size, 8);
  EXPECT_EQ(c.bank.n_dichotomous, 90);
  EXPECT_EQ(c.bank.pairs, std::vector<std::string>{"gender"});
  const auto again = parse_config(config_to_json(c));
  EXPECT_EQ(config_to_json(again), config_to_json(c));
  EXPECT_THROW(c.pair("ell"), ConfigError);
}

TEST(ConfigTest, ContinuousOverride) {
  const auto plain = parse_config(SmallConfig("out"));
  EXPECT_FALSE(plain.continuous_hp.has_value());
  EXPECT_EQ(plain.hyperparameters(targets::Mode::kContinuous).learning_rate, 1.0);
  const auto c = parse_config(SmallConfig("out", R"(, "continuous": {"learning_rate": 0.2, "epochs": 9})"));
  const auto& hp = c.hyperparameters(targets::Mode::kContinuous);
  EXPECT_EQ(hp.learning_rate, 0.2);
  EXPECT_EQ(hp.epochs, 9);
  EXPECT_EQ(hp.embedding_dim, 8);  // inherited
  EXPECT_EQ(c.hyperparameters(targets::Mode::kCategorical).learning_rate, 1.0);
  EXPECT_EQ(config_to_json(parse_config(config_to_json(c))), config_to_json(c));
  EXPECT_THROW(parse_config(SmallConfig("out", R"(, "continuous": {"mode": "categorical"})")), ConfigError);
}

TEST(ConfigTest, Rejections) {
  auto with = [](const std::string& from, const std::string& to) {
    std::string s = SmallConfig("out");
    s.replace(s.find(from), from.size(), to);
    return s;
  };
  EXPECT_THROW(parse_config(with(R"("eval": {)", R"("targets": {"fractions": [0.8, 0.1, 0.2]}, "eval": {)")),
               ConfigError);
  EXPECT_THROW(parse_config(with(R"("eval": {)", R"("bogus": 1, "eval": {)")), ConfigError);
  EXPECT_THROW(parse_config(with(R"("bias_items")", R"("bias_itemz")")), ConfigError);
  EXPECT_THROW(parse_config(with(R"("seeds": [1, 2])", R"("seeds": [])")), ConfigError);
  EXPECT_THROW(parse_config(with(R"("seeds": [1, 2])", R"("seeds": [1, 1])")), ConfigError);
  EXPECT_THROW(parse_config(with(R"("epochs": 4)", R"("epochs": "four")")), ConfigError);
  EXPECT_THROW(parse_config(with(R"("female")", R"("male")")), ConfigError);
  EXPECT_THROW(parse_config("{"), ConfigError);
  EXPECT_THROW(parse_config("{}"), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/diflens.json"), ConfigError);
}

std::map<std::string, std::string> Snapshot(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = io::read_text(e.path().string());
  }
  return out;
}

TEST(PipelineTest, EndToEndDeterministic) {
  testing::ScratchDir dir;
  const auto out = (dir.path() / "run").string();
  const auto c = parse_config(SmallConfig(out));
  const auto result = run_pipeline(c);
  ASSERT_EQ(result.reports.count("gender"), 1u);
  const auto mp = model_paths(c, "gender", targets::Mode::kCategorical);
  for (const auto& p : {bank_path(c), manifest_path(c), mp.dataset, mp.averaged, mp.eval_text,
                        mp.eval_records, mp.report, mp.model(1), mp.model(2),
                        mp.attributions(1), mp.attributions(2)}) {
    EXPECT_TRUE(fs::exists(p)) << p;
  }
  const auto manifest = io::read_text(manifest_path(c));
  EXPECT_NE(manifest.find(io::sha256_file(mp.report)), std::string::npos);

  const auto first = Snapshot(out);
  fs::remove_all(out);
  run_pipeline(c);
  EXPECT_EQ(Snapshot(out), first);

  // Resuming reuses everything and leaves the bytes unchanged.
  RunOptions resume;
  resume.resume = true;
  run_pipeline(c, resume);
  EXPECT_EQ(Snapshot(out), first);
}

TEST(PipelineTest, StageErrorsNameTheStage) {
  testing::ScratchDir dir;
  const auto c = parse_config(SmallConfig((dir.path() / "empty").string()));
  try {
    stage_score(c, "gender");
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("stage score"), std::string::npos) << e.what();
  }
}

int RunCli(const std::string& args) {
  const std::string cmd = std::string(DIFLENS_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(CliTest, ExitCodes) {
  testing::ScratchDir dir;
  const auto good = dir.file("good.json");
  io::write_text(good, SmallConfig(dir.file("out")));
  const auto bad = dir.file("bad.json");
  std::string text = SmallConfig(dir.file("out"));
  text.replace(text.find(R"("eval": {)"), 9, R"("targets": {"fractions": [0.8, 0.1, 0.2]}, "eval": {)");
  io::write_text(bad, text);

  EXPECT_EQ(RunCli("--version"), 0);
  EXPECT_EQ(RunCli("frobnicate --config " + good), 2);
  EXPECT_EQ(RunCli("simulate"), 2);
  EXPECT_EQ(RunCli("simulate --config " + bad), 2);
  EXPECT_EQ(RunCli("score --quiet --config " + good), 3);  // nothing simulated yet
  EXPECT_EQ(RunCli("simulate --quiet --config " + good + " --pair nobody"), 2);
  EXPECT_EQ(RunCli("simulate --quiet --config " + good), 0);
  EXPECT_EQ(RunCli("score --quiet --config " + good), 0);
  EXPECT_EQ(RunCli("dif --quiet --config " + good), 0);
  EXPECT_EQ(RunCli("targets --quiet --config " + good + " --mode ordinal"), 2);
  EXPECT_EQ(RunCli("targets --quiet --config " + good), 0);
  EXPECT_TRUE(fs::exists(dir.file("out/gender/categorical/dataset.jsonl")));
}

}  // namespace
}  // namespace diflens::pipeline
