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

#include <fstream>
#include <string>

#include "diflens/error.h"
#include "diflens/io.h"
#include "diflens/scoring.h"
#include "diflens/sim.h"
#include "diflens/xai.h"
#include "gtest/gtest.h"
#include "test_util.h"

namespace diflens::io {
namespace {

sim::ItemBank SmallBank() {
  sim::BankConfig c = sim::BankConfig::Default();
  c.n_dichotomous = 12;
  c.n_polytomous = 4;
  c.marker_fraction = 0.3;
  c.testlet_fraction = 0.5;
  c.pairs = {"gender", "ell"};
  c.shift_sd = 0.2;
  return sim::generate_item_bank(c, 5);
}

TEST(IoTest, BankRoundTrip) {
  testing::ScratchDir dir;
  const auto bank = SmallBank();
  save_bank(bank, dir.file("bank.jsonl"));
  EXPECT_EQ(load_bank(dir.file("bank.jsonl")), bank);
}

TEST(IoTest, ResponsesAndThetaRoundTrip) {
  testing::ScratchDir dir;
  const auto bank = SmallBank();
  sim::PopulationConfig pop;
  pop.n_focal = 30;
  pop.n_reference = 40;
  const auto table = sim::simulate_responses(bank, pop, {"gender", "female", "male"}, 3);
  save_responses(table, dir.file("r.tsv"));
  EXPECT_EQ(load_responses(dir.file("r.tsv")), table);

  const auto est = scoring::score_all(table, bank);
  save_theta(est, dir.file("t.tsv"));
  const auto back = load_theta(dir.file("t.tsv"));
  ASSERT_EQ(back.size(), est.size());
  for (std::size_t i = 0; i < est.size(); ++i) {
    EXPECT_EQ(back[i].examinee_id, est[i].examinee_id);
    EXPECT_EQ(back[i].theta_hat, est[i].theta_hat);
  }
}

TEST(IoTest, DifRoundTrip) {
  testing::ScratchDir dir;
  std::vector<DifRecord> recs = {
      {"I1", "gender", {-1.234567890123, 0.3, dif::Scale::kMhDelta, 900, 1100, dif::Classification::kB, dif::Direction::kFavorsReference}},
      {"I2", "gender", {0.02, 0.01, dif::Scale::kEsRescaled, 5, 6, dif::Classification::kA, dif::Direction::kNone}},
  };
  save_dif(recs, dir.file("d.jsonl"));
  const auto back = load_dif(dir.file("d.jsonl"));
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back[i].item_id, recs[i].item_id);
    EXPECT_EQ(back[i].pair, recs[i].pair);
    EXPECT_EQ(back[i].result.statistic, recs[i].result.statistic);
    EXPECT_EQ(back[i].result.se, recs[i].result.se);
    EXPECT_EQ(back[i].result.scale, recs[i].result.scale);
    EXPECT_EQ(back[i].result.n_focal, recs[i].result.n_focal);
    EXPECT_EQ(back[i].result.n_reference, recs[i].result.n_reference);
    EXPECT_EQ(back[i].result.classification, recs[i].result.classification);
    EXPECT_EQ(back[i].result.direction, recs[i].result.direction);
  }
}

TEST(IoTest, DatasetRoundTrip) {
  testing::ScratchDir dir;
  for (auto mode : {targets::Mode::kCategorical, targets::Mode::kContinuous}) {
    targets::ModelDataset ds;
    ds.mode = mode;
    for (int i = 0; i < 3; ++i) {
      targets::DatasetRecord r;
      r.item_id = "I" + std::to_string(i);
      r.split = static_cast<targets::Split>(i);
      r.tokens = {"a", "[SEP]", "b" + std::to_string(i)};
      r.y = 0.1 * i - 0.05;
      r.se = 0.3;
      r.target = targets::soft_probabilities(r.y, r.se);
      ds.records.push_back(r);
    }
    save_dataset(ds, dir.file("ds.jsonl"));
    const auto back = load_dataset(dir.file("ds.jsonl"));
    EXPECT_EQ(back.mode, mode);
    ASSERT_EQ(back.records.size(), 3u);
    for (int i = 0; i < 3; ++i) {
      EXPECT_EQ(back.records[i].item_id, ds.records[i].item_id);
      EXPECT_EQ(back.records[i].split, ds.records[i].split);
      EXPECT_EQ(back.records[i].tokens, ds.records[i].tokens);
      EXPECT_EQ(back.records[i].y, ds.records[i].y);
      EXPECT_EQ(back.records[i].se, ds.records[i].se);
      if (mode == targets::Mode::kCategorical) {
        EXPECT_EQ(back.records[i].target.p, ds.records[i].target.p);
      }
    }
  }
}

TEST(IoTest, AttributionsRoundTrip) {
  testing::ScratchDir dir;
  xai::AttributionSet cat;
  cat.item_id = "I1";
  cat.tokens = {"x", "y"};
  cat.phi = {{0.1, -0.2}, {0.0, 0.05}, {1e-17, 0.3}};
  cat.base = {0.2, 0.5, 0.3};
  cat.output = {0.3, 0.35, 0.61};
  cat.folded = xai::fold_all(cat);
  save_attributions({cat}, dir.file("a.jsonl"));
  const auto back = load_attributions(dir.file("a.jsonl"));
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].phi, cat.phi);
  EXPECT_EQ(back[0].folded, cat.folded);
  EXPECT_EQ(back[0].base, cat.base);
  EXPECT_EQ(back[0].output, cat.output);
  EXPECT_EQ(back[0].tokens, cat.tokens);

  xai::AttributionSet cont = cat;
  cont.phi = {{0.4, -0.1}};
  cont.base = {0.0};
  cont.output = {0.3};
  cont.folded = xai::fold_all(cont);
  save_attributions({cont}, dir.file("c.jsonl"));
  const auto cb = load_attributions(dir.file("c.jsonl"));
  EXPECT_EQ(cb[0].phi, cont.phi);
  EXPECT_EQ(cb[0].folded, cont.folded);
}

TEST(IoTest, HeaderChecked) {
  testing::ScratchDir dir;
  write_text(dir.file("bad.jsonl"), "{\"format\":\"diflens.dif\",\"version\":1}\n");
  EXPECT_THROW(load_bank(dir.file("bad.jsonl")), DataError);
  write_text(dir.file("v2.jsonl"), "{\"format\":\"diflens.dif\",\"version\":2}\n");
  EXPECT_THROW(load_dif(dir.file("v2.jsonl")), DataError);
  write_text(dir.file("junk.tsv"), "hello\n");
  EXPECT_THROW(load_theta(dir.file("junk.tsv")), DataError);
  EXPECT_THROW(load_dif(dir.file("missing.jsonl")), DataError);
}

TEST(IoTest, Sha256KnownVectors) {
  EXPECT_EQ(sha256_string(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(sha256_string("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  testing::ScratchDir dir;
  write_text(dir.file("abc.txt"), "abc");
  EXPECT_EQ(sha256_file(dir.file("abc.txt")), sha256_string("abc"));
  EXPECT_EQ(read_text(dir.file("abc.txt")), "abc");
}

}  // namespace
}  // namespace diflens::io
