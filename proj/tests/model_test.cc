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

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>

#include "diflens/error.h"
#include "diflens/model.h"
#include "diflens/rng.h"
#include "gtest/gtest.h"

namespace diflens::model {
namespace {

using V = std::vector<std::string>;

TEST(TokenizeTest, Examples) {
  EXPECT_EQ(tokenize("Select the two sentences.[SEP]A[SEP]B").tokens(),
            (V{"select", "the", "two", "sentences", ".", "[SEP]", "a", "[SEP]", "b"}));
  EXPECT_EQ(tokenize("[UNK]").tokens(), V{"[UNK]"});
  EXPECT_EQ(tokenize("  What's 3+4?  ").tokens(), (V{"what", "'", "s", "3", "+", "4", "?"}));
  EXPECT_THROW(tokenize("   "), DataError);
  EXPECT_THROW(tokenize(""), DataError);
}

TEST(TokenizeTest, TruncatesTail) {
  std::string text;
  for (int i = 0; i < 600; ++i) text += "w" + std::to_string(i) + " ";
  const auto seq = tokenize(text);
  ASSERT_EQ(seq.size(), 512u);
  EXPECT_EQ(seq[0], "w0");
  EXPECT_EQ(seq[511], "w511");
  EXPECT_EQ(tokenize(text, 7).size(), 7u);
}

TEST(TokenSequenceTest, Masked) {
  const TokenSequence seq({"a", "b", "c"});
  EXPECT_EQ(seq.masked({true, false, true}).tokens(), (V{"a", "[UNK]", "c"}));
  EXPECT_THROW(seq.masked({true}), DataError);
  EXPECT_THROW(TokenSequence({}), DataError);
}

TEST(SoftmaxTest, Examples) {
  const std::vector<double> zero = {0, 0, 0};
  for (double p : softmax(zero)) EXPECT_NEAR(p, 1.0 / 3, 1e-15);
  const std::vector<double> l = {std::log(1.0), std::log(2.0), std::log(7.0)};
  const auto p = softmax(l);
  EXPECT_NEAR(p[0], 0.1, 1e-15);
  EXPECT_NEAR(p[1], 0.2, 1e-15);
  EXPECT_NEAR(p[2], 0.7, 1e-15);
  const std::vector<double> big = {1000, 1001, 999};
  for (double x : softmax(big)) EXPECT_TRUE(std::isfinite(x));
}

TEST(SoftmaxTest, PositiveNormalisedShiftInvariant) {
  Stream s = Stream::For(1, {"softmax"});
  for (int i = 0; i < 5000; ++i) {
    std::vector<double> l = {s.Normal(0, 5), s.Normal(0, 5), s.Normal(0, 5)};
    const auto p = softmax(l);
    const double c = s.Normal(0, 50);
    for (double& x : l) x += c;
    const auto q = softmax(l);
    double sum = 0;
    for (int g = 0; g < 3; ++g) {
      EXPECT_GT(p[g], 0.0);
      EXPECT_NEAR(p[g], q[g], 1e-12);
      sum += p[g];
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
}

TEST(LossTest, CrossEntropyExamples) {
  const std::vector<Triple> one = {{1, 0, 0}};
  EXPECT_EQ(cross_entropy(one, one), 0.0);
  const std::vector<Triple> p = {{0.2, 0.5, 0.3}};
  EXPECT_NEAR(cross_entropy(p, p), 1.0297, 1e-4);
  const std::vector<Triple> u = {{1.0 / 3, 1.0 / 3, 1.0 / 3}};
  EXPECT_NEAR(cross_entropy(one, u), std::log(3.0), 1e-15);
  const std::vector<Triple> zero = {{0, 0.5, 0.5}};
  EXPECT_NEAR(cross_entropy(one, zero), -std::log(kProbabilityClamp), 1e-9);
  const std::vector<Triple> two = {{1, 0, 0}, {0, 1, 0}};
  EXPECT_THROW(cross_entropy(one, two), DataError);
}

TEST(LossTest, Gibbs) {
  Stream s = Stream::For(2, {"gibbs"});
  auto draw = [&] {
    Triple t{s.UniformOpen(), s.UniformOpen(), s.UniformOpen()};
    const double z = t[0] + t[1] + t[2];
    for (double& x : t) x /= z;
    return t;
  };
  for (int i = 0; i < 5000; ++i) {
    const std::vector<Triple> p = {draw()}, q = {draw()};
    double h = 0;
    for (double x : p[0]) h -= x * std::log(x);
    EXPECT_NEAR(cross_entropy(p, p), h, 1e-12);
    EXPECT_GE(cross_entropy(p, q), cross_entropy(p, p) - 1e-12);
  }
}

TEST(LossTest, MseExamples) {
  const std::vector<double> y = {0, 0}, yhat = {1, -1};
  EXPECT_EQ(mse(y, y), 0.0);
  EXPECT_EQ(mse(y, yhat), 1.0);
  const std::vector<double> a = {0.3, -1.2, 2.0}, b = {0.1, -1.0, 1.5};
  std::vector<double> b3;
  for (std::size_t i = 0; i < a.size(); ++i) b3.push_back(a[i] + 3 * (b[i] - a[i]));
  EXPECT_NEAR(mse(a, b3), 9 * mse(a, b), 1e-12);
  EXPECT_THROW(mse(a, y), DataError);
}

TEST(VocabularyTest, BuildAndLookup) {
  const std::vector<V> docs = {{"b", "a"}, {"c", "a"}};
  const auto v = Vocabulary::Build(docs);
  EXPECT_EQ(v.tokens(), (V{"[UNK]", "a", "b", "c"}));
  EXPECT_EQ(v.index("b"), 2);
  EXPECT_EQ(v.index("zzz"), 0);
  EXPECT_EQ(v.index("[UNK]"), 0);
  EXPECT_EQ(Vocabulary().size(), 1u);
}

EmbeddingClassifier RandomModel(Mode mode, std::uint64_t seed, double scale) {
  std::vector<V> docs = {{"a", "b", "c", "d", "e", "f"}};
  EmbeddingClassifier m(mode, Vocabulary::Build(docs), 5, 4);
  m.initialize(seed, scale);
  return m;
}

std::vector<Example> RandomBatch(Stream& s, const EmbeddingClassifier& m) {
  std::vector<Example> batch(1 + s.Below(6));
  for (auto& ex : batch) {
    const int len = 1 + static_cast<int>(s.Below(8));
    for (int i = 0; i < len; ++i) ex.ids.push_back(static_cast<int>(s.Below(m.vocabulary()->size())));
    Triple t{s.UniformOpen(), s.UniformOpen(), s.UniformOpen()};
    const double z = t[0] + t[1] + t[2];
    for (double& x : t) x /= z;
    ex.target = t;
    ex.y = s.Normal(0, 1.5);
  }
  return batch;
}

TEST(GradientTest, MatchesCentralDifferences) {
  Stream s = Stream::For(3, {"grad"});
  for (Mode mode : {Mode::kCategorical, Mode::kContinuous}) {
    for (int rep = 0; rep < 10; ++rep) {
      auto m = RandomModel(mode, 100 + rep, 0.5);
      const auto batch = RandomBatch(s, m);
      std::vector<double> grad(m.parameters().size(), 0.0);
      m.loss_and_gradient(batch, &grad);
      double num = 0, den = 0;
      for (std::size_t p = 0; p < grad.size(); ++p) {
        const double orig = m.parameters()[p];
        m.parameters()[p] = orig + 1e-5;
        const double up = m.loss_and_gradient(batch, nullptr);
        m.parameters()[p] = orig - 1e-5;
        const double down = m.loss_and_gradient(batch, nullptr);
        m.parameters()[p] = orig;
        const double fd = (up - down) / 2e-5;
        num += (fd - grad[p]) * (fd - grad[p]);
        den += fd * fd + grad[p] * grad[p];
      }
      EXPECT_LT(std::sqrt(num / den), 1e-4) << targets::to_string(mode) << " " << rep;
    }
  }
}

TEST(ClassifierTest, ForwardIsMeanPooled) {
  auto m = RandomModel(Mode::kCategorical, 4, 0.3);
  const std::vector<int> a = {1, 2, 3}, b = {3, 1, 2}, c = {1, 1, 2, 2, 3, 3};
  EXPECT_EQ(m.forward(a), m.forward(b));
  const auto x = m.forward(a), y = m.forward(c);
  for (int g = 0; g < 3; ++g) EXPECT_NEAR(x[g], y[g], 1e-14);
  EXPECT_EQ(m.predict(TokenSequence({"zzz"})), m.predict(TokenSequence({"[UNK]"})));
}

targets::ModelDataset QuotientDataset(int n, std::uint64_t seed) {
  const V pool = {"solve", "sum", "read", "text", "the", "of", "value", "graph", "word", "story"};
  Stream s = Stream::For(seed, {"quotient-data"});
  targets::ModelDataset ds;
  for (int i = 0; i < n; ++i) {
    targets::DatasetRecord r;
    r.item_id = "I" + std::to_string(i);
    r.split = i % 10 < 6 ? targets::Split::kTrain
              : i % 10 < 8 ? targets::Split::kValidation
                           : targets::Split::kTest;
    const int len = 5 + static_cast<int>(s.Below(6));
    for (int t = 0; t < len; ++t) r.tokens.push_back(pool[s.Below(pool.size())]);
    const bool marked = i % 3 == 0;
    if (marked) r.tokens[s.Below(r.tokens.size())] = "quotient";
    r.target.p = marked ? Triple{0, 0, 1} : Triple{0, 1, 0};
    r.y = marked ? 2.0 : 0.0;
    ds.records.push_back(r);
  }
  return ds;
}

Hyperparameters SmallHp() {
  Hyperparameters hp;
  hp.embedding_dim = 16;
  hp.hidden = 16;
  hp.learning_rate = 1.0;
  hp.epochs = 30;
  return hp;
}

TEST(TrainTest, DeterministicPerSeed) {
  const auto ds = QuotientDataset(120, 1);
  const auto hp = SmallHp();
  const auto a = train(ds, hp, 7), b = train(ds, hp, 7), c = train(ds, hp, 8);
  EXPECT_EQ(a.model, b.model);
  EXPECT_EQ(a.validation_loss, b.validation_loss);
  EXPECT_NE(a.model.parameters(), c.model.parameters());
  EXPECT_EQ(a.model.epoch, a.selected_epoch);
  const auto best = std::min_element(a.validation_loss.begin(), a.validation_loss.end());
  EXPECT_EQ(a.selected_epoch, 1 + (best - a.validation_loss.begin()));
}

TEST(TrainTest, SeparableSignal) {
  const auto ds = QuotientDataset(300, 2);
  const auto r = train(ds, SmallHp(), 1);
  int checked = 0;
  for (const auto* rec : ds.in_split(targets::Split::kTest)) {
    const auto p = model_output(r.model, TokenSequence(rec->tokens));
    const bool marked = std::find(rec->tokens.begin(), rec->tokens.end(), "quotient") != rec->tokens.end();
    if (marked) {
      EXPECT_GT(p[2], 0.9) << rec->item_id;
      ++checked;
    } else {
      EXPECT_LT(p[2], 0.1) << rec->item_id;
    }
  }
  EXPECT_GT(checked, 5);
}

TEST(TrainTest, ConstantTargetsBound) {
  auto ds = QuotientDataset(120, 3);
  const Triple t = {0.1, 0.7, 0.2};
  for (auto& r : ds.records) r.target.p = t;
  const auto res = train(ds, SmallHp(), 1);
  double h = 0;
  for (double x : t) h -= x * std::log(x);
  EXPECT_LE(*std::min_element(res.validation_loss.begin(), res.validation_loss.end()), h + 1e-3);
}

TEST(TrainTest, ContinuousLearnsMarker) {
  auto ds = QuotientDataset(300, 4);
  ds.mode = Mode::kContinuous;
  auto hp = SmallHp();
  hp.learning_rate = 0.2;
  hp.epochs = 100;
  const auto r = train(ds, hp, 1);
  std::vector<double> marked, plain;
  for (const auto* rec : ds.in_split(targets::Split::kTest)) {
    const double v = model_output(r.model, TokenSequence(rec->tokens))[0];
    (rec->y > 0 ? marked : plain).push_back(v);
  }
  ASSERT_FALSE(marked.empty());
  const double lo = *std::min_element(marked.begin(), marked.end());
  const double hi = *std::max_element(plain.begin(), plain.end());
  EXPECT_GT(lo, hi);
}

TEST(TrainTest, Errors) {
  auto ds = QuotientDataset(20, 5);
  for (auto& r : ds.records) r.split = targets::Split::kTrain;
  EXPECT_THROW(train(ds, SmallHp(), 1), DataError);
  auto hp = SmallHp();
  hp.batch_size = 0;
  EXPECT_THROW(train(QuotientDataset(20, 5), hp, 1), ConfigError);
}

TEST(TrainTest, DivergenceReportsEpoch) {
  auto ds = QuotientDataset(60, 6);
  ds.mode = Mode::kContinuous;
  for (auto& r : ds.records) r.y = 1e200;
  try {
    train(ds, SmallHp(), 1);
    FAIL();
  } catch (const DivergenceError& e) {
    EXPECT_EQ(e.epoch(), 1);
  }
}

TEST(EnsembleTest, MeanAndConvexity) {
  auto fixed = [](Triple t) {
    return std::make_shared<FunctionModel>(Mode::kCategorical, [t](const TokenSequence&) {
      return std::vector<double>{std::log(t[0] + 1e-300), std::log(t[1] + 1e-300), std::log(t[2] + 1e-300)};
    });
  };
  const Ensemble e({fixed({1, 0, 0}), fixed({0, 1, 0})});
  const auto p = ensemble_predict(e, TokenSequence({"x"}));
  EXPECT_NEAR(p[0], 0.5, 1e-12);
  EXPECT_NEAR(p[1], 0.5, 1e-12);
  EXPECT_NEAR(p[2], 0.0, 1e-12);

  const auto m1 = std::make_shared<EmbeddingClassifier>(RandomModel(Mode::kCategorical, 1, 0.8));
  const auto m2 = std::make_shared<EmbeddingClassifier>(RandomModel(Mode::kCategorical, 2, 0.8));
  const Ensemble single({m1});
  const Ensemble pair({m1, m2});
  Stream s = Stream::For(5, {"convex"});
  const V words = {"a", "b", "c", "d", "e", "f", "zz"};
  for (int i = 0; i < 200; ++i) {
    V toks;
    for (int t = 0; t < 4; ++t) toks.push_back(words[s.Below(words.size())]);
    const TokenSequence seq(toks);
    const auto solo = ensemble_predict(single, seq), direct = model_output(*m1, seq);
    for (int g = 0; g < 3; ++g) EXPECT_NEAR(solo[g], direct[g], 1e-15);
    const auto a = model_output(*m1, seq), b = model_output(*m2, seq);
    const auto avg = ensemble_predict(pair, seq);
    double sum = 0;
    for (int g = 0; g < 3; ++g) {
      EXPECT_GE(avg[g], std::min(a[g], b[g]) - 1e-15);
      EXPECT_LE(avg[g], std::max(a[g], b[g]) + 1e-15);
      sum += avg[g];
    }
    EXPECT_NEAR(sum, 1.0, 1e-9);
  }
}

TEST(EnsembleTest, ModeMismatch) {
  const auto cat = std::make_shared<EmbeddingClassifier>(RandomModel(Mode::kCategorical, 1, 0.1));
  const auto con = std::make_shared<EmbeddingClassifier>(RandomModel(Mode::kContinuous, 1, 0.1));
  EXPECT_THROW(Ensemble({cat, con}), DataError);
  EXPECT_THROW(Ensemble({}), DataError);
}

TEST(SerializationTest, RoundTrip) {
  auto m = RandomModel(Mode::kContinuous, 9, 0.4);
  m.seed = 9;
  m.epoch = 4;
  const auto path = (std::filesystem::temp_directory_path() / "diflens_model_test.json").string();
  save_model(m, path);
  const auto back = load_model(path);
  EXPECT_EQ(back, m);
  const TokenSequence seq({"a", "f", "q"});
  EXPECT_EQ(back.predict(seq), m.predict(seq));
  std::remove(path.c_str());
  EXPECT_THROW(load_model(path), DataError);
}

}  // namespace
}  // namespace diflens::model
