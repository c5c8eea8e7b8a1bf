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

#include <cmath>
#include <string>

#include "diflens/error.h"
#include "diflens/model.h"
#include "diflens/rng.h"
#include "diflens/xai.h"
#include "gtest/gtest.h"
#include "oracles.h"

namespace diflens::xai {
namespace {

using model::TokenSequence;

TokenSequence Seq(std::size_t m) {
  std::vector<std::string> t;
  for (std::size_t i = 0; i < m; ++i) t.push_back("t" + std::to_string(i));
  return TokenSequence(t);
}

std::vector<bool> Present(const TokenSequence& seq) {
  std::vector<bool> p;
  for (const auto& t : seq.tokens()) p.push_back(t != model::kUnkToken);
  return p;
}

// Adapts a coalition value function to the masking interface.
OutputFn FromValue(const oracle::ValueFn& v) {
  return [v](const TokenSequence& seq) { return v(Present(seq)); };
}

// Random pairwise-interaction game with three outputs.
oracle::ValueFn RandomGame(Stream& s, int m) {
  std::vector<std::vector<double>> lin(3, std::vector<double>(m));
  std::vector<std::vector<std::vector<double>>> pair(3, std::vector<std::vector<double>>(m, std::vector<double>(m)));
  std::vector<double> c(3);
  for (int g = 0; g < 3; ++g) {
    c[g] = s.Normal();
    for (int i = 0; i < m; ++i) {
      lin[g][i] = s.Normal();
      for (int j = 0; j < m; ++j) pair[g][i][j] = s.Normal();
    }
  }
  return [=](const std::vector<bool>& p) {
    std::vector<double> out(3);
    for (int g = 0; g < 3; ++g) {
      double v = c[g];
      for (int i = 0; i < m; ++i) {
        if (!p[i]) continue;
        v += lin[g][i];
        for (int j = i + 1; j < m; ++j)
          if (p[j]) v += pair[g][i][j];
      }
      out[g] = std::tanh(v);
    }
    return out;
  };
}

TEST(TreeTest, Shapes) {
  const PartitionTree one(1);
  ASSERT_EQ(one.nodes().size(), 1u);
  EXPECT_TRUE(one.nodes()[0].leaf());

  const PartitionTree four(4);
  const auto& n = four.nodes();
  ASSERT_EQ(n.size(), 7u);
  EXPECT_EQ(n[n[0].left].begin, 0u);
  EXPECT_EQ(n[n[0].left].end, 2u);
  EXPECT_EQ(n[n[0].right].begin, 2u);
  EXPECT_EQ(n[n[0].right].end, 4u);

  const PartitionTree five(5);
  const auto& f = five.nodes();
  const auto& l = f[f[0].left];
  EXPECT_EQ(l.end, 3u);
  EXPECT_EQ(f[f[0].right].begin, 3u);
  EXPECT_EQ(f[l.left].end, 2u);
  EXPECT_TRUE(f[l.right].leaf());
  EXPECT_EQ(f[l.right].begin, 2u);
  EXPECT_THROW(PartitionTree(0), DataError);
}

TEST(TreeTest, LeavesPartitionInOrder) {
  for (std::size_t m = 1; m <= 40; ++m) {
    const PartitionTree t(m);
    std::vector<std::size_t> leaves;
    for (const auto& node : t.nodes()) {
      if (node.leaf()) {
        EXPECT_EQ(node.end, node.begin + 1);
        leaves.push_back(node.begin);
      } else {
        const auto& l = t.nodes()[node.left];
        const auto& r = t.nodes()[node.right];
        EXPECT_EQ(l.begin, node.begin);
        EXPECT_EQ(l.end, r.begin);
        EXPECT_EQ(r.end, node.end);
        EXPECT_EQ(l.end - l.begin, (node.end - node.begin + 1) / 2);
      }
    }
    ASSERT_EQ(leaves.size(), m);
    for (std::size_t i = 0; i < m; ++i) EXPECT_EQ(leaves[i], i);
    EXPECT_EQ(t.nodes().size(), 2 * m - 1);
  }
}

TEST(AttributionTest, Completeness) {
  Stream s = Stream::For(1, {"complete"});
  for (int rep = 0; rep < 60; ++rep) {
    const int m = 1 + static_cast<int>(s.Below(14));
    const auto seq = Seq(m);
    const auto f = FromValue(RandomGame(s, m));
    for (auto mode : {ContextMode::kFixedPresent, ContextMode::kSymmetric}) {
      const auto a = partition_attributions(f, seq, build_partition_tree(seq), mode, "X");
      ASSERT_EQ(a.n_classes(), 3u);
      EXPECT_EQ(a.item_id, "X");
      for (int g = 0; g < 3; ++g) {
        double sum = a.base[g];
        for (double v : a.phi[g]) sum += v;
        EXPECT_NEAR(sum, a.output[g], 1e-12);
      }
    }
  }
}

TEST(AttributionTest, SingleToken) {
  Stream s = Stream::For(2, {"single"});
  const auto v = RandomGame(s, 1);
  const auto seq = Seq(1);
  for (auto mode : {ContextMode::kFixedPresent, ContextMode::kSymmetric}) {
    const auto a = partition_attributions(FromValue(v), seq, PartitionTree(1), mode);
    const auto on = v({true}), off = v({false});
    for (int g = 0; g < 3; ++g) EXPECT_EQ(a.phi[g][0], on[g] - off[g]);
  }
}

TEST(AttributionTest, ConstantModel) {
  const OutputFn f = [](const TokenSequence&) { return std::vector<double>{0.2, 0.5, 0.3}; };
  const auto seq = Seq(9);
  for (auto mode : {ContextMode::kFixedPresent, ContextMode::kSymmetric}) {
    const auto a = partition_attributions(f, seq, PartitionTree(9), mode);
    for (const auto& row : a.phi)
      for (double v : row) EXPECT_EQ(v, 0.0);
    EXPECT_EQ(a.base, (std::vector<double>{0.2, 0.5, 0.3}));
    for (double v : a.folded) EXPECT_EQ(v, 0.0);
  }
}

TEST(AttributionTest, TwoTokenAdditive) {
  const double u = 0.3, w = -0.7, c = 0.15;
  const OutputFn f = [=](const TokenSequence& seq) {
    const auto p = Present(seq);
    return std::vector<double>{u * p[0] + w * p[1] + c};
  };
  for (auto mode : {ContextMode::kFixedPresent, ContextMode::kSymmetric}) {
    const auto a = partition_attributions(f, Seq(2), PartitionTree(2), mode);
    EXPECT_NEAR(a.phi[0][0], u, 1e-15);
    EXPECT_NEAR(a.phi[0][1], w, 1e-15);
    EXPECT_EQ(a.base[0], c);
    EXPECT_EQ(a.folded, a.phi[0]);
  }
}

// Exact Owen values give a null player nothing. The fixed-present mode splits
// the completeness gap evenly between siblings, so it only guarantees this
// when the dummy's sibling does not interact with the rest of the item.
TEST(AttributionTest, DummyToken) {
  Stream s = Stream::For(3, {"dummy"});
  for (int rep = 0; rep < 30; ++rep) {
    const int m = 2 + static_cast<int>(s.Below(9));
    const int dummy = static_cast<int>(s.Below(m));
    const auto inner = RandomGame(s, m);
    // Output ignores the dummy position by forcing it absent.
    const oracle::ValueFn v = [inner, dummy](std::vector<bool> p) {
      p[dummy] = false;
      return inner(p);
    };
    const auto a = partition_attributions(FromValue(v), Seq(m), PartitionTree(m), ContextMode::kSymmetric);
    for (int g = 0; g < 3; ++g) EXPECT_NEAR(a.phi[g][dummy], 0.0, 1e-9);
  }
}

TEST(AttributionTest, DummyTokenFixedModeWithoutInteractions) {
  Stream s = Stream::For(8, {"dummy-fixed"});
  for (int rep = 0; rep < 30; ++rep) {
    const int m = 2 + static_cast<int>(s.Below(9));
    const int dummy = static_cast<int>(s.Below(m));
    std::vector<double> w(m);
    for (double& x : w) x = s.Normal();
    w[dummy] = 0.0;
    const oracle::ValueFn v = [w](const std::vector<bool>& p) {
      double sum = 0.1;
      for (std::size_t i = 0; i < w.size(); ++i) sum += p[i] ? w[i] : 0.0;
      return std::vector<double>{sum, -sum, 2 * sum};
    };
    const auto a = partition_attributions(FromValue(v), Seq(m), PartitionTree(m), ContextMode::kFixedPresent);
    for (int g = 0; g < 3; ++g) EXPECT_NEAR(a.phi[g][dummy], 0.0, 1e-12);
  }
}

TEST(AttributionTest, SymmetricMatchesOwenBruteForce) {
  Stream s = Stream::For(4, {"owen"});
  for (int rep = 0; rep < 40; ++rep) {
    const int m = 1 + static_cast<int>(s.Below(8));
    const auto v = RandomGame(s, m);
    const auto want = oracle::OwenBruteForce(m, v);
    const auto got = partition_attributions(FromValue(v), Seq(m), PartitionTree(m), ContextMode::kSymmetric);
    for (int g = 0; g < 3; ++g)
      for (int t = 0; t < m; ++t) EXPECT_NEAR(got.phi[g][t], want[g][t], 1e-9) << m;
  }
}

TEST(AttributionTest, OwenEqualsShapleyForAdditiveGames) {
  Stream s = Stream::For(5, {"additive"});
  for (int m = 1; m <= 7; ++m) {
    std::vector<double> w(m);
    for (double& x : w) x = s.Normal();
    const oracle::ValueFn v = [w](const std::vector<bool>& p) {
      double sum = 0.4;
      for (std::size_t i = 0; i < w.size(); ++i) sum += p[i] ? w[i] : 0.0;
      return std::vector<double>{sum};
    };
    const auto shap = oracle::ShapleyBruteForce(m, v);
    for (auto mode : {ContextMode::kFixedPresent, ContextMode::kSymmetric}) {
      const auto a = partition_attributions(FromValue(v), Seq(m), PartitionTree(m), mode);
      for (int t = 0; t < m; ++t) {
        EXPECT_NEAR(a.phi[0][t], w[t], 1e-12);
        EXPECT_NEAR(shap[0][t], w[t], 1e-12);
      }
    }
  }
}

TEST(AttributionTest, Additivity) {
  Stream s = Stream::For(6, {"sum"});
  for (int rep = 0; rep < 20; ++rep) {
    const int m = 1 + static_cast<int>(s.Below(10));
    const auto f = RandomGame(s, m), h = RandomGame(s, m);
    const oracle::ValueFn sum = [f, h](const std::vector<bool>& p) {
      auto a = f(p);
      const auto b = h(p);
      for (int g = 0; g < 3; ++g) a[g] += b[g];
      return a;
    };
    const auto seq = Seq(m);
    const PartitionTree tree(m);
    for (auto mode : {ContextMode::kFixedPresent, ContextMode::kSymmetric}) {
      const auto a = partition_attributions(FromValue(f), seq, tree, mode);
      const auto b = partition_attributions(FromValue(h), seq, tree, mode);
      const auto c = partition_attributions(FromValue(sum), seq, tree, mode);
      for (int g = 0; g < 3; ++g)
        for (int t = 0; t < m; ++t) EXPECT_NEAR(c.phi[g][t], a.phi[g][t] + b.phi[g][t], 1e-12);
    }
  }
}

TEST(AttributionTest, TrainedModelInterface) {
  std::vector<std::vector<std::string>> docs = {{"a", "b", "c"}};
  model::EmbeddingClassifier m(model::Mode::kCategorical, model::Vocabulary::Build(docs), 4, 3);
  m.initialize(3, 0.8);
  const OutputFn f = [&m](const TokenSequence& seq) { return model::model_output(m, seq); };
  const TokenSequence seq({"a", "b", "zz", "c", "a"});
  const auto a = partition_attributions(f, seq, build_partition_tree(seq));
  for (int g = 0; g < 3; ++g) {
    double sum = a.base[g];
    for (double v : a.phi[g]) sum += v;
    EXPECT_NEAR(sum, a.output[g], 1e-12);
  }
  EXPECT_EQ(a.output, model::model_output(m, seq));
}

TEST(AttributionTest, Errors) {
  const OutputFn bad = [](const TokenSequence& seq) {
    return std::vector<double>{seq[0] == model::kUnkToken ? NAN : 1.0};
  };
  try {
    partition_attributions(bad, Seq(2), PartitionTree(2));
    FAIL();
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("00"), std::string::npos);
  }
  const OutputFn ok = [](const TokenSequence&) { return std::vector<double>{1.0}; };
  EXPECT_THROW(partition_attributions(ok, Seq(3), PartitionTree(2)), DataError);
}

TEST(FoldTest, Examples) {
  EXPECT_DOUBLE_EQ(fold(0.02, 123.0, 0.01), -0.01);
  EXPECT_EQ(fold(-0.01, -5.0, -0.02), 0.0);
  EXPECT_EQ(fold(0, 0.5, 0), 0.0);
  EXPECT_EQ(fold(0, 0, 0.3), 0.3);
  EXPECT_EQ(fold(0.3, 0, 0), -0.3);
}

TEST(FoldTest, LipschitzAndIgnoresMiddle) {
  Stream s = Stream::For(7, {"fold"});
  for (int i = 0; i < 10000; ++i) {
    const double a = s.Normal(), b = s.Normal(), c = s.Normal(), d = s.Normal(0, 0.1);
    EXPECT_EQ(fold(a, b, c), fold(a, s.Normal(), c));
    EXPECT_LE(std::abs(fold(a + d, b, c) - fold(a, b, c)), std::abs(d) + 1e-15);
    EXPECT_LE(std::abs(fold(a, b, c + d) - fold(a, b, c)), std::abs(d) + 1e-15);
  }
}

AttributionSet Set(std::vector<double> focal) {
  AttributionSet a;
  a.item_id = "I1";
  a.tokens.assign(focal.size(), "w");
  a.phi = {std::vector<double>(focal.size(), 0.01), std::vector<double>(focal.size(), 0.0), focal};
  a.base = {0.3, 0.4, 0.3};
  a.output = {0.3, 0.4, 0.3};
  for (double f : focal) {
    a.output[0] += 0.01;
    a.output[2] += f;
  }
  a.folded = fold_all(a);
  return a;
}

TEST(AverageTest, Examples) {
  const std::vector<AttributionSet> same = {Set({0.02, -0.1}), Set({0.02, -0.1})};
  const auto avg_same = average_attributions(same);
  EXPECT_EQ(avg_same.phi, same[0].phi);
  EXPECT_EQ(avg_same.folded, same[0].folded);

  const std::vector<AttributionSet> two = {Set({0.02}), Set({0.04})};
  const auto avg = average_attributions(two);
  EXPECT_NEAR(avg.phi[2][0], 0.03, 1e-15);
  EXPECT_NEAR(avg.folded[0], fold(0.01, 0.0, 0.03), 1e-15);
  for (int g = 0; g < 3; ++g) {
    double sum = avg.base[g];
    for (double v : avg.phi[g]) sum += v;
    EXPECT_NEAR(sum, avg.output[g], 1e-15);
  }
}

TEST(AverageTest, FoldOfMeansNotMeanOfFolds) {
  auto a = Set({0.05}), b = Set({-0.05});
  a.phi[0][0] = 0.0;
  b.phi[0][0] = 0.0;
  a.folded = fold_all(a);
  b.folded = fold_all(b);
  const std::vector<AttributionSet> both = {a, b};
  EXPECT_EQ(average_attributions(both).folded[0], 0.0);
  EXPECT_NEAR(0.5 * (a.folded[0] + b.folded[0]), 0.025, 1e-15);
}

TEST(AverageTest, Mismatch) {
  auto other = Set({0.02, 0.01});
  other.tokens[1] = "x";
  const std::vector<AttributionSet> sets = {Set({0.02, 0.01}), other};
  EXPECT_THROW(average_attributions(sets), DataError);
  EXPECT_THROW(average_attributions({}), DataError);
}

}  // namespace
}  // namespace diflens::xai
