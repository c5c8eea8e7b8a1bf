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

// Partition (Owen-style) token attributions.
//
// Tokens are organised in a balanced binary tree over contiguous ranges. A
// masked token is replaced by [UNK]; sequence length never changes. At every
// internal node the two children play a two-player Shapley game inside the
// current context, and the recursion hands each child its share:
//
//  * kFixedPresent descends into each child with its sibling present and
//    spreads the interaction gap evenly over the two children, so each child
//    receives exactly its two-player Shapley share.
//  * kSymmetric descends into each child under both sibling states with half
//    weight each. This is the exact Owen value for the tree's nested
//    coalition structure.
//
// Both modes satisfy completeness: base + sum over tokens = output, per class.

#ifndef DIFLENS_XAI_H_
#define DIFLENS_XAI_H_

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "diflens/model.h"

namespace diflens::xai {

struct PartitionNode {
  std::size_t begin = 0;  // token range [begin, end)
  std::size_t end = 0;
  int left = -1;
  int right = -1;

  bool leaf() const { return left < 0; }
};

// nodes()[0] is the root. A range of length m splits into ceil(m/2) and
// floor(m/2).
class PartitionTree {
 public:
  explicit PartitionTree(std::size_t m);
  const std::vector<PartitionNode>& nodes() const { return nodes_; }
  std::size_t size() const { return m_; }

 private:
  int Build(std::size_t begin, std::size_t end);

  std::size_t m_;
  std::vector<PartitionNode> nodes_;
};

PartitionTree build_partition_tree(const model::TokenSequence& seq);

enum class ContextMode { kFixedPresent, kSymmetric };

// Model output for a (possibly masked) sequence: class probabilities or the
// continuous value.
using OutputFn =
    std::function<std::vector<double>(const model::TokenSequence&)>;

struct AttributionSet {
  std::string item_id;
  std::vector<std::string> tokens;
  std::vector<std::vector<double>> phi;  // [class][token]
  std::vector<double> folded;            // one signed value per token
  std::vector<double> base;              // output with every token masked
  std::vector<double> output;            // output at the full input

  std::size_t n_classes() const { return phi.size(); }
};

AttributionSet partition_attributions(const OutputFn& model,
                                      const model::TokenSequence& seq,
                                      const PartitionTree& tree,
                                      ContextMode mode = ContextMode::kFixedPresent,
                                      std::string item_id = {});

// Positive part of the focal attribution minus positive part of the
// reference attribution; the no-DIF attribution is ignored.
double fold(double phi_reference, double phi_no_dif, double phi_focal);

// Folded values for a set: fold() per token for three classes, the raw
// attribution for a single continuous output.
std::vector<double> fold_all(const AttributionSet& set);

// Arithmetic mean of phi, base and output; folded is recomputed from the
// averaged triples.
AttributionSet average_attributions(std::span<const AttributionSet> sets);

}  // namespace diflens::xai

#endif  // DIFLENS_XAI_H_
