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

#include "diflens/xai.h"

#include <cmath>
#include <unordered_map>

#include "diflens/error.h"

namespace diflens::xai {

PartitionTree::PartitionTree(std::size_t m) : m_(m) {
  if (m == 0) throw DataError("PartitionTree: need at least one token");
  nodes_.reserve(2 * m - 1);
  Build(0, m);
}

int PartitionTree::Build(std::size_t begin, std::size_t end) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back({begin, end, -1, -1});
  if (end - begin > 1) {
    const std::size_t mid = begin + (end - begin + 1) / 2;
    const int l = Build(begin, mid);
    const int r = Build(mid, end);
    nodes_[id].left = l;
    nodes_[id].right = r;
  }
  return id;
}

PartitionTree build_partition_tree(const model::TokenSequence& seq) {
  return PartitionTree(seq.size());
}

namespace {

using Vec = std::vector<double>;
using Mask = std::vector<bool>;

class Explainer {
 public:
  Explainer(const OutputFn& model, const model::TokenSequence& seq,
            const PartitionTree& tree)
      : model_(model), seq_(seq), tree_(tree) {}

  const Vec& Value(const Mask& present) {
    std::string key(present.size(), '0');
    for (std::size_t i = 0; i < present.size(); ++i) {
      if (present[i]) key[i] = '1';
    }
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    Vec out = model_(seq_.masked(present));
    for (const double v : out) {
      if (!std::isfinite(v)) {
        throw NumericalError("model returned a non-finite output for mask " +
                             key + " (1 = present)");
      }
    }
    if (width_ == 0) width_ = out.size();
    if (out.size() != width_ || width_ == 0) {
      throw DataError("model output width changed between calls");
    }
    return cache_.emplace(std::move(key), std::move(out)).first->second;
  }

  std::size_t width() const { return width_; }

  void Fixed(int node_id, Mask& ctx, const Vec& target,
             std::vector<Vec>& phi) {
    const PartitionNode& node = tree_.nodes()[node_id];
    if (node.leaf()) {
      for (std::size_t g = 0; g < target.size(); ++g) phi[g][node.begin] += target[g];
      return;
    }
    const PartitionNode& l = tree_.nodes()[node.left];
    const PartitionNode& r = tree_.nodes()[node.right];
    const Vec d = Value(ctx);
    Set(ctx, l, true);
    const Vec b = Value(ctx);
    Set(ctx, r, true);
    const Vec a = Value(ctx);
    Set(ctx, l, false);
    const Vec c = Value(ctx);
    Set(ctx, r, false);

    Vec tl(target.size()), tr(target.size());
    for (std::size_t g = 0; g < target.size(); ++g) {
      const double sl = 0.5 * ((a[g] - c[g]) + (b[g] - d[g]));
      const double sr = 0.5 * ((a[g] - b[g]) + (c[g] - d[g]));
      const double gap = target[g] - (a[g] - d[g]);
      tl[g] = sl + 0.5 * gap;
      tr[g] = sr + 0.5 * gap;
    }
    Set(ctx, r, true);
    Fixed(node.left, ctx, tl, phi);
    Set(ctx, r, false);
    Set(ctx, l, true);
    Fixed(node.right, ctx, tr, phi);
    Set(ctx, l, false);
  }

  void Symmetric(int node_id, Mask& ctx, double weight, std::vector<Vec>& phi) {
    const PartitionNode& node = tree_.nodes()[node_id];
    if (node.leaf()) {
      const Vec off = Value(ctx);
      ctx[node.begin] = true;
      const Vec on = Value(ctx);
      ctx[node.begin] = false;
      for (std::size_t g = 0; g < on.size(); ++g) {
        phi[g][node.begin] += weight * (on[g] - off[g]);
      }
      return;
    }
    const PartitionNode& l = tree_.nodes()[node.left];
    const PartitionNode& r = tree_.nodes()[node.right];
    const double half = 0.5 * weight;
    Symmetric(node.left, ctx, half, phi);
    Set(ctx, r, true);
    Symmetric(node.left, ctx, half, phi);
    Set(ctx, r, false);
    Symmetric(node.right, ctx, half, phi);
    Set(ctx, l, true);
    Symmetric(node.right, ctx, half, phi);
    Set(ctx, l, false);
  }

 private:
  static void Set(Mask& m, const PartitionNode& n, bool v) {
    for (std::size_t i = n.begin; i < n.end; ++i) m[i] = v;
  }

  const OutputFn& model_;
  const model::TokenSequence& seq_;
  const PartitionTree& tree_;
  std::unordered_map<std::string, Vec> cache_;
  std::size_t width_ = 0;
};

}  // namespace

AttributionSet partition_attributions(const OutputFn& model,
                                      const model::TokenSequence& seq,
                                      const PartitionTree& tree,
                                      ContextMode mode, std::string item_id) {
  if (tree.size() != seq.size()) {
    throw DataError("partition_attributions: tree does not match sequence length");
  }
  const std::size_t m = seq.size();
  Explainer ex(model, seq, tree);
  Mask ctx(m, false);
  const Vec base = ex.Value(ctx);
  const Vec full = ex.Value(Mask(m, true));
  std::vector<Vec> phi(ex.width(), Vec(m, 0.0));
  if (mode == ContextMode::kFixedPresent) {
    Vec target(full.size());
    for (std::size_t g = 0; g < full.size(); ++g) target[g] = full[g] - base[g];
    ex.Fixed(0, ctx, target, phi);
  } else {
    ex.Symmetric(0, ctx, 1.0, phi);
  }

  AttributionSet out;
  out.item_id = std::move(item_id);
  out.tokens = seq.tokens();
  out.phi = std::move(phi);
  out.base = base;
  out.output = full;
  out.folded = fold_all(out);
  return out;
}

double fold(double phi_reference, double /*phi_no_dif*/, double phi_focal) {
  return (phi_reference > 0 ? -phi_reference : 0.0) +
         (phi_focal > 0 ? phi_focal : 0.0);
}

std::vector<double> fold_all(const AttributionSet& set) {
  const std::size_t m = set.tokens.size();
  std::vector<double> out(m, 0.0);
  if (set.n_classes() == 3) {
    for (std::size_t t = 0; t < m; ++t) {
      out[t] = fold(set.phi[0][t], set.phi[1][t], set.phi[2][t]);
    }
  } else if (set.n_classes() == 1) {
    out = set.phi[0];
  } else {
    throw DataError("fold_all: expected 1 or 3 classes");
  }
  return out;
}

AttributionSet average_attributions(std::span<const AttributionSet> sets) {
  if (sets.empty()) throw DataError("average_attributions: no sets");
  const AttributionSet& first = sets.front();
  AttributionSet out = first;
  for (std::size_t s = 1; s < sets.size(); ++s) {
    const AttributionSet& other = sets[s];
    if (other.item_id != first.item_id || other.tokens != first.tokens ||
        other.n_classes() != first.n_classes()) {
      throw DataError("average_attributions: sets for item '" + first.item_id +
                      "' disagree on item, tokens or classes");
    }
    for (std::size_t g = 0; g < out.n_classes(); ++g) {
      for (std::size_t t = 0; t < out.tokens.size(); ++t) {
        out.phi[g][t] += other.phi[g][t];
      }
      out.base[g] += other.base[g];
      out.output[g] += other.output[g];
    }
  }
  const double n = static_cast<double>(sets.size());
  for (std::size_t g = 0; g < out.n_classes(); ++g) {
    for (double& v : out.phi[g]) v /= n;
    out.base[g] /= n;
    out.output[g] /= n;
  }
  out.folded = fold_all(out);
  return out;
}

}  // namespace diflens::xai
