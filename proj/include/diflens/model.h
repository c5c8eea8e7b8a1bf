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

// Text models that map a token sequence to DIF-class logits (categorical) or
// a DIF value (continuous), plus the built-in trainable classifier.

#ifndef DIFLENS_MODEL_H_
#define DIFLENS_MODEL_H_

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "diflens/targets.h"

namespace diflens::model {

using targets::Mode;

inline constexpr std::string_view kSepToken = "[SEP]";
inline constexpr std::string_view kUnkToken = "[UNK]";
inline constexpr std::size_t kDefaultMaxLength = 512;

// Nonempty token list of bounded length. Longer inputs keep their head.
class TokenSequence {
 public:
  explicit TokenSequence(std::vector<std::string> tokens,
                         std::size_t max_length = kDefaultMaxLength);

  const std::vector<std::string>& tokens() const { return tokens_; }
  std::size_t size() const { return tokens_.size(); }
  const std::string& operator[](std::size_t i) const { return tokens_[i]; }

  // Copy with every position whose mask entry is false replaced by [UNK].
  TokenSequence masked(const std::vector<bool>& present) const;

  bool operator==(const TokenSequence&) const = default;

 private:
  std::vector<std::string> tokens_;
};

// Lowercases and splits on whitespace; each ASCII punctuation character is its
// own token. "[SEP]" and "[UNK]" pass through verbatim.
TokenSequence tokenize(std::string_view text,
                       std::size_t max_length = kDefaultMaxLength);

// Max-subtracted softmax.
std::vector<double> softmax(std::span<const double> logits);

inline constexpr double kProbabilityClamp = 1e-12;

using Triple = std::array<double, 3>;

// Mean over items of -sum_g P_g log(max(Phat_g, 1e-12)).
double cross_entropy(std::span<const Triple> targets,
                     std::span<const Triple> probs);
double mse(std::span<const double> targets, std::span<const double> predictions);

// Token -> row index. Row 0 is always [UNK], which also absorbs every token
// not in the vocabulary.
class Vocabulary {
 public:
  Vocabulary();
  // Sorted, deduplicated, [UNK] first.
  static Vocabulary Build(std::span<const std::vector<std::string>> documents);
  static Vocabulary FromList(std::vector<std::string> tokens);

  int index(const std::string& token) const;
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  bool operator==(const Vocabulary& other) const {
    return tokens_ == other.tokens_;
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

// Pure, deterministic text model. predict returns raw logits: three for the
// categorical mode, one value for the continuous mode.
class TextModel {
 public:
  virtual ~TextModel() = default;
  virtual Mode mode() const = 0;
  virtual std::vector<double> predict(const TokenSequence& seq) const = 0;
  virtual const Vocabulary* vocabulary() const { return nullptr; }
};

// Class probabilities (categorical) or the value (continuous).
std::vector<double> model_output(const TextModel& model,
                                 const TokenSequence& seq);

// Adapter for external backends: any callable producing logits.
class FunctionModel : public TextModel {
 public:
  using Fn = std::function<std::vector<double>(const TokenSequence&)>;
  FunctionModel(Mode mode, Fn fn) : mode_(mode), fn_(std::move(fn)) {}
  Mode mode() const override { return mode_; }
  std::vector<double> predict(const TokenSequence& seq) const override;

 private:
  Mode mode_;
  Fn fn_;
};

struct Hyperparameters {
  int embedding_dim = 64;
  int hidden = 64;
  double learning_rate = 0.05;
  int batch_size = 8;
  int epochs = 20;
  double init_scale = 0.05;
  std::size_t max_length = kDefaultMaxLength;
};

struct Example {
  std::vector<int> ids;
  Triple target{0.0, 1.0, 0.0};
  double y = 0.0;
};

// Mean-pooled token embeddings -> tanh hidden layer -> affine head.
// Parameters live in one flat vector: embedding [V x D], w1 [H x D], b1 [H],
// w2 [O x H], b2 [O], all row-major.
class EmbeddingClassifier : public TextModel {
 public:
  EmbeddingClassifier(Mode mode, Vocabulary vocab, int embedding_dim,
                      int hidden);

  Mode mode() const override { return mode_; }
  std::vector<double> predict(const TokenSequence& seq) const override;
  const Vocabulary* vocabulary() const override { return &vocab_; }

  std::vector<double> forward(std::span<const int> ids) const;
  Example make_example(const targets::DatasetRecord& rec) const;

  // Mean loss over the batch (cross-entropy or squared error by mode); adds
  // the gradient of that mean into grad when grad is non-null.
  double loss_and_gradient(std::span<const Example> batch,
                           std::vector<double>* grad) const;

  void initialize(std::uint64_t seed, double scale);

  std::vector<double>& parameters() { return params_; }
  const std::vector<double>& parameters() const { return params_; }
  int embedding_dim() const { return dim_; }
  int hidden() const { return hidden_; }
  int outputs() const { return outputs_; }

  std::uint64_t seed = 0;
  int epoch = 0;

  bool operator==(const EmbeddingClassifier& o) const {
    return mode_ == o.mode_ && vocab_ == o.vocab_ && dim_ == o.dim_ &&
           hidden_ == o.hidden_ && params_ == o.params_ && seed == o.seed &&
           epoch == o.epoch;
  }

 private:
  std::size_t w1_offset() const { return vocab_.size() * dim_; }
  std::size_t b1_offset() const { return w1_offset() + hidden_ * dim_; }
  std::size_t w2_offset() const { return b1_offset() + hidden_; }
  std::size_t b2_offset() const { return w2_offset() + outputs_ * hidden_; }

  Mode mode_;
  Vocabulary vocab_;
  int dim_;
  int hidden_;
  int outputs_;
  std::vector<double> params_;
};

struct TrainResult {
  EmbeddingClassifier model;
  std::vector<double> train_loss;       // per epoch, 1-based epochs
  std::vector<double> validation_loss;  // per epoch
  int selected_epoch = 0;
};

// Seeded minibatch SGD; returns the snapshot from the epoch with the lowest
// validation loss (earliest on ties).
TrainResult train(const targets::ModelDataset& dataset,
                  const Hyperparameters& hp, std::uint64_t seed);

class Ensemble {
 public:
  explicit Ensemble(std::vector<std::shared_ptr<const TextModel>> members);
  Mode mode() const { return members_.front()->mode(); }
  const std::vector<std::shared_ptr<const TextModel>>& members() const {
    return members_;
  }

 private:
  std::vector<std::shared_ptr<const TextModel>> members_;
};

// Mean of member probabilities (renormalised) or raw continuous outputs.
std::vector<double> ensemble_predict(const Ensemble& ens,
                                     const TokenSequence& seq);

void save_model(const EmbeddingClassifier& model, const std::string& path);
EmbeddingClassifier load_model(const std::string& path);

}  // namespace diflens::model

#endif  // DIFLENS_MODEL_H_
