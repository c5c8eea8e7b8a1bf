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

#include "diflens/model.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>

#include "diflens/error.h"
#include "diflens/rng.h"
#include "json.hpp"

namespace diflens::model {

using nlohmann::json;

TokenSequence::TokenSequence(std::vector<std::string> tokens,
                             std::size_t max_length)
    : tokens_(std::move(tokens)) {
  if (tokens_.empty()) throw DataError("TokenSequence: empty token list");
  if (max_length == 0) throw ConfigError("TokenSequence: max_length is 0");
  if (tokens_.size() > max_length) tokens_.resize(max_length);
}

TokenSequence TokenSequence::masked(const std::vector<bool>& present) const {
  if (present.size() != tokens_.size()) {
    throw DataError("TokenSequence::masked: mask length mismatch");
  }
  std::vector<std::string> out(tokens_);
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!present[i]) out[i] = kUnkToken;
  }
  const std::size_t n = out.size();
  return TokenSequence(std::move(out), n);
}

TokenSequence tokenize(std::string_view text, std::size_t max_length) {
  std::vector<std::string> tokens;
  std::string word;
  auto flush = [&] {
    if (!word.empty()) tokens.push_back(std::move(word));
    word.clear();
  };
  for (std::size_t i = 0; i < text.size();) {
    const std::string_view rest = text.substr(i);
    if (rest.starts_with(kSepToken) || rest.starts_with(kUnkToken)) {
      flush();
      tokens.emplace_back(rest.substr(0, 5));
      i += 5;
      continue;
    }
    const unsigned char c = static_cast<unsigned char>(text[i]);
    if (std::isspace(c)) {
      flush();
    } else if (c < 128 && std::ispunct(c)) {
      flush();
      tokens.emplace_back(1, static_cast<char>(c));
    } else {
      word.push_back(static_cast<char>(std::tolower(c)));
    }
    ++i;
  }
  flush();
  if (tokens.empty()) throw DataError("tokenize: no tokens in input");
  return TokenSequence(std::move(tokens), max_length);
}

std::vector<double> softmax(std::span<const double> logits) {
  if (logits.empty()) return {};
  const double m = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double total = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - m);
    total += out[i];
  }
  for (double& v : out) v /= total;
  return out;
}

double cross_entropy(std::span<const Triple> targets,
                     std::span<const Triple> probs) {
  if (targets.size() != probs.size()) {
    throw DataError("cross_entropy: batch size mismatch");
  }
  if (targets.empty()) return 0.0;
  double total = 0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    for (int g = 0; g < 3; ++g) {
      if (targets[i][g] == 0) continue;
      total -= targets[i][g] * std::log(std::max(probs[i][g], kProbabilityClamp));
    }
  }
  return total / static_cast<double>(targets.size());
}

double mse(std::span<const double> targets, std::span<const double> predictions) {
  if (targets.size() != predictions.size()) {
    throw DataError("mse: batch size mismatch");
  }
  if (targets.empty()) return 0.0;
  double total = 0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const double d = predictions[i] - targets[i];
    total += d * d;
  }
  return total / static_cast<double>(targets.size());
}

Vocabulary::Vocabulary() {
  tokens_.emplace_back(kUnkToken);
  index_[std::string(kUnkToken)] = 0;
}

Vocabulary Vocabulary::FromList(std::vector<std::string> tokens) {
  Vocabulary v;
  for (auto& t : tokens) {
    if (t == kUnkToken) continue;
    if (v.index_.count(t)) {
      throw DataError("Vocabulary: duplicate token " + t);
    }
    v.index_[t] = static_cast<int>(v.tokens_.size());
    v.tokens_.push_back(std::move(t));
  }
  return v;
}

Vocabulary Vocabulary::Build(std::span<const std::vector<std::string>> documents) {
  std::set<std::string> unique;
  for (const auto& doc : documents) unique.insert(doc.begin(), doc.end());
  unique.erase(std::string(kUnkToken));
  return FromList(std::vector<std::string>(unique.begin(), unique.end()));
}

int Vocabulary::index(const std::string& token) const {
  const auto it = index_.find(token);
  return it == index_.end() ? 0 : it->second;
}

std::vector<double> model_output(const TextModel& model,
                                 const TokenSequence& seq) {
  std::vector<double> logits = model.predict(seq);
  if (model.mode() == Mode::kCategorical) {
    if (logits.size() != 3) {
      throw DataError("categorical model must return 3 logits");
    }
    return softmax(logits);
  }
  if (logits.size() != 1) {
    throw DataError("continuous model must return 1 value");
  }
  return logits;
}

std::vector<double> FunctionModel::predict(const TokenSequence& seq) const {
  return fn_(seq);
}

EmbeddingClassifier::EmbeddingClassifier(Mode mode, Vocabulary vocab,
                                         int embedding_dim, int hidden)
    : mode_(mode),
      vocab_(std::move(vocab)),
      dim_(embedding_dim),
      hidden_(hidden),
      outputs_(mode == Mode::kCategorical ? 3 : 1) {
  if (dim_ < 1 || hidden_ < 1) {
    throw ConfigError("EmbeddingClassifier: dimensions must be positive");
  }
  params_.assign(b2_offset() + outputs_, 0.0);
}

void EmbeddingClassifier::initialize(std::uint64_t init_seed, double scale) {
  Stream s = Stream::For(init_seed, {"init"});
  for (double& p : params_) p = scale * (2.0 * s.Uniform() - 1.0);
  seed = init_seed;
}

std::vector<double> EmbeddingClassifier::forward(std::span<const int> ids) const {
  const double* emb = params_.data();
  const double* w1 = params_.data() + w1_offset();
  const double* b1 = params_.data() + b1_offset();
  const double* w2 = params_.data() + w2_offset();
  const double* b2 = params_.data() + b2_offset();
  std::vector<double> pooled(dim_, 0.0);
  for (const int id : ids) {
    const double* row = emb + static_cast<std::size_t>(id) * dim_;
    for (int d = 0; d < dim_; ++d) pooled[d] += row[d];
  }
  const double inv = 1.0 / static_cast<double>(ids.size());
  for (double& v : pooled) v *= inv;
  std::vector<double> h(hidden_);
  for (int j = 0; j < hidden_; ++j) {
    double a = b1[j];
    const double* row = w1 + static_cast<std::size_t>(j) * dim_;
    for (int d = 0; d < dim_; ++d) a += row[d] * pooled[d];
    h[j] = std::tanh(a);
  }
  std::vector<double> out(outputs_);
  for (int o = 0; o < outputs_; ++o) {
    double a = b2[o];
    const double* row = w2 + static_cast<std::size_t>(o) * hidden_;
    for (int j = 0; j < hidden_; ++j) a += row[j] * h[j];
    out[o] = a;
  }
  return out;
}

std::vector<double> EmbeddingClassifier::predict(const TokenSequence& seq) const {
  std::vector<int> ids;
  ids.reserve(seq.size());
  for (const auto& t : seq.tokens()) ids.push_back(vocab_.index(t));
  return forward(ids);
}

Example EmbeddingClassifier::make_example(const targets::DatasetRecord& rec) const {
  if (rec.tokens.empty()) {
    throw DataError("item " + rec.item_id + " has no tokens");
  }
  Example ex;
  ex.ids.reserve(rec.tokens.size());
  for (const auto& t : rec.tokens) ex.ids.push_back(vocab_.index(t));
  ex.target = rec.target.p;
  ex.y = rec.y;
  return ex;
}

double EmbeddingClassifier::loss_and_gradient(std::span<const Example> batch,
                                              std::vector<double>* grad) const {
  if (batch.empty()) return 0.0;
  if (grad && grad->size() != params_.size()) grad->assign(params_.size(), 0.0);
  const double* emb = params_.data();
  const double* w1 = params_.data() + w1_offset();
  const double* b1 = params_.data() + b1_offset();
  const double* w2 = params_.data() + w2_offset();
  const double* b2 = params_.data() + b2_offset();
  const double scale = 1.0 / static_cast<double>(batch.size());

  std::vector<double> pooled(dim_), h(hidden_), out(outputs_), d_out(outputs_),
      d_a1(hidden_), d_pooled(dim_);
  double total = 0;
  for (const Example& ex : batch) {
    if (ex.ids.empty()) throw DataError("loss_and_gradient: empty example");
    std::fill(pooled.begin(), pooled.end(), 0.0);
    for (const int id : ex.ids) {
      const double* row = emb + static_cast<std::size_t>(id) * dim_;
      for (int d = 0; d < dim_; ++d) pooled[d] += row[d];
    }
    const double inv = 1.0 / static_cast<double>(ex.ids.size());
    for (double& v : pooled) v *= inv;
    for (int j = 0; j < hidden_; ++j) {
      double a = b1[j];
      const double* row = w1 + static_cast<std::size_t>(j) * dim_;
      for (int d = 0; d < dim_; ++d) a += row[d] * pooled[d];
      h[j] = std::tanh(a);
    }
    for (int o = 0; o < outputs_; ++o) {
      double a = b2[o];
      const double* row = w2 + static_cast<std::size_t>(o) * hidden_;
      for (int j = 0; j < hidden_; ++j) a += row[j] * h[j];
      out[o] = a;
    }

    if (mode_ == Mode::kCategorical) {
      const auto p = softmax(out);
      double mass = 0;
      for (int g = 0; g < 3; ++g) {
        mass += ex.target[g];
        if (ex.target[g] != 0) {
          total -= ex.target[g] * std::log(std::max(p[g], kProbabilityClamp));
        }
      }
      for (int g = 0; g < 3; ++g) d_out[g] = mass * p[g] - ex.target[g];
    } else {
      const double r = out[0] - ex.y;
      total += r * r;
      d_out[0] = 2.0 * r;
    }
    if (!grad) continue;

    double* g = grad->data();
    for (int o = 0; o < outputs_; ++o) {
      const double d = d_out[o] * scale;
      g[b2_offset() + o] += d;
      double* row = g + w2_offset() + static_cast<std::size_t>(o) * hidden_;
      for (int j = 0; j < hidden_; ++j) row[j] += d * h[j];
    }
    for (int j = 0; j < hidden_; ++j) {
      double dh = 0;
      for (int o = 0; o < outputs_; ++o) {
        dh += w2[static_cast<std::size_t>(o) * hidden_ + j] * d_out[o];
      }
      d_a1[j] = dh * (1.0 - h[j] * h[j]) * scale;
    }
    std::fill(d_pooled.begin(), d_pooled.end(), 0.0);
    for (int j = 0; j < hidden_; ++j) {
      g[b1_offset() + j] += d_a1[j];
      double* grow = g + w1_offset() + static_cast<std::size_t>(j) * dim_;
      const double* wrow = w1 + static_cast<std::size_t>(j) * dim_;
      for (int d = 0; d < dim_; ++d) {
        grow[d] += d_a1[j] * pooled[d];
        d_pooled[d] += d_a1[j] * wrow[d];
      }
    }
    for (const int id : ex.ids) {
      double* row = g + static_cast<std::size_t>(id) * dim_;
      for (int d = 0; d < dim_; ++d) row[d] += d_pooled[d] * inv;
    }
  }
  return total * scale;
}

TrainResult train(const targets::ModelDataset& dataset,
                  const Hyperparameters& hp, std::uint64_t seed) {
  if (hp.batch_size < 1 || hp.epochs < 1 || !(hp.learning_rate > 0)) {
    throw ConfigError("train: batch_size, epochs and learning_rate must be positive");
  }
  const auto train_recs = dataset.in_split(targets::Split::kTrain);
  const auto val_recs = dataset.in_split(targets::Split::kValidation);
  if (train_recs.empty()) throw DataError("train: empty training split");
  if (val_recs.empty()) throw DataError("train: empty validation split");

  auto truncated = [&](const targets::DatasetRecord* r) {
    targets::DatasetRecord copy = *r;
    if (copy.tokens.size() > hp.max_length) copy.tokens.resize(hp.max_length);
    return copy;
  };

  std::vector<std::vector<std::string>> docs;
  for (const auto* r : train_recs) docs.push_back(truncated(r).tokens);
  EmbeddingClassifier model(dataset.mode, Vocabulary::Build(docs),
                            hp.embedding_dim, hp.hidden);
  model.initialize(seed, hp.init_scale);

  std::vector<Example> train_ex, val_ex;
  for (const auto* r : train_recs) train_ex.push_back(model.make_example(truncated(r)));
  for (const auto* r : val_recs) val_ex.push_back(model.make_example(truncated(r)));

  TrainResult result{model, {}, {}, 0};
  double best = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> order(train_ex.size());
  std::vector<double> grad(model.parameters().size());
  std::vector<Example> batch;
  for (int epoch = 1; epoch <= hp.epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Stream::For(seed, {"epoch", std::to_string(epoch)}).Shuffle(order);
    double epoch_loss = 0;
    for (std::size_t start = 0; start < order.size(); start += hp.batch_size) {
      const std::size_t end = std::min(order.size(), start + hp.batch_size);
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(train_ex[order[i]]);
      std::fill(grad.begin(), grad.end(), 0.0);
      const double loss = model.loss_and_gradient(batch, &grad);
      if (!std::isfinite(loss)) {
        throw DivergenceError(
            "train: non-finite loss in epoch " + std::to_string(epoch), epoch);
      }
      epoch_loss += loss * static_cast<double>(end - start);
      auto& params = model.parameters();
      for (std::size_t p = 0; p < params.size(); ++p) {
        params[p] -= hp.learning_rate * grad[p];
      }
    }
    const double val = model.loss_and_gradient(val_ex, nullptr);
    if (!std::isfinite(val)) {
      throw DivergenceError(
          "train: non-finite validation loss in epoch " + std::to_string(epoch),
          epoch);
    }
    result.train_loss.push_back(epoch_loss / static_cast<double>(order.size()));
    result.validation_loss.push_back(val);
    if (val < best) {
      best = val;
      model.epoch = epoch;
      result.model = model;
      result.selected_epoch = epoch;
    }
  }
  return result;
}

Ensemble::Ensemble(std::vector<std::shared_ptr<const TextModel>> members)
    : members_(std::move(members)) {
  if (members_.empty()) throw DataError("Ensemble: no members");
  const Vocabulary* vocab = members_.front()->vocabulary();
  for (const auto& m : members_) {
    if (!m) throw DataError("Ensemble: null member");
    if (m->mode() != members_.front()->mode()) {
      throw DataError("Ensemble: members disagree on mode");
    }
    const Vocabulary* v = m->vocabulary();
    if (vocab && v && !(*vocab == *v)) {
      throw DataError("Ensemble: members disagree on vocabulary");
    }
  }
}

std::vector<double> ensemble_predict(const Ensemble& ens,
                                     const TokenSequence& seq) {
  std::vector<double> mean;
  for (const auto& m : ens.members()) {
    const auto out = model_output(*m, seq);
    if (mean.empty()) mean.assign(out.size(), 0.0);
    for (std::size_t g = 0; g < out.size(); ++g) mean[g] += out[g];
  }
  const double n = static_cast<double>(ens.members().size());
  for (double& v : mean) v /= n;
  if (ens.mode() == Mode::kCategorical) {
    double total = 0;
    for (const double v : mean) total += v;
    for (double& v : mean) v /= total;
  }
  return mean;
}

namespace {
constexpr const char* kModelFormat = "diflens.model";
constexpr int kModelVersion = 1;
}  // namespace

void save_model(const EmbeddingClassifier& model, const std::string& path) {
  const auto& p = model.parameters();
  const std::size_t v = model.vocabulary()->size();
  const std::size_t d = model.embedding_dim();
  const std::size_t h = model.hidden();
  const std::size_t o = model.outputs();
  auto slice = [&](std::size_t begin, std::size_t count) {
    return std::vector<double>(p.begin() + begin, p.begin() + begin + count);
  };
  json j;
  j["format"] = kModelFormat;
  j["version"] = kModelVersion;
  j["mode"] = targets::to_string(model.mode());
  j["seed"] = model.seed;
  j["epoch"] = model.epoch;
  j["embedding_dim"] = d;
  j["hidden"] = h;
  j["outputs"] = o;
  j["vocabulary"] = model.vocabulary()->tokens();
  std::size_t off = 0;
  j["tensors"]["embedding"] = slice(off, v * d);
  off += v * d;
  j["tensors"]["w1"] = slice(off, h * d);
  off += h * d;
  j["tensors"]["b1"] = slice(off, h);
  off += h;
  j["tensors"]["w2"] = slice(off, o * h);
  off += o * h;
  j["tensors"]["b2"] = slice(off, o);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write model file " + path);
  out << j.dump() << "\n";
}

EmbeddingClassifier load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read model file " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("malformed model file " + path + ": " + e.what());
  }
  try {
    if (j.at("format") != kModelFormat || j.at("version") != kModelVersion) {
      throw DataError("unsupported model format in " + path);
    }
    const Mode mode = targets::mode_from_string(j.at("mode"));
    auto vocab = Vocabulary::FromList(
        std::vector<std::string>(j.at("vocabulary").begin() + 1,
                                 j.at("vocabulary").end()));
    EmbeddingClassifier model(mode, vocab, j.at("embedding_dim"), j.at("hidden"));
    model.seed = j.at("seed");
    model.epoch = j.at("epoch");
    std::vector<double> flat;
    for (const char* name : {"embedding", "w1", "b1", "w2", "b2"}) {
      const auto t = j.at("tensors").at(name).get<std::vector<double>>();
      flat.insert(flat.end(), t.begin(), t.end());
    }
    if (flat.size() != model.parameters().size()) {
      throw DataError("model file " + path + ": tensor sizes do not match header");
    }
    model.parameters() = std::move(flat);
    return model;
  } catch (const json::exception& e) {
    throw DataError("malformed model file " + path + ": " + e.what());
  }
}

}  // namespace diflens::model
