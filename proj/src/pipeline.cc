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

#include "diflens/pipeline.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <memory>
#include <ostream>
#include <set>

#include "diflens/error.h"
#include "diflens/io.h"
#include "diflens/report.h"
#include "json.hpp"

namespace diflens::pipeline {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string ContextName(xai::ContextMode m) {
  return m == xai::ContextMode::kFixedPresent ? "fixed_present" : "symmetric";
}

xai::ContextMode ContextFromName(const std::string& s) {
  if (s == "fixed_present") return xai::ContextMode::kFixedPresent;
  if (s == "symmetric") return xai::ContextMode::kSymmetric;
  throw ConfigError("explain.context must be fixed_present or symmetric, got '" + s + "'");
}

std::string ComparatorName(eval::Comparator c) {
  return c == eval::Comparator::kFolded ? "folded" : "class_attribution";
}

eval::Comparator ComparatorFromName(const std::string& s) {
  if (s == "folded") return eval::Comparator::kFolded;
  if (s == "class_attribution") return eval::Comparator::kClassAttribution;
  throw ConfigError("eval.replacement_comparator must be class_attribution or folded");
}

std::string VarianceName(dif::MhVariance v) {
  return v == dif::MhVariance::kAsPrinted ? "as_printed" : "standard";
}

dif::MhVariance VarianceFromName(const std::string& s) {
  if (s == "as_printed") return dif::MhVariance::kAsPrinted;
  if (s == "standard") return dif::MhVariance::kStandard;
  throw ConfigError("dif.mh_variance must be as_printed or standard");
}

std::string WeightingName(dif::SmdWeighting w) {
  return w == dif::SmdWeighting::kFocalTotal ? "focal_total" : "literal";
}

dif::SmdWeighting WeightingFromName(const std::string& s) {
  if (s == "focal_total") return dif::SmdWeighting::kFocalTotal;
  if (s == "literal") return dif::SmdWeighting::kLiteral;
  throw ConfigError("dif.smd_weighting must be focal_total or literal");
}

// Strict view of one JSON object: reading a key marks it used; Done() rejects
// keys nobody asked for.
class Section {
 public:
  Section(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + " must be an object");
  }

  template <typename T>
  void Get(const std::string& key, T& out) {
    used_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(Where(key) + " has the wrong type");
    }
  }

  bool Has(const std::string& key) const { return j_.contains(key); }

  Section Child(const std::string& key) {
    used_.insert(key);
    static const json kEmpty = json::object();
    return Section(j_.contains(key) ? j_.at(key) : kEmpty, Where(key));
  }

  const json& Raw(const std::string& key) {
    used_.insert(key);
    return j_.at(key);
  }

  std::string Where(const std::string& key) const {
    return where_.empty() ? key : where_ + "." + key;
  }

  void Done() const {
    for (const auto& [k, v] : j_.items()) {
      if (!used_.count(k)) throw ConfigError("unknown configuration key " + Where(k));
    }
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> used_;
};

bool SafeName(const std::string& s) {
  if (s.empty()) return false;
  return std::all_of(s.begin(), s.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
  });
}

void Log(const RunOptions& o, const std::string& msg) {
  if (o.log) *o.log << msg << "\n";
}

bool Reuse(const RunOptions& o, std::initializer_list<std::string> paths) {
  if (!o.resume) return false;
  for (const auto& p : paths) {
    if (!fs::exists(p)) return false;
  }
  return true;
}

// Re-raises a stage failure with the stage name, keeping its category.
template <typename F>
auto Stage(const std::string& name, F&& f) {
  const std::string prefix = "stage " + name + ": ";
  try {
    return f();
  } catch (const ConfigError& e) {
    throw ConfigError(prefix + e.what());
  } catch (const DataError& e) {
    throw DataError(prefix + e.what());
  } catch (const NumericalError& e) {
    throw NumericalError(prefix + e.what());
  } catch (const fs::filesystem_error& e) {
    throw DataError(prefix + e.what());
  }
}

void EnsureDir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create directory " + dir + ": " + ec.message());
}

std::vector<const targets::DatasetRecord*> TestRecords(const targets::ModelDataset& d) {
  auto test = d.in_split(targets::Split::kTest);
  if (test.empty()) throw DataError("the test split is empty");
  return test;
}

}  // namespace

const model::Hyperparameters& PipelineConfig::hyperparameters(targets::Mode m) const {
  return m == targets::Mode::kContinuous && continuous_hp ? *continuous_hp : hp;
}

const PairConfig& PipelineConfig::pair(const std::string& name) const {
  for (const auto& p : pairs) {
    if (p.pair.name == name) return p;
  }
  throw ConfigError("no group pair named '" + name + "' in the configuration");
}

PipelineConfig parse_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("configuration is not valid JSON: ") + e.what());
  }
  PipelineConfig c;
  Section top(root, "");
  top.Get("output_dir", c.output_dir);

  {
    Section b = top.Child("bank");
    auto& k = c.bank;
    b.Get("seed", c.bank_seed);
    b.Get("n_dichotomous", k.n_dichotomous);
    b.Get("n_polytomous", k.n_polytomous);
    b.Get("max_score", k.max_score);
    b.Get("a_min", k.a_min);
    b.Get("a_max", k.a_max);
    b.Get("b_mean", k.b_mean);
    b.Get("b_sd", k.b_sd);
    b.Get("topic_pools", k.topic_pools);
    b.Get("common_pool", k.common_pool);
    b.Get("common_rate", k.common_rate);
    b.Get("min_tokens", k.min_tokens);
    b.Get("max_tokens", k.max_tokens);
    b.Get("marker_pool", k.marker_pool);
    b.Get("marker_fraction", k.marker_fraction);
    b.Get("markers_per_item", k.markers_per_item);
    b.Get("shift_values", k.shift_values);
    b.Get("shift_sd", k.shift_sd);
    b.Get("testlet_fraction", k.testlet_fraction);
    b.Get("testlet_min", k.testlet_min);
    b.Get("testlet_max", k.testlet_max);
    b.Done();
  }

  if (!top.Has("pairs")) throw ConfigError("configuration needs a pairs list");
  const json& pairs = top.Raw("pairs");
  if (!pairs.is_array()) throw ConfigError("pairs must be a list");
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    Section p(pairs[i], "pairs[" + std::to_string(i) + "]");
    PairConfig pc;
    p.Get("name", pc.pair.name);
    p.Get("focal", pc.pair.focal);
    p.Get("reference", pc.pair.reference);
    Section pop = p.Child("population");
    pop.Get("n_focal", pc.population.n_focal);
    pop.Get("n_reference", pc.population.n_reference);
    pop.Get("focal_mean", pc.population.focal_mean);
    pop.Get("focal_sd", pc.population.focal_sd);
    pop.Get("reference_mean", pc.population.reference_mean);
    pop.Get("reference_sd", pc.population.reference_sd);
    pop.Done();
    p.Done();
    c.pairs.push_back(pc);
  }
  c.bank.pairs.clear();
  for (const auto& p : c.pairs) c.bank.pairs.push_back(p.pair.name);

  top.Get("response_seed", c.response_seed);
  {
    Section s = top.Child("scoring");
    s.Get("points", c.grid.points);
    s.Get("lo", c.grid.lo);
    s.Get("hi", c.grid.hi);
    s.Done();
  }
  {
    Section d = top.Child("dif");
    std::string v = VarianceName(c.dif.mh_variance);
    std::string w = WeightingName(c.dif.smd_weighting);
    d.Get("mh_variance", v);
    d.Get("smd_weighting", w);
    d.Get("continuity_correction", c.dif.continuity_correction);
    d.Get("min_n", c.min_n);
    d.Done();
    c.dif.mh_variance = VarianceFromName(v);
    c.dif.smd_weighting = WeightingFromName(w);
  }
  {
    Section t = top.Child("targets");
    std::vector<double> cut = {c.cutoffs.low, c.cutoffs.high};
    std::vector<double> frac = {c.fractions.train, c.fractions.validation, c.fractions.test};
    t.Get("cutoffs", cut);
    t.Get("fractions", frac);
    t.Get("split_seed", c.split_seed);
    t.Done();
    if (cut.size() != 2) throw ConfigError("targets.cutoffs needs two values");
    if (frac.size() != 3) throw ConfigError("targets.fractions needs three values");
    c.cutoffs = {cut[0], cut[1]};
    c.fractions = {frac[0], frac[1], frac[2]};
  }
  {
    Section m = top.Child("model");
    std::string mode = targets::to_string(c.mode);
    m.Get("mode", mode);
    try {
      c.mode = targets::mode_from_string(mode);
    } catch (const Error&) {
      throw ConfigError("model.mode must be categorical or continuous");
    }
    m.Get("seeds", c.seeds);
    auto read_hp = [](Section& sec, model::Hyperparameters& hp) {
      sec.Get("embedding_dim", hp.embedding_dim);
      sec.Get("hidden", hp.hidden);
      sec.Get("learning_rate", hp.learning_rate);
      sec.Get("batch_size", hp.batch_size);
      sec.Get("epochs", hp.epochs);
      sec.Get("init_scale", hp.init_scale);
      sec.Get("max_length", hp.max_length);
    };
    read_hp(m, c.hp);
    if (m.Has("continuous")) {
      Section cont = m.Child("continuous");
      model::Hyperparameters hp = c.hp;
      read_hp(cont, hp);
      cont.Done();
      c.continuous_hp = hp;
    }
    m.Done();
  }
  {
    Section x = top.Child("explain");
    std::string ctx = ContextName(c.context);
    x.Get("context", ctx);
    x.Done();
    c.context = ContextFromName(ctx);
  }
  {
    Section e = top.Child("eval");
    std::string cmp = ComparatorName(c.eval.replacement_comparator);
    e.Get("bias_items", c.eval.bias_items);
    e.Get("top_threshold", c.eval.top.threshold);
    e.Get("top_min_count", c.eval.top.min_count);
    e.Get("top_k", c.eval.top.k);
    e.Get("replacement_comparator", cmp);
    e.Done();
    c.eval.replacement_comparator = ComparatorFromName(cmp);
  }
  top.Done();
  validate(c);
  return c;
}

PipelineConfig load_config(const std::string& path) {
  std::string text;
  try {
    text = io::read_text(path);
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
  return parse_config(text);
}

void validate(const PipelineConfig& c) {
  if (c.output_dir.empty()) throw ConfigError("output_dir must not be empty");
  if (c.pairs.empty()) throw ConfigError("pairs must list at least one group pair");
  std::set<std::string> names;
  for (const auto& p : c.pairs) {
    if (!SafeName(p.pair.name)) {
      throw ConfigError("pair name '" + p.pair.name +
                        "' must be nonempty letters, digits, '_' or '-'");
    }
    if (!names.insert(p.pair.name).second) {
      throw ConfigError("duplicate pair name '" + p.pair.name + "'");
    }
    if (p.pair.focal.empty() || p.pair.reference.empty() ||
        p.pair.focal == p.pair.reference) {
      throw ConfigError("pair '" + p.pair.name + "' needs distinct focal and reference labels");
    }
    const auto& pop = p.population;
    if (pop.n_focal < 1 || pop.n_reference < 1) {
      throw ConfigError("pair '" + p.pair.name + "' needs at least one examinee per group");
    }
    if (!(pop.focal_sd > 0) || !(pop.reference_sd > 0)) {
      throw ConfigError("pair '" + p.pair.name + "' needs positive ability SDs");
    }
  }
  if (c.grid.points < 2 || !(c.grid.lo < c.grid.hi)) {
    throw ConfigError("scoring grid needs at least 2 points and lo < hi");
  }
  if (c.min_n < 0) throw ConfigError("dif.min_n must be nonnegative");
  if (!(c.cutoffs.low < c.cutoffs.high)) {
    throw ConfigError("targets.cutoffs must satisfy low < high");
  }
  const auto& f = c.fractions;
  if (f.train < 0 || f.validation < 0 || f.test < 0 ||
      std::abs(f.train + f.validation + f.test - 1.0) > 1e-9) {
    throw ConfigError("targets.fractions must be nonnegative and sum to 1");
  }
  if (c.seeds.empty()) throw ConfigError("model.seeds must not be empty");
  std::set<std::uint64_t> seeds(c.seeds.begin(), c.seeds.end());
  if (seeds.size() != c.seeds.size()) throw ConfigError("model.seeds must be distinct");
  for (const auto mode : {targets::Mode::kCategorical, targets::Mode::kContinuous}) {
    const auto& hp = c.hyperparameters(mode);
    if (hp.embedding_dim < 1 || hp.hidden < 1 || hp.batch_size < 1 || hp.epochs < 1 ||
        !(hp.learning_rate > 0) || !(hp.init_scale > 0) || hp.max_length < 1) {
      throw ConfigError("model hyperparameters must be positive");
    }
  }
  if (c.eval.bias_items < 1) throw ConfigError("eval.bias_items must be positive");
  if (c.eval.top.k < 1) throw ConfigError("eval.top_k must be positive");
}

std::string config_to_json(const PipelineConfig& c) {
  json j;
  j["output_dir"] = c.output_dir;
  const auto& k = c.bank;
  j["bank"] = {{"seed", c.bank_seed},
               {"n_dichotomous", k.n_dichotomous},
               {"n_polytomous", k.n_polytomous},
               {"max_score", k.max_score},
               {"a_min", k.a_min},
               {"a_max", k.a_max},
               {"b_mean", k.b_mean},
               {"b_sd", k.b_sd},
               {"topic_pools", k.topic_pools},
               {"common_pool", k.common_pool},
               {"common_rate", k.common_rate},
               {"min_tokens", k.min_tokens},
               {"max_tokens", k.max_tokens},
               {"marker_pool", k.marker_pool},
               {"marker_fraction", k.marker_fraction},
               {"markers_per_item", k.markers_per_item},
               {"shift_values", k.shift_values},
               {"shift_sd", k.shift_sd},
               {"testlet_fraction", k.testlet_fraction},
               {"testlet_min", k.testlet_min},
               {"testlet_max", k.testlet_max}};
  j["pairs"] = json::array();
  for (const auto& p : c.pairs) {
    const auto& pop = p.population;
    j["pairs"].push_back({{"name", p.pair.name},
                          {"focal", p.pair.focal},
                          {"reference", p.pair.reference},
                          {"population",
                           {{"n_focal", pop.n_focal},
                            {"n_reference", pop.n_reference},
                            {"focal_mean", pop.focal_mean},
                            {"focal_sd", pop.focal_sd},
                            {"reference_mean", pop.reference_mean},
                            {"reference_sd", pop.reference_sd}}}});
  }
  j["response_seed"] = c.response_seed;
  j["scoring"] = {{"points", c.grid.points}, {"lo", c.grid.lo}, {"hi", c.grid.hi}};
  j["dif"] = {{"mh_variance", VarianceName(c.dif.mh_variance)},
              {"smd_weighting", WeightingName(c.dif.smd_weighting)},
              {"continuity_correction", c.dif.continuity_correction},
              {"min_n", c.min_n}};
  j["targets"] = {{"cutoffs", {c.cutoffs.low, c.cutoffs.high}},
                  {"fractions", {c.fractions.train, c.fractions.validation, c.fractions.test}},
                  {"split_seed", c.split_seed}};
  auto hp_json = [](const model::Hyperparameters& hp) {
    return json{{"embedding_dim", hp.embedding_dim},
                {"hidden", hp.hidden},
                {"learning_rate", hp.learning_rate},
                {"batch_size", hp.batch_size},
                {"epochs", hp.epochs},
                {"init_scale", hp.init_scale},
                {"max_length", hp.max_length}};
  };
  j["model"] = hp_json(c.hp);
  j["model"]["mode"] = targets::to_string(c.mode);
  j["model"]["seeds"] = c.seeds;
  if (c.continuous_hp) j["model"]["continuous"] = hp_json(*c.continuous_hp);
  j["explain"] = {{"context", ContextName(c.context)}};
  j["eval"] = {{"bias_items", c.eval.bias_items},
               {"top_threshold", c.eval.top.threshold},
               {"top_min_count", c.eval.top.min_count},
               {"top_k", c.eval.top.k},
               {"replacement_comparator", ComparatorName(c.eval.replacement_comparator)}};
  return j.dump(2);
}

std::string ModelPaths::model(std::uint64_t seed) const {
  return dir + "/model_seed" + std::to_string(seed) + ".json";
}

std::string ModelPaths::attributions(std::uint64_t seed) const {
  return dir + "/attributions_seed" + std::to_string(seed) + ".jsonl";
}

std::string bank_path(const PipelineConfig& c) { return c.output_dir + "/bank.jsonl"; }
std::string manifest_path(const PipelineConfig& c) { return c.output_dir + "/manifest.json"; }

PairPaths pair_paths(const PipelineConfig& c, const std::string& pair) {
  c.pair(pair);
  const std::string dir = c.output_dir + "/" + pair;
  return {dir, dir + "/responses.tsv", dir + "/theta.tsv", dir + "/dif.jsonl"};
}

ModelPaths model_paths(const PipelineConfig& c, const std::string& pair,
                       targets::Mode mode) {
  const std::string dir = pair_paths(c, pair).dir + "/" + targets::to_string(mode);
  return {dir,
          dir + "/dataset.jsonl",
          dir + "/attributions.jsonl",
          dir + "/eval.txt",
          dir + "/eval.jsonl",
          dir + "/report.html"};
}

void stage_simulate(const PipelineConfig& c, const std::vector<std::string>& pairs,
                    const RunOptions& o) {
  Stage("simulate", [&] {
    EnsureDir(c.output_dir);
    const std::string bp = bank_path(c);
    sim::ItemBank bank;
    if (Reuse(o, {bp})) {
      bank = io::load_bank(bp);
    } else {
      Log(o, "simulate: item bank");
      bank = sim::generate_item_bank(c.bank, c.bank_seed);
      io::save_bank(bank, bp);
    }
    std::vector<std::string> todo = pairs;
    if (todo.empty()) {
      for (const auto& p : c.pairs) todo.push_back(p.pair.name);
    }
    for (const auto& name : todo) {
      const auto pp = pair_paths(c, name);
      if (Reuse(o, {pp.responses})) continue;
      Log(o, "simulate: responses for " + name);
      EnsureDir(pp.dir);
      const auto& pc = c.pair(name);
      io::save_responses(sim::simulate_responses(bank, pc.population, pc.pair, c.response_seed),
                         pp.responses);
    }
  });
}

void stage_score(const PipelineConfig& c, const std::string& pair, const RunOptions& o) {
  Stage("score", [&] {
    const auto pp = pair_paths(c, pair);
    if (Reuse(o, {pp.theta})) return;
    Log(o, "score: " + pair);
    const auto bank = io::load_bank(bank_path(c));
    const auto responses = io::load_responses(pp.responses);
    io::save_theta(scoring::score_all(responses, bank, c.grid), pp.theta);
  });
}

void stage_dif(const PipelineConfig& c, const std::string& pair, const RunOptions& o) {
  Stage("dif", [&] {
    const auto pp = pair_paths(c, pair);
    if (Reuse(o, {pp.dif})) return;
    Log(o, "dif: " + pair);
    const auto& pc = c.pair(pair);
    const auto bank = io::load_bank(bank_path(c));
    const auto responses = io::load_responses(pp.responses);
    const auto theta = io::load_theta(pp.theta);
    if (theta.size() != responses.examinees.size()) {
      throw DataError("theta estimates do not match the response table");
    }
    std::vector<double> theta_hat;
    std::vector<double> reference;
    for (std::size_t e = 0; e < theta.size(); ++e) {
      if (theta[e].examinee_id != responses.examinees[e].examinee_id) {
        throw DataError("theta estimates are not in response-table order");
      }
      theta_hat.push_back(theta[e].theta_hat);
      if (responses.examinees[e].group == pc.pair.reference) {
        reference.push_back(theta[e].theta_hat);
      }
    }
    const auto bounds = scoring::build_strata(reference);
    std::vector<io::DifRecord> records;
    std::size_t skipped = 0;
    for (std::size_t i = 0; i < responses.item_ids.size(); ++i) {
      const auto& item = bank.at(responses.item_ids[i]);
      const auto counts =
          dif::tabulate(responses, theta_hat, bounds, pc.pair, i, item.max_score());
      try {
        records.push_back({item.item_id, pair, dif::item_dif(counts, item.kind, c.dif)});
      } catch (const UndefinedStatisticError& e) {
        ++skipped;
        Log(o, "dif: " + item.item_id + " skipped: " + e.what());
      }
    }
    if (skipped > 0) {
      Log(o, "dif: " + std::to_string(skipped) + " items without a defined statistic");
    }
    io::save_dif(records, pp.dif);
  });
}

void stage_targets(const PipelineConfig& c, const std::string& pair, targets::Mode mode,
                   const RunOptions& o) {
  Stage("targets", [&] {
    const auto mp = model_paths(c, pair, mode);
    if (Reuse(o, {mp.dataset})) return;
    Log(o, "targets: " + pair + " (" + targets::to_string(mode) + ")");
    EnsureDir(mp.dir);
    const auto bank = io::load_bank(bank_path(c));
    std::map<std::string, dif::DifResult> results;
    for (const auto& r : io::load_dif(pair_paths(c, pair).dif)) results[r.item_id] = r.result;
    std::vector<targets::ItemRef> refs;
    for (const auto& it : bank.items) refs.push_back({it.item_id, it.testlet_id});
    const auto split = targets::build_split(refs, c.fractions, c.split_seed);
    targets::AssembleOptions ao;
    ao.cutoffs = c.cutoffs;
    ao.min_n = c.min_n;
    io::save_dataset(targets::assemble(bank, results, split, mode, ao), mp.dataset);
  });
}

void stage_train(const PipelineConfig& c, const std::string& pair, targets::Mode mode,
                 const RunOptions& o) {
  Stage("train", [&] {
    const auto mp = model_paths(c, pair, mode);
    std::optional<targets::ModelDataset> data;
    for (const auto seed : c.seeds) {
      if (Reuse(o, {mp.model(seed)})) continue;
      if (!data) data = io::load_dataset(mp.dataset);
      if (data->mode != mode) throw DataError("dataset mode does not match");
      Log(o, "train: " + pair + " (" + targets::to_string(mode) + ") seed " +
                 std::to_string(seed));
      const auto result = model::train(*data, c.hyperparameters(mode), seed);
      model::save_model(result.model, mp.model(seed));
    }
  });
}

xai::OutputFn load_ensemble(const PipelineConfig& c, const std::string& pair,
                            targets::Mode mode) {
  const auto mp = model_paths(c, pair, mode);
  std::vector<std::shared_ptr<const model::TextModel>> members;
  for (const auto seed : c.seeds) {
    members.push_back(
        std::make_shared<const model::EmbeddingClassifier>(model::load_model(mp.model(seed))));
  }
  auto ens = std::make_shared<const model::Ensemble>(std::move(members));
  return [ens](const model::TokenSequence& seq) { return model::ensemble_predict(*ens, seq); };
}

void stage_explain(const PipelineConfig& c, const std::string& pair, targets::Mode mode,
                   const RunOptions& o) {
  Stage("explain", [&] {
    const auto mp = model_paths(c, pair, mode);
    const auto data = io::load_dataset(mp.dataset);
    const auto test = TestRecords(data);
    std::vector<std::vector<xai::AttributionSet>> per_seed;
    for (const auto seed : c.seeds) {
      const std::string path = mp.attributions(seed);
      if (Reuse(o, {path})) {
        per_seed.push_back(io::load_attributions(path));
        continue;
      }
      Log(o, "explain: " + pair + " (" + targets::to_string(mode) + ") seed " +
                 std::to_string(seed));
      const auto m = model::load_model(mp.model(seed));
      const xai::OutputFn fn = [&m](const model::TokenSequence& s) {
        return model::model_output(m, s);
      };
      std::vector<xai::AttributionSet> sets;
      for (const auto* r : test) {
        const model::TokenSequence seq(r->tokens, c.hyperparameters(mode).max_length);
        sets.push_back(xai::partition_attributions(fn, seq, xai::build_partition_tree(seq),
                                                   c.context, r->item_id));
      }
      io::save_attributions(sets, path);
      per_seed.push_back(std::move(sets));
    }
    if (Reuse(o, {mp.averaged})) return;
    std::vector<xai::AttributionSet> averaged;
    for (std::size_t i = 0; i < test.size(); ++i) {
      std::vector<xai::AttributionSet> group;
      for (const auto& s : per_seed) {
        if (s.size() != test.size()) {
          throw DataError("attribution file does not cover the test split");
        }
        group.push_back(s[i]);
      }
      averaged.push_back(xai::average_attributions(group));
    }
    io::save_attributions(averaged, mp.averaged);
  });
}

eval::EvalReport stage_evaluate(const PipelineConfig& c, const std::string& pair,
                                targets::Mode mode, const RunOptions& o) {
  return Stage("evaluate", [&] {
    Log(o, "evaluate: " + pair + " (" + targets::to_string(mode) + ")");
    const auto mp = model_paths(c, pair, mode);
    const auto data = io::load_dataset(mp.dataset);
    std::vector<targets::DatasetRecord> test;
    for (const auto* r : TestRecords(data)) test.push_back(*r);
    const auto averaged = io::load_attributions(mp.averaged);
    std::vector<std::vector<xai::AttributionSet>> per_seed;
    std::vector<std::string> labels;
    for (const auto seed : c.seeds) {
      per_seed.push_back(io::load_attributions(mp.attributions(seed)));
      labels.push_back("seed " + std::to_string(seed));
    }
    const auto report = eval::evaluate(mode, test, averaged, per_seed,
                                       load_ensemble(c, pair, mode), c.eval);
    io::write_text(mp.eval_text, report::format_eval_report(report, pair, labels));
    report::save_eval_report(report, pair, mp.eval_records);
    return report;
  });
}

void stage_report(const PipelineConfig& c, const std::string& pair, targets::Mode mode,
                  const RunOptions& o) {
  Stage("report", [&] {
    const auto mp = model_paths(c, pair, mode);
    if (Reuse(o, {mp.report})) return;
    Log(o, "report: " + pair + " (" + targets::to_string(mode) + ")");
    const auto data = io::load_dataset(mp.dataset);
    std::map<std::string, dif::DifResult> results;
    for (const auto& r : io::load_dif(pair_paths(c, pair).dif)) results[r.item_id] = r.result;
    std::map<std::string, xai::AttributionSet> attrs;
    for (auto& a : io::load_attributions(mp.averaged)) attrs[a.item_id] = std::move(a);
    std::vector<report::ReportItem> items;
    for (const auto* r : TestRecords(data)) {
      auto it = attrs.find(r->item_id);
      if (it == attrs.end()) {
        throw DataError("no attributions for test item '" + r->item_id + "'");
      }
      const auto dr = results.find(r->item_id);
      items.push_back({r->item_id, r->y,
                       dr == results.end() ? "" : dif::to_string(dr->second.classification),
                       it->second.output, it->second.tokens, it->second.folded});
    }
    report::render_report(items, mp.report,
                          "diflens: " + pair + " (" + targets::to_string(mode) + " model)");
  });
}

void write_manifest(const PipelineConfig& c) {
  Stage("manifest", [&] {
    const fs::path root(c.output_dir);
    const fs::path manifest(manifest_path(c));
    std::vector<std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
      if (!e.is_regular_file() || e.path() == manifest) continue;
      files.push_back(fs::relative(e.path(), root).generic_string());
    }
    std::sort(files.begin(), files.end());
    const std::string cfg = config_to_json(c);
    json j;
    j["format"] = "diflens.manifest";
    j["version"] = 1;
    j["tool_version"] = kVersion;
    j["config_sha256"] = io::sha256_string(cfg);
    j["config"] = json::parse(cfg);
    j["seeds"] = {{"bank", c.bank_seed},
                  {"responses", c.response_seed},
                  {"split", c.split_seed},
                  {"models", c.seeds}};
    j["artifacts"] = json::array();
    for (const auto& f : files) {
      j["artifacts"].push_back({{"path", f}, {"sha256", io::sha256_file((root / f).string())}});
    }
    io::write_text(manifest.string(), j.dump(2) + "\n");
  });
}

PipelineResult run_pipeline(const PipelineConfig& c, const RunOptions& o) {
  validate(c);
  PipelineResult result;
  stage_simulate(c, {}, o);
  for (const auto& p : c.pairs) {
    const std::string& name = p.pair.name;
    stage_score(c, name, o);
    stage_dif(c, name, o);
    stage_targets(c, name, c.mode, o);
    stage_train(c, name, c.mode, o);
    stage_explain(c, name, c.mode, o);
    result.reports[name] = stage_evaluate(c, name, c.mode, o);
    stage_report(c, name, c.mode, o);
  }
  write_manifest(c);
  return result;
}

Comparison compare_modes(const PipelineConfig& c, const std::string& pair,
                         const RunOptions& o) {
  validate(c);
  stage_simulate(c, {pair}, o);
  stage_score(c, pair, o);
  stage_dif(c, pair, o);
  Comparison out;
  std::vector<report::ComparisonRow> rows;
  std::vector<std::string> labels;
  for (const auto seed : c.seeds) labels.push_back("seed " + std::to_string(seed));
  for (const auto mode : {targets::Mode::kCategorical, targets::Mode::kContinuous}) {
    stage_targets(c, pair, mode, o);
    stage_train(c, pair, mode, o);
    stage_explain(c, pair, mode, o);
    auto rep = stage_evaluate(c, pair, mode, o);
    for (auto& row : report::comparison_rows(rep, labels)) rows.push_back(std::move(row));
    (mode == targets::Mode::kCategorical ? out.categorical : out.continuous) = std::move(rep);
  }
  out.table = report::format_comparison(rows);
  io::write_text(pair_paths(c, pair).dir + "/compare.txt", out.table);
  return out;
}

}  // namespace diflens::pipeline
