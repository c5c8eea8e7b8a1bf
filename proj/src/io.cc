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

#include "diflens/io.h"

#include <openssl/evp.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "diflens/error.h"
#include "json.hpp"

namespace diflens::io {
namespace {

using nlohmann::json;

std::string Format(const std::string& kind) { return "diflens." + kind; }

std::ofstream OpenOut(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path);
  return out;
}

std::ifstream OpenIn(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path);
  return in;
}

void CheckFinite(double v, const std::string& what) {
  if (!std::isfinite(v)) throw NumericalError("non-finite value in " + what);
}

class JsonlWriter {
 public:
  JsonlWriter(const std::string& path, const std::string& kind, json extra = json::object())
      : path_(path), out_(OpenOut(path)) {
    json header = {{"format", Format(kind)}, {"version", kFormatVersion}};
    header.update(extra);
    out_ << header.dump() << "\n";
  }
  void Write(const json& j) { out_ << j.dump() << "\n"; }
  ~JsonlWriter() = default;

 private:
  std::string path_;
  std::ofstream out_;
};

// Returns the header; body receives the remaining records.
json ReadJsonl(const std::string& path, const std::string& kind,
               std::vector<json>& body) {
  std::ifstream in = OpenIn(path);
  std::string line;
  json header;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    if (header.is_null()) {
      if (!j.is_object() || j.value("format", "") != Format(kind) ||
          j.value("version", 0) != kFormatVersion) {
        throw DataError(path + ": expected header for " + Format(kind) + " version " +
                        std::to_string(kFormatVersion));
      }
      header = std::move(j);
    } else {
      body.push_back(std::move(j));
    }
  }
  if (header.is_null()) throw DataError(path + ": missing header record");
  return header;
}

template <typename F>
auto Guard(const std::string& path, F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
}

std::string Real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> SplitTabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    out.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return out;
}

double ParseReal(const std::string& s, const std::string& where) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty()) throw DataError(where + ": bad number '" + s + "'");
  return v;
}

int ParseInt(const std::string& s, const std::string& where) {
  std::size_t used = 0;
  int v = 0;
  try {
    v = std::stoi(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty()) throw DataError(where + ": bad integer '" + s + "'");
  return v;
}

void ExpectTsvHeader(std::istream& in, const std::string& kind, const std::string& path) {
  std::string line;
  const std::string want = "#format=" + Format(kind) + "/" + std::to_string(kFormatVersion);
  if (!std::getline(in, line) || line != want) {
    throw DataError(path + ": expected first line '" + want + "'");
  }
}

}  // namespace

void save_bank(const sim::ItemBank& bank, const std::string& path) {
  JsonlWriter w(path, "bank", {{"pairs", bank.pairs}});
  for (const auto& it : bank.items) {
    json j;
    j["item_id"] = it.item_id;
    j["testlet_id"] = it.testlet_id ? json(*it.testlet_id) : json(nullptr);
    j["kind"] = it.kind == sim::ItemKind::kDichotomous ? "dichotomous" : "polytomous";
    j["a"] = it.a;
    if (it.kind == sim::ItemKind::kDichotomous) {
      j["b"] = it.b;
    } else {
      j["thresholds"] = it.thresholds;
    }
    j["tokens"] = it.tokens;
    j["dif_shift"] = it.dif_shift;
    j["marker_tokens"] = it.marker_tokens;
    w.Write(j);
  }
}

sim::ItemBank load_bank(const std::string& path) {
  std::vector<json> body;
  const json header = ReadJsonl(path, "bank", body);
  return Guard(path, [&] {
    sim::ItemBank bank;
    bank.pairs = header.at("pairs").get<std::vector<std::string>>();
    for (const auto& j : body) {
      sim::ItemSpec it;
      it.item_id = j.at("item_id");
      if (!j.at("testlet_id").is_null()) it.testlet_id = j.at("testlet_id");
      const std::string kind = j.at("kind");
      if (kind == "dichotomous") {
        it.kind = sim::ItemKind::kDichotomous;
        it.b = j.at("b");
      } else if (kind == "polytomous") {
        it.kind = sim::ItemKind::kPolytomous;
        it.thresholds = j.at("thresholds").get<std::vector<double>>();
      } else {
        throw DataError(path + ": unknown item kind '" + kind + "'");
      }
      it.a = j.at("a");
      it.tokens = j.at("tokens").get<std::vector<std::string>>();
      it.dif_shift = j.at("dif_shift").get<std::map<std::string, double>>();
      it.marker_tokens = j.at("marker_tokens").get<std::vector<std::string>>();
      bank.items.push_back(std::move(it));
    }
    return bank;
  });
}

void save_responses(const sim::ResponseTable& table, const std::string& path) {
  std::ofstream out = OpenOut(path);
  out << "#format=" << Format("responses") << "/" << kFormatVersion << "\n";
  out << "examinee_id\tgroup\ttheta";
  for (const auto& id : table.item_ids) out << "\t" << id;
  out << "\n";
  for (std::size_t e = 0; e < table.examinees.size(); ++e) {
    const auto& ex = table.examinees[e];
    out << ex.examinee_id << "\t" << ex.group << "\t" << Real(ex.theta);
    for (const int s : table.row(e)) out << "\t" << s;
    out << "\n";
  }
}

sim::ResponseTable load_responses(const std::string& path) {
  std::ifstream in = OpenIn(path);
  ExpectTsvHeader(in, "responses", path);
  std::string line;
  if (!std::getline(in, line)) throw DataError(path + ": missing column names");
  const auto cols = SplitTabs(line);
  if (cols.size() < 3 || cols[0] != "examinee_id" || cols[1] != "group" ||
      cols[2] != "theta") {
    throw DataError(path + ": columns must begin examinee_id, group, theta");
  }
  sim::ResponseTable t;
  t.item_ids.assign(cols.begin() + 3, cols.end());
  std::size_t lineno = 2;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::string where = path + ":" + std::to_string(lineno);
    const auto f = SplitTabs(line);
    if (f.size() != cols.size()) throw DataError(where + ": wrong column count");
    t.examinees.push_back({f[0], f[1], ParseReal(f[2], where)});
    for (std::size_t i = 3; i < f.size(); ++i) {
      const int s = ParseInt(f[i], where);
      if (s < 0) throw DataError(where + ": missing or negative score");
      t.scores.push_back(s);
    }
  }
  return t;
}

void save_theta(const std::vector<scoring::AbilityEstimate>& est,
                const std::string& path) {
  std::ofstream out = OpenOut(path);
  out << "#format=" << Format("theta") << "/" << kFormatVersion << "\n";
  out << "examinee_id\ttheta_hat\n";
  for (const auto& e : est) {
    CheckFinite(e.theta_hat, "theta estimates");
    out << e.examinee_id << "\t" << Real(e.theta_hat) << "\n";
  }
}

std::vector<scoring::AbilityEstimate> load_theta(const std::string& path) {
  std::ifstream in = OpenIn(path);
  ExpectTsvHeader(in, "theta", path);
  std::string line;
  if (!std::getline(in, line) || line != "examinee_id\ttheta_hat") {
    throw DataError(path + ": expected columns examinee_id, theta_hat");
  }
  std::vector<scoring::AbilityEstimate> out;
  std::size_t lineno = 2;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = SplitTabs(line);
    const std::string where = path + ":" + std::to_string(lineno);
    if (f.size() != 2) throw DataError(where + ": expected two columns");
    out.push_back({f[0], ParseReal(f[1], where)});
  }
  return out;
}

void save_dif(const std::vector<DifRecord>& records, const std::string& path) {
  JsonlWriter w(path, "dif");
  for (const auto& r : records) {
    CheckFinite(r.result.statistic, "DIF statistic for " + r.item_id);
    CheckFinite(r.result.se, "DIF standard error for " + r.item_id);
    w.Write({{"item_id", r.item_id},
             {"pair", r.pair},
             {"scale", dif::to_string(r.result.scale)},
             {"statistic", r.result.statistic},
             {"se", r.result.se},
             {"n_focal", r.result.n_focal},
             {"n_reference", r.result.n_reference},
             {"classification", dif::to_string(r.result.classification)},
             {"direction", dif::to_string(r.result.direction)}});
  }
}

std::vector<DifRecord> load_dif(const std::string& path) {
  std::vector<json> body;
  ReadJsonl(path, "dif", body);
  return Guard(path, [&] {
    std::vector<DifRecord> out;
    for (const auto& j : body) {
      DifRecord r;
      r.item_id = j.at("item_id");
      r.pair = j.at("pair");
      r.result.scale = dif::scale_from_string(j.at("scale"));
      r.result.statistic = j.at("statistic");
      r.result.se = j.at("se");
      r.result.n_focal = j.at("n_focal");
      r.result.n_reference = j.at("n_reference");
      r.result.classification = dif::classification_from_string(j.at("classification"));
      r.result.direction = dif::direction_from_string(j.at("direction"));
      out.push_back(std::move(r));
    }
    return out;
  });
}

void save_dataset(const targets::ModelDataset& data, const std::string& path) {
  JsonlWriter w(path, "dataset", {{"mode", targets::to_string(data.mode)}});
  for (const auto& r : data.records) {
    json j = {{"item_id", r.item_id},
              {"split", targets::to_string(r.split)},
              {"tokens", r.tokens},
              {"y", r.y},
              {"se", r.se}};
    if (data.mode == targets::Mode::kCategorical) {
      j["target"] = {{"p1", r.target.p[0]}, {"p2", r.target.p[1]}, {"p3", r.target.p[2]}};
    } else {
      j["target"] = {{"y", r.y}};
    }
    w.Write(j);
  }
}

targets::ModelDataset load_dataset(const std::string& path) {
  std::vector<json> body;
  const json header = ReadJsonl(path, "dataset", body);
  return Guard(path, [&] {
    targets::ModelDataset data;
    data.mode = targets::mode_from_string(header.at("mode"));
    for (const auto& j : body) {
      targets::DatasetRecord r;
      r.item_id = j.at("item_id");
      r.split = targets::split_from_string(j.at("split"));
      r.tokens = j.at("tokens").get<std::vector<std::string>>();
      r.y = j.at("y");
      r.se = j.at("se");
      if (data.mode == targets::Mode::kCategorical) {
        const auto& t = j.at("target");
        r.target.p = {t.at("p1"), t.at("p2"), t.at("p3")};
      }
      data.records.push_back(std::move(r));
    }
    return data;
  });
}

void save_attributions(const std::vector<xai::AttributionSet>& sets,
                       const std::string& path) {
  JsonlWriter w(path, "attributions");
  for (const auto& s : sets) {
    json j = {{"item_id", s.item_id}, {"tokens", s.tokens}};
    if (s.n_classes() == 3) {
      j["phi_ref"] = s.phi[0];
      j["phi_no"] = s.phi[1];
      j["phi_focal"] = s.phi[2];
    } else {
      j["phi"] = s.phi.at(0);
    }
    j["folded"] = s.folded;
    j["base"] = s.base;
    j["output"] = s.output;
    w.Write(j);
  }
}

std::vector<xai::AttributionSet> load_attributions(const std::string& path) {
  std::vector<json> body;
  ReadJsonl(path, "attributions", body);
  return Guard(path, [&] {
    std::vector<xai::AttributionSet> out;
    for (const auto& j : body) {
      xai::AttributionSet s;
      s.item_id = j.at("item_id");
      s.tokens = j.at("tokens").get<std::vector<std::string>>();
      if (j.contains("phi_ref")) {
        for (const char* k : {"phi_ref", "phi_no", "phi_focal"}) {
          s.phi.push_back(j.at(k).get<std::vector<double>>());
        }
      } else {
        s.phi.push_back(j.at("phi").get<std::vector<double>>());
      }
      s.folded = j.at("folded").get<std::vector<double>>();
      s.base = j.at("base").get<std::vector<double>>();
      s.output = j.at("output").get<std::vector<double>>();
      for (const auto& row : s.phi) {
        if (row.size() != s.tokens.size()) {
          throw DataError(path + ": attribution length mismatch for item '" +
                          s.item_id + "'");
        }
      }
      out.push_back(std::move(s));
    }
    return out;
  });
}

namespace {

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new()) {
    if (ctx_ == nullptr || EVP_DigestInit_ex(ctx_, EVP_sha256(), nullptr) != 1) {
      EVP_MD_CTX_free(ctx_);
      throw Error("sha256: digest initialisation failed");
    }
  }
  ~Sha256() { EVP_MD_CTX_free(ctx_); }
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  void Update(const char* data, std::size_t n) { EVP_DigestUpdate(ctx_, data, n); }

  std::string HexDigest() {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx_, md, &len);
    static const char* kHex = "0123456789abcdef";
    std::string hex;
    for (unsigned int i = 0; i < len; ++i) {
      hex.push_back(kHex[md[i] >> 4]);
      hex.push_back(kHex[md[i] & 15]);
    }
    return hex;
  }

 private:
  EVP_MD_CTX* ctx_;
};

}  // namespace

std::string sha256_file(const std::string& path) {
  std::ifstream in = OpenIn(path);
  Sha256 h;
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    const std::streamsize got = in.gcount();
    if (got > 0) h.Update(buf.data(), static_cast<std::size_t>(got));
  }
  return h.HexDigest();
}

std::string sha256_string(const std::string& bytes) {
  Sha256 h;
  h.Update(bytes.data(), bytes.size());
  return h.HexDigest();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out = OpenOut(path);
  out << text;
}

std::string read_text(const std::string& path) {
  std::ifstream in = OpenIn(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace diflens::io
