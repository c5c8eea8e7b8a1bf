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

#include "diflens/report.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "diflens/error.h"
#include "json.hpp"

namespace diflens::report {
namespace {

std::string Escape(const std::string& s) {
  std::string out;
  for (const char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&#39;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

std::string Fmt(const char* fmt, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

std::string Dir(double y) {
  if (y < 0) return "reference";
  if (y > 0) return "focal";
  return "neither group";
}

}  // namespace

std::string render_html(const std::vector<ReportItem>& items,
                        const std::string& title) {
  double max_abs = 0.0;
  for (const auto& it : items) {
    if (it.tokens.size() != it.folded.size()) {
      throw DataError("render_report: item '" + it.item_id + "' has " +
                      std::to_string(it.tokens.size()) + " tokens but " +
                      std::to_string(it.folded.size()) + " attributions");
    }
    for (const double v : it.folded) {
      if (!std::isfinite(v)) {
        throw NumericalError("render_report: non-finite attribution in item '" +
                             it.item_id + "'");
      }
      max_abs = std::max(max_abs, std::abs(v));
    }
  }

  std::ostringstream h;
  h << "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\"/>\n"
    << "<title>" << Escape(title) << "</title>\n<style>\n"
    << "body { font-family: sans-serif; max-width: 60em; margin: 2em auto; }\n"
    << "section.item { border-top: 1px solid #ccc; padding: 0.5em 0; }\n"
    << "p.text span { padding: 0 1px; border-radius: 2px; }\n"
    << ".legend span { padding: 0 0.4em; }\n"
    << "</style>\n</head>\n<body>\n"
    << "<h1>" << Escape(title) << "</h1>\n"
    << "<p class=\"legend\"><span style=\"background-color: rgba(214, 39, 40, 0.6)\">"
       "favors reference</span> <span style=\"background-color: rgba(31, 119, 180, 0.6)\">"
       "favors focal</span> Shading is proportional to |phi| (max |phi| = "
    << Escape(Fmt("%.4g", max_abs)) << ").</p>\n";

  for (const auto& it : items) {
    h << "<section class=\"item\" id=\"" << Escape(it.item_id) << "\">\n"
      << "<h2>" << Escape(it.item_id) << "</h2>\n"
      << "<p class=\"dif\">Observed DIF: " << Fmt("%.2f", it.y) << " (favors "
      << Dir(it.y) << ")";
    if (!it.classification.empty()) h << ", class " << Escape(it.classification);
    h << "</p>\n<p class=\"prediction\">";
    if (it.output.size() == 3) {
      const auto best = static_cast<std::size_t>(
          std::max_element(it.output.begin(), it.output.end()) - it.output.begin());
      static const char* kNames[] = {"reference", "neither group", "focal"};
      h << "Predicted favoring: " << kNames[best] << " p=" << Fmt("%.2f", it.output[best])
        << " (reference p=" << Fmt("%.2f", it.output[0])
        << ", none p=" << Fmt("%.2f", it.output[1])
        << ", focal p=" << Fmt("%.2f", it.output[2]) << ")";
    } else if (it.output.size() == 1) {
      h << "Predicted DIF: " << Fmt("%.2f", it.output[0]);
    }
    h << "</p>\n<p class=\"text\">";
    for (std::size_t t = 0; t < it.tokens.size(); ++t) {
      const double v = it.folded[t];
      if (t > 0) h << " ";
      h << "<span title=\"phi=" << Fmt("%.6g", v) << "\"";
      if (max_abs > 0 && v != 0.0) {
        const double alpha = std::abs(v) / max_abs;
        h << " style=\"background-color: "
          << (v < 0 ? "rgba(214, 39, 40, " : "rgba(31, 119, 180, ")
          << Fmt("%.3f", alpha) << ")\"";
      }
      h << ">" << Escape(it.tokens[t]) << "</span>";
    }
    h << "</p>\n</section>\n";
  }
  h << "</body>\n</html>\n";
  return h.str();
}

void render_report(const std::vector<ReportItem>& items, const std::string& path,
                   const std::string& title) {
  const std::string html = render_html(items, title);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path);
  out << html;
}

namespace {

std::string Cell(double v, const char* fmt = "%9.4f") { return Fmt(fmt, v); }

std::string StatsHeader() {
  return "  source        n_tok        M       SD  kurtosis      bias   bias_se  r(phi,Y)\n";
}

std::string StatsRow(const std::string& source, const eval::AttributionStats& s) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "  %-12s %6zu %9.5f %8.5f %9.2f %9.5f %9.5f %9.4f\n",
                source.c_str(), s.n_tokens, s.mean, s.sd, s.kurtosis, s.bias,
                s.bias_se, s.r_phi_y);
  return buf;
}

std::string ReplacementRow(const std::string& name,
                           const std::optional<eval::ReplacementStats>& r) {
  char buf[256];
  if (!r) {
    std::snprintf(buf, sizeof buf, "  %-18s  (no eligible items)\n", name.c_str());
  } else {
    std::snprintf(buf, sizeof buf, "  %-18s %8.4f %8.4f %8.4f %6zu %6zu\n", name.c_str(),
                  r->r, r->rmse, r->bias, r->n_used, r->n_skipped);
  }
  return buf;
}

std::string ClassRow(const std::string& name, const eval::ClassSummary& c) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "  %-18s %6.3f (%5.3f) %8.4f %8.4f %8.4f\n",
                name.c_str(), c.mean, c.sd, c.r, c.rmse, c.bias);
  return buf;
}

std::string TopRow(const std::vector<eval::TokenScore>& top) {
  if (top.empty()) return "(none)";
  std::string s;
  for (std::size_t i = 0; i < top.size(); ++i) {
    if (i > 0) s += ", ";
    s += top[i].token + " (" + Fmt("%.4f", top[i].mean) + ", n=" +
         std::to_string(top[i].count) + ")";
  }
  return s;
}

std::string SeedLabel(const std::vector<std::string>& labels, std::size_t i) {
  return i < labels.size() ? labels[i] : "seed_" + std::to_string(i + 1);
}

}  // namespace

std::string format_eval_report(const eval::EvalReport& r, const std::string& label,
                               const std::vector<std::string>& seed_labels) {
  std::ostringstream o;
  const bool cat = r.mode == targets::Mode::kCategorical;
  o << "Evaluation: " << label << " (" << targets::to_string(r.mode) << ", "
    << r.n_items << " test items)\n\n";
  o << "  R^2        " << Cell(r.r_squared) << "\n"
    << "  " << (cat ? "CEL        " : "MSE        ") << Cell(r.loss) << "\n";
  if (r.seed_r) o << "  r(seeds)   " << Cell(*r.seed_r) << "\n";
  if (r.reliability) o << "  rho_phi    " << Cell(*r.reliability) << "\n";
  o << "\nToken attribution summary\n" << StatsHeader();
  for (std::size_t i = 0; i < r.per_seed.size(); ++i) {
    o << StatsRow(SeedLabel(seed_labels, i), r.per_seed[i]);
  }
  o << StatsRow("averaged", r.attributions);
  if (r.predictions) {
    o << "\nPrediction summary\n"
      << "  class                M (SD)           r     RMSE     bias\n"
      << ClassRow("P1 favors ref", r.predictions->reference)
      << ClassRow("P3 favors focal", r.predictions->focal);
  }
  o << "\nToken attribution accuracy (replacement test)\n"
    << "  direction                 r     RMSE     bias   used  skipped\n"
    << ReplacementRow("favors reference", r.replace_reference)
    << ReplacementRow("favors focal", r.replace_focal);
  o << "\nTop tokens\n"
    << "  favors reference: " << TopRow(r.top_reference) << "\n"
    << "  favors focal:     " << TopRow(r.top_focal) << "\n";
  return o.str();
}

void save_eval_report(const eval::EvalReport& r, const std::string& label,
                      const std::string& path) {
  using nlohmann::json;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path);
  auto emit = [&](const json& j) { out << j.dump() << "\n"; };
  emit({{"format", "diflens.eval"}, {"version", 1}, {"label", label}});
  json summary = {{"record", "summary"},
                  {"mode", targets::to_string(r.mode)},
                  {"n_items", r.n_items},
                  {"r_squared", r.r_squared},
                  {"loss", r.loss}};
  summary["seed_r"] = r.seed_r ? json(*r.seed_r) : json(nullptr);
  summary["reliability"] = r.reliability ? json(*r.reliability) : json(nullptr);
  emit(summary);
  auto stats = [&](const std::string& source, const eval::AttributionStats& s) {
    emit({{"record", "attribution_stats"}, {"source", source}, {"n_tokens", s.n_tokens},
          {"mean", s.mean}, {"sd", s.sd}, {"kurtosis", s.kurtosis}, {"bias", s.bias},
          {"bias_se", s.bias_se}, {"n_bias_items", s.n_bias_items},
          {"r_phi_y", s.r_phi_y}});
  };
  for (std::size_t i = 0; i < r.per_seed.size(); ++i) {
    stats("seed_" + std::to_string(i + 1), r.per_seed[i]);
  }
  stats("averaged", r.attributions);
  if (r.predictions) {
    auto cls = [&](const std::string& name, const eval::ClassSummary& c) {
      emit({{"record", "prediction"}, {"class", name}, {"mean", c.mean}, {"sd", c.sd},
            {"r", c.r}, {"rmse", c.rmse}, {"bias", c.bias}});
    };
    cls("favors_reference", r.predictions->reference);
    cls("favors_focal", r.predictions->focal);
  }
  auto rep = [&](const std::string& dir, const std::optional<eval::ReplacementStats>& s) {
    json j = {{"record", "replacement"}, {"direction", dir}};
    if (s) {
      j.update({{"r", s->r}, {"rmse", s->rmse}, {"bias", s->bias},
                {"n_used", s->n_used}, {"n_skipped", s->n_skipped}});
    } else {
      j["n_used"] = 0;
    }
    emit(j);
  };
  rep("favors_reference", r.replace_reference);
  rep("favors_focal", r.replace_focal);
  auto top = [&](const std::string& dir, const std::vector<eval::TokenScore>& list) {
    for (std::size_t i = 0; i < list.size(); ++i) {
      emit({{"record", "top_token"}, {"direction", dir}, {"rank", i + 1},
            {"token", list[i].token}, {"mean", list[i].mean}, {"count", list[i].count}});
    }
  };
  top("favors_reference", r.top_reference);
  top("favors_focal", r.top_focal);
}

std::vector<ComparisonRow> comparison_rows(const eval::EvalReport& report,
                                           const std::vector<std::string>& seed_labels) {
  std::vector<ComparisonRow> rows;
  const std::string mode = targets::to_string(report.mode);
  for (std::size_t i = 0; i < report.per_seed.size(); ++i) {
    rows.push_back({mode, SeedLabel(seed_labels, i), report.per_seed[i]});
  }
  rows.push_back({mode, "averaged", report.attributions});
  return rows;
}

std::string format_comparison(const std::vector<ComparisonRow>& rows) {
  std::ostringstream o;
  o << "Comparing token attributions\n"
    << "  mode          source              M         SD   kurtosis       bias  r(phi,Y)\n";
  for (const auto& row : rows) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "  %-13s %-12s %10.5f %10.5f %10.2f %10.5f %9.4f\n",
                  row.mode.c_str(), row.source.c_str(), row.stats.mean, row.stats.sd,
                  row.stats.kurtosis, row.stats.bias, row.stats.r_phi_y);
    o << buf;
  }
  return o.str();
}

}  // namespace diflens::report
