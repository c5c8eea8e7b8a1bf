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

// Human-readable outputs: the HTML highlight report and plain-text tables.

#ifndef DIFLENS_REPORT_H_
#define DIFLENS_REPORT_H_

#include <optional>
#include <string>
#include <vector>

#include "diflens/eval.h"

namespace diflens::report {

struct ReportItem {
  std::string item_id;
  double y = 0.0;  // observed DIF
  std::string classification;
  std::vector<double> output;  // predicted class probabilities or value
  std::vector<std::string> tokens;
  std::vector<double> folded;
};

// Self-contained HTML document, one section per item. Token backgrounds are
// scaled by |phi| / max |phi| over the whole report; red favors the
// reference group and blue the focal group.
std::string render_html(const std::vector<ReportItem>& items,
                        const std::string& title);
void render_report(const std::vector<ReportItem>& items, const std::string& path,
                   const std::string& title = "diflens token attributions");

// Plain-text tables for one evaluated model. seed_labels name per_seed rows.
std::string format_eval_report(const eval::EvalReport& report,
                               const std::string& label,
                               const std::vector<std::string>& seed_labels);

// Line-delimited machine-readable form of an evaluation report.
void save_eval_report(const eval::EvalReport& report, const std::string& label,
                      const std::string& path);

struct ComparisonRow {
  std::string mode;
  std::string source;  // seed label or "averaged"
  eval::AttributionStats stats;
};

std::vector<ComparisonRow> comparison_rows(
    const eval::EvalReport& report, const std::vector<std::string>& seed_labels);

// Mode x source table with M, SD, kurtosis, bias and r(phi, Y).
std::string format_comparison(const std::vector<ComparisonRow>& rows);

}  // namespace diflens::report

#endif  // DIFLENS_REPORT_H_
