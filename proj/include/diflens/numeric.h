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

#ifndef DIFLENS_NUMERIC_H_
#define DIFLENS_NUMERIC_H_

#include <span>

namespace diflens {

// Standard normal CDF, 0.5 * erfc(-x / sqrt(2)). Absolute error is at the
// level of double rounding (well under 1e-12) across the real line.
double NormalCdf(double x);

// 1 / (1 + exp(-x)), evaluated without overflow for large |x|.
double Logistic(double x);
// log(Logistic(x)), stable for large |x|.
double LogLogistic(double x);

double Mean(std::span<const double> x);
// Population standard deviation (divisor n).
double PopulationSd(std::span<const double> x);
// Sample standard deviation (divisor n - 1); 0 for n < 2.
double SampleSd(std::span<const double> x);
// Pearson correlation; 0 when either side has zero variance.
double Pearson(std::span<const double> x, std::span<const double> y);

}  // namespace diflens

#endif  // DIFLENS_NUMERIC_H_
