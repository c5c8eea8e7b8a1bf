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

#ifndef DIFLENS_ERROR_H_
#define DIFLENS_ERROR_H_

#include <stdexcept>
#include <string>

namespace diflens {

// Root of every error the library throws. The CLI maps the three direct
// subclasses onto exit codes 2, 3 and 4.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

// Precondition on a numeric argument violated (e.g. a non-positive
// discrimination).
class DomainError : public DataError {
 public:
  using DataError::DataError;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

// Which side of the Mantel-Haenszel odds-ratio fraction (or pooled SD) is zero.
enum class ZeroSide { kNumerator, kDenominator, kBoth };

class UndefinedStatisticError : public NumericalError {
 public:
  UndefinedStatisticError(const std::string& what, ZeroSide side)
      : NumericalError(what), side_(side) {}
  ZeroSide side() const { return side_; }

 private:
  ZeroSide side_;
};

class DivergenceError : public NumericalError {
 public:
  DivergenceError(const std::string& what, int epoch)
      : NumericalError(what), epoch_(epoch) {}
  int epoch() const { return epoch_; }

 private:
  int epoch_;
};

}  // namespace diflens

#endif  // DIFLENS_ERROR_H_
