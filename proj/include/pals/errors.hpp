// Copyright 2026 The PALS Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace pals {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Argument outside the domain of a mathematical function.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Inputs that make a fit meaningless (e.g. all row weights zero).
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

// Non-finite objective or gradient during minimization. Carries the last
// point at which both were finite.
class OptimizationError : public Error {
 public:
  OptimizationError(const std::string& what, std::vector<double> last_point)
      : Error(what), last_point_(std::move(last_point)) {}

  const std::vector<double>& last_point() const { return last_point_; }

 private:
  std::vector<double> last_point_;
};

// Non-finite quantity inside variational inference.
class InferenceError : public Error {
 public:
  using Error::Error;
};

class BinningError : public Error {
 public:
  using Error::Error;
};

// Metric undefined for the input (e.g. single-class labels for AUC).
class MetricError : public Error {
 public:
  using Error::Error;
};

// Invalid or inconsistent configuration / model inputs.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed input file. The message names the file, row and column.
class FormatError : public Error {
 public:
  using Error::Error;
};

// File could not be opened or written.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace pals
