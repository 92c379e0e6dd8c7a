// Copyright 2026 The blockmod Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef BLOCKMOD_ERRORS_HPP
#define BLOCKMOD_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace blockmod {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed arguments: wrong shapes, non-Hermitian input, bad parameters.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// A linear map that violates hermiticity preservation or its kind's invariants.
class InvalidMap : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

class NumericalSingularity : public Error {
 public:
  NumericalSingularity(const std::string& what, double condition)
      : Error(what + " (condition estimate " + std::to_string(condition) + ")"),
        condition_(condition) {}
  double condition() const { return condition_; }

 private:
  double condition_;
};

/// The operation has no closed form for this measure variant.
class UnsupportedVariant : public Error {
 public:
  using Error::Error;
};

/// The requested combination of map and method cannot be served.
class UnsupportedConfiguration : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : Error(what + " (last residual " + std::to_string(residual) + ")"), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

/// Result failed a post-hoc accuracy check (mass, stability); usually fixed by a finer grid.
class AccuracyError : public Error {
 public:
  using Error::Error;
};

/// An iterate left the half-plane on which the transform is defined.
class DomainError : public Error {
 public:
  using Error::Error;
};

}  // namespace blockmod

#endif  // BLOCKMOD_ERRORS_HPP
