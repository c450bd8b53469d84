// derev/errors.hpp

// Copyright 2026

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef DEREV_ERRORS_HPP
#define DEREV_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace derev {

// Input/usage class of failures (CLI exit code 2).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : UsageError {
  using UsageError::UsageError;
};

struct FormatError : UsageError {
  using UsageError::UsageError;
};

struct ConfigError : UsageError {
  using UsageError::UsageError;
};

struct PreconditionError : UsageError {
  using UsageError::UsageError;
};

struct DegenerateInputError : UsageError {
  using UsageError::UsageError;
};

struct LookupError : UsageError {
  using UsageError::UsageError;
};

struct AlignmentError : UsageError {
  using UsageError::UsageError;
};

// Numerical class of failures (CLI exit code 1).
struct NumericalError : std::runtime_error {
  explicit NumericalError(const std::string& msg, int bin = -1)
      : std::runtime_error(msg), bin_index(bin) {}
  int bin_index;
};

}  // namespace derev

#endif  // DEREV_ERRORS_HPP
