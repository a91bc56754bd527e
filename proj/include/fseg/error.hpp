// Copyright 2026 The fseg Authors.
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

namespace fseg {

// Base of every error thrown by the library. The CLI maps the concrete
// subclasses onto its exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor shapes or dimensions that do not fit an operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration values or combinations.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed files, unreadable paths, inconsistent datasets.
class IoError : public Error {
 public:
  using Error::Error;
};

// Checkpoint / weight container problems (names, shapes, bytes).
class LoadError : public IoError {
 public:
  using IoError::IoError;
};

// NaN/Inf values, degenerate statistics, failed gradient checks.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Inputs that violate an operation's documented precondition.
class ContractError : public Error {
 public:
  using Error::Error;
};

}  // namespace fseg
