// Copyright 2026 The cpclab Authors
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

#ifndef CPC_ERRORS_HPP_
#define CPC_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace cpc {

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Dimension or rank mismatch between tensors.
class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& what) : Error(what) {}
};

/// Invalid numeric/domain input (negative ratio, empty vector, ...).
class ValueError : public Error {
 public:
  explicit ValueError(const std::string& what) : Error(what) {}
};

/// Experiment configuration failed validation.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(what) {}
};

/// File format or filesystem failure.
class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(what) {}
};

/// A negative-sampling strategy has an empty eligible set for this anchor.
class InfeasibleStrategyError : public Error {
 public:
  explicit InfeasibleStrategyError(const std::string& what) : Error(what) {}
};

}  // namespace cpc

#endif  // CPC_ERRORS_HPP_
