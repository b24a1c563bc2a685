// Copyright 2026 The infercarbon Authors.
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

#include <cstddef>
#include <stdexcept>
#include <string>

namespace infercarbon {

// Base of every error the library throws. Configuration-class errors map to
// CLI exit code 2, everything else to exit code 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual bool is_config_error() const { return false; }
};

class ConfigError : public Error {
 public:
  using Error::Error;
  bool is_config_error() const override { return true; }
};

class DivisibilityError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class RangeError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class UnsupportedKind : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class PartitionError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class MissingThroughput : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class UnknownFormat : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class EmptyPrior : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class MissingColumn : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class ParseError : public ConfigError {
 public:
  ParseError(std::size_t line, const std::string& what)
      : ConfigError("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class ZeroTraffic : public Error {
 public:
  using Error::Error;
};

class NonFiniteFeature : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class NonFiniteLoss : public Error {
 public:
  NonFiniteLoss(int epoch, const std::string& what)
      : Error("epoch " + std::to_string(epoch) + ": " + what), epoch_(epoch) {}
  int epoch() const { return epoch_; }

 private:
  int epoch_;
};

class ZeroTruth : public Error {
 public:
  using Error::Error;
};

class EmptyTrace : public Error {
 public:
  using Error::Error;
};

class OracleFailure : public Error {
 public:
  OracleFailure(std::size_t point_index, const std::string& what)
      : Error("oracle failed on point " + std::to_string(point_index) + ": " +
              what),
        point_index_(point_index) {}
  std::size_t point_index() const { return point_index_; }

 private:
  std::size_t point_index_;
};

}  // namespace infercarbon
