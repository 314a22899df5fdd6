// Copyright (c) 2026 The fairdiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace fairdiff {

/// Base class for all fairdiff errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Invalid configuration value or unsatisfiable configuration request.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

/// Tensor/layer shape mismatch.
class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& msg) : Error(msg) {}
};

/// Unknown condition token, group, or attribute.
class VocabError : public Error {
 public:
  explicit VocabError(const std::string& msg) : Error(msg) {}
};

/// Mismatched or corrupt on-disk artifact (checkpoint, bank, records).
class ArtifactError : public Error {
 public:
  explicit ArtifactError(const std::string& msg) : Error(msg) {}
};

/// Non-finite values or diverging computation.
class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& msg) : Error(msg) {}
};

}  // namespace fairdiff
