// Copyright 2026 The privatemdi Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace pmdi {

/// Bad configuration, model file, or argument. Maps to CLI exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A party or primitive could not complete its step. Maps to CLI exit code 3.
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class OverflowError : public std::range_error {
 public:
  using std::range_error::range_error;
};

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace pmdi
