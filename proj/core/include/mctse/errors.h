// Copyright 2026 The mctse Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <stdexcept>
#include <string>

namespace mctse {

// Bad user data: malformed files, out-of-range ids, too-short clips.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caller violated an API precondition, or a config is internally
// inconsistent.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class DimensionError : public ContractError {
 public:
  using ContractError::ContractError;
};

class ConfigError : public ContractError {
 public:
  using ContractError::ContractError;
};

class DomainError : public InputError {
 public:
  using InputError::InputError;
};

class ParseError : public InputError {
 public:
  using InputError::InputError;
};

class ValidationError : public InputError {
 public:
  using InputError::InputError;
};

}  // namespace mctse
