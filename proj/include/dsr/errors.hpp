// Copyright 2026 The dsr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace dsr {

/// Precondition failure at an API boundary (shape mismatch, bad taps, ...).
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed run configuration or topology document.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File-system or format failure (PFM/PNG/manifest/weight blob).
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Training produced a non-finite loss.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, long step)
      : std::runtime_error(what), step_(step) {}
  long step() const noexcept { return step_; }

 private:
  long step_;
};

#define DSR_REQUIRE(cond, msg)                                   \
  do {                                                           \
    if (!(cond)) throw ::dsr::ContractViolation(std::string(msg)); \
  } while (0)

}  // namespace dsr
