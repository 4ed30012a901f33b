// Copyright 2026 the batchmc authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>

namespace batchmc {

/// Base class of every exception thrown by batchmc.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Shape or broadcasting violation.
struct ShapeError : Error {
  using Error::Error;
};

/// Invalid argument value (non-positive scale, n == 0, NaN initial state, ...).
struct ArgumentError : Error {
  using Error::Error;
};

/// Kernel-results structure violation. Messages name the offending leaf path.
struct ContractError : Error {
  using Error::Error;
};

/// Invalid sampler or run configuration.
struct ConfigError : Error {
  using Error::Error;
};

/// File I/O failure. Messages carry the path involved.
struct IoError : Error {
  using Error::Error;
};

}  // namespace batchmc
