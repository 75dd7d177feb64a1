// Copyright 2026 The nmqoc Authors
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
#include <utility>

namespace nmqoc {

/// Precondition violation on a library operation.
class InvalidInput : public std::invalid_argument {
public:
    explicit InvalidInput(const std::string& what) : std::invalid_argument(what) {}
};

/// The multi-exponential fit could not reach the requested residual.
class FitFailed : public std::runtime_error {
public:
    FitFailed(const std::string& what, double achieved)
        : std::runtime_error(what), achieved_residual(achieved) {}
    double achieved_residual;
};

/// A propagated quantity crossed the blow-up threshold (step too coarse or
/// unphysical parameters).
class IntegrationDiverged : public std::runtime_error {
public:
    explicit IntegrationDiverged(const std::string& what) : std::runtime_error(what) {}
};

/// No constant pulse of the required parity fits the control bounds.
class NoAdmissibleGuess : public std::runtime_error {
public:
    explicit NoAdmissibleGuess(const std::string& what) : std::runtime_error(what) {}
};

/// Experiment configuration failed validation; `field` names the offender.
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string field_name, const std::string& reason)
        : std::runtime_error(field_name + ": " + reason), field(std::move(field_name)) {}
    std::string field;
};

}  // namespace nmqoc
