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

#include <cmath>
#include <cstddef>
#include <fstream>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "nmqoc/bath.hpp"
#include "nmqoc/dynamics.hpp"
#include "nmqoc/errors.hpp"
#include "nmqoc/optimizer.hpp"

namespace nmqoc {

/// Ohmic bath plus everything its kernel fit needs.
struct OhmicFitSettings {
    OhmicBath bath;
    int fit_terms = 4;
    double fit_horizon = 0.0;  // 0 = gate time + 5/omega_c
    int fit_samples = 2000;
    double residual_threshold = 1e-3;
    std::string terms_cache;   // optional path to a previously fitted terms file

    double effective_horizon(double t_f) const {
        return fit_horizon > 0.0 ? fit_horizon : t_f + 5.0 / bath.omega_c;
    }
};

using BathConfig = std::variant<LorentzianBath, OhmicFitSettings>;

struct OutputSettings {
    std::string directory = "out";
    bool emit_trajectory = false;
    int decimate_errors = 1;  // keep every n-th entry of the error history
};

/// Explicit sweep axes; an empty vector means the axis is not swept and the
/// scalar config value applies.
struct SweepAxes {
    std::vector<double> strength;  // alpha or alpha_o
    std::vector<double> rate;      // gamma or omega_c
    std::vector<double> center;    // omega_big (Lorentzian only)
    std::vector<double> gate_time; // t_f

    bool any() const {
        return !strength.empty() || !rate.empty() || !center.empty() || !gate_time.empty();
    }
};

/// One experiment: bath, target, horizon, bounds, grid, optimizer settings.
/// All frequencies and times in units of the qubit frequency (omega0 = 1 by
/// default and everything else scales with it).
struct ExperimentConfig {
    BathConfig bath = LorentzianBath{};
    double omega0 = 1.0;
    GateKind target = GateKind::ZGate;
    double t_f = 2.0;
    double lower_bound = -1.0;
    double upper_bound = 1.0;
    double dt = 1e-3;
    KrotovConfig krotov;
    OutputSettings outputs;
    unsigned seed = 0;
    int threads = 0;  // 0 = hardware concurrency
    SweepAxes sweep;

    bool is_ohmic() const { return std::holds_alternative<OhmicFitSettings>(bath); }

    std::size_t steps() const { return static_cast<std::size_t>(std::llround(t_f / dt)); }

    void validate() const {
        if (!(omega0 > 0.0)) throw ConfigError("omega0", "must be > 0");
        if (!(t_f > 0.0)) throw ConfigError("t_f", "must be > 0");
        if (!(dt > 0.0)) throw ConfigError("dt", "must be > 0");
        const double rounded = static_cast<double>(steps()) * dt;
        if (steps() < 1 || std::abs(rounded - t_f) > 1e-9 * std::max(1.0, t_f))
            throw ConfigError("dt", "t_f must be an integer multiple of dt");
        if (!(lower_bound < upper_bound))
            throw ConfigError("bounds", "lower must be strictly less than upper");
        try {
            if (const auto* lor = std::get_if<LorentzianBath>(&bath)) {
                lor->validate();
            } else {
                const auto& ohmic = std::get<OhmicFitSettings>(bath);
                ohmic.bath.validate();
                if (ohmic.fit_terms < 1 || ohmic.fit_terms > kMaxKernelTerms)
                    throw ConfigError("bath.fit_terms", "must be between 1 and " +
                                                            std::to_string(kMaxKernelTerms));
                if (ohmic.fit_samples < 16) throw ConfigError("bath.fit_samples", "must be >= 16");
                if (!(ohmic.residual_threshold > 0.0))
                    throw ConfigError("bath.residual_threshold", "must be > 0");
                if (ohmic.fit_horizon < 0.0) throw ConfigError("bath.fit_horizon", "must be >= 0");
            }
        } catch (const InvalidInput& e) {
            throw ConfigError("bath", e.what());
        }
        try {
            krotov.validate();
        } catch (const InvalidInput& e) {
            throw ConfigError("krotov", e.what());
        }
        if (outputs.decimate_errors < 1) throw ConfigError("outputs.decimate_errors", "must be >= 1");
        if (threads < 0) throw ConfigError("threads", "must be >= 0");
        auto check_axis = [](const char* name, const std::vector<double>& values, bool positive) {
            for (const double v : values)
                if (!std::isfinite(v) || (positive && !(v > 0.0)))
                    throw ConfigError(std::string("sweep.") + name,
                                      positive ? "values must be > 0" : "values must be finite");
        };
        check_axis(is_ohmic() ? "alpha_o" : "alpha", sweep.strength, false);
        for (const double v : sweep.strength)
            if (!(v >= 0.0)) throw ConfigError("sweep", "coupling strengths must be >= 0");
        check_axis(is_ohmic() ? "omega_c" : "gamma", sweep.rate, true);
        check_axis("omega_big", sweep.center, false);
        check_axis("t_f", sweep.gate_time, true);
        if (is_ohmic() && !sweep.center.empty())
            throw ConfigError("sweep.omega_big", "not a parameter of the Ohmic bath");
    }
};

namespace config_detail {

using nlohmann::json;

inline void reject_unknown_keys(const json& node, const std::set<std::string>& allowed,
                                const std::string& where) {
    for (const auto& [key, value] : node.items())
        if (!allowed.count(key)) throw ConfigError(where.empty() ? key : where + "." + key,
                                                   "unknown key");
}

inline double get_number(const json& node, const std::string& key, const std::string& where,
                         double fallback, bool required = false) {
    if (!node.contains(key)) {
        if (required) throw ConfigError(where, "missing required value");
        return fallback;
    }
    if (!node.at(key).is_number()) throw ConfigError(where, "must be a number");
    return node.at(key).get<double>();
}

inline std::vector<double> get_list(const json& node, const std::string& key,
                                    const std::string& where) {
    if (!node.contains(key)) return {};
    if (!node.at(key).is_array() || node.at(key).empty())
        throw ConfigError(where, "must be a non-empty array of numbers");
    std::vector<double> values;
    for (const auto& v : node.at(key)) {
        if (!v.is_number()) throw ConfigError(where, "must be a non-empty array of numbers");
        values.push_back(v.get<double>());
    }
    return values;
}

}  // namespace config_detail

/// Build a config from a parsed JSON document. Field errors carry the
/// offending key path.
inline ExperimentConfig parse_config(const nlohmann::json& root) {
    using config_detail::get_list;
    using config_detail::get_number;
    using config_detail::reject_unknown_keys;

    if (!root.is_object()) throw ConfigError("config", "top level must be an object");
    reject_unknown_keys(root, {"bath", "omega0", "target", "t_f", "bounds", "dt", "krotov",
                               "outputs", "seed", "threads", "sweep"},
                        "");

    ExperimentConfig cfg;

    if (!root.contains("bath") || !root.at("bath").is_object())
        throw ConfigError("bath", "missing required object");
    const auto& bath = root.at("bath");
    const std::string type = bath.value("type", "");
    if (type == "lorentzian") {
        reject_unknown_keys(bath, {"type", "alpha", "gamma", "omega_big"}, "bath");
        LorentzianBath lor;
        lor.alpha = get_number(bath, "alpha", "bath.alpha", 0.0, true);
        lor.gamma = get_number(bath, "gamma", "bath.gamma", 0.0, true);
        lor.omega_big = get_number(bath, "omega_big", "bath.omega_big", 0.0, true);
        cfg.bath = lor;
    } else if (type == "ohmic") {
        reject_unknown_keys(bath,
                            {"type", "alpha_o", "omega_c", "fit_terms", "fit_horizon",
                             "fit_samples", "residual_threshold", "terms_cache"},
                            "bath");
        OhmicFitSettings ohmic;
        ohmic.bath.alpha_o = get_number(bath, "alpha_o", "bath.alpha_o", 0.0, true);
        ohmic.bath.omega_c = get_number(bath, "omega_c", "bath.omega_c", 0.0, true);
        ohmic.fit_terms = static_cast<int>(get_number(bath, "fit_terms", "bath.fit_terms", 4));
        ohmic.fit_horizon = get_number(bath, "fit_horizon", "bath.fit_horizon", 0.0);
        ohmic.fit_samples = static_cast<int>(get_number(bath, "fit_samples", "bath.fit_samples", 2000));
        ohmic.residual_threshold =
            get_number(bath, "residual_threshold", "bath.residual_threshold", 1e-3);
        if (bath.contains("terms_cache")) {
            if (!bath.at("terms_cache").is_string())
                throw ConfigError("bath.terms_cache", "must be a string path");
            ohmic.terms_cache = bath.at("terms_cache").get<std::string>();
        }
        cfg.bath = ohmic;
    } else {
        throw ConfigError("bath.type", "must be \"lorentzian\" or \"ohmic\"");
    }

    cfg.omega0 = get_number(root, "omega0", "omega0", cfg.omega0);
    if (root.contains("target")) {
        const std::string target = root.at("target").is_string()
                                       ? root.at("target").get<std::string>()
                                       : std::string();
        if (target == "z")
            cfg.target = GateKind::ZGate;
        else if (target == "identity")
            cfg.target = GateKind::IdentityGate;
        else
            throw ConfigError("target", "must be \"z\" or \"identity\"");
    }
    cfg.t_f = get_number(root, "t_f", "t_f", cfg.t_f);
    cfg.dt = get_number(root, "dt", "dt", cfg.dt);

    if (root.contains("bounds")) {
        const auto& bounds = root.at("bounds");
        if (bounds.is_string()) {
            const std::string preset = bounds.get<std::string>();
            if (preset == "default") {
                cfg.lower_bound = -cfg.omega0;
                cfg.upper_bound = cfg.omega0;
            } else if (preset == "large") {
                cfg.lower_bound = -20.0 * cfg.omega0;
                cfg.upper_bound = 20.0 * cfg.omega0;
            } else {
                throw ConfigError("bounds", "preset must be \"default\" or \"large\"");
            }
        } else if (bounds.is_object()) {
            reject_unknown_keys(bounds, {"lower", "upper"}, "bounds");
            cfg.lower_bound = get_number(bounds, "lower", "bounds.lower", cfg.lower_bound, true);
            cfg.upper_bound = get_number(bounds, "upper", "bounds.upper", cfg.upper_bound, true);
        } else {
            throw ConfigError("bounds", "must be an object or a preset string");
        }
    } else {
        cfg.lower_bound = -cfg.omega0;
        cfg.upper_bound = cfg.omega0;
    }

    if (root.contains("krotov")) {
        const auto& kr = root.at("krotov");
        if (!kr.is_object()) throw ConfigError("krotov", "must be an object");
        reject_unknown_keys(kr,
                            {"lambda", "max_iterations", "error_threshold", "lambda_backoff",
                             "stall_window", "lambda_floor_factor", "lambda_growth",
                             "recenter_phase"},
                            "krotov");
        cfg.krotov.lambda = get_number(kr, "lambda", "krotov.lambda", cfg.krotov.lambda);
        cfg.krotov.max_iterations = static_cast<int>(
            get_number(kr, "max_iterations", "krotov.max_iterations", cfg.krotov.max_iterations));
        cfg.krotov.error_threshold =
            get_number(kr, "error_threshold", "krotov.error_threshold", cfg.krotov.error_threshold);
        cfg.krotov.lambda_backoff =
            get_number(kr, "lambda_backoff", "krotov.lambda_backoff", cfg.krotov.lambda_backoff);
        cfg.krotov.stall_window = static_cast<int>(
            get_number(kr, "stall_window", "krotov.stall_window", cfg.krotov.stall_window));
        cfg.krotov.lambda_floor_factor = get_number(kr, "lambda_floor_factor",
                                                    "krotov.lambda_floor_factor",
                                                    cfg.krotov.lambda_floor_factor);
        cfg.krotov.lambda_growth =
            get_number(kr, "lambda_growth", "krotov.lambda_growth", cfg.krotov.lambda_growth);
        if (kr.contains("recenter_phase")) {
            if (!kr.at("recenter_phase").is_boolean())
                throw ConfigError("krotov.recenter_phase", "must be a boolean");
            cfg.krotov.recenter_phase = kr.at("recenter_phase").get<bool>();
        }
    }

    if (root.contains("outputs")) {
        const auto& outputs = root.at("outputs");
        if (!outputs.is_object()) throw ConfigError("outputs", "must be an object");
        reject_unknown_keys(outputs, {"directory", "emit_trajectory", "decimate_errors"}, "outputs");
        if (outputs.contains("directory")) {
            if (!outputs.at("directory").is_string())
                throw ConfigError("outputs.directory", "must be a string");
            cfg.outputs.directory = outputs.at("directory").get<std::string>();
        }
        if (outputs.contains("emit_trajectory")) {
            if (!outputs.at("emit_trajectory").is_boolean())
                throw ConfigError("outputs.emit_trajectory", "must be a boolean");
            cfg.outputs.emit_trajectory = outputs.at("emit_trajectory").get<bool>();
        }
        cfg.outputs.decimate_errors = static_cast<int>(get_number(
            outputs, "decimate_errors", "outputs.decimate_errors", cfg.outputs.decimate_errors));
    }

    if (root.contains("seed")) {
        if (!root.at("seed").is_number_unsigned()) throw ConfigError("seed", "must be a non-negative integer");
        cfg.seed = root.at("seed").get<unsigned>();
    }
    cfg.threads = static_cast<int>(get_number(root, "threads", "threads", cfg.threads));

    if (root.contains("sweep")) {
        const auto& sweep = root.at("sweep");
        if (!sweep.is_object()) throw ConfigError("sweep", "must be an object");
        reject_unknown_keys(sweep, {"alpha", "alpha_o", "gamma", "omega_c", "omega_big", "t_f"},
                            "sweep");
        const bool ohmic = cfg.is_ohmic();
        if (sweep.contains(ohmic ? "alpha" : "alpha_o"))
            throw ConfigError(std::string("sweep.") + (ohmic ? "alpha" : "alpha_o"),
                              "does not match the configured bath type");
        if (sweep.contains(ohmic ? "gamma" : "omega_c"))
            throw ConfigError(std::string("sweep.") + (ohmic ? "gamma" : "omega_c"),
                              "does not match the configured bath type");
        cfg.sweep.strength = get_list(sweep, ohmic ? "alpha_o" : "alpha",
                                      ohmic ? "sweep.alpha_o" : "sweep.alpha");
        cfg.sweep.rate =
            get_list(sweep, ohmic ? "omega_c" : "gamma", ohmic ? "sweep.omega_c" : "sweep.gamma");
        cfg.sweep.center = get_list(sweep, "omega_big", "sweep.omega_big");
        cfg.sweep.gate_time = get_list(sweep, "t_f", "sweep.t_f");
    }

    cfg.validate();
    return cfg;
}

inline ExperimentConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config", "cannot open file: " + path);
    nlohmann::json root;
    try {
        in >> root;
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config", std::string("JSON parse error: ") + e.what());
    }
    return parse_config(root);
}

}  // namespace nmqoc
