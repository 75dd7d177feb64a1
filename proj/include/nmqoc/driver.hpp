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

// Batch front end shared by the CLI and the test suites: bath preparation
// (analytic terms, cached fit, fresh fit), single runs, parallel sweeps, and
// every file artifact. All outputs are deterministic for a fixed config.

#pragma once

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "nmqoc/analysis.hpp"
#include "nmqoc/bath.hpp"
#include "nmqoc/config.hpp"
#include "nmqoc/dynamics.hpp"
#include "nmqoc/errors.hpp"
#include "nmqoc/fit.hpp"
#include "nmqoc/io.hpp"
#include "nmqoc/optimizer.hpp"

namespace nmqoc::driver {

using nlohmann::ordered_json;

// ----------------------------- bath preparation -----------------------------

struct PreparedBath {
    ExpTermList terms;
    std::optional<FitReport> fit_report;  // set when a fit ran (not for cache hits)
};

inline ordered_json terms_to_json(const ExpTermList& terms, const FitReport& report) {
    ordered_json doc;
    doc["terms"] = ordered_json::array();
    for (const auto& term : terms) {
        ordered_json t;
        t["p_re"] = term.p.real();
        t["p_im"] = term.p.imag();
        t["q_re"] = term.q.real();
        t["q_im"] = term.q.imag();
        doc["terms"].push_back(t);
    }
    doc["report"] = {{"term_count", report.term_count},
                     {"fit_horizon", report.fit_horizon},
                     {"relative_l2_residual", report.relative_l2_residual},
                     {"sample_count", report.sample_count}};
    return doc;
}

inline ExpTermList terms_from_json(const nlohmann::json& doc) {
    if (!doc.contains("terms") || !doc.at("terms").is_array())
        throw InvalidInput("terms cache: missing \"terms\" array");
    std::vector<ExpTerm> terms;
    for (const auto& t : doc.at("terms"))
        terms.push_back({Complex(t.at("p_re").get<double>(), t.at("p_im").get<double>()),
                         Complex(t.at("q_re").get<double>(), t.at("q_im").get<double>())});
    return ExpTermList(std::move(terms));
}

inline PreparedBath fit_ohmic_terms(const OhmicFitSettings& settings, double t_f, unsigned seed) {
    const double horizon = settings.effective_horizon(t_f);
    const auto samples = sample_kernel(
        [&](double tau) { return ohmic_correlation(tau, settings.bath); }, horizon,
        settings.fit_samples);
    FitOptions options;
    options.residual_threshold = settings.residual_threshold;
    options.seed = seed;
    options.rate_min = settings.bath.omega_c / 10.0;
    options.rate_max = settings.bath.omega_c * 10.0;
    auto [terms, report] = fit_multi_exponential(samples, settings.fit_terms, options);
    return {std::move(terms), report};
}

/// Analytic terms for a Lorentzian bath; for an Ohmic bath, the cached terms
/// when a cache path is configured and present, otherwise a fresh fit.
inline PreparedBath prepare_bath(const ExperimentConfig& cfg) {
    if (const auto* lorentzian = std::get_if<LorentzianBath>(&cfg.bath))
        return {lorentzian_terms(*lorentzian), std::nullopt};
    const auto& ohmic = std::get<OhmicFitSettings>(cfg.bath);
    if (!ohmic.terms_cache.empty() && std::filesystem::exists(ohmic.terms_cache)) {
        const auto doc = nlohmann::json::parse(io::read_text_file(ohmic.terms_cache));
        return {terms_from_json(doc), std::nullopt};
    }
    return fit_ohmic_terms(ohmic, cfg.t_f, cfg.seed);
}

// --------------------------------- run cell ---------------------------------

struct CellOutcome {
    ExpTermList terms;
    std::optional<FitReport> fit_report;
    OptimizationRecord record;
    CoherenceDecomposition initial_decomposition;
    CoherenceDecomposition final_decomposition;
};

/// fit (if needed) -> optimize -> decompose before/after.
inline CellOutcome run_cell(const ExperimentConfig& cfg) {
    cfg.validate();
    PreparedBath prepared = prepare_bath(cfg);
    const GateTarget target =
        cfg.target == GateKind::ZGate ? GateTarget::z() : GateTarget::identity();

    OptimizationRecord record = optimize(prepared.terms, cfg.omega0, target, cfg.t_f,
                                         cfg.lower_bound, cfg.upper_bound, cfg.dt, cfg.krotov);

    const ControlPulse guess =
        initial_guess(target, cfg.t_f, cfg.omega0, cfg.lower_bound, cfg.upper_bound, cfg.dt);
    const Trajectory initial_traj = propagate(guess, prepared.terms, cfg.omega0);
    const CoherenceDecomposition initial_decomposition = decompose_coherence(initial_traj, guess);
    const Trajectory final_traj = propagate(record.final_pulse, prepared.terms, cfg.omega0);
    const CoherenceDecomposition final_decomposition =
        decompose_coherence(final_traj, record.final_pulse);

    return CellOutcome{std::move(prepared.terms), prepared.fit_report, std::move(record),
                       initial_decomposition, final_decomposition};
}

// ------------------------------ sweep expansion ------------------------------

inline std::vector<SweepAxis> sweep_axes(const ExperimentConfig& cfg) {
    std::vector<SweepAxis> axes;
    const bool ohmic = cfg.is_ohmic();
    if (!cfg.sweep.strength.empty())
        axes.push_back({ohmic ? "alpha_o" : "alpha", cfg.sweep.strength});
    if (!cfg.sweep.rate.empty()) axes.push_back({ohmic ? "omega_c" : "gamma", cfg.sweep.rate});
    if (!cfg.sweep.center.empty()) axes.push_back({"omega_big", cfg.sweep.center});
    if (!cfg.sweep.gate_time.empty()) axes.push_back({"t_f", cfg.sweep.gate_time});
    return axes;
}

inline ExperimentConfig cell_config(const ExperimentConfig& base,
                                    const std::vector<std::pair<std::string, double>>& params) {
    ExperimentConfig cfg = base;
    cfg.sweep = {};
    for (const auto& [name, value] : params) {
        if (name == "alpha") std::get<LorentzianBath>(cfg.bath).alpha = value;
        else if (name == "gamma") std::get<LorentzianBath>(cfg.bath).gamma = value;
        else if (name == "omega_big") std::get<LorentzianBath>(cfg.bath).omega_big = value;
        else if (name == "alpha_o") std::get<OhmicFitSettings>(cfg.bath).bath.alpha_o = value;
        else if (name == "omega_c") std::get<OhmicFitSettings>(cfg.bath).bath.omega_c = value;
        else if (name == "t_f") cfg.t_f = value;
        else throw InvalidInput("cell_config: unknown sweep axis " + name);
    }
    return cfg;
}

/// Grid coordinates for a flat row-major index.
inline std::vector<std::pair<std::string, double>> cell_params(const std::vector<SweepAxis>& axes,
                                                               std::size_t flat_index) {
    std::vector<std::pair<std::string, double>> params;
    std::size_t remainder = flat_index;
    for (std::size_t i = axes.size(); i-- > 0;) {
        const std::size_t n = axes[i].values.size();
        params.emplace_back(axes[i].name, axes[i].values[remainder % n]);
        remainder /= n;
    }
    std::reverse(params.begin(), params.end());
    return params;
}

struct SweepCell {
    SweepCellResult result;
    std::optional<CellOutcome> outcome;
};

inline void run_indexed(std::size_t count, int threads, const std::function<void(std::size_t)>& task) {
    unsigned pool = threads > 0 ? static_cast<unsigned>(threads)
                                : std::max(1u, std::thread::hardware_concurrency());
    pool = static_cast<unsigned>(std::min<std::size_t>(pool, count));
    if (pool <= 1) {
        for (std::size_t i = 0; i < count; ++i) task(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> workers;
    workers.reserve(pool);
    for (unsigned w = 0; w < pool; ++w)
        workers.emplace_back([&]() {
            for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) task(i);
        });
    for (auto& worker : workers) worker.join();
}

/// Run every grid cell (independent, parallel) and collect results in grid
/// order regardless of completion order. Per-cell failures are recorded, not
/// propagated.
inline std::vector<SweepCell> run_sweep_cells(const ExperimentConfig& base,
                                              const std::vector<SweepAxis>& axes) {
    std::size_t count = 1;
    for (const auto& axis : axes) count *= axis.values.size();

    std::vector<SweepCell> cells(count);
    run_indexed(count, base.threads, [&](std::size_t index) {
        SweepCell& cell = cells[index];
        cell.result.index = index;
        cell.result.params = cell_params(axes, index);
        try {
            const ExperimentConfig cfg = cell_config(base, cell.result.params);
            CellOutcome outcome = run_cell(cfg);
            cell.result.ok = true;
            cell.result.initial_error = outcome.record.initial_error;
            cell.result.final_error = outcome.record.final_error;
            cell.result.improvement = outcome.record.improvement;
            cell.result.iterations_run = outcome.record.iterations_run;
            cell.result.stop_reason = to_string(outcome.record.stop_reason);
            cell.outcome = std::move(outcome);
        } catch (const ConfigError& e) {
            cell.result.error_type = "ConfigError";
            cell.result.error_message = e.what();
        } catch (const FitFailed& e) {
            cell.result.error_type = "FitFailed";
            cell.result.error_message = e.what();
        } catch (const IntegrationDiverged& e) {
            cell.result.error_type = "IntegrationDiverged";
            cell.result.error_message = e.what();
        } catch (const NoAdmissibleGuess& e) {
            cell.result.error_type = "NoAdmissibleGuess";
            cell.result.error_message = e.what();
        } catch (const std::exception& e) {
            cell.result.error_type = "Error";
            cell.result.error_message = e.what();
        }
    });
    return cells;
}

// ------------------------------ artifact writers -----------------------------

inline ordered_json bath_to_json(const ExperimentConfig& cfg) {
    ordered_json bath;
    if (const auto* lorentzian = std::get_if<LorentzianBath>(&cfg.bath)) {
        bath["type"] = "lorentzian";
        bath["alpha"] = lorentzian->alpha;
        bath["gamma"] = lorentzian->gamma;
        bath["omega_big"] = lorentzian->omega_big;
    } else {
        const auto& ohmic = std::get<OhmicFitSettings>(cfg.bath);
        bath["type"] = "ohmic";
        bath["alpha_o"] = ohmic.bath.alpha_o;
        bath["omega_c"] = ohmic.bath.omega_c;
        bath["fit_terms"] = ohmic.fit_terms;
        bath["fit_horizon"] = ohmic.effective_horizon(cfg.t_f);
    }
    return bath;
}

inline ordered_json record_to_json(const ExperimentConfig& cfg, const OptimizationRecord& record) {
    ordered_json doc;
    doc["target"] = cfg.target == GateKind::ZGate ? "z" : "identity";
    doc["bath"] = bath_to_json(cfg);
    doc["omega0"] = cfg.omega0;
    doc["t_f"] = cfg.t_f;
    doc["bounds"] = {{"lower", cfg.lower_bound}, {"upper", cfg.upper_bound}};
    doc["dt"] = cfg.dt;
    doc["lambda_initial"] = cfg.krotov.lambda;
    doc["iterations_run"] = record.iterations_run;
    doc["stop_reason"] = to_string(record.stop_reason);
    doc["E0"] = record.initial_error;
    doc["Es"] = record.final_error;
    doc["improvement"] = record.improvement;
    ordered_json errors = ordered_json::array();
    const auto& history = record.errors_per_iteration;
    const auto stride = static_cast<std::size_t>(cfg.outputs.decimate_errors);
    for (std::size_t i = 0; i < history.size(); i += stride) errors.push_back(history[i]);
    if (!history.empty() && (history.size() - 1) % stride != 0) errors.push_back(history.back());
    doc["errors_per_iteration"] = std::move(errors);
    doc["final_pulse"] = {{"dt", record.final_pulse.dt()},
                          {"samples", record.final_pulse.samples()}};
    return doc;
}

inline ordered_json decomposition_to_json(const CoherenceDecomposition& d) {
    return {{"kappa", d.kappa},
            {"phi", d.phi},
            {"phi_control", d.phi_control},
            {"phi_environment", d.phi_environment},
            {"phi_deviation", d.phi_deviation}};
}

inline std::string pulse_csv(const ControlPulse& pulse, double omega0) {
    std::string text = "t,epsilon,omega_t\n";
    for (std::size_t k = 0; k < pulse.step_count(); ++k) {
        const double epsilon = pulse.samples()[k];
        text += io::format_float(pulse.dt() * static_cast<double>(k));
        text += ',';
        text += io::format_float(epsilon);
        text += ',';
        text += io::format_float(omega0 + epsilon);
        text += '\n';
    }
    return text;
}

inline std::string iterations_csv(const OptimizationRecord& record) {
    std::string text = "iteration,error\n";
    for (std::size_t i = 0; i < record.errors_per_iteration.size(); ++i) {
        text += std::to_string(i);
        text += ',';
        text += io::format_float(record.errors_per_iteration[i]);
        text += '\n';
    }
    return text;
}

inline std::string trajectory_csv(const Trajectory& traj) {
    std::string text = "t,re_f,im_f";
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) {
            text += ",g" + std::to_string(r) + std::to_string(c) + "_re";
            text += ",g" + std::to_string(r) + std::to_string(c) + "_im";
        }
    text += '\n';
    for (std::size_t k = 0; k < traj.node_count(); ++k) {
        text += io::format_float(traj.time(k));
        text += ',';
        text += io::format_float(traj.f_total_nodes[k].real());
        text += ',';
        text += io::format_float(traj.f_total_nodes[k].imag());
        for (int r = 0; r < 4; ++r)
            for (int c = 0; c < 4; ++c) {
                const Complex g = traj.g_nodes[k](r, c);
                text += ',';
                text += io::format_float(g.real());
                text += ',';
                text += io::format_float(g.imag());
            }
        text += '\n';
    }
    return text;
}

inline std::string json_text(const ordered_json& doc) { return doc.dump(2) + "\n"; }

inline void write_run_artifacts(const ExperimentConfig& cfg, const CellOutcome& outcome,
                                const std::string& directory) {
    io::ensure_directory(directory);
    const auto path = [&](const char* name) { return directory + "/" + name; };
    io::write_text_file(path("record.json"), json_text(record_to_json(cfg, outcome.record)));
    io::write_text_file(path("pulse.csv"), pulse_csv(outcome.record.final_pulse, cfg.omega0));
    io::write_text_file(path("iterations.csv"), iterations_csv(outcome.record));
    ordered_json decomposition;
    decomposition["initial"] = decomposition_to_json(outcome.initial_decomposition);
    decomposition["final"] = decomposition_to_json(outcome.final_decomposition);
    io::write_text_file(path("decomposition.json"), json_text(decomposition));
    if (outcome.fit_report) {
        io::write_text_file(path("terms.json"),
                            json_text(terms_to_json(outcome.terms, *outcome.fit_report)));
    }
    if (cfg.outputs.emit_trajectory) {
        const Trajectory traj = propagate(outcome.record.final_pulse, outcome.terms, cfg.omega0);
        io::write_text_file(path("trajectory.csv"), trajectory_csv(traj));
    }
}

inline std::string csv_quote(const std::string& text) {
    std::string quoted = "\"";
    for (const char c : text) {
        if (c == '"') quoted += "\"\"";
        else quoted += c;
    }
    quoted += '"';
    return quoted;
}

inline std::string cells_csv(const std::vector<SweepAxis>& axes,
                             const std::vector<SweepCellResult>& cells) {
    std::string text = "index";
    for (const auto& axis : axes) text += "," + axis.name;
    text += ",E0,Es,improvement,iterations_run,stop_reason,status,message\n";
    for (const auto& cell : cells) {
        text += std::to_string(cell.index);
        for (const auto& [name, value] : cell.params) {
            text += ',';
            text += io::format_float(value);
        }
        if (cell.ok) {
            text += ',' + io::format_float(cell.initial_error);
            text += ',' + io::format_float(cell.final_error);
            text += ',' + io::format_float(cell.improvement);
            text += ',' + std::to_string(cell.iterations_run);
            text += ',' + cell.stop_reason + ",ok,";
        } else {
            text += ",,,,," + ("error:" + cell.error_type) + ',' + csv_quote(cell.error_message);
        }
        text += '\n';
    }
    return text;
}

inline std::string matrix_csv(const SweepMatrix& matrix) {
    std::string text = matrix.row_axis + "/" + matrix.col_axis;
    for (const double v : matrix.col_values) text += ',' + io::format_float(v);
    text += '\n';
    for (std::size_t r = 0; r < matrix.row_values.size(); ++r) {
        text += io::format_float(matrix.row_values[r]);
        for (const double v : matrix.values[r]) text += ',' + io::format_float(v);
        text += '\n';
    }
    return text;
}

inline std::string series_csv(const SweepSeries& series) {
    std::string text = series.axis + ',' + series.quantity + '\n';
    for (std::size_t i = 0; i < series.axis_values.size(); ++i)
        text += io::format_float(series.axis_values[i]) + ',' + io::format_float(series.values[i]) +
                '\n';
    return text;
}

inline ordered_json sweep_summary_json(const SweepResult& result) {
    ordered_json doc;
    doc["axes"] = ordered_json::array();
    for (const auto& axis : result.axes)
        doc["axes"].push_back({{"name", axis.name}, {"values", axis.values}});
    doc["cells"] = ordered_json::array();
    for (const auto& cell : result.cells) {
        ordered_json c;
        c["index"] = cell.index;
        ordered_json params;
        for (const auto& [name, value] : cell.params) params[name] = value;
        c["params"] = std::move(params);
        c["ok"] = cell.ok;
        if (cell.ok) {
            c["E0"] = cell.initial_error;
            c["Es"] = cell.final_error;
            c["improvement"] = cell.improvement;
            c["iterations_run"] = cell.iterations_run;
            c["stop_reason"] = cell.stop_reason;
        } else {
            c["error_type"] = cell.error_type;
            c["error_message"] = cell.error_message;
        }
        doc["cells"].push_back(std::move(c));
    }
    return doc;
}

inline void write_sweep_artifacts(const ExperimentConfig& base, const std::vector<SweepAxis>& axes,
                                  const std::vector<SweepCell>& cells,
                                  const std::string& directory) {
    io::ensure_directory(directory);
    io::ensure_directory(directory + "/records");

    std::vector<SweepCellResult> results;
    results.reserve(cells.size());
    for (const auto& cell : cells) results.push_back(cell.result);
    const SweepResult tables = tabulate_sweep(axes, std::move(results));

    io::write_text_file(directory + "/cells.csv", cells_csv(axes, tables.cells));
    for (const auto& matrix : tables.matrices) {
        std::string name = directory + "/table_" + matrix.quantity;
        if (!matrix.page_axis.empty())
            name += "_" + matrix.page_axis + "_" + io::format_float(matrix.page_value);
        io::write_text_file(name + ".csv", matrix_csv(matrix));
    }
    std::size_t series_index = 0;
    const bool multiple_series = tables.series.size() > 2;
    for (const auto& series : tables.series) {
        std::string name = directory + "/series_" + series.quantity;
        if (multiple_series) name += "_c" + std::to_string(series_index / 2);
        io::write_text_file(name + ".csv", series_csv(series));
        ++series_index;
    }
    io::write_text_file(directory + "/summary.json", json_text(sweep_summary_json(tables)));

    char cell_name[32];
    for (const auto& cell : cells) {
        if (!cell.outcome) continue;
        std::snprintf(cell_name, sizeof(cell_name), "/records/cell_%04zu.json", cell.result.index);
        const ExperimentConfig cfg = cell_config(base, cell.result.params);
        io::write_text_file(directory + cell_name,
                            json_text(record_to_json(cfg, cell.outcome->record)));
    }
}

// ------------------------------ command drivers -----------------------------

inline ordered_json error_json(const std::exception& e) {
    ordered_json doc;
    if (const auto* config_error = dynamic_cast<const ConfigError*>(&e)) {
        doc["error"] = "ConfigError";
        doc["field"] = config_error->field;
    } else if (dynamic_cast<const FitFailed*>(&e)) {
        doc["error"] = "FitFailed";
    } else if (dynamic_cast<const IntegrationDiverged*>(&e)) {
        doc["error"] = "IntegrationDiverged";
    } else if (dynamic_cast<const NoAdmissibleGuess*>(&e)) {
        doc["error"] = "NoAdmissibleGuess";
    } else if (dynamic_cast<const InvalidInput*>(&e)) {
        doc["error"] = "InvalidInput";
    } else {
        doc["error"] = "Error";
    }
    doc["message"] = e.what();
    return doc;
}

inline int fail_with_error_json(const std::string& directory, const std::exception& e) {
    try {
        io::ensure_directory(directory);
        io::write_text_file(directory + "/error.json", json_text(error_json(e)));
    } catch (...) {
        std::fprintf(stderr, "%s\n", e.what());
    }
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
}

/// fit (if Ohmic) -> optimize -> analyze -> write artifacts.
inline int execute_run(const ExperimentConfig& cfg) {
    const std::string directory = cfg.outputs.directory;
    try {
        cfg.validate();
        const CellOutcome outcome = run_cell(cfg);
        write_run_artifacts(cfg, outcome, directory);
        return 0;
    } catch (const std::exception& e) {
        return fail_with_error_json(directory, e);
    }
}

/// Every grid cell, bounded worker pool, deterministic output order. Exits
/// nonzero only when all cells fail.
inline int execute_sweep(const ExperimentConfig& cfg) {
    const std::string directory = cfg.outputs.directory;
    try {
        cfg.validate();
        const std::vector<SweepAxis> axes = sweep_axes(cfg);
        const std::vector<SweepCell> cells = run_sweep_cells(cfg, axes);
        write_sweep_artifacts(cfg, axes, cells, directory);
        const bool any_ok = std::any_of(cells.begin(), cells.end(),
                                        [](const SweepCell& c) { return c.result.ok; });
        return any_ok ? 0 : 1;
    } catch (const std::exception& e) {
        return fail_with_error_json(directory, e);
    }
}

/// Fit the configured Ohmic kernel and write the reusable terms cache.
inline int execute_fit_bath(const ExperimentConfig& cfg) {
    const std::string directory = cfg.outputs.directory;
    try {
        cfg.validate();
        if (!cfg.is_ohmic())
            throw ConfigError("bath.type",
                              "fit-bath applies to ohmic baths only (lorentzian is analytic)");
        const auto& settings = std::get<OhmicFitSettings>(cfg.bath);
        const PreparedBath prepared = fit_ohmic_terms(settings, cfg.t_f, cfg.seed);
        io::ensure_directory(directory);
        io::write_text_file(directory + "/terms.json",
                            json_text(terms_to_json(prepared.terms, *prepared.fit_report)));
        return 0;
    } catch (const std::exception& e) {
        return fail_with_error_json(directory, e);
    }
}

/// Dynamics only: propagate the constant initial-guess pulse and write the
/// trajectory (no optimization).
inline int execute_propagate(const ExperimentConfig& cfg) {
    const std::string directory = cfg.outputs.directory;
    try {
        cfg.validate();
        const PreparedBath prepared = prepare_bath(cfg);
        const GateTarget target =
            cfg.target == GateKind::ZGate ? GateTarget::z() : GateTarget::identity();
        const ControlPulse pulse =
            initial_guess(target, cfg.t_f, cfg.omega0, cfg.lower_bound, cfg.upper_bound, cfg.dt);
        const Trajectory traj = propagate(pulse, prepared.terms, cfg.omega0);
        io::ensure_directory(directory);
        io::write_text_file(directory + "/trajectory.csv", trajectory_csv(traj));
        io::write_text_file(directory + "/pulse.csv", pulse_csv(pulse, cfg.omega0));
        return 0;
    } catch (const std::exception& e) {
        return fail_with_error_json(directory, e);
    }
}

}  // namespace nmqoc::driver
