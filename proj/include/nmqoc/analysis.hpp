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

// Post-hoc diagnostics: the dissipation/phase decomposition of the qubit
// coherence, and tabulation of parameter sweeps.

#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "nmqoc/dynamics.hpp"
#include "nmqoc/errors.hpp"

namespace nmqoc {

/// Split of the propagated coherence element rho_ge into a dissipation
/// exponent and an accumulated phase: |rho_ge(t_f)/rho_ge(0)| = exp(-kappa),
/// phi the unwrapped argument, phi_control the part driven by the pulse,
/// phi_environment the remainder (the bath-induced frequency shift).
/// phi_deviation is the offset of phi from its nearest multiple of pi: the
/// phase error the control did not cancel. For the constant parity-correct
/// initial pulse phi_control is an exact multiple of pi, so phi_deviation and
/// phi_environment coincide there; after optimization the control absorbs the
/// environment shift and phi_deviation alone goes to zero.
struct CoherenceDecomposition {
    double kappa = 0.0;
    double phi = 0.0;
    double phi_control = 0.0;
    double phi_environment = 0.0;
    double phi_deviation = 0.0;
};

/// kappa from trapezoidal integration of Re F on the integration grid (nodes
/// and interval midpoints); phi from per-step increments of arg G_ge,ge
/// (each increment is far below pi on any sane grid, so unwrapping is exact).
inline CoherenceDecomposition decompose_coherence(const Trajectory& trajectory,
                                                  const ControlPulse& pulse) {
    const std::size_t steps = trajectory.step_count();
    if (pulse.step_count() != steps)
        throw InvalidInput("decompose_coherence: pulse grid does not match the trajectory");

    CoherenceDecomposition out;

    const double h = trajectory.dt / 2.0;  // grid spacing including midpoints
    double kappa = 0.0;
    for (std::size_t k = 0; k < steps; ++k) {
        const double left = trajectory.f_total_nodes[k].real();
        const double mid = trajectory.f_total_mid[k].real();
        const double right = trajectory.f_total_nodes[k + 1].real();
        kappa += h / 2.0 * (left + 2.0 * mid + right);
    }
    out.kappa = kappa;

    double phi = 0.0;
    for (std::size_t k = 0; k < steps; ++k) {
        const Complex ratio = trajectory.g_nodes[k + 1](2, 2) / trajectory.g_nodes[k](2, 2);
        phi += std::arg(ratio);
    }
    out.phi = phi;

    double phi_control = 0.0;
    for (const double epsilon : pulse.samples())
        phi_control += (trajectory.omega0 + epsilon) * trajectory.dt;
    out.phi_control = phi_control;
    out.phi_environment = phi - phi_control;

    const double pi = std::acos(-1.0);
    out.phi_deviation = phi - pi * std::round(phi / pi);
    return out;
}

/// One sweep cell: its grid coordinates plus either the headline scalars of a
/// finished optimization or the error that felled it.
struct SweepCellResult {
    std::size_t index = 0;
    std::vector<std::pair<std::string, double>> params;
    bool ok = false;
    double initial_error = std::numeric_limits<double>::quiet_NaN();
    double final_error = std::numeric_limits<double>::quiet_NaN();
    double improvement = std::numeric_limits<double>::quiet_NaN();
    int iterations_run = 0;
    std::string stop_reason;
    std::string error_type;     // set when !ok
    std::string error_message;  // set when !ok
};

struct SweepAxis {
    std::string name;
    std::vector<double> values;
};

/// Matrix of one scalar quantity over (row axis) x (column axis), one page per
/// value of an optional third axis. Failed cells hold NaN.
struct SweepMatrix {
    std::string quantity;
    std::string row_axis;
    std::vector<double> row_values;
    std::string col_axis;
    std::vector<double> col_values;
    std::string page_axis;  // empty if the grid has no third axis
    double page_value = 0.0;
    std::vector<std::vector<double>> values;  // [row][col]
};

/// Scalar quantity along a single axis (gate-time scans).
struct SweepSeries {
    std::string quantity;
    std::string axis;
    std::vector<double> axis_values;
    std::vector<double> values;
};

struct SweepResult {
    std::vector<SweepAxis> axes;
    std::vector<SweepCellResult> cells;  // ordered by grid index
    std::vector<SweepMatrix> matrices;
    std::vector<SweepSeries> series;
};

namespace analysis_detail {

inline double cell_quantity(const SweepCellResult& cell, const std::string& quantity) {
    if (!cell.ok) return std::numeric_limits<double>::quiet_NaN();
    if (quantity == "final_error") return cell.final_error;
    if (quantity == "improvement") return cell.improvement;
    return std::numeric_limits<double>::quiet_NaN();
}

}  // namespace analysis_detail

/// Organize per-cell records into matrices of final error and improvement
/// over (strength x rate), one page per spectral-center value, plus series
/// along a gate-time axis when one is present. Cells must be ordered
/// row-major over `axes`; no gaps are allowed.
inline SweepResult tabulate_sweep(const std::vector<SweepAxis>& axes,
                                  std::vector<SweepCellResult> cells) {
    std::size_t expected = 1;
    for (const auto& axis : axes) expected *= axis.values.size();
    if (cells.size() != expected)
        throw InvalidInput("tabulate_sweep: cell count does not match the grid");

    SweepResult result;
    result.axes = axes;
    result.cells = std::move(cells);

    auto axis_of = [&](const std::string& a, const std::string& b) {
        for (std::size_t i = 0; i < axes.size(); ++i)
            if (axes[i].name == a || axes[i].name == b) return static_cast<int>(i);
        return -1;
    };
    const int strength = axis_of("alpha", "alpha_o");
    const int rate = axis_of("gamma", "omega_c");
    const int center = axis_of("omega_big", "");
    const int gate_time = axis_of("t_f", "");

    // strides of the row-major grid
    std::vector<std::size_t> stride(axes.size(), 1);
    for (std::size_t i = axes.size(); i-- > 1;)
        stride[i - 1] = stride[i] * axes[i].values.size();
    auto flat = [&](std::vector<std::size_t> idx) {
        std::size_t f = 0;
        for (std::size_t i = 0; i < idx.size(); ++i) f += idx[i] * stride[i];
        return f;
    };

    if (strength >= 0 && rate >= 0) {
        const std::size_t pages = center >= 0 ? axes[static_cast<std::size_t>(center)].values.size() : 1;
        for (std::size_t pg = 0; pg < pages; ++pg) {
            for (const std::string quantity : {"final_error", "improvement"}) {
                SweepMatrix m;
                m.quantity = quantity;
                m.row_axis = axes[static_cast<std::size_t>(strength)].name;
                m.row_values = axes[static_cast<std::size_t>(strength)].values;
                m.col_axis = axes[static_cast<std::size_t>(rate)].name;
                m.col_values = axes[static_cast<std::size_t>(rate)].values;
                if (center >= 0) {
                    m.page_axis = axes[static_cast<std::size_t>(center)].name;
                    m.page_value = axes[static_cast<std::size_t>(center)].values[pg];
                }
                for (std::size_t r = 0; r < m.row_values.size(); ++r) {
                    std::vector<double> row;
                    for (std::size_t c = 0; c < m.col_values.size(); ++c) {
                        std::vector<std::size_t> idx(axes.size(), 0);
                        idx[static_cast<std::size_t>(strength)] = r;
                        idx[static_cast<std::size_t>(rate)] = c;
                        if (center >= 0) idx[static_cast<std::size_t>(center)] = pg;
                        row.push_back(
                            analysis_detail::cell_quantity(result.cells[flat(idx)], quantity));
                    }
                    m.values.push_back(std::move(row));
                }
                result.matrices.push_back(std::move(m));
            }
        }
    }

    if (gate_time >= 0) {
        // one series per combination of the remaining axes; the common case is
        // a pure gate-time scan with a single combination
        std::size_t combos = 1;
        for (std::size_t i = 0; i < axes.size(); ++i)
            if (static_cast<int>(i) != gate_time) combos *= axes[i].values.size();
        for (std::size_t combo = 0; combo < combos; ++combo) {
            std::vector<std::size_t> idx(axes.size(), 0);
            std::size_t rem = combo;
            for (std::size_t i = axes.size(); i-- > 0;) {
                if (static_cast<int>(i) == gate_time) continue;
                idx[i] = rem % axes[i].values.size();
                rem /= axes[i].values.size();
            }
            for (const std::string quantity : {"final_error", "improvement"}) {
                SweepSeries s;
                s.quantity = quantity;
                s.axis = axes[static_cast<std::size_t>(gate_time)].name;
                s.axis_values = axes[static_cast<std::size_t>(gate_time)].values;
                for (std::size_t t = 0; t < s.axis_values.size(); ++t) {
                    idx[static_cast<std::size_t>(gate_time)] = t;
                    s.values.push_back(
                        analysis_detail::cell_quantity(result.cells[flat(idx)], quantity));
                }
                result.series.push_back(std::move(s));
            }
        }
    }

    return result;
}

}  // namespace nmqoc
