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

// Exact open-qubit dynamics. The density matrix is vectorized row-major as
// rho = (rho_ee, rho_eg, rho_ge, rho_gg) with index 1 = |e>, index 2 = |g>.
// The memory functions F_j(t) obey coupled time-local Riccati-type equations
//
//   dF_j/dt = p_j + F_j [ q_j + i w(t) + sum_k F_k ],   F_j(0) = 0,
//
// one per kernel term, and only F(t) = sum_j F_j(t) enters the generator.
// The propagator G(t) solves dG/dt = L(t) G from G(0) = I. F and G are
// co-integrated in one state vector with fixed-step classical RK4 (two half
// steps per control interval, the control held constant on each interval),
// so the generator at every stage sees the stage-consistent F.

#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "nmqoc/bath.hpp"
#include "nmqoc/errors.hpp"

namespace nmqoc {

using Superoperator = Eigen::Matrix4cd;  // acts on vectorized rho
using PropagatorMatrix = Eigen::Matrix4cd;

inline constexpr int kMaxKernelTerms = 16;
inline constexpr double kBlowupThreshold = 1e6;

/// The memory-function vector F_j at one instant.
struct MemoryState {
    std::vector<Complex> f_values;
    double time = 0.0;

    Complex total() const {
        Complex s{0.0, 0.0};
        for (const auto& f : f_values) s += f;
        return s;
    }
};

/// Piecewise-constant control samples on a uniform grid with box bounds;
/// epsilon(t) = samples[k] on [k*dt, (k+1)*dt).
class ControlPulse {
public:
    ControlPulse(double dt, std::vector<double> samples, double lower, double upper)
        : dt_(dt), samples_(std::move(samples)), lower_(lower), upper_(upper) {
        if (!(dt > 0.0)) throw InvalidInput("ControlPulse: dt must be > 0");
        if (samples_.empty()) throw InvalidInput("ControlPulse: needs at least one sample");
        if (!(lower_ < upper_)) throw InvalidInput("ControlPulse: lower bound must be < upper bound");
        for (const double v : samples_)
            if (!(v >= lower_ && v <= upper_))
                throw InvalidInput("ControlPulse: sample outside bounds");
    }

    double dt() const { return dt_; }
    const std::vector<double>& samples() const { return samples_; }
    double lower_bound() const { return lower_; }
    double upper_bound() const { return upper_; }
    std::size_t step_count() const { return samples_.size(); }
    double t_f() const { return dt_ * static_cast<double>(samples_.size()); }

private:
    double dt_;
    std::vector<double> samples_;
    double lower_;
    double upper_;
};

/// Right-hand sides dF_j/dt of the time-local memory equations.
inline std::vector<Complex> memory_derivative(const MemoryState& state, const ExpTermList& terms,
                                              double omega_t) {
    if (state.f_values.size() != terms.size())
        throw InvalidInput("memory_derivative: state size does not match term count");
    const Complex common = Complex(0.0, omega_t) + state.total();
    std::vector<Complex> derivative(terms.size());
    for (std::size_t j = 0; j < terms.size(); ++j)
        derivative[j] = terms[j].p + state.f_values[j] * (terms[j].q + common);
    return derivative;
}

/// Generator of the vectorized master equation for instantaneous frequency
/// omega_t and total memory function f_total:
///   L[ee,ee] = -2 Re F, L[gg,ee] = +2 Re F,
///   L[eg,eg] = -i w - conj(F), L[ge,ge] = +i w - F, all else zero.
inline Superoperator build_lindbladian(double omega_t, Complex f_total) {
    Superoperator lind = Superoperator::Zero();
    const double decay = 2.0 * f_total.real();
    lind(0, 0) = Complex(-decay, 0.0);
    lind(3, 0) = Complex(decay, 0.0);
    lind(1, 1) = Complex(0.0, -omega_t) - std::conj(f_total);
    lind(2, 2) = Complex(0.0, omega_t) - f_total;
    return lind;
}

namespace detail {

/// Co-integrated (F_1..F_K, G) state for the fixed-step RK4 scheme.
struct JointState {
    int term_count = 0;
    std::array<Complex, kMaxKernelTerms> f{};
    Eigen::Matrix4cd g = Eigen::Matrix4cd::Identity();

    Complex f_total() const {
        Complex s{0.0, 0.0};
        for (int j = 0; j < term_count; ++j) s += f[static_cast<std::size_t>(j)];
        return s;
    }
};

inline void joint_rhs(const JointState& s, const ExpTermList& terms, double omega_t,
                      JointState& out) {
    out.term_count = s.term_count;
    const Complex f_total = s.f_total();
    const Complex common = Complex(0.0, omega_t) + f_total;
    for (int j = 0; j < s.term_count; ++j) {
        const auto ju = static_cast<std::size_t>(j);
        out.f[ju] = terms[ju].p + s.f[ju] * (terms[ju].q + common);
    }
    // structured application of the generator
    const double decay = 2.0 * f_total.real();
    out.g.row(0) = Complex(-decay, 0.0) * s.g.row(0);
    out.g.row(1) = (Complex(0.0, -omega_t) - std::conj(f_total)) * s.g.row(1);
    out.g.row(2) = (Complex(0.0, omega_t) - f_total) * s.g.row(2);
    out.g.row(3) = Complex(decay, 0.0) * s.g.row(0);
}

inline void joint_axpy(const JointState& base, double h, const JointState& slope, JointState& out) {
    out.term_count = base.term_count;
    for (int j = 0; j < base.term_count; ++j) {
        const auto ju = static_cast<std::size_t>(j);
        out.f[ju] = base.f[ju] + h * slope.f[ju];
    }
    out.g = base.g + h * slope.g;
}

inline void rk4_step(JointState& state, const ExpTermList& terms, double omega_t, double h) {
    JointState k1, k2, k3, k4, stage;
    joint_rhs(state, terms, omega_t, k1);
    joint_axpy(state, h / 2.0, k1, stage);
    joint_rhs(stage, terms, omega_t, k2);
    joint_axpy(state, h / 2.0, k2, stage);
    joint_rhs(stage, terms, omega_t, k3);
    joint_axpy(state, h, k3, stage);
    joint_rhs(stage, terms, omega_t, k4);
    for (int j = 0; j < state.term_count; ++j) {
        const auto ju = static_cast<std::size_t>(j);
        state.f[ju] += h / 6.0 * (k1.f[ju] + 2.0 * k2.f[ju] + 2.0 * k3.f[ju] + k4.f[ju]);
    }
    state.g += h / 6.0 * (k1.g + 2.0 * k2.g + 2.0 * k3.g + k4.g);
}

inline void check_finite_memory(const JointState& state, double time) {
    constexpr double limit2 = kBlowupThreshold * kBlowupThreshold;
    for (int j = 0; j < state.term_count; ++j) {
        const double mag2 = std::norm(state.f[static_cast<std::size_t>(j)]);
        if (!(mag2 <= limit2))
            throw IntegrationDiverged("memory function F_" + std::to_string(j + 1) +
                                      " exceeded blow-up threshold at t = " + std::to_string(time));
    }
}

inline void check_finite_propagator(const Eigen::Matrix4cd& g, double time) {
    constexpr double limit2 = kBlowupThreshold * kBlowupThreshold;
    if (!(g.squaredNorm() <= limit2))
        throw IntegrationDiverged("propagator norm exceeded blow-up threshold at t = " +
                                  std::to_string(time));
}

/// Advance one control interval (two RK4 half steps). `at_midpoint`, when
/// non-null, is called with the state after the first half step.
inline void advance_interval(JointState& state, const ExpTermList& terms, double omega_t,
                             double dt, double t_interval_start,
                             const std::function<void(const JointState&)>& at_midpoint = {}) {
    rk4_step(state, terms, omega_t, dt / 2.0);
    check_finite_memory(state, t_interval_start + dt / 2.0);
    if (at_midpoint) at_midpoint(state);
    rk4_step(state, terms, omega_t, dt / 2.0);
    check_finite_memory(state, t_interval_start + dt);
    check_finite_propagator(state.g, t_interval_start + dt);
}

}  // namespace detail

/// Forward trajectory on the pulse grid: memory functions and propagator at
/// every node, plus F at interval midpoints (needed by the backward pass).
struct Trajectory {
    double dt = 0.0;
    double omega0 = 1.0;
    int term_count = 0;
    std::vector<double> control;                 // pulse samples, size N
    std::vector<Complex> f_nodes;                // (N+1) x term_count, row-major
    std::vector<Complex> f_mid;                  // N x term_count, row-major
    std::vector<Complex> f_total_nodes;          // N+1
    std::vector<Complex> f_total_mid;            // N
    std::vector<Eigen::Matrix4cd> g_nodes;       // N+1
    std::vector<Eigen::Matrix4cd> g_mid;         // N

    std::size_t step_count() const { return control.size(); }
    std::size_t node_count() const { return control.size() + 1; }
    double time(std::size_t k) const { return dt * static_cast<double>(k); }
    double t_f() const { return dt * static_cast<double>(control.size()); }

    MemoryState memory_state(std::size_t k) const {
        MemoryState state;
        state.time = time(k);
        state.f_values.assign(
            f_nodes.begin() + static_cast<std::ptrdiff_t>(k * static_cast<std::size_t>(term_count)),
            f_nodes.begin() + static_cast<std::ptrdiff_t>((k + 1) * static_cast<std::size_t>(term_count)));
        return state;
    }
    const Eigen::Matrix4cd& propagator(std::size_t k) const { return g_nodes[k]; }
    const Eigen::Matrix4cd& final_propagator() const { return g_nodes.back(); }
};

/// Jointly integrate the memory equations and dG/dt = L(t) G from F = 0,
/// G = I over the full pulse. Throws IntegrationDiverged past the blow-up
/// threshold.
inline Trajectory propagate(const ControlPulse& pulse, const ExpTermList& terms, double omega0) {
    if (terms.size() > static_cast<std::size_t>(kMaxKernelTerms))
        throw InvalidInput("propagate: too many kernel terms");
    const std::size_t steps = pulse.step_count();
    const int k_terms = static_cast<int>(terms.size());

    Trajectory traj;
    traj.dt = pulse.dt();
    traj.omega0 = omega0;
    traj.term_count = k_terms;
    traj.control = pulse.samples();
    traj.f_nodes.reserve((steps + 1) * terms.size());
    traj.f_mid.reserve(steps * terms.size());
    traj.f_total_nodes.reserve(steps + 1);
    traj.f_total_mid.reserve(steps);
    traj.g_nodes.reserve(steps + 1);
    traj.g_mid.reserve(steps);

    detail::JointState state;
    state.term_count = k_terms;

    auto store_node = [&]() {
        for (int j = 0; j < k_terms; ++j) traj.f_nodes.push_back(state.f[static_cast<std::size_t>(j)]);
        traj.f_total_nodes.push_back(state.f_total());
        traj.g_nodes.push_back(state.g);
    };
    auto store_midpoint = [&](const detail::JointState& mid) {
        for (int j = 0; j < k_terms; ++j) traj.f_mid.push_back(mid.f[static_cast<std::size_t>(j)]);
        traj.f_total_mid.push_back(mid.f_total());
        traj.g_mid.push_back(mid.g);
    };
    store_node();

    for (std::size_t k = 0; k < steps; ++k) {
        const double omega_t = omega0 + pulse.samples()[k];
        detail::advance_interval(state, terms, omega_t, pulse.dt(), traj.time(k), store_midpoint);
        store_node();
    }
    return traj;
}

namespace detail {

/// d(chi)/dt = -L(t)^dagger chi, applied structurally.
inline Eigen::Matrix4cd adjoint_rhs(const Eigen::Matrix4cd& chi, double omega_t, Complex f_total) {
    const double decay = 2.0 * f_total.real();
    Eigen::Matrix4cd out;
    out.row(0) = Complex(decay, 0.0) * (chi.row(0) - chi.row(3));
    out.row(1) = (Complex(0.0, -omega_t) + f_total) * chi.row(1);
    out.row(2) = (Complex(0.0, omega_t) + std::conj(f_total)) * chi.row(2);
    out.row(3).setZero();
    return out;
}

}  // namespace detail

/// Costates of the full forward state: chi pairs with the propagator and one
/// pi_j with each memory function. Together they carry the exact first-order
/// response of the final-time cost to a control change, including the path
/// through the memory equations.
struct MemoryAdjointTrajectory {
    int term_count = 0;
    std::vector<Eigen::Matrix4cd> chi_nodes;  // N+1
    std::vector<Complex> pi_nodes;            // (N+1) x term_count, row-major
};

namespace detail {

struct CostateState {
    int term_count = 0;
    Eigen::Matrix4cd chi = Eigen::Matrix4cd::Zero();
    std::array<Complex, kMaxKernelTerms> pi{};
};

/// Frozen forward data at one stage time.
struct ForwardStage {
    const Complex* f_terms;
    Complex f_total;
    const Eigen::Matrix4cd* g;
};

inline void costate_rhs(const CostateState& s, const ExpTermList& terms, double omega_t,
                        const ForwardStage& fwd, CostateState& out) {
    out.term_count = s.term_count;
    out.chi = adjoint_rhs(s.chi, omega_t, fwd.f_total);

    Complex pi_f_sum(0.0, 0.0);
    for (int j = 0; j < s.term_count; ++j)
        pi_f_sum += s.pi[static_cast<std::size_t>(j)] * std::conj(fwd.f_terms[j]);
    const Complex t0 = s.chi.row(0).dot(fwd.g->row(0));
    const Complex t3 = s.chi.row(3).dot(fwd.g->row(0));
    const Complex t1 = s.chi.row(1).dot(fwd.g->row(1));
    const Complex t2 = s.chi.row(2).dot(fwd.g->row(2));
    const Complex generator_term = 2.0 * (t0 - t3).real() + t1 + std::conj(t2);
    const Complex common = std::conj(Complex(0.0, omega_t) + fwd.f_total);
    for (int j = 0; j < s.term_count; ++j) {
        const auto ju = static_cast<std::size_t>(j);
        out.pi[ju] =
            -s.pi[ju] * (std::conj(terms[ju].q) + common) - pi_f_sum + generator_term;
    }
}

inline void costate_axpy(const CostateState& base, double h, const CostateState& slope,
                         CostateState& out) {
    out.term_count = base.term_count;
    out.chi = base.chi + h * slope.chi;
    for (int j = 0; j < base.term_count; ++j) {
        const auto ju = static_cast<std::size_t>(j);
        out.pi[ju] = base.pi[ju] + h * slope.pi[ju];
    }
}

}  // namespace detail

/// Backward pass for the full costate pair (chi, pi) on the forward grid,
/// from chi(t_f) = chi_tf and pi(t_f) = 0.
inline MemoryAdjointTrajectory propagate_adjoint_with_memory(const ControlPulse& pulse,
                                                             const ExpTermList& terms,
                                                             const Trajectory& forward,
                                                             const Eigen::Matrix4cd& chi_tf) {
    const std::size_t steps = pulse.step_count();
    const auto k_terms = static_cast<std::size_t>(forward.term_count);
    if (forward.step_count() != steps || forward.f_total_mid.size() != steps ||
        forward.g_mid.size() != steps || terms.size() != k_terms)
        throw InvalidInput(
            "propagate_adjoint_with_memory: forward trajectory does not match the pulse grid");

    MemoryAdjointTrajectory costate;
    costate.term_count = forward.term_count;
    costate.chi_nodes.resize(steps + 1);
    costate.pi_nodes.assign((steps + 1) * k_terms, Complex(0.0, 0.0));

    detail::CostateState state;
    state.term_count = forward.term_count;
    state.chi = chi_tf;
    costate.chi_nodes[steps] = chi_tf;

    const double h = -pulse.dt();
    detail::CostateState k1, k2, k3, k4, stage;
    for (std::size_t k = steps; k-- > 0;) {
        const double omega_t = forward.omega0 + pulse.samples()[k];
        const detail::ForwardStage right{forward.f_nodes.data() + (k + 1) * k_terms,
                                         forward.f_total_nodes[k + 1], &forward.g_nodes[k + 1]};
        const detail::ForwardStage mid{forward.f_mid.data() + k * k_terms,
                                       forward.f_total_mid[k], &forward.g_mid[k]};
        const detail::ForwardStage left{forward.f_nodes.data() + k * k_terms,
                                        forward.f_total_nodes[k], &forward.g_nodes[k]};
        detail::costate_rhs(state, terms, omega_t, right, k1);
        detail::costate_axpy(state, h / 2.0, k1, stage);
        detail::costate_rhs(stage, terms, omega_t, mid, k2);
        detail::costate_axpy(state, h / 2.0, k2, stage);
        detail::costate_rhs(stage, terms, omega_t, mid, k3);
        detail::costate_axpy(state, h, k3, stage);
        detail::costate_rhs(stage, terms, omega_t, left, k4);
        state.chi += h / 6.0 * (k1.chi + 2.0 * k2.chi + 2.0 * k3.chi + k4.chi);
        for (std::size_t j = 0; j < k_terms; ++j)
            state.pi[j] += h / 6.0 * (k1.pi[j] + 2.0 * k2.pi[j] + 2.0 * k3.pi[j] + k4.pi[j]);
        detail::check_finite_propagator(state.chi, forward.time(k));

        costate.chi_nodes[k] = state.chi;
        for (std::size_t j = 0; j < k_terms; ++j) costate.pi_nodes[k * k_terms + j] = state.pi[j];
    }
    return costate;
}

/// Backward auxiliary propagator: integrates the adjoint equation from
/// chi(t_f) = chi_tf down to t = 0 on the forward grid, with the generator
/// rebuilt from the stored forward memory functions. Returns chi at every
/// node (index k = chi(t_k)).
inline std::vector<Eigen::Matrix4cd> propagate_adjoint(const ControlPulse& pulse,
                                                       const Trajectory& forward,
                                                       const Eigen::Matrix4cd& chi_tf) {
    const std::size_t steps = pulse.step_count();
    if (forward.step_count() != steps || forward.f_total_mid.size() != steps)
        throw InvalidInput("propagate_adjoint: forward trajectory does not match the pulse grid");

    std::vector<Eigen::Matrix4cd> chi_nodes(steps + 1);
    Eigen::Matrix4cd chi = chi_tf;
    chi_nodes[steps] = chi;
    const double h = -pulse.dt();
    for (std::size_t k = steps; k-- > 0;) {
        const double omega_t = forward.omega0 + pulse.samples()[k];
        const Complex f_right = forward.f_total_nodes[k + 1];
        const Complex f_mid = forward.f_total_mid[k];
        const Complex f_left = forward.f_total_nodes[k];

        const Eigen::Matrix4cd k1 = detail::adjoint_rhs(chi, omega_t, f_right);
        const Eigen::Matrix4cd k2 = detail::adjoint_rhs(chi + (h / 2.0) * k1, omega_t, f_mid);
        const Eigen::Matrix4cd k3 = detail::adjoint_rhs(chi + (h / 2.0) * k2, omega_t, f_mid);
        const Eigen::Matrix4cd k4 = detail::adjoint_rhs(chi + h * k3, omega_t, f_left);
        chi += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        detail::check_finite_propagator(chi, forward.time(k));
        chi_nodes[k] = chi;
    }
    return chi_nodes;
}

}  // namespace nmqoc
