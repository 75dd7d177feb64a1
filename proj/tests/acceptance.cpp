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

// End-to-end acceptance suite. Prints one pass/fail line per criterion and
// exits nonzero if any criterion fails. The optimization cells are shared
// across criteria and computed once on a worker pool.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "nmqoc/nmqoc.hpp"

using namespace nmqoc;

namespace {

const double kPi = std::acos(-1.0);

struct CellKey {
    std::string bath;      // "lor:alpha:gamma:omega" or "ohm:alpha_o:omega_c"
    std::string target;    // "z" or "identity"
    double t_f;
    double bound;
    bool accelerated = false;  // gain regrowth + phase recentering

    bool operator<(const CellKey& other) const {
        return std::tie(bath, target, t_f, bound, accelerated) <
               std::tie(other.bath, other.target, other.t_f, other.bound, other.accelerated);
    }
};

struct CellData {
    OptimizationRecord record;
    CoherenceDecomposition before;
    CoherenceDecomposition after;
    double fit_residual = 0.0;
};

std::string lorentzian_key(double alpha, double gamma, double omega_big) {
    std::ostringstream s;
    s << "lor:" << alpha << ":" << gamma << ":" << omega_big;
    return s.str();
}

std::string ohmic_key(double alpha_o, double omega_c) {
    std::ostringstream s;
    s << "ohm:" << alpha_o << ":" << omega_c;
    return s.str();
}

CellData compute_cell(const CellKey& key) {
    const double dt = 1e-3;
    ExpTermList terms;
    double fit_residual = 0.0;
    if (key.bath.rfind("lor:", 0) == 0) {
        double alpha, gamma, omega_big;
        std::sscanf(key.bath.c_str(), "lor:%lf:%lf:%lf", &alpha, &gamma, &omega_big);
        terms = lorentzian_terms({alpha, gamma, omega_big});
    } else {
        double alpha_o, omega_c;
        std::sscanf(key.bath.c_str(), "ohm:%lf:%lf", &alpha_o, &omega_c);
        OhmicFitSettings settings;
        settings.bath = {alpha_o, omega_c};
        auto prepared = driver::fit_ohmic_terms(settings, key.t_f, 0);
        terms = std::move(prepared.terms);
        fit_residual = prepared.fit_report->relative_l2_residual;
    }
    const GateTarget target = key.target == "z" ? GateTarget::z() : GateTarget::identity();
    KrotovConfig config;  // defaults, matching the faithful iteration
    if (key.accelerated) {
        // the slow dissipation-shaping mode needs the gain to regrow between
        // safeguard triggers and the stiff phase condition pinned exactly
        config.lambda_growth = 1.25;
        config.recenter_phase = true;
        config.max_iterations = 1000;
    }
    OptimizationRecord record =
        optimize(terms, 1.0, target, key.t_f, -key.bound, key.bound, dt, config);

    const ControlPulse guess = initial_guess(target, key.t_f, 1.0, -key.bound, key.bound, dt);
    const CoherenceDecomposition before =
        decompose_coherence(propagate(guess, terms, 1.0), guess);
    const CoherenceDecomposition after =
        decompose_coherence(propagate(record.final_pulse, terms, 1.0), record.final_pulse);
    return CellData{std::move(record), before, after, fit_residual};
}

class CellCache {
public:
    void request(const CellKey& key) { keys_.push_back(key); }

    void compute_all() {
        std::sort(keys_.begin(), keys_.end());
        keys_.erase(std::unique(keys_.begin(), keys_.end(),
                                [](const CellKey& a, const CellKey& b) {
                                    return !(a < b) && !(b < a);
                                }),
                    keys_.end());
        std::vector<std::optional<CellData>> data(keys_.size());
        driver::run_indexed(keys_.size(), 0,
                            [&](std::size_t i) { data[i] = compute_cell(keys_[i]); });
        for (std::size_t i = 0; i < keys_.size(); ++i)
            cells_.emplace(keys_[i], std::move(*data[i]));
    }

    const CellData& at(const CellKey& key) const { return cells_.at(key); }

private:
    std::vector<CellKey> keys_;
    std::map<CellKey, CellData> cells_;
};

int g_failures = 0;

void report(int number, const std::string& name, bool pass, const std::string& detail) {
    std::printf("[%s] criterion %d: %s — %s\n", pass ? "PASS" : "FAIL", number, name.c_str(),
                detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

std::string fmt(double v) {
    char buffer[32];
    std::snprintf(buffer, sizeof(buffer), "%.3g", v);
    return buffer;
}

bool within_factor(double value, double reference, double factor) {
    return value <= reference * factor && value >= reference / factor;
}

Complex riccati_closed_form(Complex p, Complex q, double omega, double t) {
    const Complex b = q + Complex(0.0, omega);
    const Complex disc = std::sqrt(b * b - 4.0 * p);
    const Complex r1 = (-b + disc) / 2.0;
    const Complex r2 = (-b - disc) / 2.0;
    const Complex w = (r1 / r2) * std::exp((r1 - r2) * t);
    return (r1 - r2 * w) / (1.0 - w);
}

ControlPulse constant_pulse(double epsilon, double t_f, double dt, double lo = -50.0,
                            double hi = 50.0) {
    const auto steps = static_cast<std::size_t>(std::llround(t_f / dt));
    return ControlPulse(dt, std::vector<double>(steps, epsilon), lo, hi);
}

// ------------------------------- criteria -----------------------------------

void criterion_1_closed_system() {
    const auto start = std::chrono::steady_clock::now();
    const ExpTermList terms = lorentzian_terms({0.0, 1.0, 0.0});
    const ControlPulse pulse = initial_guess(GateTarget::z(), 2.0, 1.0, -1.0, 1.0, 1e-3);
    const double error =
        gate_error(propagate(pulse, terms, 1.0).final_propagator(), GateTarget::z());
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    report(1, "closed-system exactness", error < 1e-10 && seconds < 1.0,
           "gate error " + fmt(error) + " (< 1e-10), runtime " + fmt(seconds) + " s (< 1)");
}

void criterion_2_riccati_oracle() {
    struct Case {
        Complex p, q;
    };
    const double omega = kPi / 2.0;
    bool pass = true;
    double worst = 0.0;
    for (const Case& c : {Case{Complex(0.005, 0.0), Complex(-0.1, -5.0)},
                          Case{Complex(0.5, 0.0), Complex(-1.0, -1.0)},
                          Case{Complex(5.0, 0.0), Complex(-10.0, -1.0)}}) {
        const ExpTermList terms(std::vector<ExpTerm>{{c.p, c.q}});
        const auto traj = propagate(constant_pulse(omega - 1.0, 2.0, 1e-3), terms, 1.0);
        for (const double t : {0.5, 1.0, 2.0}) {
            const auto k = static_cast<std::size_t>(std::llround(t / traj.dt));
            const Complex exact = riccati_closed_form(c.p, c.q, omega, t);
            const double rel = std::abs(traj.f_total_nodes[k] - exact) / std::abs(exact);
            worst = std::max(worst, rel);
            pass = pass && rel < 1e-8;
        }
    }
    report(2, "memory equation vs closed-form solution", pass,
           "worst relative deviation " + fmt(worst) + " (< 1e-8)");
}

void criterion_3_table_lorentzian(const CellCache& cache) {
    struct Entry {
        double alpha, gamma, omega_big, reference;
    };
    const std::vector<Entry> table = {
        {0.01, 0.1, 1.0, 8.89e-7}, {0.01, 1.0, 1.0, 3.53e-5}, {0.01, 10.0, 1.0, 1.10e-4},
        {0.1, 0.1, 1.0, 8.81e-5},  {0.1, 1.0, 1.0, 3.31e-3},  {0.1, 10.0, 1.0, 9.57e-3},
        {1.0, 0.1, 1.0, 8.06e-3},  {1.0, 1.0, 1.0, 1.78e-1},  {1.0, 10.0, 1.0, 2.86e-1},
        {0.01, 0.1, 5.0, 5.17e-10}, {0.01, 1.0, 5.0, 1.40e-6}, {0.01, 10.0, 5.0, 9.15e-5},
        {0.1, 0.1, 5.0, 5.18e-8},  {0.1, 1.0, 5.0, 1.37e-4},  {0.1, 10.0, 5.0, 7.98e-3},
        {1.0, 0.1, 5.0, 5.35e-6},  {1.0, 1.0, 5.0, 1.10e-2},  {1.0, 10.0, 5.0, 2.59e-1}};
    bool pass = true;
    double worst_ratio = 1.0;
    std::string worst_cell = "-";
    for (const Entry& entry : table) {
        const CellData& cell = cache.at(
            {lorentzian_key(entry.alpha, entry.gamma, entry.omega_big), "z", 2.0, 1.0});
        const double ratio = cell.record.final_error / entry.reference;
        if (std::max(ratio, 1.0 / ratio) > std::max(worst_ratio, 1.0 / worst_ratio)) {
            worst_ratio = ratio;
            worst_cell = "(alpha=" + fmt(entry.alpha) + ", gamma=" + fmt(entry.gamma) +
                         ", omega=" + fmt(entry.omega_big) + "): " + fmt(cell.record.final_error) +
                         " vs " + fmt(entry.reference);
        }
        pass = pass && within_factor(cell.record.final_error, entry.reference, 5.0);
    }
    report(3, "phase-gate error table, single-exponential bath (18 cells, factor 5)", pass,
           "worst cell " + worst_cell + ", ratio " + fmt(worst_ratio));
}

void criterion_4_table_ohmic(const CellCache& cache) {
    struct Entry {
        double omega_c, reference;
    };
    bool pass = true;
    std::string detail;
    for (const Entry& entry : {Entry{1.0, 9.70e-6}, Entry{5.0, 1.93e-4}, Entry{20.0, 4.52e-4}}) {
        const CellData& cell = cache.at({ohmic_key(1e-3, entry.omega_c), "z", 2.0, 1.0});
        const bool error_ok = within_factor(cell.record.final_error, entry.reference, 5.0);
        const bool fit_ok = cell.fit_residual < 1e-3;
        pass = pass && error_ok && fit_ok;
        detail += "wc=" + fmt(entry.omega_c) + ": " + fmt(cell.record.final_error) + " vs " +
                  fmt(entry.reference) + " (fit " + fmt(cell.fit_residual) + "); ";
    }
    report(4, "phase-gate error table, power-law bath (factor 5, 4-term fit < 1e-3)", pass,
           detail);
}

void criterion_5_phase_vs_dissipation(const CellCache& cache) {
    const CellData& detuned = cache.at({lorentzian_key(0.1, 0.1, 5.0), "z", 2.0, 1.0});
    const CellData& resonant = cache.at({lorentzian_key(0.1, 0.1, 1.0), "z", 2.0, 1.0});

    const double improvement_detuned = detuned.record.improvement;
    const double improvement_resonant = resonant.record.improvement;
    const double kappa_change =
        std::abs(detuned.after.kappa - detuned.before.kappa) / detuned.before.kappa;
    const double phase_drop =
        std::abs(detuned.after.phi_deviation) / std::abs(detuned.before.phi_deviation);

    const bool pass = improvement_detuned >= 1.0 && improvement_resonant <= 0.2 &&
                      kappa_change < 0.05 && phase_drop <= 1e-2;
    report(5, "improvement contrast and phase-vs-dissipation split", pass,
           "I(detuned) " + fmt(improvement_detuned) + " (>= 1), I(resonant) " +
               fmt(improvement_resonant) + " (<= 0.2), kappa change " + fmt(kappa_change) +
               " (< 0.05), phase residual drop " + fmt(phase_drop) + " (<= 1e-2)");
}

void criterion_6_monotone_saturation(const CellCache& cache) {
    const CellData& cell = cache.at({lorentzian_key(0.1, 0.1, 5.0), "z", 2.0, 1.0});
    const auto& errors = cell.record.errors_per_iteration;
    bool monotone = true;
    for (std::size_t i = 1; i < errors.size(); ++i)
        monotone = monotone && errors[i] <= errors[i - 1];
    bool saturated = false;
    if (errors.size() > 50) {
        const double before = errors[errors.size() - 51];
        saturated = (before - errors.back()) < 1e-6 * before;
    }
    saturated = saturated || cell.record.stop_reason == StopReason::Threshold;
    report(6, "monotone convergence with saturation", monotone && saturated,
           std::to_string(errors.size() - 1) + " accepted iterations, monotone=" +
               (monotone ? "yes" : "no") + ", saturated=" + (saturated ? "yes" : "no"));
}

void criterion_7_trends(const CellCache& cache) {
    // identity-gate improvement grows with the gate time (longer gates leave
    // room for detuning excursions, so these cells run with the accelerated
    // settings that can follow the dissipation-shaping directions)
    std::vector<double> improvements;
    for (const double t_f : {5.0, 10.0, 20.0, 40.0})
        improvements.push_back(
            cache.at({lorentzian_key(0.01, 0.1, 1.0), "identity", t_f, 1.0, true})
                .record.improvement);
    bool identity_trend = true;
    for (std::size_t i = 1; i < improvements.size(); ++i)
        identity_trend = identity_trend && improvements[i] >= improvements[i - 1];

    // phase-gate error grows with the bath bandwidth at strong detuning
    const double e_01 = cache.at({lorentzian_key(0.01, 0.1, 10.0), "z", 2.0, 1.0}).record.final_error;
    const double e_1 = cache.at({lorentzian_key(0.01, 1.0, 10.0), "z", 2.0, 1.0}).record.final_error;
    const double e_10 = cache.at({lorentzian_key(0.01, 10.0, 10.0), "z", 2.0, 1.0}).record.final_error;
    const bool gamma_trend = e_01 < e_1 && e_1 < e_10;

    // improvement is insensitive to the coupling strength
    const double i_weak = cache.at({lorentzian_key(0.01, 0.1, 5.0), "z", 2.0, 1.0}).record.improvement;
    const double i_strong = cache.at({lorentzian_key(0.1, 0.1, 5.0), "z", 2.0, 1.0}).record.improvement;
    const bool coupling_free = std::abs(i_weak - i_strong) <= 0.2;

    std::string detail = "identity I(t_f) = [";
    for (std::size_t i = 0; i < improvements.size(); ++i)
        detail += (i ? ", " : "") + fmt(improvements[i]);
    detail += "], errors vs bandwidth " + fmt(e_01) + " < " + fmt(e_1) + " < " + fmt(e_10) +
              ", |I(0.01) - I(0.1)| = " + fmt(std::abs(i_weak - i_strong));
    report(7, "trend suite (gate time, bandwidth, coupling invariance)",
           identity_trend && gamma_trend && coupling_free, detail);
}

void criterion_8_large_range(const CellCache& cache) {
    const CellData& small = cache.at({lorentzian_key(0.1, 0.1, 1.0), "z", 2.0, 1.0});
    const CellData& large = cache.at({lorentzian_key(0.1, 0.1, 1.0), "z", 0.15, 20.0});
    const double ratio = large.record.final_error / small.record.final_error;
    report(8, "large-range control suppresses the error by orders", ratio <= 1e-2,
           "E(large, t_f=0.15) " + fmt(large.record.final_error) + " vs E(small, t_f=2) " +
               fmt(small.record.final_error) + ", ratio " + fmt(ratio) + " (<= 1e-2)");
}

void criterion_9_invariants() {
    bool pass = true;
    std::string detail;

    {  // trace preservation and Hermiticity on a strongly damped case
        const ExpTermList terms = lorentzian_terms({1.0, 1.0, 1.0});
        const auto traj = propagate(constant_pulse(0.3, 2.0, 1e-3), terms, 1.0);
        double worst_trace = 0.0, worst_herm = 0.0;
        const std::vector<Eigen::Vector4cd> states = {
            {Complex(1, 0), Complex(0, 0), Complex(0, 0), Complex(0, 0)},
            {Complex(0.5, 0), Complex(0.5, 0), Complex(0.5, 0), Complex(0.5, 0)},
            {Complex(0.5, 0), Complex(0, -0.5), Complex(0, 0.5), Complex(0.5, 0)},
            {Complex(0.3, 0), Complex(0.1, 0.2), Complex(0.1, -0.2), Complex(0.7, 0)}};
        for (const auto& rho0 : states)
            for (const std::size_t k : {std::size_t(500), std::size_t(2000)}) {
                const Eigen::Vector4cd v = traj.propagator(k) * rho0;
                worst_trace = std::max(worst_trace, std::abs(v(0) + v(3) - Complex(1.0, 0.0)));
                worst_herm = std::max(worst_herm, std::abs(v(1) - std::conj(v(2))));
            }
        pass = pass && worst_trace < 1e-9 && worst_herm < 1e-9;
        detail += "trace " + fmt(worst_trace) + ", herm " + fmt(worst_herm);
    }

    {  // integrator order through step halving
        const ExpTermList terms = lorentzian_terms({1.0, 1.0, 1.0});
        auto error_at = [&](double dt) {
            return gate_error(propagate(constant_pulse(0.0, 2.0, dt), terms, 1.0).final_propagator(),
                              GateTarget::z());
        };
        const double ratio = std::abs(error_at(0.04) - error_at(0.02)) /
                             std::abs(error_at(0.02) - error_at(0.01));
        pass = pass && ratio >= 8.0 && ratio <= 32.0;
        detail += ", order ratio " + fmt(ratio);
    }

    {  // finite-difference gradient agreement (explicit control dependence)
        const ExpTermList terms = lorentzian_terms({0.0, 1.0, 0.0});
        const GateTarget target = GateTarget::z();
        const double dt = 1e-3;
        std::mt19937 rng(11);
        std::uniform_real_distribution<double> dist(-0.5, 0.5);
        std::vector<double> samples(2000);
        for (auto& s : samples) s = dist(rng);
        const ControlPulse pulse(dt, samples, -1.0, 1.0);
        const Trajectory forward = propagate(pulse, terms, 1.0);
        const auto chi = propagate_adjoint(
            pulse, forward, (target.matrix - forward.final_propagator()) / 8.0);
        const std::size_t k = 777;
        auto plus = samples, minus = samples;
        const double delta = 1e-4;
        plus[k] += delta;
        minus[k] -= delta;
        const double fd =
            (gate_error(propagate(ControlPulse(dt, plus, -1.0, 1.0), terms, 1.0).final_propagator(),
                        target) -
             gate_error(propagate(ControlPulse(dt, minus, -1.0, 1.0), terms, 1.0).final_propagator(),
                        target)) /
            (2.0 * delta);
        const double analytic = -dt * control_gradient(chi[k], forward.propagator(k));
        const double rel = std::abs(fd - analytic) / std::abs(fd);
        pass = pass && rel < 1e-3;
        detail += ", gradient rel " + fmt(rel);
    }

    {  // bound compliance across iterates at an aggressive gain
        const ExpTermList terms = lorentzian_terms({0.1, 0.1, 5.0});
        ControlPulse pulse = initial_guess(GateTarget::z(), 2.0, 1.0, -1.0, 1.0, 1e-3);
        KrotovConfig config;
        bool bounded = true;
        for (int i = 0; i < 15; ++i) {
            auto [updated, error] = krotov_iterate(pulse, terms, 1.0, GateTarget::z(), config);
            for (const double e : updated.samples()) bounded = bounded && e >= -1.0 && e <= 1.0;
            pulse = std::move(updated);
            config.lambda *= 0.5;
        }
        pass = pass && bounded;
        detail += std::string(", bounds ") + (bounded ? "ok" : "violated");
    }

    {  // deterministic artifacts
        ExperimentConfig cfg;
        cfg.bath = LorentzianBath{0.1, 1.0, 1.0};
        cfg.krotov.max_iterations = 20;
        const auto base = std::filesystem::temp_directory_path() / "nmqoc_acceptance_det";
        std::filesystem::remove_all(base);
        bool identical = true;
        std::string first;
        for (const char* sub : {"a", "b"}) {
            cfg.outputs.directory = (base / sub).string();
            if (driver::execute_run(cfg) != 0) {
                identical = false;
                break;
            }
            std::string combined;
            for (const char* name :
                 {"record.json", "pulse.csv", "iterations.csv", "decomposition.json"})
                combined += io::read_text_file((base / sub / name).string());
            if (first.empty()) first = combined;
            else identical = identical && first == combined;
        }
        pass = pass && identical;
        detail += std::string(", determinism ") + (identical ? "ok" : "broken");
    }

    report(9, "invariant suite", pass, detail);
}

}  // namespace

int main() {
    CellCache cache;
    for (const double alpha : {0.01, 0.1, 1.0})
        for (const double gamma : {0.1, 1.0, 10.0})
            for (const double omega_big : {1.0, 5.0})
                cache.request({lorentzian_key(alpha, gamma, omega_big), "z", 2.0, 1.0});
    for (const double omega_c : {1.0, 5.0, 20.0})
        cache.request({ohmic_key(1e-3, omega_c), "z", 2.0, 1.0});
    for (const double t_f : {5.0, 10.0, 20.0, 40.0})
        cache.request({lorentzian_key(0.01, 0.1, 1.0), "identity", t_f, 1.0, true});
    for (const double gamma : {0.1, 1.0, 10.0})
        cache.request({lorentzian_key(0.01, gamma, 10.0), "z", 2.0, 1.0});
    cache.request({lorentzian_key(0.1, 0.1, 1.0), "z", 0.15, 20.0});

    const auto start = std::chrono::steady_clock::now();
    cache.compute_all();
    const double setup =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("computed optimization cells in %.1f s\n", setup);

    criterion_1_closed_system();
    criterion_2_riccati_oracle();
    criterion_3_table_lorentzian(cache);
    criterion_4_table_ohmic(cache);
    criterion_5_phase_vs_dissipation(cache);
    criterion_6_monotone_saturation(cache);
    criterion_7_trends(cache);
    criterion_8_large_range(cache);
    criterion_9_invariants();

    if (g_failures > 0) {
        std::printf("%d criterion(s) failed\n", g_failures);
        return 1;
    }
    std::printf("all acceptance criteria passed\n");
    return 0;
}
