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

// Environment spectral densities, their correlation functions, and the
// decaying multi-exponential representation c(tau) = sum_j p_j exp(q_j tau)
// consumed by the dynamics. All frequencies and times are dimensionless in
// units of the qubit transition frequency.

#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <utility>
#include <vector>

#include "nmqoc/errors.hpp"

namespace nmqoc {

using Complex = std::complex<double>;

/// Lorentzian spectral density of width gamma centered at omega_big; its
/// correlation function is a single decaying complex exponential
/// c(tau) = (alpha*gamma/2) exp(-gamma*tau - i*omega_big*tau), tau >= 0.
struct LorentzianBath {
    double alpha = 0.0;      // dimensionless correlation strength
    double gamma = 1.0;      // inverse correlation time
    double omega_big = 0.0;  // spectral center frequency

    void validate() const {
        if (!(alpha >= 0.0) || !std::isfinite(alpha))
            throw InvalidInput("LorentzianBath: alpha must be >= 0");
        if (!(gamma > 0.0) || !std::isfinite(gamma))
            throw InvalidInput("LorentzianBath: gamma must be > 0");
        if (!std::isfinite(omega_big))
            throw InvalidInput("LorentzianBath: omega_big must be finite");
    }
};

/// Ohmic spectral density J(w) = 2 alpha_o w exp(-w/omega_c), zero temperature.
struct OhmicBath {
    double alpha_o = 0.0;  // dimensionless coupling strength
    double omega_c = 1.0;  // cutoff frequency

    void validate() const {
        if (!(alpha_o >= 0.0) || !std::isfinite(alpha_o))
            throw InvalidInput("OhmicBath: alpha_o must be >= 0");
        if (!(omega_c > 0.0) || !std::isfinite(omega_c))
            throw InvalidInput("OhmicBath: omega_c must be > 0");
    }
};

struct ExpTerm {
    Complex p;  // amplitude
    Complex q;  // rate, Re(q) < 0
};

/// Correlation kernel as an ordered list of decaying complex exponentials.
/// An empty list represents zero coupling.
class ExpTermList {
public:
    ExpTermList() = default;

    explicit ExpTermList(std::vector<ExpTerm> terms) : terms_(std::move(terms)) {
        for (const auto& t : terms_) {
            if (!std::isfinite(t.p.real()) || !std::isfinite(t.p.imag()) ||
                !std::isfinite(t.q.real()) || !std::isfinite(t.q.imag()))
                throw InvalidInput("ExpTermList: non-finite term");
            if (!(t.q.real() < 0.0))
                throw InvalidInput("ExpTermList: every rate must have Re(q) < 0");
        }
    }

    std::size_t size() const { return terms_.size(); }
    bool empty() const { return terms_.empty(); }
    const ExpTerm& operator[](std::size_t j) const { return terms_[j]; }
    const std::vector<ExpTerm>& terms() const { return terms_; }
    auto begin() const { return terms_.begin(); }
    auto end() const { return terms_.end(); }

    /// sum_j p_j (the kernel value at tau = 0)
    Complex amplitude_sum() const {
        Complex s{0.0, 0.0};
        for (const auto& t : terms_) s += t.p;
        return s;
    }

private:
    std::vector<ExpTerm> terms_;
};

/// Quality record for a kernel fit. `relative_l2_residual` is the RMS misfit
/// over the fit grid normalized by the peak sample magnitude, recorded exactly
/// as computed.
struct FitReport {
    int term_count = 0;
    double fit_horizon = 0.0;
    double relative_l2_residual = 0.0;
    int sample_count = 0;
};

/// Exact single-term exponential representation of the Lorentzian kernel:
/// p = alpha*gamma/2, q = -gamma - i*omega_big.
inline ExpTermList lorentzian_terms(const LorentzianBath& bath) {
    bath.validate();
    ExpTerm term;
    term.p = Complex(bath.alpha * bath.gamma / 2.0, 0.0);
    term.q = Complex(-bath.gamma, -bath.omega_big);
    return ExpTermList({term});
}

/// Ohmic correlation function c(tau) = 2 alpha_o omega_c^2 (1 + i omega_c tau)^-2.
inline Complex ohmic_correlation(double tau, const OhmicBath& bath) {
    bath.validate();
    if (!(tau >= 0.0)) throw InvalidInput("ohmic_correlation: tau must be >= 0");
    const Complex denom = Complex(1.0, bath.omega_c * tau);
    return 2.0 * bath.alpha_o * bath.omega_c * bath.omega_c / (denom * denom);
}

/// sum_j p_j exp(q_j tau)
inline Complex evaluate_terms(const ExpTermList& terms, double tau) {
    if (!(tau >= 0.0)) throw InvalidInput("evaluate_terms: tau must be >= 0");
    Complex acc{0.0, 0.0};
    for (const auto& t : terms) acc += t.p * std::exp(t.q * tau);
    return acc;
}

/// Uniform samples of a kernel on [0, horizon], endpoints included.
inline std::vector<std::pair<double, Complex>> sample_kernel(
    const std::function<Complex(double)>& kernel, double horizon, int count) {
    if (!(horizon > 0.0)) throw InvalidInput("sample_kernel: horizon must be > 0");
    if (count < 2) throw InvalidInput("sample_kernel: need at least 2 samples");
    std::vector<std::pair<double, Complex>> samples(static_cast<std::size_t>(count));
    const double step = horizon / (count - 1);
    for (int i = 0; i < count; ++i) {
        const double tau = step * i;
        samples[static_cast<std::size_t>(i)] = {tau, kernel(tau)};
    }
    return samples;
}

}  // namespace nmqoc
