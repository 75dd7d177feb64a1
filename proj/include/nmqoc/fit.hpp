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

// Least-squares fit of a sampled kernel by a sum of decaying complex
// exponentials. Rates are refined by Levenberg-Marquardt on the variable
// projection residual (amplitudes eliminated by a linear solve at every
// rate evaluation); rate real parts are parameterized as -exp(u) so the
// decay constraint holds throughout. Initial rates come from a matrix-pencil
// estimate plus log-spaced multi-starts.

#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <random>
#include <utility>
#include <vector>

#include "nmqoc/bath.hpp"
#include "nmqoc/errors.hpp"

namespace nmqoc {

struct FitOptions {
    double residual_threshold = 1e-3;  // RMS misfit / peak sample magnitude
    int lm_max_iterations = 200;
    int random_starts = 4;   // seeded jitters on top of the deterministic starts
    unsigned seed = 0;
    double rate_min = 0.0;   // bracket for log-spaced starting rates; 0 = derive
    double rate_max = 0.0;   //   from the sample grid
};

namespace fit_detail {

using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

inline MatrixXcd design_matrix(const std::vector<double>& taus, const VectorXd& u, int k) {
    const auto n = static_cast<Eigen::Index>(taus.size());
    MatrixXcd a(n, k);
    for (int j = 0; j < k; ++j) {
        const Complex q(-std::exp(u[j]), u[k + j]);
        for (Eigen::Index i = 0; i < n; ++i)
            a(i, j) = std::exp(q * taus[static_cast<std::size_t>(i)]);
    }
    return a;
}

/// Projected residual: solve for the best amplitudes, return the stacked
/// real/imag misfit and the amplitudes.
inline double projected_residual(const std::vector<double>& taus, const VectorXcd& y,
                                 const VectorXd& u, int k, VectorXd& resid, VectorXcd& p) {
    const MatrixXcd a = design_matrix(taus, u, k);
    p = a.colPivHouseholderQr().solve(y);
    const VectorXcd r = a * p - y;
    const auto n = r.size();
    resid.resize(2 * n);
    resid.head(n) = r.real();
    resid.tail(n) = r.imag();
    return resid.norm();
}

struct LmResult {
    VectorXd u;
    VectorXcd p;
    double residual_norm = std::numeric_limits<double>::infinity();
};

inline LmResult levenberg_marquardt(const std::vector<double>& taus, const VectorXcd& y,
                                    VectorXd u, int k, int max_iterations) {
    LmResult best;
    VectorXd r;
    VectorXcd p;
    double rnorm = projected_residual(taus, y, u, k, r, p);
    best = {u, p, rnorm};

    double mu = 1e-3;
    const int dim = 2 * k;
    MatrixXd jac(r.size(), dim);
    for (int iter = 0; iter < max_iterations; ++iter) {
        for (int j = 0; j < dim; ++j) {
            const double h = 1e-6 * (1.0 + std::abs(u[j]));
            VectorXd up = u;
            up[j] += h;
            VectorXd rp;
            VectorXcd pp;
            projected_residual(taus, y, up, k, rp, pp);
            jac.col(j) = (rp - r) / h;
        }
        const MatrixXd hess = jac.transpose() * jac;
        const VectorXd grad = jac.transpose() * r;

        bool stepped = false;
        for (int inner = 0; inner < 24; ++inner) {
            MatrixXd damped = hess;
            for (int j = 0; j < dim; ++j)
                damped(j, j) += mu * std::max(hess(j, j), 1e-14);
            const VectorXd delta = damped.ldlt().solve(-grad);
            VectorXd u_try = u + delta;
            // keep rate magnitudes representable
            for (int j = 0; j < k; ++j) u_try[j] = std::clamp(u_try[j], -60.0, 60.0);
            VectorXd r_try;
            VectorXcd p_try;
            const double rnorm_try = projected_residual(taus, y, u_try, k, r_try, p_try);
            if (rnorm_try < rnorm) {
                u = u_try;
                r = r_try;
                p = p_try;
                const double gain = (rnorm - rnorm_try) / std::max(rnorm, 1e-300);
                rnorm = rnorm_try;
                mu = std::max(mu / 3.0, 1e-14);
                stepped = true;
                if (rnorm < best.residual_norm) best = {u, p, rnorm};
                if (gain < 1e-12) return best;
                break;
            }
            mu *= 4.0;
            if (mu > 1e14) return best;
        }
        if (!stepped) return best;
    }
    return best;
}

/// Matrix-pencil rate estimate on a decimated copy of the samples.
inline std::vector<Complex> pencil_rates(const std::vector<double>& taus, const VectorXcd& y,
                                         int k) {
    const auto n = static_cast<std::size_t>(y.size());
    const std::size_t stride = std::max<std::size_t>(1, (n + 256) / 257);
    std::vector<Complex> sub;
    for (std::size_t i = 0; i < n; i += stride) sub.push_back(y[static_cast<Eigen::Index>(i)]);
    const double dt_sub = (taus[1] - taus[0]) * static_cast<double>(stride);

    const auto m = sub.size();
    const auto l = m / 2;
    if (l < static_cast<std::size_t>(k) + 1 || m - l < static_cast<std::size_t>(k)) return {};

    MatrixXcd hank(m - l, l + 1);
    for (std::size_t i = 0; i < m - l; ++i)
        for (std::size_t j = 0; j <= l; ++j) hank(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = sub[i + j];

    Eigen::JacobiSVD<MatrixXcd> svd(hank, Eigen::ComputeThinV);
    const MatrixXcd v = svd.matrixV().leftCols(k);
    const MatrixXcd v0 = v.topRows(v.rows() - 1);
    const MatrixXcd v1 = v.bottomRows(v.rows() - 1);
    const MatrixXcd shift = v0.colPivHouseholderQr().solve(v1);

    Eigen::ComplexEigenSolver<MatrixXcd> eig(shift);
    std::vector<Complex> rates;
    rates.reserve(static_cast<std::size_t>(k));
    for (int j = 0; j < k; ++j) {
        const Complex z = eig.eigenvalues()[j];
        if (std::abs(z) < 1e-300) {
            rates.push_back(Complex(-1.0 / dt_sub, 0.0));
            continue;
        }
        Complex q = std::log(z) / dt_sub;
        if (!(q.real() < 0.0)) q = Complex(-1e-6, q.imag());
        rates.push_back(q);
    }
    return rates;
}

inline VectorXd pack_rates(const std::vector<Complex>& rates) {
    const int k = static_cast<int>(rates.size());
    VectorXd u(2 * k);
    for (int j = 0; j < k; ++j) {
        u[j] = std::log(std::max(-rates[static_cast<std::size_t>(j)].real(), 1e-12));
        u[k + j] = rates[static_cast<std::size_t>(j)].imag();
    }
    return u;
}

}  // namespace fit_detail

/// Fit `term_count` decaying complex exponentials to uniformly gridded kernel
/// samples. Returns the terms and a FitReport; throws FitFailed when no
/// initialization reaches the residual threshold, InvalidInput on grid or
/// argument violations.
inline std::pair<ExpTermList, FitReport> fit_multi_exponential(
    const std::vector<std::pair<double, Complex>>& kernel_samples, int term_count,
    const FitOptions& options = {}) {
    using namespace fit_detail;

    if (term_count < 1) throw InvalidInput("fit_multi_exponential: term_count must be >= 1");
    const auto n = kernel_samples.size();
    if (n < 2 * static_cast<std::size_t>(term_count) + 2)
        throw InvalidInput("fit_multi_exponential: too few samples for requested term count");

    const double step = kernel_samples[1].first - kernel_samples[0].first;
    if (!(step > 0.0)) throw InvalidInput("fit_multi_exponential: samples must be increasing in time");
    std::vector<double> taus(n);
    VectorXcd y(static_cast<Eigen::Index>(n));
    double peak = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& [tau, value] = kernel_samples[i];
        if (!std::isfinite(tau) || !std::isfinite(value.real()) || !std::isfinite(value.imag()))
            throw InvalidInput("fit_multi_exponential: non-finite sample");
        if (i > 0 && std::abs((tau - kernel_samples[i - 1].first) - step) > 1e-9 * step)
            throw InvalidInput("fit_multi_exponential: samples must lie on a uniform grid");
        taus[i] = tau - kernel_samples[0].first;
        y[static_cast<Eigen::Index>(i)] = value;
        peak = std::max(peak, std::abs(value));
    }
    const double horizon = taus.back();

    FitReport report;
    report.term_count = term_count;
    report.fit_horizon = horizon;
    report.sample_count = static_cast<int>(n);

    if (peak == 0.0) {  // zero coupling: represent exactly with zero amplitudes
        std::vector<ExpTerm> zero(static_cast<std::size_t>(term_count),
                                  ExpTerm{Complex(0.0, 0.0), Complex(-1.0, 0.0)});
        report.relative_l2_residual = 0.0;
        return {ExpTermList(std::move(zero)), report};
    }

    // Starting rate bracket: from the options when the caller knows the
    // kernel's scale, otherwise from the grid itself.
    const double rate_lo = options.rate_min > 0.0 ? options.rate_min : 1.0 / (5.0 * horizon);
    const double rate_hi = options.rate_max > rate_lo ? options.rate_max : 1.0 / (5.0 * step);

    std::vector<VectorXd> starts;
    if (auto rates = pencil_rates(taus, y, term_count); !rates.empty())
        starts.push_back(pack_rates(rates));

    std::vector<double> ladder(static_cast<std::size_t>(term_count));
    for (int j = 0; j < term_count; ++j)
        ladder[static_cast<std::size_t>(j)] =
            term_count == 1 ? std::sqrt(rate_lo * rate_hi)
                            : rate_lo * std::pow(rate_hi / rate_lo, j / double(term_count - 1));
    for (const double sign : {0.0, -1.0}) {
        std::vector<Complex> rates;
        for (const double r : ladder) rates.push_back(Complex(-r, sign * r));
        starts.push_back(pack_rates(rates));
    }
    std::mt19937 rng(options.seed);
    std::uniform_real_distribution<double> jitter(-0.7, 0.7);
    for (int s = 0; s < options.random_starts; ++s) {
        std::vector<Complex> rates;
        for (const double r : ladder) {
            const double rj = r * std::exp(jitter(rng));
            rates.push_back(Complex(-rj, (s % 2 == 0 ? 0.0 : -rj) * std::exp(jitter(rng))));
        }
        starts.push_back(pack_rates(rates));
    }

    const double sqrt_n = std::sqrt(static_cast<double>(n));
    LmResult best;
    for (const auto& u0 : starts) {
        const LmResult result =
            levenberg_marquardt(taus, y, u0, term_count, options.lm_max_iterations);
        if (result.residual_norm < best.residual_norm) best = result;
        if (best.residual_norm / (sqrt_n * peak) < 0.01 * options.residual_threshold) break;
    }

    report.relative_l2_residual = best.residual_norm / (sqrt_n * peak);
    if (!(report.relative_l2_residual <= options.residual_threshold))
        throw FitFailed("fit_multi_exponential: residual " +
                            std::to_string(report.relative_l2_residual) + " exceeds threshold " +
                            std::to_string(options.residual_threshold),
                        report.relative_l2_residual);

    std::vector<ExpTerm> terms(static_cast<std::size_t>(term_count));
    for (int j = 0; j < term_count; ++j)
        terms[static_cast<std::size_t>(j)] = {best.p[j],
                                              Complex(-std::exp(best.u[j]), best.u[term_count + j])};
    std::sort(terms.begin(), terms.end(), [](const ExpTerm& a, const ExpTerm& b) {
        if (std::abs(a.p) != std::abs(b.p)) return std::abs(a.p) > std::abs(b.p);
        return a.q.real() > b.q.real();
    });
    return {ExpTermList(std::move(terms)), report};
}

}  // namespace nmqoc
