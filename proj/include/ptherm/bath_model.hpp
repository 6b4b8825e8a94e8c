// bath_model.hpp: Drude-Lorentz bath: spectral density, Matsubara correlation
// function and the one-Matsubara-plus-delta kernel expansion fed to the HEOM.

#pragma once

#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <span>
#include <string>

#include "ptherm/errors.hpp"

namespace ptherm {

struct BathParams {
    double lambda = 1.0;  // overall coupling strength
    double gamma = 1.0;   // Drude relaxation rate
    double beta = 2.0 / 3.0;

    double matsubara(int k) const { return 2.0 * std::numbers::pi * k / beta; }
};

inline constexpr double kPoleTol = 1e-9;

/// Checks positivity and that beta*gamma stays away from the poles 2 pi k of cot(beta gamma / 2).
/// lambda = 0 is accepted (uncoupled bath).
inline void validate(const BathParams& p) {
    if (!(p.lambda >= 0.0) || !std::isfinite(p.lambda)) throw ParameterError("bath: lambda must be >= 0");
    if (!(p.gamma > 0.0) || !std::isfinite(p.gamma)) throw ParameterError("bath: gamma must be > 0");
    if (!(p.beta > 0.0) || !std::isfinite(p.beta)) throw ParameterError("bath: beta must be > 0");
    const double ratio = p.beta * p.gamma / (2.0 * std::numbers::pi);
    const double k = std::round(ratio);
    if (k >= 1.0 && std::abs(ratio - k) < kPoleTol)
        throw ParameterError("bath: beta*gamma hits the Matsubara pole 2*pi*" + std::to_string(static_cast<int>(k)));
}

/// J(w) = 2 lambda gamma w / (w^2 + gamma^2)
inline double spectral_density(double omega, const BathParams& p) {
    return 2.0 * p.lambda * p.gamma * omega / (omega * omega + p.gamma * p.gamma);
}

/// kappa_r - i kappa_i truncated after K Matsubara terms.
inline std::complex<double> exact_correlation(double tau, const BathParams& p, int K) {
    validate(p);
    if (K < 1) throw ParameterError("exact_correlation: K must be >= 1");
    if (!(tau >= 0.0)) throw ParameterError("exact_correlation: tau must be >= 0");
    const double g = p.gamma;
    const double cot = 1.0 / std::tan(0.5 * p.beta * g);
    std::complex<double> c = p.lambda * g * std::complex<double>(cot, -1.0) * std::exp(-g * tau);
    double sum = 0.0;
    for (int k = 1; k <= K; ++k) {
        const double nu = p.matsubara(k);
        const double term = nu * std::exp(-nu * tau) / (nu * nu - g * g);
        sum += term;
        if (tau > 0.0 && term < std::numeric_limits<double>::min()) break;
    }
    return c + 4.0 * p.lambda * g / p.beta * sum;
}

/// kappa_r - i kappa_i ~ lambda (c1 e^{-gamma1 t} + c2 e^{-gamma2 t} + 2 c0 delta(t)).
/// All coefficients have lambda factored out.
struct KernelExpansion {
    double c0 = 0.0;
    std::complex<double> c1{0.0, 0.0};
    double c2 = 0.0;
    double gamma1 = 0.0;
    double gamma2 = 0.0;
    BathParams bath;
    /// False when beta*gamma >= pi, outside the regime the expansion is meant for.
    bool high_temperature = true;

    /// lambda (c1 e^{-gamma1 t} + c2 e^{-gamma2 t}), the smooth part of the kernel.
    std::complex<double> smooth(double tau) const {
        return bath.lambda * (c1 * std::exp(-gamma1 * tau) + c2 * std::exp(-gamma2 * tau));
    }
};

/// Closed-form high-temperature decomposition: the first Matsubara term is kept
/// explicitly, all k >= 2 terms are folded into the delta-function weight c0
/// using cot x = 1/x - 2x sum_k 1/(k^2 pi^2 - x^2).
inline KernelExpansion fit_kernel(const BathParams& p) {
    validate(p);
    const double g = p.gamma;
    const double x = 0.5 * p.beta * g;
    const double cot = 1.0 / std::tan(x);
    const double nu1 = p.matsubara(1);
    const double first_weight = (4.0 * g / p.beta) / (nu1 * nu1 - g * g);

    KernelExpansion e;
    e.bath = p;
    e.gamma1 = g;
    e.c1 = {g * cot, -g};
    e.gamma2 = nu1;
    e.c2 = first_weight * nu1;
    e.c0 = (1.0 / x - cot) - first_weight;
    e.high_temperature = p.beta * g < std::numbers::pi;
    return e;
}

/// max_tau |C_fit - C_K| / max(|C_K|, 1e-12) over a strictly positive grid.
inline double validate_fit(const KernelExpansion& e, std::span<const double> tau_grid, int K) {
    constexpr double floor = 1e-12;
    if (tau_grid.empty()) throw ParameterError("validate_fit: empty tau grid");
    if (K < 10) throw ParameterError("validate_fit: K must be >= 10");
    double worst = 0.0;
    for (double tau : tau_grid) {
        if (!(tau > 0.0)) throw ParameterError("validate_fit: tau grid must be strictly positive");
        const auto exact = exact_correlation(tau, e.bath, K);
        worst = std::max(worst, std::abs(e.smooth(tau) - exact) / std::max(std::abs(exact), floor));
    }
    return worst;
}

} // namespace ptherm
