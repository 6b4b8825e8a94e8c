// lindblad.hpp: weak-coupling Born-Markov master equation for the same qubit,
// used as a reference at small lambda.

#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "ptherm/bath_model.hpp"
#include "ptherm/errors.hpp"
#include "ptherm/quantum_core.hpp"
#include "ptherm/trajectory.hpp"

namespace ptherm {

inline constexpr double kWeakCouplingLimit = 0.1;

struct LindbladModel {
    Operator2 hamiltonian = 0.5 * ops::sigma_z();
    double omega0 = 1.0;
    BathParams bath;
    Eigen::Vector3d coupling = Eigen::Vector3d::UnitX();

    double rate_down = 0.0;
    double rate_up = 0.0;
    double rate_dephasing = 0.0;  // coefficient of D[sigma_z]
    double frequency_shift = 0.0; // Lamb shift of the transition, already in `hamiltonian`
};

/// Bose occupation at frequency w.
inline double bose(double w, double beta) { return 1.0 / std::expm1(beta * w); }

/// Principal-value part of the emission spectrum folded into the transition:
///   S(w0) - S(-w0) = (2 w0 / pi) P int_0^inf J(w) coth(beta w / 2) / (w0^2 - w^2) dw,
/// evaluated with the Matsubara form of coth and
///   P int_0^inf dw / ((w^2 + a^2)(w0^2 - w^2)) = pi / (2 a (w0^2 + a^2)).
inline double lamb_shift(const BathParams& p, double omega0, int terms = 200000) {
    validate(p);
    const double g = p.gamma;
    auto pv = [&](double a) { return std::numbers::pi / (2.0 * a * (omega0 * omega0 + a * a)); };
    double sum = 0.0;
    for (int k = terms; k >= 1; --k) {
        const double nu = p.matsubara(k);
        const double d = nu * nu - g * g;
        sum += (nu * nu / d) * pv(nu) - (g * g / d) * pv(g);
    }
    // tail beyond `terms`: each term ~ -pi g / (2 (w0^2 + g^2) nu^2) + O(nu^-3)
    const double a = 2.0 * std::numbers::pi / p.beta;
    sum += -pv(g) * g * g / (a * a * (terms + 0.5));
    return (2.0 * omega0 / std::numbers::pi) * (4.0 * p.lambda * g / p.beta) * (pv(g) + 2.0 * sum);
}

/// Golden-rule rates for X = a.sigma and H = (omega0/2) sigma_z:
///   down = 2 J(w0) (n + 1) w,  up = 2 J(w0) n w,  w = ax^2 + ay^2,
///   dephasing = az^2 S(0),  S(0) = lim 2 J(w)(n(w) + 1) = 4 lambda / (beta gamma),
/// and the transition frequency moved by w * lamb_shift.
inline LindbladModel make_lindblad(const BathParams& p, const Eigen::Vector3d& coupling, double omega0 = 1.0) {
    validate(p);
    if (!(omega0 > 0.0)) throw ParameterError("lindblad: omega0 must be > 0");
    if (!(coupling.norm() > 0.0) || !coupling.allFinite())
        throw ParameterError("lindblad: coupling vector must be non-zero and finite");
    LindbladModel m;
    m.omega0 = omega0;
    m.bath = p;
    m.coupling = coupling;
    const double w = coupling.x() * coupling.x() + coupling.y() * coupling.y();
    const double n = bose(omega0, p.beta);
    const double j = spectral_density(omega0, p);
    m.rate_down = 2.0 * j * (n + 1.0) * w;
    m.rate_up = 2.0 * j * n * w;
    m.rate_dephasing = coupling.z() * coupling.z() * 4.0 * p.lambda / (p.beta * p.gamma);
    m.frequency_shift = w * lamb_shift(p, omega0);
    m.hamiltonian = 0.5 * (omega0 + m.frequency_shift) * ops::sigma_z();
    if (m.rate_down < 0.0 || m.rate_up < 0.0 || m.rate_dephasing < 0.0)
        throw ParameterError("lindblad: negative rate");
    return m;
}

namespace detail {

inline Operator2 dissipator(const Operator2& l, const Operator2& rho) {
    const Operator2 ld = l.adjoint();
    return l * rho * ld - 0.5 * (ld * l * rho + rho * ld * l);
}

} // namespace detail

/// d rho / dt.
inline Operator2 lindblad_rhs(const LindbladModel& m, const Operator2& rho) {
    Operator2 lower;
    lower << 0.0, 0.0, 1.0, 0.0;  // |g><e| with |e> = (1,0)
    const cplx i(0.0, 1.0);
    return -i * ops::commutator(m.hamiltonian, rho) + m.rate_down * detail::dissipator(lower, rho) +
           m.rate_up * detail::dissipator(Operator2(lower.adjoint()), rho) +
           m.rate_dephasing * detail::dissipator(ops::sigma_z(), rho);
}

/// RK4 through the increasing time grid with sub-steps no longer than max_dt.
inline TrajectoryRecord lindblad_evolve(const Operator2& rho0, const LindbladModel& m, std::span<const double> t_grid,
                                        double max_dt = 0.01) {
    validate_density(rho0);
    if (t_grid.empty()) throw ParameterError("lindblad_evolve: empty time grid");
    if (!(max_dt > 0.0)) throw ParameterError("lindblad_evolve: max_dt must be > 0");
    for (std::size_t i = 1; i < t_grid.size(); ++i)
        if (!(t_grid[i] > t_grid[i - 1])) throw ParameterError("lindblad_evolve: time grid must increase");

    TrajectoryRecord rec;
    rec.meta.lambda = m.bath.lambda;
    rec.meta.gamma = m.bath.gamma;
    rec.meta.beta = m.bath.beta;
    rec.meta.omega0 = m.omega0;
    rec.meta.coupling = m.coupling;
    rec.meta.dt = max_dt;
    rec.meta.solver = "lindblad";
    if (m.bath.lambda > kWeakCouplingLimit)
        rec.notes.push_back("lambda " + std::to_string(m.bath.lambda) + " is outside the weak-coupling regime");

    const PointerBasis basis = pointer_basis(m.coupling);
    Operator2 rho = rho0;
    double t = t_grid[0];
    for (double target : t_grid) {
        const double span = target - t;
        const auto n = static_cast<long long>(std::ceil(span / max_dt - 1e-12));
        const double h = n > 0 ? span / static_cast<double>(n) : 0.0;
        for (long long k = 0; k < n; ++k) {
            const Operator2 k1 = lindblad_rhs(m, rho);
            const Operator2 k2 = lindblad_rhs(m, rho + 0.5 * h * k1);
            const Operator2 k3 = lindblad_rhs(m, rho + 0.5 * h * k2);
            const Operator2 k4 = lindblad_rhs(m, rho + h * k3);
            rho += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        t = target;
        rec.rows.push_back(make_row(t, rho, basis, rec));
    }
    rec.final_state = rho;
    return rec;
}

} // namespace ptherm
