// quantum_core.hpp: qubit states and operators: Bloch map, Gibbs state,
// entropy, pointer bases and the pointer-basis dephasing map.
//
// Units: hbar = k_B = 1, energies in units of the qubit splitting omega0.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <sstream>
#include <string>

#include "ptherm/errors.hpp"

namespace ptherm {

using cplx = std::complex<double>;
using Operator2 = Eigen::Matrix2cd;  // row-major semantics: (row, col)
using Ket2 = Eigen::Vector2cd;
using BlochVector = Eigen::Vector3d;

inline constexpr double kTraceTol = 1e-12;
inline constexpr double kPositivityTol = 1e-10;
inline constexpr double kBlochRadiusTol = 1e-10;

namespace ops {

inline Operator2 identity() { return Operator2::Identity(); }

inline Operator2 sigma_x() {
    Operator2 m;
    m << 0.0, 1.0, 1.0, 0.0;
    return m;
}

inline Operator2 sigma_y() {
    Operator2 m;
    m << 0.0, cplx(0.0, -1.0), cplx(0.0, 1.0), 0.0;
    return m;
}

inline Operator2 sigma_z() {
    Operator2 m;
    m << 1.0, 0.0, 0.0, -1.0;
    return m;
}

inline Operator2 projector(const Ket2& k) { return k * k.adjoint(); }

/// a_x sigma_x + a_y sigma_y + a_z sigma_z
inline Operator2 from_pauli(double ax, double ay, double az) {
    return ax * sigma_x() + ay * sigma_y() + az * sigma_z();
}

inline Operator2 from_pauli(const Eigen::Vector3d& a) { return from_pauli(a.x(), a.y(), a.z()); }

/// Traceless part of a hermitian operator in Pauli coordinates.
inline Eigen::Vector3d pauli_vector(const Operator2& m) {
    return {m(0, 1).real(), m(1, 0).imag(), 0.5 * (m(0, 0).real() - m(1, 1).real())};
}

inline double hermiticity_defect(const Operator2& m) { return (m - m.adjoint()).cwiseAbs().maxCoeff(); }

inline Operator2 commutator(const Operator2& a, const Operator2& b) { return a * b - b * a; }

} // namespace ops

/// Throws InvalidStateError unless rho is hermitian, unit-trace and positive.
inline void validate_density(const Operator2& rho, double trace_tol = kTraceTol,
                             double positivity_tol = kPositivityTol) {
    const double herm = ops::hermiticity_defect(rho);
    if (!(herm <= trace_tol))
        throw InvalidStateError("density is not hermitian (defect " + std::to_string(herm) + ")");
    const double tr = rho.trace().real();
    if (!(std::abs(tr - 1.0) <= trace_tol))
        throw InvalidStateError("density trace is " + std::to_string(tr) + ", expected 1");
    Eigen::SelfAdjointEigenSolver<Operator2> es(rho, Eigen::EigenvaluesOnly);
    if (es.eigenvalues()(0) < -positivity_tol)
        throw InvalidStateError("density has negative eigenvalue " + std::to_string(es.eigenvalues()(0)));
}

inline Operator2 density_from_bloch(const BlochVector& r) {
    if (!(r.norm() <= 1.0 + kBlochRadiusTol)) {
        std::ostringstream os;
        os << "Bloch vector radius " << r.norm() << " exceeds 1";
        throw InvalidStateError(os.str());
    }
    return 0.5 * (ops::identity() + ops::from_pauli(r));
}

inline BlochVector bloch_from_density(const Operator2& rho) {
    validate_density(rho);
    return {(rho * ops::sigma_x()).trace().real(), (rho * ops::sigma_y()).trace().real(),
            (rho * ops::sigma_z()).trace().real()};
}

/// Bloch vector without validation, for states already known to be physical.
inline BlochVector bloch_unchecked(const Operator2& rho) {
    return {2.0 * rho(0, 1).real(), -2.0 * rho(0, 1).imag(), (rho(0, 0) - rho(1, 1)).real()};
}

/// e^{-beta H}/Z for H = (omega0/2) sigma_z.
inline Operator2 gibbs_state(double beta, double omega0 = 1.0) {
    if (!(beta > 0.0)) throw ParameterError("gibbs_state: beta must be > 0");
    if (!(omega0 > 0.0)) throw ParameterError("gibbs_state: omega0 must be > 0");
    return density_from_bloch({0.0, 0.0, -std::tanh(0.5 * beta * omega0)});
}

/// S(r) = ln 2 - [(1+r)ln(1+r) + (1-r)ln(1-r)]/2, with 0 ln 0 = 0.
inline double entropy_of_radius(double r) {
    r = std::clamp(r, 0.0, 1.0);
    auto xlnx = [](double x) { return x > 0.0 ? x * std::log(x) : 0.0; };
    return std::numbers::ln2 - 0.5 * (xlnx(1.0 + r) + xlnx(1.0 - r));
}

/// -Tr rho ln rho via eigen-decomposition.
inline double von_neumann_entropy(const Operator2& rho) {
    validate_density(rho);
    Eigen::SelfAdjointEigenSolver<Operator2> es(rho, Eigen::EigenvaluesOnly);
    double s = 0.0;
    for (int i = 0; i < 2; ++i) {
        const double p = es.eigenvalues()(i);
        if (p > 0.0) s -= p * std::log(p);
    }
    return s;
}

/// Eigenbasis of X_S = a.sigma. kets[0] belongs to the larger eigenvalue; each
/// ket's largest-magnitude amplitude is real positive (first one on ties).
struct PointerBasis {
    std::array<Ket2, 2> kets;
    std::array<double, 2> eigenvalues{};
    Eigen::Vector3d coupling = Eigen::Vector3d::Zero();

    /// Unit vector along the pointer axis in the Bloch ball.
    Eigen::Vector3d axis() const { return coupling.normalized(); }
};

namespace detail {

inline Ket2 fix_phase(Ket2 k) {
    const int big = std::abs(k(0)) + 1e-12 >= std::abs(k(1)) ? 0 : 1;
    const cplx a = k(big);
    k *= std::conj(a) / std::abs(a);
    k(big) = std::abs(a);
    return k.normalized();
}

} // namespace detail

inline PointerBasis pointer_basis(double ax, double ay, double az) {
    const Eigen::Vector3d a(ax, ay, az);
    if (!(a.norm() > 0.0) || !a.allFinite())
        throw ParameterError("pointer_basis: coupling vector must be non-zero and finite");
    Eigen::SelfAdjointEigenSolver<Operator2> es(ops::from_pauli(a));
    PointerBasis b;
    b.coupling = a;
    b.eigenvalues = {es.eigenvalues()(1), es.eigenvalues()(0)};
    b.kets = {detail::fix_phase(es.eigenvectors().col(1)), detail::fix_phase(es.eigenvectors().col(0))};
    return b;
}

inline PointerBasis pointer_basis(const Eigen::Vector3d& a) { return pointer_basis(a.x(), a.y(), a.z()); }

/// Postulate-1 dephasing map: sum_i |p_i><p_i| rho |p_i><p_i|.
inline Operator2 pointer_project(const Operator2& rho, const PointerBasis& basis) {
    validate_density(rho);
    Operator2 out = Operator2::Zero();
    for (const auto& k : basis.kets) {
        const Operator2 p = ops::projector(k);
        out += p * rho * p;
    }
    return out;
}

struct PointerElements {
    double d1 = 0.0;
    double d2 = 0.0;
    cplx offdiag{0.0, 0.0};
};

/// Matrix elements in the pointer basis without validating rho.
inline PointerElements pointer_elements_unchecked(const Operator2& rho, const PointerBasis& basis) {
    const auto& p1 = basis.kets[0];
    const auto& p2 = basis.kets[1];
    return {(p1.adjoint() * rho * p1)(0).real(), (p2.adjoint() * rho * p2)(0).real(),
            (p1.adjoint() * rho * p2)(0)};
}

inline PointerElements pointer_matrix_elements(const Operator2& rho, const PointerBasis& basis) {
    validate_density(rho);
    return pointer_elements_unchecked(rho, basis);
}

inline double trace_distance(const Operator2& a, const Operator2& b) {
    const Operator2 d = a - b;
    Eigen::SelfAdjointEigenSolver<Operator2> es(0.5 * (d + d.adjoint()), Eigen::EigenvaluesOnly);
    return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

} // namespace ptherm
