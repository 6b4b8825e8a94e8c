// heom_oracle.hpp: index-naive evaluation of the hierarchy right-hand side on
// plain 2x2 arrays and a nested map, written without the production layout,
// Pauli storage or precomputed generator. Used to cross-check the generator.

#pragma once

#include <algorithm>
#include <array>
#include <complex>
#include <map>
#include <random>

#include "ptherm/bath_model.hpp"
#include "ptherm/heom.hpp"
#include "ptherm/quantum_core.hpp"

namespace ptherm::oracle {

inline constexpr std::complex<double> kI{0.0, 1.0};

using Mat = std::array<std::array<cplx, 2>, 2>;

inline Mat to_mat(const Operator2& m) {
    Mat a{};
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) a[i][j] = m(i, j);
    return a;
}

inline Operator2 from_mat(const Mat& a) {
    Operator2 m;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) m(i, j) = a[i][j];
    return m;
}

inline Mat mm(const Mat& x, const Mat& y) {
    Mat z{};
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            for (int k = 0; k < 2; ++k) z[i][j] += x[i][k] * y[k][j];
    return z;
}

inline Mat lin(cplx a, const Mat& x, cplx b, const Mat& y) {
    Mat z{};
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) z[i][j] = a * x[i][j] + b * y[i][j];
    return z;
}

inline Mat comm(const Mat& x, const Mat& a) { return lin(1.0, mm(x, a), -1.0, mm(a, x)); }
inline Mat anti(const Mat& x, const Mat& a) { return lin(1.0, mm(x, a), 1.0, mm(a, x)); }

using Tree = std::map<int, std::map<int, Mat>>;

inline Tree brute_force_rhs(const Tree& z, int depth, const KernelExpansion& e, const Mat& x, const Mat& h) {
    const double lam = e.bath.lambda;
    auto get = [&](int a, int b) -> Mat {
        if (a < 0 || b < 0 || a + b > depth) return Mat{};
        return z.at(a).at(b);
    };
    Tree out;
    for (int a = 0; a <= depth; ++a)
        for (int b = 0; a + b <= depth; ++b) {
            const Mat c = get(a, b);
            Mat r = lin(-kI, comm(h, c), -(e.gamma1 * a + e.gamma2 * b), c);
            r = lin(1.0, r, -lam * e.c0, comm(x, comm(x, c)));
            const Mat lo1 = get(a - 1, b);
            const Mat g1 = lin(e.c1.real(), comm(x, lo1), kI * e.c1.imag(), anti(x, lo1));
            r = lin(1.0, r, -kI * static_cast<double>(a), g1);
            const Mat lo2 = get(a, b - 1);
            r = lin(1.0, r, -kI * static_cast<double>(b) * e.c2, comm(x, lo2));
            const Mat up = lin(1.0, get(a + 1, b), 1.0, get(a, b + 1));
            r = lin(1.0, r, -kI * lam, comm(x, up));
            out[a][b] = r;
        }
    return out;
}

inline Operator2 random_hermitian(std::mt19937& rng) {
    std::normal_distribution<double> n;
    return n(rng) * ops::identity() + ops::from_pauli(n(rng), n(rng), n(rng));
}

/// Largest entry difference between the production derivative and the oracle,
/// over random kernels, couplings, Hamiltonians and hierarchy contents.
inline double generator_mismatch(int depth, int trials, unsigned seed) {
    std::mt19937 rng(seed);
    std::normal_distribution<double> n;
    double worst = 0.0;
    for (int trial = 0; trial < trials; ++trial) {
        const BathParams p{0.3 + 2.0 * std::abs(n(rng)), 0.5 + std::abs(n(rng)), 0.4 + 0.5 * std::abs(n(rng))};
        const auto e = fit_kernel(p);
        const Operator2 x = ops::from_pauli(n(rng), n(rng), n(rng));
        const Operator2 h = ops::from_pauli(0.0, 0.0, 0.5) + 0.2 * random_hermitian(rng);
        auto s = init_hierarchy(0.5 * ops::identity(), depth, e, x, h);
        Tree tree;
        for (int a = 0; a <= depth; ++a)
            for (int b = 0; a + b <= depth; ++b) {
                const Operator2 v = random_hermitian(rng);
                s.set_ado(a, b, v);
                tree[a][b] = to_mat(v);
            }
        const auto fast = hierarchy_derivative(s);
        const auto slow = brute_force_rhs(tree, depth, e, to_mat(x), to_mat(h));
        for (int a = 0; a <= depth; ++a)
            for (int b = 0; a + b <= depth; ++b)
                worst = std::max(worst, (fast.ado(a, b) - from_mat(slow.at(a).at(b))).cwiseAbs().maxCoeff());
    }
    return worst;
}

} // namespace ptherm::oracle
