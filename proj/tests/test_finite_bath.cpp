#include <catch_amalgamated.hpp>

#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <numbers>
#include <vector>

#include "ptherm/finite_bath.hpp"

using namespace ptherm;
using Catch::Approx;

namespace {

const BathParams kBath{1.0, 1.0, 2.0 / 3.0};

// Dense reference: H built from Kronecker products in the order qubit (x) mode 0 (x) ...,
// propagated with the matrix exponential and traced over the modes.
struct Dense {
    Eigen::MatrixXcd h, rho0;
    int bath_dim = 1;

    Dense(const FiniteBathModel& m, const Operator2& rho_s) {
        const int levels = m.n_max + 1;
        for (int j = 0; j < m.modes; ++j) bath_dim *= levels;
        Eigen::MatrixXcd a = Eigen::MatrixXcd::Zero(levels, levels);
        for (int n = 1; n < levels; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
        auto embed = [&](int j, const Eigen::MatrixXcd& op) {
            Eigen::MatrixXcd out = Eigen::MatrixXcd::Identity(1, 1);
            for (int k = 0; k < m.modes; ++k) {
                const Eigen::MatrixXcd f = k == j ? op : Eigen::MatrixXcd::Identity(levels, levels);
                out = Eigen::kroneckerProduct(out, f).eval();
            }
            return out;
        };
        Eigen::MatrixXcd hb = Eigen::MatrixXcd::Zero(bath_dim, bath_dim), y = hb, thermal = hb;
        thermal.setIdentity();
        for (int j = 0; j < m.modes; ++j) {
            const Eigen::MatrixXcd num = a.adjoint() * a;
            hb += m.omega[j] * embed(j, num);
            y += m.nu[j] * embed(j, a + a.adjoint());
            Eigen::MatrixXcd th = Eigen::MatrixXcd::Zero(levels, levels);
            for (int n = 0; n < levels; ++n) th(n, n) = std::exp(-m.bath.beta * m.omega[j] * n);
            thermal = (thermal * embed(j, th / th.trace())).eval();
        }
        const Eigen::MatrixXcd ib = Eigen::MatrixXcd::Identity(bath_dim, bath_dim);
        const Eigen::MatrixXcd hs = 0.5 * m.omega0 * ops::sigma_z();
        const Eigen::MatrixXcd x = ops::from_pauli(m.coupling);
        h = Eigen::kroneckerProduct(hs, ib).eval() + Eigen::kroneckerProduct(Eigen::MatrixXcd(Operator2::Identity()), hb).eval() +
            Eigen::kroneckerProduct(x, y).eval();
        rho0 = Eigen::kroneckerProduct(Eigen::MatrixXcd(rho_s), thermal).eval();
    }

    Operator2 reduced(double t) const {
        const Eigen::MatrixXcd u = (Eigen::MatrixXcd(-cplx(0.0, t) * h)).exp();
        const Eigen::MatrixXcd rho = u * rho0 * u.adjoint();
        Operator2 out = Operator2::Zero();
        for (int s = 0; s < 2; ++s)
            for (int r = 0; r < 2; ++r)
                for (int n = 0; n < bath_dim; ++n) out(s, r) += rho(s * bath_dim + n, r * bath_dim + n);
        return out;
    }

    double energy() const { return (h * rho0).trace().real(); }
};

FiniteBathModel manual_model(std::vector<double> omega, std::vector<double> nu, int n_max, Eigen::Vector3d a) {
    FiniteBathModel m;
    m.modes = static_cast<int>(omega.size());
    m.n_max = n_max;
    m.omega = std::move(omega);
    m.nu = std::move(nu);
    m.bath = kBath;
    m.coupling = a;
    return m;
}

}  // namespace

TEST_CASE("dimension bound", "[finite]") {
    CHECK_NOTHROW(check_dimension(6, 3));
    CHECK_NOTHROW(check_dimension(13, 1));
    CHECK_THROWS_AS(check_dimension(14, 1), ParameterError);
    CHECK_THROWS_AS(check_dimension(7, 3), ParameterError);
    CHECK_THROWS_AS(check_dimension(-1, 3), ParameterError);
    CHECK_THROWS_AS(check_dimension(2, 0), ParameterError);
    CHECK(discretize_bath(kBath, 6, 3, 4.0).dimension() == 8192);
    CHECK_THROWS_AS(discretize_bath(kBath, 7, 3, 4.0), ParameterError);
    CHECK_THROWS_AS(discretize_bath(kBath, 3, 3, 0.0), ParameterError);
    CHECK_THROWS_AS(discretize_bath(kBath, 3, 3, 4.0, Partition::spectral, Eigen::Vector3d::Zero()), ParameterError);
}

TEST_CASE("discretization reproduces the band weight", "[finite]") {
    const double wc = 4.0;
    // trapezoid integral of J / pi over [0, wc]
    double integral = 0.0;
    const int n = 100000;
    for (int i = 0; i <= n; ++i) {
        const double w = wc * i / n;
        integral += (i == 0 || i == n ? 0.5 : 1.0) * spectral_density(w, kBath);
    }
    integral *= wc / n / std::numbers::pi;
    for (auto part : {Partition::spectral, Partition::reorganization})
        for (int modes : {1, 3, 6}) {
            const auto m = discretize_bath(kBath, modes, 3, wc, part);
            double sum = 0.0;
            for (int j = 0; j < modes; ++j) {
                CHECK(m.omega[j] > 0.0);
                CHECK(m.omega[j] < wc);
                if (j > 0) CHECK(m.omega[j] > m.omega[j - 1]);
                sum += m.nu[j] * m.nu[j];
            }
            CHECK(std::abs(sum - integral) / integral < 0.05);
            CHECK(sum == Approx(integral).epsilon(1e-8));
        }
    // equal spectral weight: every mode carries the same coupling
    const auto m = discretize_bath(kBath, 6, 3, wc);
    for (int j = 1; j < 6; ++j) CHECK(m.nu[j] == Approx(m.nu[0]).epsilon(1e-12));
    CHECK(m.nu[0] == Approx(0.387694).margin(1e-6));
}

TEST_CASE("uncoupled modes leave the qubit precessing", "[finite]") {
    const auto m = manual_model({0.7, 1.3}, {0.0, 0.0}, 2, {1.0, 0.0, 0.0});
    const BlochVector r0(0.6, 0.2, -0.5);
    std::vector<double> grid;
    for (int i = 0; i <= 20; ++i) grid.push_back(0.37 * i);
    const auto rec = finite_bath_evolve(density_from_bloch(r0), m, grid);
    for (const auto& row : rec.rows) {
        const double c = std::cos(row.t), s = std::sin(row.t);
        CHECK(row.r.x() == Approx(c * r0.x() - s * r0.y()).margin(1e-12));
        CHECK(row.r.y() == Approx(s * r0.x() + c * r0.y()).margin(1e-12));
        CHECK(row.r.z() == Approx(r0.z()).margin(1e-12));
    }
    CHECK(rec.meta.solver == "finite-bath");
}

TEST_CASE("agrees with dense propagation", "[finite]") {
    const Operator2 rho_s = density_from_bloch({0.5, -0.3, 0.6});
    const std::vector<FiniteBathModel> models{
        discretize_bath(kBath, 2, 2, 4.0, Partition::spectral, {1.0, 0.0, 0.0}),
        discretize_bath(kBath, 2, 2, 4.0, Partition::reorganization, {0.3, 0.4, 0.5}),
        discretize_bath(kBath, 3, 1, 4.0, Partition::spectral, {0.0, 1.0, 0.0}),
        discretize_bath(kBath, 1, 4, 4.0, Partition::spectral, {0.0, 0.0, 1.0}),
        discretize_bath({0.4, 2.0, 1.3}, 2, 3, 6.0, Partition::spectral, {0.5, 0.0, 0.5}, 1.7),
    };
    for (const auto& m : models) {
        const Dense dense(m, rho_s);
        const FiniteBathPropagator prop(m, rho_s);
        for (double t : {0.0, 0.3, 1.1, 2.0, 7.5}) {
            const Operator2 a = prop.reduced(t), b = dense.reduced(t);
            CHECK((a - b).cwiseAbs().maxCoeff() < 1e-9);
        }
        CHECK(prop.initial_energy() == Approx(dense.energy()).margin(1e-10));
    }
}

TEST_CASE("energy is conserved", "[finite]") {
    for (const Eigen::Vector3d a : {Eigen::Vector3d(1, 0, 0), Eigen::Vector3d(0.5, 0, 0.5)}) {
        const auto m = discretize_bath(kBath, 4, 3, 4.0, Partition::spectral, a);
        const FiniteBathPropagator prop(m, density_from_bloch({0.7, 0.0, 0.7}));
        CHECK(prop.energy() == Approx(prop.initial_energy()).margin(1e-8));
    }
}

TEST_CASE("single resonant mode stays physical", "[finite]") {
    const auto m = manual_model({1.0}, {0.3}, 8, {1.0, 0.0, 0.0});
    std::vector<double> grid;
    for (int i = 0; i <= 300; ++i) grid.push_back(0.1 * i);
    const auto rec = finite_bath_evolve(density_from_bloch({0.0, 0.0, 1.0}), m, grid);
    CHECK(rec.max_radius <= 1.0 + 1e-9);
    CHECK(rec.max_trace_defect < 1e-9);
    // the excitation is exchanged with the mode and comes back
    double lowest = 1.0, later = -1.0;
    for (const auto& row : rec.rows) {
        if (row.t < 8.0) lowest = std::min(lowest, row.r.z());
        else later = std::max(later, row.r.z());
    }
    CHECK(lowest < 0.5);
    CHECK(later > lowest + 0.2);
}

TEST_CASE("finite bath argument checks", "[finite]") {
    auto m = discretize_bath(kBath, 2, 2, 4.0);
    const std::vector<double> empty;
    CHECK_THROWS_AS(finite_bath_evolve(gibbs_state(1.0), m, empty), ParameterError);
    m.nu.pop_back();
    CHECK_THROWS_AS(FiniteBathPropagator(m, gibbs_state(1.0)), ParameterError);
    CHECK_THROWS_AS(FiniteBathPropagator(discretize_bath(kBath, 2, 2, 4.0), Operator2::Zero()), InvalidStateError);
}
