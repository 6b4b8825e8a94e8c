#include <catch_amalgamated.hpp>

#include <map>
#include <random>
#include <utility>
#include <vector>

#include "ptherm/heom.hpp"
#include "ptherm/heom_oracle.hpp"

using namespace ptherm;
using Catch::Approx;

namespace {

const cplx I1(0.0, 1.0);

Operator2 psi1_density() {
    Ket2 k(1.0 + std::sqrt(0.5), std::sqrt(0.5));
    return ops::projector(k / std::sqrt(2.0 + std::sqrt(2.0)));
}

Operator2 hamiltonian() { return 0.5 * ops::sigma_z(); }

Operator2 random_hermitian(std::mt19937& rng) {
    std::normal_distribution<double> n;
    return n(rng) * ops::identity() + ops::from_pauli(n(rng), n(rng), n(rng));
}

}  // namespace

TEST_CASE("hierarchy allocation", "[heom]") {
    const auto e = fit_kernel({1.0, 1.0, 2.0 / 3.0});
    const auto s = init_hierarchy(psi1_density(), 50, e, ops::sigma_x(), hamiltonian());
    CHECK(s.size() == 1326);
    int nonzero = 0;
    for (const auto& c : s.coords())
        if (c[0] != 0 || c[1] != 0 || c[2] != 0 || c[3] != 0) ++nonzero;
    CHECK(nonzero == 1);
    CHECK((s.density() - psi1_density()).norm() < 1e-15);
    CHECK(s.time() == 0.0);

    const auto mixed = init_hierarchy(0.5 * ops::identity(), 7, e, ops::sigma_x(), hamiltonian());
    CHECK((mixed.density() - 0.5 * ops::identity()).norm() == 0.0);
    CHECK(init_hierarchy(psi1_density(), 1, e, ops::sigma_x(), hamiltonian()).size() == 3);
    CHECK_THROWS_AS(init_hierarchy(psi1_density(), 0, e, ops::sigma_x(), hamiltonian()), ParameterError);
    CHECK_THROWS_AS(init_hierarchy(Operator2(2.0 * psi1_density()), 3, e, ops::sigma_x(), hamiltonian()),
                    InvalidStateError);
}

TEST_CASE("hierarchy layout", "[heom]") {
    const HierarchyLayout L(6);
    CHECK(L.size() == HierarchyLayout::count(6));
    for (std::size_t i = 0; i < L.size(); ++i) {
        const int a = L.n1(i), b = L.n2(i);
        CHECK(HierarchyLayout::index(a, b) == static_cast<int>(i));
        CHECK(L.lower1(i) == (a > 0 ? HierarchyLayout::index(a - 1, b) : HierarchyLayout::kNone));
        CHECK(L.lower2(i) == (b > 0 ? HierarchyLayout::index(a, b - 1) : HierarchyLayout::kNone));
        CHECK(L.upper1(i) == (a + b < 6 ? HierarchyLayout::index(a + 1, b) : HierarchyLayout::kNone));
    }
}

TEST_CASE("superoperators", "[heom]") {
    std::mt19937 rng(1);
    const Operator2 x = random_hermitian(rng);
    CHECK(apply_S_minus(ops::identity(), x).norm() < 1e-15);
    CHECK((apply_S_minus(ops::sigma_z(), ops::sigma_x()) - (-2.0 * I1 * ops::sigma_y())).norm() < 1e-15);
    CHECK((apply_S_plus(ops::sigma_x(), ops::sigma_x()) - 2.0 * ops::identity()).norm() < 1e-15);

    const auto e = fit_kernel({1.0, 1.0, 2.0 / 3.0});
    CHECK(apply_G(2, ops::identity(), e, x).norm() < 1e-15);
    const Operator2 g1 = apply_G(1, ops::sigma_z(), e, ops::sigma_x());
    CHECK((g1 - e.c1.real() * (-2.0 * I1) * ops::sigma_y()).norm() < 1e-14);
    CHECK(std::abs(g1(0, 1) - (-2.0 * 2.888057036277277)) < 1e-12);  // -5.776 i sigma_y
    CHECK((apply_G(1, ops::identity(), e, x) - I1 * e.c1.imag() * 2.0 * x).norm() < 1e-14);
    CHECK_THROWS_AS(apply_G(3, x, e, x), ParameterError);
}

TEST_CASE("generator matches the brute-force right-hand side", "[heom][oracle]") {
    for (int depth = 1; depth <= 3; ++depth) CHECK(oracle::generator_mismatch(depth, 5, 42 + depth) < 1e-13);
}

TEST_CASE("derivative special cases", "[heom]") {
    SECTION("free precession when lambda = 0") {
        const auto e = fit_kernel({0.0, 1.0, 2.0 / 3.0});
        const auto s = init_hierarchy(density_from_bloch({1, 0, 0}), 4, e, ops::sigma_x(), hamiltonian());
        const BlochVector rdot = bloch_unchecked(hierarchy_derivative(s).density() + 0.5 * ops::identity());
        CHECK((rdot - BlochVector(0, 1, 0)).norm() < 1e-15);
    }
    SECTION("maximally mixed top couples only to the first tier") {
        const auto e = fit_kernel({1.3, 1.0, 2.0 / 3.0});
        auto s = init_hierarchy(0.5 * ops::identity(), 3, e, ops::sigma_x(), hamiltonian());
        std::mt19937 rng(2);
        const Operator2 z10 = random_hermitian(rng), z01 = random_hermitian(rng);
        s.set_ado(1, 0, z10);
        s.set_ado(0, 1, z01);
        s.set_ado(2, 1, random_hermitian(rng));
        const Operator2 expect = -I1 * 1.3 * apply_S_minus(Operator2(z10 + z01), ops::sigma_x());
        CHECK((hierarchy_derivative(s).density() - expect).norm() < 1e-14);
    }
    SECTION("factorized start") {
        const auto e = fit_kernel({2.0, 1.0, 2.0 / 3.0});
        const Operator2 rho = psi1_density();
        const auto s = init_hierarchy(rho, 2, e, ops::sigma_x(), hamiltonian());
        const Operator2 expect = -I1 * ops::commutator(hamiltonian(), rho) -
                                 2.0 * e.c0 * apply_S_minus(apply_S_minus(rho, ops::sigma_x()), ops::sigma_x());
        CHECK((hierarchy_derivative(s).density() - expect).norm() < 1e-14);

        const Operator2 g = gibbs_state(2.0 / 3.0);
        const auto sg = init_hierarchy(g, 2, e, ops::sigma_x(), hamiltonian());
        const Operator2 eg = -2.0 * e.c0 * apply_S_minus(apply_S_minus(g, ops::sigma_x()), ops::sigma_x());
        CHECK((hierarchy_derivative(sg).density() - eg).norm() < 1e-14);
        CHECK(eg.norm() > 1e-3);
    }
    SECTION("damping of a deep member") {
        const auto e = fit_kernel({1.0, 1.0, 2.0 / 3.0});
        auto s = init_hierarchy(0.5 * ops::identity(), 6, e, ops::sigma_x(), hamiltonian());
        s.set_ado(0, 0, Operator2::Zero());
        s.set_ado(3, 2, ops::identity());
        const auto d = hierarchy_derivative(s);
        CHECK((d.ado(3, 2) + (3.0 * e.gamma1 + 2.0 * e.gamma2) * ops::identity()).norm() < 1e-13);
    }
}

TEST_CASE("moment operator", "[heom]") {
    const auto e = fit_kernel({1.5, 1.0, 2.0 / 3.0});
    const Operator2 x = ops::from_pauli(0.5, 0.0, 0.5);
    const Operator2 rho = psi1_density();
    const auto s0 = init_hierarchy(rho, 3, e, x, hamiltonian());
    CHECK((eta1(s0) - (-I1 * 1.5 * e.c0 * apply_S_minus(rho, x))).norm() < 1e-15);

    KernelExpansion no_delta = e;
    no_delta.c0 = 0.0;
    CHECK(eta1(init_hierarchy(rho, 3, no_delta, x, hamiltonian())).norm() == 0.0);

    std::mt19937 rng(8);
    auto s = init_hierarchy(rho, 3, e, x, hamiltonian());
    for (int a = 0; a <= 3; ++a)
        for (int b = 0; a + b <= 3; ++b)
            if (a + b > 0) s.set_ado(a, b, random_hermitian(rng));
    const Operator2 top = -I1 * ops::commutator(hamiltonian(), rho) - I1 * ops::commutator(x, eta1(s));
    CHECK((hierarchy_derivative(s).density() - top).norm() < 1e-12);
}

TEST_CASE("RK4 stepping", "[heom]") {
    SECTION("unitary precession keeps the radius") {
        const auto e = fit_kernel({0.0, 1.0, 2.0 / 3.0});
        HierarchyState s = init_hierarchy(density_from_bloch({0.6, 0.0, 0.8}), 2, e, ops::sigma_x(), hamiltonian());
        HeomGenerator gen(s);
        Rk4Workspace ws(s.size());
        for (int i = 0; i < 1000; ++i) step_rk4(s, 1e-3, gen, ws);
        CHECK(std::abs(bloch_unchecked(s.density()).norm() - 1.0) < 1e-10);
        CHECK(s.time() == Approx(1.0).epsilon(1e-12));
    }
    SECTION("one step from the Gibbs state") {
        const auto e = fit_kernel({1.0, 1.0, 2.0 / 3.0});
        const Operator2 g = gibbs_state(2.0 / 3.0);
        const auto s = init_hierarchy(g, 3, e, ops::sigma_x(), hamiltonian());
        const double dt = 1e-5;
        const auto next = step_rk4(s, dt);
        const Operator2 slope = -e.c0 * apply_S_minus(apply_S_minus(g, ops::sigma_x()), ops::sigma_x());
        CHECK(((next.density() - g) / dt - slope).norm() < 1e-3 * slope.norm());
    }
    SECTION("fourth-order convergence") {
        // a weakly damped orbit, compared at t = 2 pi against a fine-step reference
        const auto e = fit_kernel({0.2, 1.0, 2.0 / 3.0});
        auto run = [&](double dt) {
            auto s = init_hierarchy(psi1_density(), 3, e, ops::sigma_x(), hamiltonian());
            HeomGenerator gen(s);
            Rk4Workspace ws(s.size());
            const auto n = std::llround(2.0 * std::numbers::pi / dt);
            for (long long i = 0; i < n; ++i) step_rk4(s, 2.0 * std::numbers::pi / static_cast<double>(n), gen, ws);
            return bloch_unchecked(s.density());
        };
        const BlochVector ref = run(2.0 * std::numbers::pi / 4000);
        const double e1 = (run(2.0 * std::numbers::pi / 100) - ref).norm();
        const double e2 = (run(2.0 * std::numbers::pi / 200) - ref).norm();
        CHECK(e1 / e2 == Approx(16.0).epsilon(0.15));
    }
}

TEST_CASE("steady detection", "[heom]") {
    std::vector<BlochVector> constant(10, BlochVector(0.1, 0.2, -0.3));
    CHECK(detect_steady(constant, 1e-6));
    CHECK_FALSE(detect_steady(std::vector<BlochVector>{BlochVector::Zero()}, 1e-6));

    std::vector<BlochVector> circle;
    for (int i = 0; i < 50; ++i) circle.emplace_back(std::cos(0.01 * i), std::sin(0.01 * i), 0.0);
    CHECK_FALSE(detect_steady(circle, 1e-6));

    // r(t) = span e^{-t/10}; window of 50 samples spaced dt
    const double dt = 0.01, span = 0.5;
    std::vector<double> fired;
    std::deque<BlochVector> w;
    double t_hit = -1;
    for (int i = 0; i < 400000 && t_hit < 0; ++i) {
        const double t = i * dt;
        w.emplace_back(0.0, 0.0, span * std::exp(-t / 10.0));
        if (w.size() > 50) w.pop_front();
        if (w.size() == 50 && detect_steady(w, 1e-6)) t_hit = t;
    }
    // diameter of the window is span e^{-t/10} (e^{49 dt / 10} - 1) at detection
    const double predicted = 10.0 * std::log(span * std::expm1(49 * dt / 10.0) / 1e-6);
    CHECK(t_hit == Approx(predicted).margin(dt));
    CHECK(t_hit == Approx(10.0 * std::log(span / 1e-6)).margin(10.0 * std::log(10.0 / (49 * dt)) + 0.1));
}

TEST_CASE("evolve", "[heom]") {
    SECTION("no dissipation never becomes steady") {
        const auto e = fit_kernel({0.0, 1.0, 2.0 / 3.0});
        auto s = init_hierarchy(psi1_density(), 3, e, ops::sigma_x(), hamiltonian());
        IntegratorConfig cfg;
        cfg.t_max = 50;
        cfg.steady_window = 5;
        const auto rec = evolve(s, cfg);
        CHECK_FALSE(rec.steady);
        CHECK(rec.rows.back().t == Approx(50.0));
        CHECK(rec.rows.size() == 1001);
        for (const auto& row : rec.rows) CHECK(row.r.norm() == Approx(1.0).margin(1e-9));
    }
    SECTION("weak coupling relaxes to the Gibbs state") {
        const auto e = fit_kernel({0.01, 1.0, 2.0 / 3.0});
        auto s = init_hierarchy(psi1_density(), 6, e, ops::sigma_x(), hamiltonian());
        IntegratorConfig cfg;
        cfg.t_max = 1500;
        const auto rec = evolve(s, cfg);
        CHECK(rec.steady);
        CHECK((rec.rows.back().r - BlochVector(0, 0, -std::tanh(1.0 / 3.0))).norm() < 0.02);
        CHECK(rec.max_trace_defect < 1e-9);
        CHECK(rec.max_hermiticity_defect < 1e-9);
        CHECK(rec.max_radius < 1 + 1e-9);
        CHECK(rec.max_pointer_sum_defect < 1e-9);
    }
    SECTION("steady state of the hierarchy balances the top equation") {
        const auto e = fit_kernel({1.0, 1.0, 2.0 / 3.0});
        const Operator2 x = ops::from_pauli(0.5, 0, 0.5);
        auto s = init_hierarchy(psi1_density(), 12, e, x, hamiltonian());
        IntegratorConfig cfg;
        cfg.t_max = 400;
        cfg.steady_window = 40;
        const auto rec = evolve(s, cfg);
        REQUIRE(rec.steady);
        const Operator2 res = ops::commutator(hamiltonian(), s.density()) + ops::commutator(x, eta1(s));
        CHECK(res.norm() < cfg.steady_tol);
    }
    SECTION("configuration errors") {
        const auto e = fit_kernel({1.0, 1.0, 2.0 / 3.0});
        auto s = init_hierarchy(psi1_density(), 10, e, ops::sigma_x(), hamiltonian());
        IntegratorConfig cfg;
        cfg.dt = 2.0 * stability_bound(s);
        CHECK_THROWS_AS(evolve(s, cfg), ParameterError);
        cfg.dt = 0.0;
        cfg.t_max = -1.0;
        CHECK_THROWS_AS(evolve(s, cfg), ParameterError);
    }
    SECTION("blow-up carries the index, time and partial record") {
        const auto e = fit_kernel({1.0, 1.0, 2.0 / 3.0});
        auto s = init_hierarchy(psi1_density(), 5, e, ops::sigma_x(), hamiltonian());
        s.coords()[HierarchyLayout::index(2, 1)][1] = std::numeric_limits<double>::quiet_NaN();
        IntegratorConfig cfg;
        cfg.t_max = 1.0;
        try {
            evolve(s, cfg);
            FAIL("expected a blow-up");
        } catch (const NumericalBlowupError& err) {
            CHECK(err.n1() == 2);
            CHECK(err.n2() == 1);
            CHECK(err.time() == 0.0);
            REQUIRE(err.partial);
            CHECK(err.partial->rows.size() <= 1);
        }
    }
    SECTION("norm guard") {
        const auto e = fit_kernel({1.0, 1.0, 2.0 / 3.0});
        auto s = init_hierarchy(psi1_density(), 5, e, ops::sigma_x(), hamiltonian());
        s.set_ado(1, 1, 1e9 * ops::sigma_z());
        IntegratorConfig cfg;
        cfg.t_max = 1.0;
        CHECK_THROWS_AS(evolve(s, cfg), NumericalBlowupError);
    }
}

TEST_CASE("depth convergence", "[heom]") {
    IntegratorConfig cfg;
    cfg.t_max = 40;
    {
        const auto e = fit_kernel({0.01, 1.0, 2.0 / 3.0});
        CHECK(convergence_check(psi1_density(), e, ops::sigma_x(), hamiltonian(), 5, 10, cfg) < 1e-6);
    }
    {
        const auto e = fit_kernel({0.0, 1.0, 2.0 / 3.0});
        CHECK(convergence_check(psi1_density(), e, ops::sigma_x(), hamiltonian(), 2, 6, cfg) < 1e-14);
    }
    const auto e = fit_kernel({1.0, 1.0, 2.0 / 3.0});
    CHECK_THROWS_AS(convergence_check(psi1_density(), e, ops::sigma_x(), hamiltonian(), 6, 6, cfg), ParameterError);
}
