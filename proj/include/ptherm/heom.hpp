// heom.hpp: two-index hierarchical equations of motion for a qubit coupled
// linearly (X_S (x) Y_B) to a Drude-Lorentz bath, and their RK4 integration.
//
// dz_{n1,n2}/dt = -i[H, z] - (g1 n1 + g2 n2) z - lambda c0 S- S- z
//                 - i n1 G1 z_{n1-1,n2} - i n2 G2 z_{n1,n2-1}
//                 - i lambda S- (z_{n1+1,n2} + z_{n1,n2+1})
// with S-/S+ the commutator/anticommutator with X and Gj = Re(cj) S- + i Im(cj) S+.
//
// Every auxiliary operator of this hierarchy stays hermitian when the top one is,
// so each is stored as four real Pauli coordinates (z = a0 I + a.sigma) and the
// generator acts on them as a real linear map.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <deque>
#include <iterator>
#include <limits>
#include <memory>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "ptherm/bath_model.hpp"
#include "ptherm/errors.hpp"
#include "ptherm/quantum_core.hpp"
#include "ptherm/trajectory.hpp"

namespace ptherm {

class NumericalBlowupError : public NumericalError {
public:
    NumericalBlowupError(const std::string& what, int n1, int n2, double t)
        : NumericalError(what), n1_(n1), n2_(n2), t_(t) {}

    int n1() const { return n1_; }
    int n2() const { return n2_; }
    double time() const { return t_; }

    /// Rows recorded before the failure, filled in by evolve().
    std::shared_ptr<const TrajectoryRecord> partial;

private:
    int n1_, n2_;
    double t_;
};

// ---------------------------------------------------------------------------
// Superoperators on plain 2x2 operators

inline Operator2 apply_S_minus(const Operator2& a, const Operator2& x) { return x * a - a * x; }
inline Operator2 apply_S_plus(const Operator2& a, const Operator2& x) { return x * a + a * x; }

/// G_j A = Re(c_j) S- A + i Im(c_j) S+ A, j in {1, 2}.
inline Operator2 apply_G(int j, const Operator2& a, const KernelExpansion& e, const Operator2& x) {
    if (j != 1 && j != 2) throw ParameterError("apply_G: j must be 1 or 2");
    const std::complex<double> c = j == 1 ? e.c1 : std::complex<double>(e.c2, 0.0);
    return c.real() * apply_S_minus(a, x) + std::complex<double>(0.0, c.imag()) * apply_S_plus(a, x);
}

// ---------------------------------------------------------------------------
// Index layout: flat over n1 + n2 <= d, by level L = n1 + n2, then n1 ascending.

class HierarchyLayout {
public:
    static constexpr int kNone = -1;

    explicit HierarchyLayout(int depth) : depth_(depth) {
        if (depth < 1) throw ParameterError("hierarchy depth must be >= 1");
        const std::size_t n = count(depth);
        n1_.resize(n);
        n2_.resize(n);
        lower1_.assign(n, kNone);
        lower2_.assign(n, kNone);
        upper1_.assign(n, kNone);
        upper2_.assign(n, kNone);
        for (int level = 0; level <= depth; ++level) {
            for (int a = 0; a <= level; ++a) {
                const int b = level - a;
                const int i = index(a, b);
                n1_[i] = a;
                n2_[i] = b;
                if (a > 0) lower1_[i] = index(a - 1, b);
                if (b > 0) lower2_[i] = index(a, b - 1);
                if (level < depth) {
                    upper1_[i] = index(a + 1, b);
                    upper2_[i] = index(a, b + 1);
                }
            }
        }
    }

    static std::size_t count(int depth) {
        return static_cast<std::size_t>(depth + 1) * static_cast<std::size_t>(depth + 2) / 2;
    }
    static int index(int n1, int n2) {
        const int level = n1 + n2;
        return level * (level + 1) / 2 + n1;
    }

    int depth() const { return depth_; }
    std::size_t size() const { return n1_.size(); }
    int n1(std::size_t i) const { return n1_[i]; }
    int n2(std::size_t i) const { return n2_[i]; }
    int lower1(std::size_t i) const { return lower1_[i]; }
    int lower2(std::size_t i) const { return lower2_[i]; }
    int upper1(std::size_t i) const { return upper1_[i]; }
    int upper2(std::size_t i) const { return upper2_[i]; }

private:
    int depth_;
    std::vector<int> n1_, n2_, lower1_, lower2_, upper1_, upper2_;
};

/// Real Pauli coordinates {a0, ax, ay, az} of a hermitian operator a0 I + a.sigma.
using PauliCoords = std::array<double, 4>;

inline PauliCoords to_pauli(const Operator2& m) {
    const auto v = ops::pauli_vector(m);
    return {0.5 * m.trace().real(), v.x(), v.y(), v.z()};
}

inline Operator2 from_pauli_coords(const PauliCoords& c) {
    return c[0] * ops::identity() + ops::from_pauli(c[1], c[2], c[3]);
}

// ---------------------------------------------------------------------------

class HierarchyState {
public:
    HierarchyState(std::shared_ptr<const HierarchyLayout> layout, const KernelExpansion& kernel,
                   const Operator2& coupling, const Operator2& hamiltonian)
        : layout_(std::move(layout)),
          kernel_(kernel),
          coupling_(coupling),
          hamiltonian_(hamiltonian),
          ados_(layout_->size(), PauliCoords{0.0, 0.0, 0.0, 0.0}) {}

    int depth() const { return layout_->depth(); }
    std::size_t size() const { return ados_.size(); }
    double time() const { return t_; }
    void set_time(double t) { t_ = t; }

    const HierarchyLayout& layout() const { return *layout_; }
    const std::shared_ptr<const HierarchyLayout>& layout_ptr() const { return layout_; }
    const KernelExpansion& kernel() const { return kernel_; }
    const Operator2& coupling() const { return coupling_; }
    const Operator2& hamiltonian() const { return hamiltonian_; }

    std::span<const PauliCoords> coords() const { return ados_; }
    std::span<PauliCoords> coords() { return ados_; }

    Operator2 ado(int n1, int n2) const {
        check_index(n1, n2);
        return from_pauli_coords(ados_[HierarchyLayout::index(n1, n2)]);
    }

    void set_ado(int n1, int n2, const Operator2& value) {
        check_index(n1, n2);
        if (ops::hermiticity_defect(value) > 1e-12)
            throw InvalidStateError("auxiliary operators must be hermitian");
        ados_[HierarchyLayout::index(n1, n2)] = to_pauli(value);
    }

    Operator2 density() const { return from_pauli_coords(ados_[0]); }

private:
    void check_index(int n1, int n2) const {
        if (n1 < 0 || n2 < 0 || n1 + n2 > depth())
            throw ParameterError("hierarchy index out of range");
    }

    std::shared_ptr<const HierarchyLayout> layout_;
    KernelExpansion kernel_;
    Operator2 coupling_;
    Operator2 hamiltonian_;
    std::vector<PauliCoords> ados_;
    double t_ = 0.0;
};

/// Factorized initial condition: z_{0,0} = rho0, every auxiliary operator zero.
inline HierarchyState init_hierarchy(const Operator2& rho0, int depth, const KernelExpansion& kernel,
                                     const Operator2& coupling, const Operator2& hamiltonian) {
    validate_density(rho0);
    if (ops::hermiticity_defect(coupling) > 1e-12) throw ParameterError("coupling operator must be hermitian");
    if (ops::hermiticity_defect(hamiltonian) > 1e-12) throw ParameterError("hamiltonian must be hermitian");
    HierarchyState s(std::make_shared<const HierarchyLayout>(depth), kernel, coupling, hamiltonian);
    s.set_ado(0, 0, rho0);
    return s;
}

// ---------------------------------------------------------------------------
// Generator

/// The HEOM right-hand side, precomputed for one (kernel, X, H) triple as real
/// 4x4 blocks acting on Pauli coordinates:
///   out_n = (local - damping_n) z_n + n1 lower1 z_{n-e1} + n2 lower2 z_{n-e2} + upper (z_{n+e1} + z_{n+e2}).
class HeomGenerator {
public:
    using Block = Eigen::Matrix4d;

    HeomGenerator(const KernelExpansion& kernel, const Operator2& coupling, const Operator2& hamiltonian,
                  const HierarchyLayout& layout)
        : layout_(&layout) {
        const double lam = kernel.bath.lambda;
        // Each block is read off by acting on the four Pauli basis operators.
        local_ = block([&](const Operator2& a) {
            return Operator2(-std::complex<double>(0.0, 1.0) * ops::commutator(hamiltonian, a) -
                             lam * kernel.c0 * apply_S_minus(apply_S_minus(a, coupling), coupling));
        });
        lower1_ = block([&](const Operator2& a) {
            return Operator2(-std::complex<double>(0.0, 1.0) * apply_G(1, a, kernel, coupling));
        });
        lower2_ = block([&](const Operator2& a) {
            return Operator2(-std::complex<double>(0.0, 1.0) * apply_G(2, a, kernel, coupling));
        });
        upper_ = block([&](const Operator2& a) {
            return Operator2(-std::complex<double>(0.0, lam) * apply_S_minus(a, coupling));
        });
        damping_.resize(layout.size());
        for (std::size_t i = 0; i < layout.size(); ++i)
            damping_[i] = kernel.gamma1 * layout.n1(i) + kernel.gamma2 * layout.n2(i);
    }

    explicit HeomGenerator(const HierarchyState& s)
        : HeomGenerator(s.kernel(), s.coupling(), s.hamiltonian(), s.layout()) {}

    /// out = L(in). Returns false if any output entry is non-finite.
    bool apply(std::span<const PauliCoords> in, std::span<PauliCoords> out) const {
        using Vec = Eigen::Vector4d;
        using CMap = Eigen::Map<const Vec>;
        const auto& L = *layout_;
        const std::size_t n = L.size();
        const Vec zero = Vec::Zero();
        auto at = [&](int j) -> CMap { return CMap(j == HierarchyLayout::kNone ? zero.data() : in[j].data()); };
        Vec acc = Vec::Zero();
        for (std::size_t i = 0; i < n; ++i) {
            const CMap a(in[i].data());
            Vec r = local_ * a - damping_[i] * a;
            if (const int u1 = L.upper1(i); u1 != HierarchyLayout::kNone)
                r.noalias() += upper_ * (CMap(in[u1].data()) + CMap(in[L.upper2(i)].data()));
            r += static_cast<double>(L.n1(i)) * (lower1_ * at(L.lower1(i)));
            r += static_cast<double>(L.n2(i)) * (lower2_ * at(L.lower2(i)));
            Eigen::Map<Vec>(out[i].data()) = r;
            acc += r;
        }
        return acc.allFinite();
    }

    const HierarchyLayout& layout() const { return *layout_; }
    const Block& local_block() const { return local_; }
    const Block& upper_block() const { return upper_; }
    const Block& lower1_block() const { return lower1_; }
    const Block& lower2_block() const { return lower2_; }

private:
    template <typename F>
    static Block block(F&& superop) {
        Block m;
        for (int c = 0; c < 4; ++c) {
            PauliCoords e{0.0, 0.0, 0.0, 0.0};
            e[c] = 1.0;
            const Operator2 image = superop(from_pauli_coords(e));
            // The image of a hermitian operator is hermitian for every block used here.
            const PauliCoords col = to_pauli(image);
            for (int r = 0; r < 4; ++r) m(r, c) = col[r];
        }
        return m;
    }

    const HierarchyLayout* layout_;
    Block local_, lower1_, lower2_, upper_;
    std::vector<double> damping_;
};

namespace detail {

[[noreturn]] inline void throw_blowup(std::span<const PauliCoords> values, const HierarchyLayout& layout,
                                      double t, const char* where) {
    for (std::size_t i = 0; i < values.size(); ++i) {
        const auto& v = values[i];
        if (!(std::isfinite(v[0]) && std::isfinite(v[1]) && std::isfinite(v[2]) && std::isfinite(v[3]))) {
            std::ostringstream os;
            os << where << ": non-finite auxiliary operator (" << layout.n1(i) << "," << layout.n2(i)
               << ") at t=" << t;
            throw NumericalBlowupError(os.str(), layout.n1(i), layout.n2(i), t);
        }
    }
    std::ostringstream os;
    os << where << ": non-finite value at t=" << t;
    throw NumericalBlowupError(os.str(), 0, 0, t);
}

} // namespace detail

/// Time derivative of every hierarchy member, returned in a state of the same shape.
inline HierarchyState hierarchy_derivative(const HierarchyState& s) {
    HierarchyState out(s.layout_ptr(), s.kernel(), s.coupling(), s.hamiltonian());
    out.set_time(s.time());
    HeomGenerator gen(s);
    if (!gen.apply(s.coords(), out.coords())) detail::throw_blowup(out.coords(), s.layout(), s.time(), "derivative");
    return out;
}

/// lambda [z_{1,0} + z_{0,1} - i c0 S- z_{0,0}]; the first moment of Y_B entering
/// d rho/dt = -i[H, rho] - i[X, eta1].
inline Operator2 eta1(const HierarchyState& s) {
    const double lam = s.kernel().bath.lambda;
    const Operator2 rho = s.density();
    return lam * (s.ado(1, 0) + s.ado(0, 1) -
                  std::complex<double>(0.0, s.kernel().c0) * apply_S_minus(rho, s.coupling()));
}

// ---------------------------------------------------------------------------
// Integration

/// dt <= 0 selects min(kDefaultMaxDt, stability bound). Rows are stored every
/// record_interval; a run is steady once every Bloch vector recorded during the
/// last steady_window time units lies within steady_tol of every other.
struct IntegratorConfig {
    double dt = 0.0;
    double t_max = 500.0;
    double record_interval = 0.05;
    double steady_tol = 1e-6;
    double steady_window = 200.0;
    bool stop_when_steady = true;
};

inline constexpr double kDefaultMaxDt = 0.01;

/// Step-size ceiling for RK4 on this hierarchy:
/// 1 / (max(g1, g2) d + lambda (|c1| + c2 + 4 c0) ||X||^2 + ||H||).
/// The denominator tracks the largest generator eigenvalue magnitude, which is
/// dominated by the damping of the deepest level; RK4's real-axis stability
/// limit is 2.78 in units of that.
inline double stability_bound(const KernelExpansion& e, const Operator2& coupling, const Operator2& hamiltonian,
                              int depth) {
    Eigen::SelfAdjointEigenSolver<Operator2> ex(coupling, Eigen::EigenvaluesOnly);
    Eigen::SelfAdjointEigenSolver<Operator2> eh(hamiltonian, Eigen::EigenvaluesOnly);
    const double xnorm = ex.eigenvalues().cwiseAbs().maxCoeff();
    const double hspread = eh.eigenvalues()(1) - eh.eigenvalues()(0);
    const double rate = std::max(e.gamma1, e.gamma2) * depth +
                        e.bath.lambda * (std::abs(e.c1) + e.c2 + 4.0 * std::abs(e.c0)) * xnorm * xnorm + hspread;
    return 1.0 / rate;
}

inline double stability_bound(const HierarchyState& s) {
    return stability_bound(s.kernel(), s.coupling(), s.hamiltonian(), s.depth());
}

/// Scratch buffers for RK4 on a hierarchy of a given size; reused across steps.
class Rk4Workspace {
public:
    explicit Rk4Workspace(std::size_t n) : k_(n), acc_(n), tmp_(n) {}
    std::size_t size() const { return k_.size(); }

private:
    friend void step_rk4(HierarchyState&, double, const HeomGenerator&, Rk4Workspace&);
    std::vector<PauliCoords> k_, acc_, tmp_;
};

/// Classical fourth-order Runge-Kutta step, in place.
inline void step_rk4(HierarchyState& s, double dt, const HeomGenerator& gen, Rk4Workspace& ws) {
    const std::size_t n = s.size();
    if (ws.size() != n) throw ParameterError("step_rk4: workspace size mismatch");
    auto y = s.coords();
    auto& k = ws.k_;
    auto& acc = ws.acc_;
    auto& tmp = ws.tmp_;
    const auto fail = [&](std::span<const PauliCoords> v) { detail::throw_blowup(v, s.layout(), s.time(), "step_rk4"); };

    if (!gen.apply(y, k)) fail(k);
    for (std::size_t i = 0; i < n; ++i)
        for (int c = 0; c < 4; ++c) {
            acc[i][c] = k[i][c];
            tmp[i][c] = y[i][c] + 0.5 * dt * k[i][c];
        }
    if (!gen.apply(tmp, k)) fail(k);
    for (std::size_t i = 0; i < n; ++i)
        for (int c = 0; c < 4; ++c) {
            acc[i][c] += 2.0 * k[i][c];
            tmp[i][c] = y[i][c] + 0.5 * dt * k[i][c];
        }
    if (!gen.apply(tmp, k)) fail(k);
    for (std::size_t i = 0; i < n; ++i)
        for (int c = 0; c < 4; ++c) {
            acc[i][c] += 2.0 * k[i][c];
            tmp[i][c] = y[i][c] + dt * k[i][c];
        }
    if (!gen.apply(tmp, k)) fail(k);
    const double w = dt / 6.0;
    for (std::size_t i = 0; i < n; ++i)
        for (int c = 0; c < 4; ++c) y[i][c] += w * (acc[i][c] + k[i][c]);
    s.set_time(s.time() + dt);
}

/// Convenience overload returning the advanced state.
inline HierarchyState step_rk4(HierarchyState s, double dt) {
    HeomGenerator gen(s);
    Rk4Workspace ws(s.size());
    step_rk4(s, dt, gen, ws);
    return s;
}

/// True iff every pair of Bloch vectors in the window is closer than tol.
template <typename Range>
bool detect_steady(const Range& window, double tol) {
    const auto n = static_cast<std::size_t>(std::distance(std::begin(window), std::end(window)));
    if (n < 2) return false;
    Eigen::Vector3d lo = Eigen::Vector3d::Constant(std::numeric_limits<double>::infinity());
    Eigen::Vector3d hi = -lo;
    for (const BlochVector& r : window) {
        lo = lo.cwiseMin(r);
        hi = hi.cwiseMax(r);
    }
    const Eigen::Vector3d span = hi - lo;
    // Pairwise diameter lies between the widest box side and the box diagonal.
    if (span.maxCoeff() >= tol) return false;
    if (span.norm() < tol) return true;
    for (auto i = std::begin(window); i != std::end(window); ++i)
        for (auto j = std::next(i); j != std::end(window); ++j)
            if ((*i - *j).norm() >= tol) return false;
    return true;
}

inline constexpr double kAdoNormGuard = 1e6;

/// Natural magnitude of z_{n1,n2}: sqrt(n1! n2!) (|c1|/lambda)^{n1/2} (c2/lambda)^{n2/2}.
/// Bounded dynamics keeps |z_n| / s_n of order one at every depth, while |z_n|
/// itself grows factorially, so the norm guard acts on the ratio.
inline std::vector<double> ado_scales(const HierarchyLayout& layout, const KernelExpansion& e) {
    std::vector<double> out(layout.size(), 1.0);
    const double lam = e.bath.lambda;
    if (!(lam > 0.0)) return out;
    const double l1 = 0.5 * std::log(std::abs(e.c1) / lam);
    const double l2 = 0.5 * std::log(std::abs(e.c2) / lam);
    for (std::size_t i = 0; i < layout.size(); ++i) {
        const int a = layout.n1(i), b = layout.n2(i);
        out[i] = std::exp(0.5 * (std::lgamma(a + 1.0) + std::lgamma(b + 1.0)) + a * l1 + b * l2);
    }
    return out;
}

/// Step actually taken: the requested (or default) dt shrunk so that a whole
/// number of steps fits in one record interval.
inline double resolve_dt(const IntegratorConfig& cfg, double bound) {
    if (!(cfg.record_interval > 0.0)) throw ParameterError("integrator: record_interval must be > 0");
    double dt = cfg.dt > 0.0 ? cfg.dt : std::min(kDefaultMaxDt, bound);
    if (dt > bound * (1.0 + 1e-12))
        throw ParameterError("integrator: dt " + std::to_string(dt) + " exceeds the stability bound " +
                             std::to_string(bound));
    const double per = std::ceil(cfg.record_interval / dt * (1.0 - 1e-12));
    return cfg.record_interval / per;
}

/// Integrates to cfg.t_max (or until steady), recording every cfg.record_interval.
inline TrajectoryRecord evolve(HierarchyState& s, const IntegratorConfig& cfg) {
    if (!(cfg.t_max > 0.0)) throw ParameterError("evolve: t_max must be > 0");
    if (!(cfg.steady_tol > 0.0)) throw ParameterError("evolve: steady_tol must be > 0");
    if (!(cfg.steady_window >= cfg.record_interval)) throw ParameterError("evolve: steady_window shorter than record_interval");
    const double dt = resolve_dt(cfg, stability_bound(s));
    const auto per_record = std::llround(cfg.record_interval / dt);
    const auto window_rows = static_cast<std::size_t>(std::llround(cfg.steady_window / cfg.record_interval)) + 1;

    const auto& layout = s.layout();
    const PointerBasis basis = pointer_basis(ops::pauli_vector(s.coupling()));
    TrajectoryRecord rec;
    rec.meta.lambda = s.kernel().bath.lambda;
    rec.meta.gamma = s.kernel().bath.gamma;
    rec.meta.beta = s.kernel().bath.beta;
    {
        Eigen::SelfAdjointEigenSolver<Operator2> eh(s.hamiltonian(), Eigen::EigenvaluesOnly);
        rec.meta.omega0 = eh.eigenvalues()(1) - eh.eigenvalues()(0);
    }
    rec.meta.coupling = ops::pauli_vector(s.coupling());
    rec.meta.depth = s.depth();
    rec.meta.dt = dt;

    HeomGenerator gen(s);
    Rk4Workspace ws(s.size());
    const auto scales = ado_scales(layout, s.kernel());
    std::deque<BlochVector> window;
    const double t0 = s.time();
    const long long steps = per_record * std::llround(std::ceil(cfg.t_max / cfg.record_interval - 1e-9));

    auto record = [&](long long step) {
        const Operator2 rho = s.density();
        rec.rows.push_back(make_row(t0 + static_cast<double>(step) * dt, rho, basis, rec));
        window.push_back(rec.rows.back().r);
        if (window.size() > window_rows) window.pop_front();
        for (std::size_t i = 0; i < s.size(); ++i) {
            const auto& a = s.coords()[i];
            const double fro = std::sqrt(2.0 * (a[0] * a[0] + a[1] * a[1] + a[2] * a[2] + a[3] * a[3])) / scales[i];
            if (!(fro <= kAdoNormGuard)) {
                std::ostringstream os;
                os << "evolve: auxiliary operator (" << layout.n1(i) << "," << layout.n2(i)
                   << ") scaled norm " << fro << " exceeds guard at t=" << s.time();
                throw NumericalBlowupError(os.str(), layout.n1(i), layout.n2(i), s.time());
            }
        }
    };

    try {
        record(0);
        for (long long step = 1; step <= steps; ++step) {
            step_rk4(s, dt, gen, ws);
            if (step % per_record != 0) continue;
            s.set_time(t0 + static_cast<double>(step) * dt);  // no drift from repeated addition
            record(step);
            if (!rec.steady && window.size() == window_rows && detect_steady(window, cfg.steady_tol)) {
                rec.steady = true;
                rec.steady_time = s.time();
                rec.steady_state = s.density();
                if (cfg.stop_when_steady) break;
            }
        }
    } catch (NumericalBlowupError& err) {
        rec.final_state = s.density();
        err.partial = std::make_shared<const TrajectoryRecord>(std::move(rec));
        throw;
    }
    rec.final_state = s.density();
    return rec;
}

/// Max Bloch distance between runs at two depths sharing every other setting.
inline double convergence_check(const Operator2& rho0, const KernelExpansion& kernel, const Operator2& coupling,
                                const Operator2& hamiltonian, int depth, int deeper, IntegratorConfig cfg) {
    if (deeper <= depth) throw ParameterError("convergence_check: second depth must exceed the first");
    cfg.stop_when_steady = false;
    cfg.dt = resolve_dt(cfg, stability_bound(kernel, coupling, hamiltonian, deeper));
    auto a = init_hierarchy(rho0, depth, kernel, coupling, hamiltonian);
    auto b = init_hierarchy(rho0, deeper, kernel, coupling, hamiltonian);
    const auto ra = evolve(a, cfg);
    const auto rb = evolve(b, cfg);
    return max_bloch_distance(ra, rb);
}

} // namespace ptherm
