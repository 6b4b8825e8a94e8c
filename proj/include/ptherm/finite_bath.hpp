// finite_bath.hpp: the qubit coupled to M truncated harmonic modes, evolved
// exactly through a full diagonalization of the composite Hamiltonian
//   H = H_S + sum_j w_j a_j^+ a_j + X (x) sum_j nu_j (a_j + a_j^+).
//
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "ptherm/bath_model.hpp"
#include "ptherm/errors.hpp"
#include "ptherm/quantum_core.hpp"
#include "ptherm/trajectory.hpp"

namespace ptherm {

inline constexpr std::size_t kMaxFiniteBathDim = std::size_t{1} << 14;

/// How the band [0, omega_cut] is cut into M bins.
///   spectral:       equal integral of J(w)      (cumulative lambda gamma ln(1 + w^2/gamma^2))
///   reorganization: equal integral of J(w)/w    (cumulative 2 lambda atan(w/gamma))
enum class Partition { spectral, reorganization };

struct FiniteBathModel {
    int modes = 0;
    int n_max = 0;
    std::vector<double> omega;  // mode frequencies
    std::vector<double> nu;     // mode couplings
    BathParams bath;
    double omega_cut = 0.0;
    Partition partition = Partition::spectral;
    double omega0 = 1.0;
    Eigen::Vector3d coupling = Eigen::Vector3d::UnitX();

    std::size_t dimension() const {
        std::size_t d = 2;
        for (int j = 0; j < modes; ++j) d *= static_cast<std::size_t>(n_max + 1);
        return d;
    }
};

inline void check_dimension(int modes, int n_max) {
    if (modes < 0) throw ParameterError("finite bath: mode count must be >= 0");
    if (n_max < 1) throw ParameterError("finite bath: n_max must be >= 1");
    std::size_t d = 2;
    for (int j = 0; j < modes; ++j) {
        d *= static_cast<std::size_t>(n_max + 1);
        if (d > kMaxFiniteBathDim)
            throw ParameterError("finite bath: dimension 2*(n_max+1)^M exceeds " + std::to_string(kMaxFiniteBathDim));
    }
}

/// Bins of equal weight over [0, omega_cut]; each mode sits at the bin's weight
/// midpoint and carries nu_j^2 = (1/pi) * integral of J over its bin, so sum nu_j^2
/// equals (1/pi) * integral of J over the band.
inline FiniteBathModel discretize_bath(const BathParams& p, int modes, int n_max, double omega_cut,
                                       Partition partition = Partition::spectral,
                                       const Eigen::Vector3d& coupling = Eigen::Vector3d::UnitX(),
                                       double omega0 = 1.0) {
    validate(p);
    check_dimension(modes, n_max);
    if (!(omega_cut > 0.0)) throw ParameterError("finite bath: omega_cut must be > 0");
    if (!(coupling.norm() > 0.0)) throw ParameterError("finite bath: coupling must be non-zero");
    const double g = p.gamma;
    // cumulative weight W(w) and its inverse, in units where lambda drops out
    auto cum = [&](double w) {
        return partition == Partition::spectral ? std::log1p(w * w / (g * g)) : std::atan(w / g);
    };
    auto inv = [&](double y) {
        return partition == Partition::spectral ? g * std::sqrt(std::expm1(y)) : g * std::tan(y);
    };
    // (1/pi) * integral of J from 0 to w
    auto j_int = [&](double w) { return p.lambda * g * std::log1p(w * w / (g * g)) / std::numbers::pi; };

    FiniteBathModel m;
    m.modes = modes;
    m.n_max = n_max;
    m.bath = p;
    m.omega_cut = omega_cut;
    m.partition = partition;
    m.omega0 = omega0;
    m.coupling = coupling;
    const double total = cum(omega_cut);
    for (int j = 0; j < modes; ++j) {
        const double lo = inv(total * j / modes);
        const double hi = inv(total * (j + 1) / modes);
        m.omega.push_back(inv(total * (j + 0.5) / modes));
        m.nu.push_back(std::sqrt(j_int(hi) - j_int(lo)));
    }
    return m;
}

/// Precomputed spectral data for one model and one initial state.
class FiniteBathPropagator {
public:
    FiniteBathPropagator(const FiniteBathModel& m, const Operator2& rho0) {
        validate_density(rho0);
        check_dimension(m.modes, m.n_max);
        if (static_cast<int>(m.omega.size()) != m.modes || static_cast<int>(m.nu.size()) != m.modes)
            throw ParameterError("finite bath: omega/nu size must equal the mode count");

        // Rotate about z so the coupling has no sigma_y part; H_S is unchanged.
        phi_ = std::atan2(m.coupling.y(), m.coupling.x());
        const double ax = std::hypot(m.coupling.x(), m.coupling.y());
        const double az = m.coupling.z();
        const Operator2 rho = rotate(rho0, -phi_);

        const std::size_t nb = m.dimension() / 2;
        const std::size_t d = m.dimension();
        const int levels = m.n_max + 1;
        std::vector<int> digits(static_cast<std::size_t>(m.modes));
        auto decode = [&](std::size_t k) {
            for (int j = m.modes - 1; j >= 0; --j) {
                digits[static_cast<std::size_t>(j)] = static_cast<int>(k % static_cast<std::size_t>(levels));
                k /= static_cast<std::size_t>(levels);
            }
        };
        std::vector<std::size_t> stride(static_cast<std::size_t>(m.modes), 1);
        for (int j = m.modes - 2; j >= 0; --j)
            stride[static_cast<std::size_t>(j)] = stride[static_cast<std::size_t>(j) + 1] * static_cast<std::size_t>(levels);

        // Bath energies, thermal weights and parity of each Fock configuration.
        std::vector<double> eb(nb), pb(nb);
        std::vector<int> parity(nb);
        std::vector<double> z(static_cast<std::size_t>(m.modes), 0.0);
        for (int j = 0; j < m.modes; ++j)
            for (int n = 0; n < levels; ++n) z[static_cast<std::size_t>(j)] += std::exp(-m.bath.beta * m.omega[static_cast<std::size_t>(j)] * n);
        for (std::size_t k = 0; k < nb; ++k) {
            decode(k);
            double e = 0.0, w = 1.0;
            int total = 0;
            for (int j = 0; j < m.modes; ++j) {
                const auto ju = static_cast<std::size_t>(j);
                e += m.omega[ju] * digits[ju];
                w *= std::exp(-m.bath.beta * m.omega[ju] * digits[ju]) / z[ju];
                total += digits[ju];
            }
            eb[k] = e;
            pb[k] = w;
            parity[k] = total % 2;
        }

        // Sparse H as (row, col, value) in the product basis |s> (x) |n>.
        struct Entry {
            std::size_t r, c;
            double v;
        };
        std::vector<Entry> h;
        const double half = 0.5 * m.omega0;
        for (std::size_t k = 0; k < nb; ++k) {
            h.push_back({k, k, half + eb[k]});
            h.push_back({nb + k, nb + k, -half + eb[k]});
        }
        // Y_B = sum nu_j (a_j + a_j^+): raise mode j of configuration k.
        for (std::size_t k = 0; k < nb; ++k) {
            decode(k);
            for (int j = 0; j < m.modes; ++j) {
                const auto ju = static_cast<std::size_t>(j);
                if (digits[ju] == m.n_max) continue;
                const std::size_t k2 = k + stride[ju];
                const double y = m.nu[ju] * std::sqrt(static_cast<double>(digits[ju] + 1));
                // X = ax sigma_x + az sigma_z
                if (ax != 0.0) {
                    h.push_back({k, nb + k2, ax * y});
                    h.push_back({nb + k, k2, ax * y});
                }
                if (az != 0.0) {
                    h.push_back({k, k2, az * y});
                    h.push_back({nb + k, nb + k2, -az * y});
                }
            }
        }
        // mirror the off-diagonal entries
        const std::size_t upper_count = h.size();
        for (std::size_t i = 0; i < upper_count; ++i)
            if (h[i].r != h[i].c) h.push_back({h[i].c, h[i].r, h[i].v});

        // Tr(H rho0) in the product basis, kept for the energy check.
        energy0_ = 0.0;
        for (std::size_t k = 0; k < nb; ++k)
            energy0_ += pb[k] * ((half + eb[k]) * rho(0, 0).real() + (-half + eb[k]) * rho(1, 1).real());  // <Y_B> = 0 thermally

        // Symmetry sectors: with az = 0, sigma_z (-1)^N commutes with H.
        std::vector<int> sector(d, 0);
        int sectors = 1;
        if (az == 0.0) {
            sectors = 2;
            for (std::size_t k = 0; k < nb; ++k) {
                sector[k] = parity[k];
                sector[nb + k] = 1 - parity[k];
            }
        }

        // Diagonalize sector by sector; each eigenvector is kept as its spin-0 and
        // spin-1 parts, indexed by bath configuration.
        for (int sct = 0; sct < sectors; ++sct) {
            std::vector<std::size_t> idx;
            std::vector<std::size_t> local(d, d);
            for (std::size_t i = 0; i < d; ++i)
                if (sector[i] == sct) {
                    local[i] = idx.size();
                    idx.push_back(i);
                }
            const auto ns = static_cast<Eigen::Index>(idx.size());
            if (ns == 0) continue;
            Eigen::MatrixXd a = Eigen::MatrixXd::Zero(ns, ns);
            for (const auto& e : h)
                if (local[e.r] < d && local[e.c] < d)
                    a(static_cast<Eigen::Index>(local[e.r]), static_cast<Eigen::Index>(local[e.c])) += e.v;
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
            if (es.info() != Eigen::Success) throw NumericalError("finite bath: eigensolver did not converge");

            Sector sec;
            sec.energies = es.eigenvalues();
            std::vector<Eigen::Index> pick[2];
            for (std::size_t r = 0; r < idx.size(); ++r) {
                const int spin = idx[r] < nb ? 0 : 1;
                sec.configs[spin].push_back(spin == 0 ? idx[r] : idx[r] - nb);
                pick[spin].push_back(static_cast<Eigen::Index>(r));
            }
            for (int spin = 0; spin < 2; ++spin) {
                sec.q[spin].resize(static_cast<Eigen::Index>(pick[spin].size()), ns);
                for (std::size_t r = 0; r < pick[spin].size(); ++r)
                    sec.q[spin].row(static_cast<Eigen::Index>(r)) = es.eigenvectors().row(pick[spin][r]);
            }
            sectors_.push_back(std::move(sec));
        }

        // In the eigenbasis, rho0 = rho_S (x) diag(p) has blocks
        //   B^{ss'} = sum_ab rho_ab Q_s^a^T diag(p) Q_s'^b
        // over the bath configurations shared by (s, a) and (s', b). The reduced state
        // needs the overlaps T^{ab,ss'} = Q_s^a^T Q_s'^b for ab = 00 and 01.
        const cplx r01 = rho(0, 1);
        const double rab[2][2] = {{rho(0, 0).real(), 0.0}, {0.0, rho(1, 1).real()}};
        for (std::size_t s1 = 0; s1 < sectors_.size(); ++s1)
            for (std::size_t s2 = 0; s2 < sectors_.size(); ++s2) {
                Block blk;
                blk.s1 = s1;
                blk.s2 = s2;
                const auto n1 = sectors_[s1].energies.size(), n2 = sectors_[s2].energies.size();
                blk.b_re = Eigen::MatrixXd::Zero(n1, n2);
                blk.b_im = Eigen::MatrixXd::Zero(n1, n2);
                bool any_b = false;
                for (int sa = 0; sa < 2; ++sa)
                    for (int sb = 0; sb < 2; ++sb) {
                        const cplx coef = sa == sb ? cplx(rab[sa][sa], 0.0) : (sa == 0 ? r01 : std::conj(r01));
                        Eigen::MatrixXd x, y;
                        if (!shared_rows(s1, sa, s2, sb, &pb, x, y)) {
                            if (sa == 0 && sb == 0) blk.t00 = Eigen::MatrixXd();
                            if (sa == 0 && sb == 1) blk.t01 = Eigen::MatrixXd();
                            continue;
                        }
                        if (coef != cplx(0.0, 0.0)) {
                            Eigen::MatrixXd g;
                            g.noalias() = x.transpose() * y;
                            if (coef.real() != 0.0) blk.b_re += coef.real() * g;
                            if (coef.imag() != 0.0) blk.b_im += coef.imag() * g;
                            any_b = true;
                        }
                        if (sa == 0) {
                            // overlaps use the unweighted rows
                            Eigen::MatrixXd xu, yu;
                            shared_rows(s1, sa, s2, sb, nullptr, xu, yu);
                            Eigen::MatrixXd& t = sb == 0 ? blk.t00 : blk.t01;
                            t.noalias() = xu.transpose() * yu;
                        }
                    }
                if (!any_b || (blk.t00.size() == 0 && blk.t01.size() == 0)) continue;
                if (blk.b_im.cwiseAbs().maxCoeff() == 0.0) blk.b_im.resize(0, 0);
                blocks_.push_back(std::move(blk));
            }
    }

    /// Tr(H rho0) evaluated in the product basis.
    double initial_energy() const { return energy0_; }

    /// Tr(H rho(t)) from the eigenbasis populations, which the evolution leaves fixed.
    double energy() const {
        double e = 0.0;
        for (const auto& blk : blocks_)
            if (blk.s1 == blk.s2) e += sectors_[blk.s1].energies.dot(blk.b_re.diagonal());
        return e;
    }

    /// Reduced qubit state at time t.
    Operator2 reduced(double t) const {
        // rho_ab(t) = sum_kl e^{-iE_k t} B_kl e^{iE_l t} T^{ab}_kl, summed over sector blocks;
        // all matrices are column-major so the inner loop over k is contiguous.
        cplx s00 = 0.0, s01 = 0.0;
        for (const auto& blk : blocks_) {
            const auto& e1 = sectors_[blk.s1].energies;
            const auto& e2 = sectors_[blk.s2].energies;
            const Eigen::Index n1 = e1.size(), n2 = e2.size();
            std::vector<cplx> ph(static_cast<std::size_t>(n1));
            for (Eigen::Index k = 0; k < n1; ++k) ph[static_cast<std::size_t>(k)] = std::polar(1.0, -e1(k) * t);
            const bool has_im = blk.b_im.size() > 0;
            const bool do00 = blk.t00.size() > 0, do01 = blk.t01.size() > 0;
            for (Eigen::Index l = 0; l < n2; ++l) {
                const double* br = blk.b_re.data() + l * n1;
                const double* bi = has_im ? blk.b_im.data() + l * n1 : nullptr;
                const double* w0 = do00 ? blk.t00.data() + l * n1 : nullptr;
                const double* w1 = do01 ? blk.t01.data() + l * n1 : nullptr;
                cplx acc00 = 0.0, acc01 = 0.0;
                for (Eigen::Index k = 0; k < n1; ++k) {
                    const cplx pb = ph[static_cast<std::size_t>(k)] * (has_im ? cplx(br[k], bi[k]) : cplx(br[k], 0.0));
                    if (do00) acc00 += pb * w0[k];
                    if (do01) acc01 += pb * w1[k];
                }
                const cplx back = std::polar(1.0, e2(l) * t);
                s00 += back * acc00;
                s01 += back * acc01;
            }
        }
        Operator2 rho;
        rho(0, 0) = s00.real();
        rho(0, 1) = s01;
        rho(1, 0) = std::conj(s01);
        rho(1, 1) = 1.0 - s00.real();
        return rotate(rho, phi_);
    }

private:
    struct Sector {
        std::vector<std::size_t> configs[2];  // bath configuration of each row, per qubit index
        Eigen::MatrixXd q[2];                  // eigenvector components on those rows
        Eigen::VectorXd energies;
    };
    struct Block {
        std::size_t s1 = 0, s2 = 0;
        Eigen::MatrixXd b_re, b_im, t00, t01;
    };

    /// Rows of Q_{s1}^{a} and Q_{s2}^{b} on their shared bath configurations, the
    /// first scaled by the thermal weight when weights is given. False if none are shared.
    bool shared_rows(std::size_t s1, int a, std::size_t s2, int b, const std::vector<double>* weights,
                     Eigen::MatrixXd& x, Eigen::MatrixXd& y) const {
        const auto& ca = sectors_[s1].configs[a];
        const auto& cb = sectors_[s2].configs[b];
        std::vector<std::pair<Eigen::Index, Eigen::Index>> both;
        for (std::size_t i = 0, j = 0; i < ca.size() && j < cb.size();) {
            if (ca[i] < cb[j]) ++i;
            else if (cb[j] < ca[i]) ++j;
            else both.emplace_back(static_cast<Eigen::Index>(i++), static_cast<Eigen::Index>(j++));
        }
        if (both.empty()) return false;
        const auto n = static_cast<Eigen::Index>(both.size());
        x.resize(n, sectors_[s1].q[a].cols());
        y.resize(n, sectors_[s2].q[b].cols());
        for (Eigen::Index r = 0; r < n; ++r) {
            const auto [i, j] = both[static_cast<std::size_t>(r)];
            const double w = weights ? (*weights)[ca[static_cast<std::size_t>(i)]] : 1.0;
            x.row(r) = w * sectors_[s1].q[a].row(i);
            y.row(r) = sectors_[s2].q[b].row(j);
        }
        return true;
    }

    /// e^{-i phi sigma_z / 2} rho e^{i phi sigma_z / 2}
    static Operator2 rotate(const Operator2& rho, double phi) {
        Operator2 out = rho;
        out(0, 1) *= std::polar(1.0, -phi);
        out(1, 0) *= std::polar(1.0, phi);
        return out;
    }

    double phi_ = 0.0;
    double energy0_ = 0.0;
    std::vector<Sector> sectors_;
    std::vector<Block> blocks_;
};

/// Exact reduced dynamics sampled on t_grid.
inline TrajectoryRecord finite_bath_evolve(const Operator2& rho0, const FiniteBathModel& m,
                                           std::span<const double> t_grid) {
    if (t_grid.empty()) throw ParameterError("finite_bath_evolve: empty time grid");
    const FiniteBathPropagator prop(m, rho0);
    TrajectoryRecord rec;
    rec.meta.lambda = m.bath.lambda;
    rec.meta.gamma = m.bath.gamma;
    rec.meta.beta = m.bath.beta;
    rec.meta.omega0 = m.omega0;
    rec.meta.coupling = m.coupling;
    rec.meta.solver = "finite-bath";
    const PointerBasis basis = pointer_basis(m.coupling);
    for (double t : t_grid) {
        const Operator2 rho = prop.reduced(t);
        validate_density(rho, 1e-9, 1e-9);
        rec.rows.push_back(make_row(t, rho, basis, rec));
        rec.final_state = rho;
    }
    return rec;
}

} // namespace ptherm
