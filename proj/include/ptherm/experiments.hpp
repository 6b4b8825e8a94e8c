// experiments.hpp: lambda sweeps over several initial states, the postulate
// measures computed from them, and the CSV formats for trajectories and sweeps.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include "ptherm/bath_model.hpp"
#include "ptherm/errors.hpp"
#include "ptherm/heom.hpp"
#include "ptherm/quantum_core.hpp"
#include "ptherm/trajectory.hpp"

namespace ptherm {

inline constexpr std::array<double, 6> kPaperLambdas{0.01, 1.0, 2.0, 3.0, 4.0, 5.0};
inline constexpr double kPaperTemperature = 1.5;

// ---------------------------------------------------------------------------
// Initial states

/// (|x+> + |z+>) normalized.
inline Operator2 psi1_state() {
    const double s = 1.0 / std::sqrt(2.0);
    Ket2 k;
    k << s + 1.0, s;
    return ops::projector(k.normalized());
}

/// (|x+> + |z->) normalized.
inline Operator2 psi2_state() {
    const double s = 1.0 / std::sqrt(2.0);
    Ket2 k;
    k << s, s + 1.0;
    return ops::projector(k.normalized());
}

/// psi1, psi2 and three fixed mixed states.
inline std::vector<Operator2> initial_roster() {
    return {psi1_state(), psi2_state(), density_from_bloch({0.3, 0.3, 0.3}), density_from_bloch({-0.5, 0.0, 0.0}),
            density_from_bloch({0.0, 0.7, -0.2})};
}

// ---------------------------------------------------------------------------
// Geometry of the projection line

/// Pointer limit: the Gibbs state dephased in the pointer basis.
inline Operator2 pointer_limit(const Eigen::Vector3d& coupling, double beta, double omega0 = 1.0) {
    return pointer_project(gibbs_state(beta, omega0), pointer_basis(coupling));
}

/// Bloch distance from the steady state to the pointer limit.
inline double postulate1_deviation(const Operator2& steady, const Eigen::Vector3d& coupling, double beta,
                                   double omega0 = 1.0) {
    return (bloch_unchecked(steady) - bloch_from_density(pointer_limit(coupling, beta, omega0))).norm();
}

/// Distance from r to the segment G -> P.
inline double projection_line_distance(const BlochVector& r, const Eigen::Vector3d& coupling, double beta,
                                       double omega0 = 1.0) {
    const BlochVector g = bloch_from_density(gibbs_state(beta, omega0));
    const BlochVector p = bloch_from_density(pointer_limit(coupling, beta, omega0));
    const BlochVector seg = p - g;
    const double len2 = seg.squaredNorm();
    if (!(len2 > 1e-24)) throw ParameterError("projection_line_distance: Gibbs state and pointer limit coincide");
    const double s = std::clamp((r - g).dot(seg) / len2, 0.0, 1.0);
    return (r - (g + s * seg)).norm();
}

// ---------------------------------------------------------------------------
// Sweeps

struct EngineConfig {
    int depth = 30;
    IntegratorConfig integrator{.t_max = 4000.0};
    double omega0 = 1.0;
    double gamma = 1.0;
};

struct SweepPoint {
    double lambda = 0.0;
    std::vector<TrajectoryRecord> runs;  // one per initial state, in roster order
    Operator2 steady = Operator2::Zero(); // mean of the terminal states
    BlochVector r = BlochVector::Zero();
    PointerElements elements;
    double entropy = 0.0;
    double line_distance = 0.0;
    double postulate1_dev = 0.0;
    bool all_steady = false;
    double spread = 0.0;  // largest Bloch distance between two terminal states
};

struct SweepResult {
    Eigen::Vector3d coupling = Eigen::Vector3d::UnitX();
    double beta = 2.0 / 3.0;
    double omega0 = 1.0;
    double steady_tol = 1e-6;
    std::vector<SweepPoint> points;  // strictly increasing lambda

    /// Steady states reached from every initial state agree within 2 steady_tol.
    bool unique() const {
        return std::all_of(points.begin(), points.end(),
                           [&](const SweepPoint& p) { return p.spread <= 2.0 * steady_tol; });
    }
};

/// Worker count: POINTER_THERM_THREADS if set and positive, else the hardware count.
inline unsigned sweep_threads() {
    unsigned n = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("POINTER_THERM_THREADS")) {
        unsigned v = 0;
        const std::string_view s(env);
        const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc{} || ptr != s.data() + s.size() || v == 0)
            throw ConfigError("POINTER_THERM_THREADS must be a positive integer, got '" + std::string(s) + "'");
        n = v;
    }
    return n;
}

/// Runs fn(i) for i in [0, count) on up to `threads` workers. The first exception
/// is rethrown after every worker has stopped.
template <class Fn>
void parallel_for(std::size_t count, unsigned threads, Fn&& fn) {
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (std::size_t i = next++; i < count; i = next++) {
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
                next = count;
            }
        }
    };
    const unsigned n = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, threads), count));
    std::vector<std::thread> pool;
    for (unsigned k = 1; k < n; ++k) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

/// One HEOM run with H = (omega0/2) sigma_z and X = a.sigma.
inline TrajectoryRecord run_single(const Eigen::Vector3d& coupling, double lambda, double temperature,
                                   const Operator2& rho0, const EngineConfig& engine) {
    if (!(temperature > 0.0)) throw ParameterError("temperature must be > 0");
    if (!(coupling.norm() > 0.0) || !coupling.allFinite()) throw ParameterError("coupling must be non-zero and finite");
    const auto kernel = fit_kernel({lambda, engine.gamma, 1.0 / temperature});
    auto s = init_hierarchy(rho0, engine.depth, kernel, ops::from_pauli(coupling), 0.5 * engine.omega0 * ops::sigma_z());
    auto rec = evolve(s, engine.integrator);
    if (!rec.steady)
        rec.notes.push_back("not steady by t_max=" + std::to_string(engine.integrator.t_max));
    if (!kernel.high_temperature) rec.notes.push_back("beta*gamma >= pi: kernel expansion outside its regime");
    return rec;
}

/// Every (lambda, initial state) pair is an independent task; results are
/// collected in lambda order, then roster order.
inline SweepResult run_case(const Eigen::Vector3d& coupling, std::vector<double> lambdas, double temperature,
                            const std::vector<Operator2>& initial_states, const EngineConfig& engine,
                            unsigned threads = 1) {
    if (lambdas.empty()) throw ParameterError("run_case: empty lambda list");
    if (initial_states.empty()) throw ParameterError("run_case: empty initial-state list");
    for (std::size_t i = 0; i < lambdas.size(); ++i) {
        if (!(lambdas[i] >= 0.0)) throw ParameterError("run_case: lambda must be >= 0");
        if (i > 0 && !(lambdas[i] > lambdas[i - 1])) throw ParameterError("run_case: lambda list must be strictly increasing");
    }
    for (const auto& rho : initial_states) validate_density(rho);

    SweepResult out;
    out.coupling = coupling;
    out.beta = 1.0 / temperature;
    out.omega0 = engine.omega0;
    out.steady_tol = engine.integrator.steady_tol;
    out.points.resize(lambdas.size());
    for (std::size_t i = 0; i < lambdas.size(); ++i) {
        out.points[i].lambda = lambdas[i];
        out.points[i].runs.resize(initial_states.size());
    }
    const std::size_t ns = initial_states.size();
    parallel_for(lambdas.size() * ns, threads, [&](std::size_t task) {
        const std::size_t li = task / ns, si = task % ns;
        out.points[li].runs[si] = run_single(coupling, lambdas[li], temperature, initial_states[si], engine);
    });

    const PointerBasis basis = pointer_basis(coupling);
    for (auto& p : out.points) {
        p.all_steady = true;
        p.steady = Operator2::Zero();
        for (const auto& run : p.runs) {
            p.all_steady = p.all_steady && run.steady;
            p.steady += run.terminal_state();
        }
        p.steady /= static_cast<double>(p.runs.size());
        for (std::size_t a = 0; a < p.runs.size(); ++a)
            for (std::size_t b = a + 1; b < p.runs.size(); ++b)
                p.spread = std::max(p.spread, (bloch_unchecked(p.runs[a].terminal_state()) -
                                               bloch_unchecked(p.runs[b].terminal_state())).norm());
        p.r = bloch_unchecked(p.steady);
        p.elements = pointer_elements_unchecked(p.steady, basis);
        p.entropy = entropy_of_radius(std::min(1.0, p.r.norm()));
        p.postulate1_dev = postulate1_deviation(p.steady, coupling, out.beta, out.omega0);
        p.line_distance = projection_line_distance(p.r, coupling, out.beta, out.omega0);
    }
    return out;
}

/// max over lambda and i of |d_i(lambda) - <p_i|rho_G|p_i>|.
inline double postulate2_deviation(const SweepResult& sweep) {
    if (sweep.points.empty()) throw ParameterError("postulate2_deviation: empty sweep");
    const auto g = pointer_matrix_elements(gibbs_state(sweep.beta, sweep.omega0), pointer_basis(sweep.coupling));
    double worst = 0.0;
    for (const auto& p : sweep.points)
        worst = std::max({worst, std::abs(p.elements.d1 - g.d1), std::abs(p.elements.d2 - g.d2)});
    return worst;
}

inline std::vector<std::pair<double, double>> entropy_curve(const SweepResult& sweep) {
    std::vector<std::pair<double, double>> out;
    for (const auto& p : sweep.points) out.emplace_back(p.lambda, p.entropy);
    return out;
}

/// Largest drop of a sequence that should not decrease.
inline double worst_decrease(const std::vector<double>& v) {
    double worst = 0.0;
    for (std::size_t i = 1; i < v.size(); ++i) worst = std::max(worst, v[i - 1] - v[i]);
    return worst;
}

// ---------------------------------------------------------------------------
// CSV

inline constexpr std::string_view kTrajectoryHeader = "t,rx,ry,rz,entropy,p1_diag,p2_diag,offdiag_re,offdiag_im";
inline constexpr std::string_view kSweepHeader =
    "lambda,rx,ry,rz,entropy,p1_diag,p2_diag,offdiag_abs,line_distance,postulate1_dev";

/// Shortest round-trip text for a double, at most 17 significant digits.
inline std::string format_double(double x) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 17);
    return {buf, res.ptr};
}

namespace detail {

inline void write_line(std::string& out, std::initializer_list<double> values) {
    bool first = true;
    for (double v : values) {
        if (!first) out += ',';
        out += format_double(v);
        first = false;
    }
    out += '\n';
}

inline void write_file(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open '" + path + "' for writing");
    f << text;
    f.close();
    if (!f) throw IoError("write to '" + path + "' failed");
}

} // namespace detail

inline std::string trajectory_csv(const TrajectoryRecord& rec) {
    std::string out(kTrajectoryHeader);
    out += '\n';
    for (const auto& r : rec.rows)
        detail::write_line(out, {r.t, r.r.x(), r.r.y(), r.r.z(), r.entropy, r.p1_diag, r.p2_diag, r.offdiag.real(),
                                 r.offdiag.imag()});
    return out;
}

inline std::string sweep_csv(const SweepResult& sweep) {
    std::string out(kSweepHeader);
    out += '\n';
    for (const auto& p : sweep.points)
        detail::write_line(out, {p.lambda, p.r.x(), p.r.y(), p.r.z(), p.entropy, p.elements.d1, p.elements.d2,
                                 std::abs(p.elements.offdiag), p.line_distance, p.postulate1_dev});
    return out;
}

inline void emit_csv(const TrajectoryRecord& rec, const std::string& path) { detail::write_file(path, trajectory_csv(rec)); }
inline void emit_csv(const SweepResult& sweep, const std::string& path) { detail::write_file(path, sweep_csv(sweep)); }

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

inline CsvTable parse_csv(std::string_view text) {
    CsvTable t;
    auto split = [](std::string_view line) {
        std::vector<std::string_view> cells;
        std::size_t start = 0;
        for (;;) {
            const auto comma = line.find(',', start);
            cells.push_back(line.substr(start, comma - start));
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
        return cells;
    };
    std::size_t pos = 0, line_no = 0;
    while (pos < text.size()) {
        auto end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        const auto line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (line.empty()) continue;
        const auto cells = split(line);
        if (t.header.empty()) {
            for (auto c : cells) t.header.emplace_back(c);
            continue;
        }
        if (cells.size() != t.header.size())
            throw IoError("csv line " + std::to_string(line_no) + ": expected " + std::to_string(t.header.size()) +
                          " fields, got " + std::to_string(cells.size()));
        std::vector<double> row;
        for (auto c : cells) {
            double v = 0.0;
            const auto [ptr, ec] = std::from_chars(c.data(), c.data() + c.size(), v);
            if (ec != std::errc{} || ptr != c.data() + c.size())
                throw IoError("csv line " + std::to_string(line_no) + ": bad number '" + std::string(c) + "'");
            row.push_back(v);
        }
        t.rows.push_back(std::move(row));
    }
    return t;
}

inline CsvTable read_csv(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_csv(ss.str());
}

} // namespace ptherm
