// trajectory.hpp: recorded time series of a reduced qubit state.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "ptherm/errors.hpp"
#include "ptherm/quantum_core.hpp"

namespace ptherm {

struct TrajectoryRow {
    double t = 0.0;
    BlochVector r = BlochVector::Zero();
    double entropy = 0.0;
    double p1_diag = 0.0;
    double p2_diag = 0.0;
    std::complex<double> offdiag{0.0, 0.0};
};

/// Run parameters carried alongside the rows (written to the sidecar metadata file).
struct TrajectoryMeta {
    double lambda = 0.0;
    double gamma = 1.0;
    double beta = 2.0 / 3.0;
    double omega0 = 1.0;
    Eigen::Vector3d coupling = Eigen::Vector3d::UnitX();
    int depth = 0;
    double dt = 0.0;
    std::string solver = "heom";
};

struct TrajectoryRecord {
    TrajectoryMeta meta;
    std::vector<TrajectoryRow> rows;

    bool steady = false;
    double steady_time = 0.0;
    std::optional<Operator2> steady_state;
    Operator2 final_state = Operator2::Zero();

    // largest invariant violations observed over the run
    double max_trace_defect = 0.0;
    double max_hermiticity_defect = 0.0;
    double max_radius = 0.0;
    double max_pointer_sum_defect = 0.0;

    std::vector<std::string> notes;

    /// Steady snapshot when detected, otherwise the final state.
    const Operator2& terminal_state() const { return steady_state ? *steady_state : final_state; }
};

/// Builds one row and folds its invariant checks into the record's running maxima.
inline TrajectoryRow make_row(double t, const Operator2& rho, const PointerBasis& basis, TrajectoryRecord& rec) {
    TrajectoryRow row;
    row.t = t;
    row.r = bloch_unchecked(rho);
    const double radius = row.r.norm();
    row.entropy = entropy_of_radius(radius);
    const auto pe = pointer_elements_unchecked(rho, basis);
    row.p1_diag = pe.d1;
    row.p2_diag = pe.d2;
    row.offdiag = pe.offdiag;

    rec.max_trace_defect = std::max(rec.max_trace_defect, std::abs(rho.trace() - 1.0));
    rec.max_hermiticity_defect = std::max(rec.max_hermiticity_defect, ops::hermiticity_defect(rho));
    rec.max_radius = std::max(rec.max_radius, radius);
    rec.max_pointer_sum_defect = std::max(rec.max_pointer_sum_defect, std::abs(pe.d1 + pe.d2 - 1.0));
    return row;
}

/// Max Bloch distance between two records sampled on the same time grid.
inline double max_bloch_distance(const TrajectoryRecord& a, const TrajectoryRecord& b) {
    const std::size_t n = std::min(a.rows.size(), b.rows.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (std::abs(a.rows[i].t - b.rows[i].t) > 1e-9 * std::max(1.0, std::abs(a.rows[i].t)))
            throw ParameterError("max_bloch_distance: records use different time grids");
        worst = std::max(worst, (a.rows[i].r - b.rows[i].r).norm());
    }
    return worst;
}

} // namespace ptherm
