#pragma once

// Eigenenergy diagrams of the instantaneous Hamiltonian versus pump amplitude,
// with tracking of the branch that starts in the joint vacuum and detection of
// narrow avoided crossings along it.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kpo/errors.hpp"
#include "kpo/fock.hpp"
#include "kpo/model.hpp"
#include "kpo/observables.hpp"

namespace kpo {

// ---- dense eigensolves --------------------------------------------------------

struct EigenPair {
    double value = 0.0;  // same units as the operator
    Vector vector;
};

// The k largest eigenvalues of a Hermitian operator, descending, with
// orthonormal eigenvectors.  A full dense decomposition is fine at the
// dimensions used here.
inline std::vector<EigenPair> top_eigenpairs(const Matrix& h, int k) {
    if (h.rows() != h.cols()) throw DimensionMismatch("top_eigenpairs: operator must be square");
    if (k < 1 || k > h.rows())
        throw std::invalid_argument("top_eigenpairs: need 1 <= k <= dim");
    Eigen::SelfAdjointEigenSolver<Matrix> solver(h);
    if (solver.info() != Eigen::Success)
        throw std::runtime_error("top_eigenpairs: eigensolver failed to converge");
    std::vector<EigenPair> out(k);
    const int d = static_cast<int>(h.rows());
    for (int i = 0; i < k; ++i) {
        out[i].value = solver.eigenvalues()(d - 1 - i);
        out[i].vector = solver.eigenvectors().col(d - 1 - i);
    }
    return out;
}

// Husimi Q of a pure state on the real-amplitude plane.
inline QGrid eigenstate_qfunction(const Vector& v, const QGridSpec& spec = {}) {
    if (std::abs(v.norm() - 1.0) > 1e-6)
        throw std::invalid_argument("eigenstate_qfunction: vector must be normalized");
    const Matrix rho = v * v.adjoint();
    return husimi_q_real_slice(rho, infer_cutoff(rho), spec);
}

// ---- pump sweep -----------------------------------------------------------------

struct SpectrumSweep {
    std::vector<double> pump_points;           // left-mode pump amplitude, MHz, ascending
    double pump_ratio = 1.0;                   // fixed p_R / p_L
    std::vector<Eigen::VectorXd> levels;       // per point: k highest energies, MHz, descending
    std::vector<int> branch_id;                // per point: index of the tracked branch
    std::vector<double> gaps_mhz;              // per point: min |E_i - E_tracked| over i != tracked
    std::vector<double> overlaps;              // per point: |<prev tracked|current tracked>|
    Vector tracked_final;                      // tracked eigenvector at the last pump point
};

namespace detail {

struct SolvedPoint {
    double p_l_mhz = 0.0;
    Eigen::VectorXd energies_mhz;  // descending
    Matrix vectors;                // column i matches energies_mhz(i)
};

inline SolvedPoint solve_point(double p_l_mhz, double ratio, const SystemParams& prm,
                               const ModelOps& ops, int k) {
    const Matrix h = hamiltonian_with_pumps(p_l_mhz, ratio * p_l_mhz, prm, ops);
    const std::vector<EigenPair> pairs = top_eigenpairs(h, k);
    SolvedPoint out;
    out.p_l_mhz = p_l_mhz;
    out.energies_mhz.resize(k);
    out.vectors.resize(h.rows(), k);
    for (int i = 0; i < k; ++i) {
        out.energies_mhz(i) = pairs[i].value / kTwoPi;
        out.vectors.col(i) = pairs[i].vector;
    }
    return out;
}

// Sequential pass: follow the branch by eigenvector overlap and record the
// local gap.  Throws BranchAmbiguous when the best overlap drops below 1/2 or
// the tracked energy jumps by far more than the locally estimated slope.
inline SpectrumSweep track_points(const std::vector<SolvedPoint>& solved, double ratio) {
    SpectrumSweep sweep;
    sweep.pump_ratio = ratio;
    Vector prev;
    double slope_max = 0.0;
    for (std::size_t j = 0; j < solved.size(); ++j) {
        const SolvedPoint& pt = solved[j];
        const int k = static_cast<int>(pt.energies_mhz.size());
        int best = 0;
        double best_overlap = 0.0;
        if (j == 0) {
            // The branch starts as the eigenstate coinciding with the vacuum.
            for (int i = 0; i < k; ++i) {
                const double o = std::abs(pt.vectors(0, i));
                if (o > best_overlap) {
                    best_overlap = o;
                    best = i;
                }
            }
        } else {
            for (int i = 0; i < k; ++i) {
                const double o = std::abs(prev.dot(pt.vectors.col(i)));
                if (o > best_overlap) {
                    best_overlap = o;
                    best = i;
                }
            }
        }
        if (best_overlap < 0.5)
            throw BranchAmbiguous("branch tracking lost at p_L = " + std::to_string(pt.p_l_mhz) +
                                  " MHz (best overlap " + std::to_string(best_overlap) + ")");
        if (j > 0) {
            const double dp = pt.p_l_mhz - solved[j - 1].p_l_mhz;
            const double de =
                std::abs(pt.energies_mhz(best) - solved[j - 1].energies_mhz[sweep.branch_id[j - 1]]);
            if (dp > 0.0) {
                if (de > (3.0 * slope_max + 1.0) * dp)
                    throw BranchAmbiguous("tracked energy jumps " + std::to_string(de) +
                                          " MHz over " + std::to_string(dp) +
                                          " MHz of pump at p_L = " + std::to_string(pt.p_l_mhz) +
                                          " MHz");
                slope_max = std::max(slope_max, de / dp);
            }
        }
        double gap = std::numeric_limits<double>::infinity();
        for (int i = 0; i < k; ++i)
            if (i != best) gap = std::min(gap, std::abs(pt.energies_mhz(i) - pt.energies_mhz(best)));

        sweep.pump_points.push_back(pt.p_l_mhz);
        sweep.levels.push_back(pt.energies_mhz);
        sweep.branch_id.push_back(best);
        sweep.gaps_mhz.push_back(gap);
        sweep.overlaps.push_back(j == 0 ? 1.0 : best_overlap);
        prev = pt.vectors.col(best);
    }
    sweep.tracked_final = prev;
    return sweep;
}

}  // namespace detail

// Sweep the pump from zero to its plateau value, keeping p_R / p_L fixed at the
// ratio of the two plateau amplitudes.  After a first uniform pass the spacing
// is halved around every interior local minimum of the tracked-branch gap, so
// narrow avoided crossings are resolved without a uniformly fine grid.
inline SpectrumSweep run_pump_sweep(const SystemParams& prm, FockCutoff cutoff, int npoints = 81,
                                    int k = 8) {
    prm.validate();
    if (npoints < 2) throw std::invalid_argument("run_pump_sweep: need at least two pump points");
    if (k < 2) throw std::invalid_argument("run_pump_sweep: need at least two levels for gaps");
    const std::array<double, 2> pmax = pump_amplitudes_mhz(prm);
    if (!(pmax[0] > 0.0))
        throw std::invalid_argument("run_pump_sweep: left plateau pump must be positive");
    const double ratio = pmax[1] / pmax[0];
    const ModelOps ops(cutoff);

    std::vector<detail::SolvedPoint> solved;
    solved.reserve(2 * npoints);
    for (int j = 0; j < npoints; ++j)
        solved.push_back(detail::solve_point(pmax[0] * j / (npoints - 1), ratio, prm, ops, k));

    SpectrumSweep first = detail::track_points(solved, ratio);

    // Identify interior local gap minima and halve the spacing around them.
    std::vector<double> extra;
    for (std::size_t j = 1; j + 1 < first.gaps_mhz.size(); ++j) {
        if (first.gaps_mhz[j] <= first.gaps_mhz[j - 1] && first.gaps_mhz[j] <= first.gaps_mhz[j + 1]) {
            extra.push_back(0.5 * (first.pump_points[j - 1] + first.pump_points[j]));
            extra.push_back(0.5 * (first.pump_points[j] + first.pump_points[j + 1]));
        }
    }
    if (extra.empty()) return first;
    std::sort(extra.begin(), extra.end());
    extra.erase(std::unique(extra.begin(), extra.end()), extra.end());
    for (double p : extra) solved.push_back(detail::solve_point(p, ratio, prm, ops, k));
    std::sort(solved.begin(), solved.end(),
              [](const detail::SolvedPoint& a, const detail::SolvedPoint& b) {
                  return a.p_l_mhz < b.p_l_mhz;
              });
    return detail::track_points(solved, ratio);
}

}  // namespace kpo
