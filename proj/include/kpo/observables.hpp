#pragma once

// Readout-side quantities: Husimi Q distributions on a real-amplitude grid,
// quadrant-resolved oscillation amplitudes, the same-phase probability and its
// readout-window average, photon-number expectations, and the classical
// metapotential used to visualise the pumped oscillator landscape.

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "kpo/errors.hpp"
#include "kpo/fock.hpp"
#include "kpo/lindblad.hpp"
#include "kpo/model.hpp"

namespace kpo {

// ---- evaluation grid ----------------------------------------------------------

// Uniform grid of real coherent-state amplitudes, shared by both modes.
struct QGridSpec {
    double alpha_min = -6.0;
    double alpha_max = 6.0;
    double step = 0.25;

    int points() const {
        if (step <= 0.0 || alpha_max <= alpha_min)
            throw std::invalid_argument("QGridSpec: need step > 0 and alpha_max > alpha_min");
        const double span = (alpha_max - alpha_min) / step;
        const int n = static_cast<int>(std::lround(span));
        if (std::abs(span - n) > 1e-9)
            throw std::invalid_argument("QGridSpec: step must divide the grid span");
        return n + 1;
    }
    double value(int i) const { return alpha_min + step * i; }

    QGridSpec halved() const { return {alpha_min, alpha_max, 0.5 * step}; }
};

// Q sampled on the grid; values(i, j) pairs the left amplitude value(i) with
// the right amplitude value(j).
struct QGrid {
    QGridSpec spec;
    RealMatrix values;
};

// ---- Husimi Q on the real-amplitude plane --------------------------------------

namespace detail {

// Column i holds the renormalised truncated coherent-state coefficients for
// the (real) grid amplitude value(i).  Real amplitudes give real coefficients.
inline RealMatrix coherent_coefficients(const QGridSpec& spec, int dim) {
    const int g = spec.points();
    RealMatrix coeff(dim, g);
    for (int i = 0; i < g; ++i) {
        Vector v = coherent_amplitudes(Complex(spec.value(i), 0.0), dim);
        coeff.col(i) = v.real() / v.norm();
    }
    return coeff;
}

// 1-D quadrature weights for the nodes of one sign of one axis, ascending.
// Composite trapezoid plus a linearly extrapolated strip bridging the gap to
// the excluded axis, which keeps the open-quadrant integral second-order
// accurate in the grid step (a bare trapezoid over the off-axis nodes drops
// the strip next to the axis and drifts at first order when the step halves).
inline std::vector<double> axis_bridged_weights(std::size_t m, double h, bool axis_first) {
    std::vector<double> w(m, h);
    w.front() = 0.5 * h;
    w.back() = 0.5 * h;
    if (axis_first) {
        w[0] += 1.5 * h;
        w[1] -= 0.5 * h;
    } else {
        w[m - 1] += 1.5 * h;
        w[m - 2] -= 0.5 * h;
    }
    return w;
}

inline void require_joint(const Matrix& rho, FockCutoff cutoff, const char* who) {
    const int d = cutoff.joint_dim();
    if (rho.rows() != d || rho.cols() != d)
        throw DimensionMismatch(std::string(who) + ": density matrix is " +
                                std::to_string(rho.rows()) + "x" + std::to_string(rho.cols()) +
                                ", expected " + std::to_string(d) + "x" + std::to_string(d));
}

}  // namespace detail

// Recover the per-mode cutoff from a joint-space density matrix.
inline FockCutoff infer_cutoff(const Matrix& rho) {
    const int d = static_cast<int>(rho.rows());
    if (rho.cols() != d) throw DimensionMismatch("infer_cutoff: density matrix must be square");
    const int n = static_cast<int>(std::lround(std::sqrt(static_cast<double>(d))));
    if (n * n != d)
        throw DimensionMismatch("infer_cutoff: joint dimension " + std::to_string(d) +
                                " is not a perfect square");
    return FockCutoff{n};
}

// Q(x_L, x_R) = <x_L, x_R| rho |x_L, x_R> over real amplitudes, with the bra/ket
// built from renormalised truncated coherent states.  The left-mode indices are
// contracted first so each grid row costs one pass over rho.
inline QGrid husimi_q_real_slice(const Matrix& rho, FockCutoff cutoff, const QGridSpec& spec = {}) {
    detail::require_joint(rho, cutoff, "husimi_q_real_slice");
    const int n = cutoff.dim;
    const int g = spec.points();
    const RealMatrix coeff = detail::coherent_coefficients(spec, n);

    QGrid out;
    out.spec = spec;
    out.values.resize(g, g);
    Matrix half(rho.rows(), n);
    Matrix folded(n, n);
    for (int il = 0; il < g; ++il) {
        half.setZero();
        for (int lp = 0; lp < n; ++lp)
            half.noalias() += coeff(lp, il) * rho.middleCols(lp * n, n);
        folded.setZero();
        for (int l = 0; l < n; ++l)
            folded.noalias() += coeff(l, il) * half.middleRows(l * n, n);
        // With real right-mode coefficients only the real part survives the
        // final quadratic form.
        const RealMatrix fr = folded.real();
        const RealMatrix t = fr * coeff;
        out.values.row(il) = coeff.cwiseProduct(t).colwise().sum();
    }
    return out;
}

// ---- quadrant-resolved oscillation amplitudes ----------------------------------

// Weight attached to a grid point when scoring which phase configuration the
// oscillators settled into; favours the large-amplitude lobes over the origin.
inline double xi_weight(double alpha_l, double alpha_r) {
    return std::abs(alpha_l) + std::abs(alpha_r);
}

// Quadrature of xi_weight * Q over the quadrants where the two amplitudes
// share a sign (first result) and where they differ (second).  Grid points on
// either axis are never evaluated; the strip between the axis and the first
// off-axis node is bridged by extrapolation (see axis_bridged_weights).
inline std::pair<double, double> xi_amplitudes(const QGrid& grid) {
    const QGridSpec& spec = grid.spec;
    const int g = spec.points();
    std::vector<int> pos, neg;
    for (int i = 0; i < g; ++i) {
        if (spec.value(i) > 0.0) pos.push_back(i);
        else if (spec.value(i) < 0.0) neg.push_back(i);
    }
    if (pos.size() < 2 || neg.size() < 2)
        throw std::invalid_argument("xi_amplitudes: grid must reach into all four quadrants");
    const std::vector<double> wpos = detail::axis_bridged_weights(pos.size(), spec.step, true);
    const std::vector<double> wneg = detail::axis_bridged_weights(neg.size(), spec.step, false);

    double same = 0.0, opposite = 0.0;
    auto add = [&](const std::vector<int>& li, const std::vector<double>& wl,
                   const std::vector<int>& ri, const std::vector<double>& wr, double& acc) {
        for (std::size_t a = 0; a < li.size(); ++a) {
            const double xl = spec.value(li[a]);
            for (std::size_t b = 0; b < ri.size(); ++b) {
                const double xr = spec.value(ri[b]);
                acc += wl[a] * wr[b] * xi_weight(xl, xr) * grid.values(li[a], ri[b]);
            }
        }
    };
    add(pos, wpos, pos, wpos, same);
    add(neg, wneg, neg, wneg, same);
    add(pos, wpos, neg, wneg, opposite);
    add(neg, wneg, pos, wpos, opposite);
    return {same, opposite};
}

inline std::pair<double, double> xi_amplitudes(const Matrix& rho, FockCutoff cutoff,
                                               const QGridSpec& spec = {}) {
    return xi_amplitudes(husimi_q_real_slice(rho, cutoff, spec));
}

// Probability that the two oscillators emerge with the same phase.
inline double same_phase_probability(double xi_same, double xi_opposite) {
    const double total = xi_same + xi_opposite;
    if (!(total > 0.0))
        throw std::runtime_error("same_phase_probability: quadrant amplitudes vanish");
    return xi_same / total;
}

// ---- readout-window correlation -------------------------------------------------

struct CorrelationRecord {
    std::vector<double> times_us;
    std::vector<double> xi_same;
    std::vector<double> xi_opposite;
    std::vector<double> p_same;
    double readout_average = 0.0;  // time-averaged p_same across the window
};

// Reduce a time series of quadrant amplitudes to the same-phase probability
// trace over a readout window and its trapezoidal time average.  Throws
// WindowNotCovered unless the series spans the window.
inline CorrelationRecord correlation_from_series(const std::vector<double>& times_us,
                                                 const std::vector<double>& xi_same,
                                                 const std::vector<double>& xi_opposite,
                                                 double window_start_us, double window_end_us) {
    const double slack = 1e-6;
    CorrelationRecord rec;
    for (std::size_t i = 0; i < times_us.size(); ++i) {
        if (times_us[i] < window_start_us - slack || times_us[i] > window_end_us + slack) continue;
        rec.times_us.push_back(times_us[i]);
        rec.xi_same.push_back(xi_same[i]);
        rec.xi_opposite.push_back(xi_opposite[i]);
        rec.p_same.push_back(same_phase_probability(xi_same[i], xi_opposite[i]));
    }
    if (rec.times_us.size() < 2 || rec.times_us.front() > window_start_us + slack ||
        rec.times_us.back() < window_end_us - slack) {
        throw WindowNotCovered("correlation series does not span the readout window [" +
                               std::to_string(window_start_us) + ", " +
                               std::to_string(window_end_us) + "] us");
    }
    double integral = 0.0;
    for (std::size_t i = 0; i + 1 < rec.times_us.size(); ++i) {
        integral += 0.5 * (rec.p_same[i] + rec.p_same[i + 1]) *
                    (rec.times_us[i + 1] - rec.times_us[i]);
    }
    rec.readout_average = integral / (rec.times_us.back() - rec.times_us.front());
    return rec;
}

// Reduce the stored readout-window snapshots of a trajectory likewise.
inline CorrelationRecord correlation_over_readout(const Trajectory& traj,
                                                  const PumpSchedule& schedule,
                                                  const QGridSpec& spec = {}) {
    std::vector<double> times, same, opposite;
    times.reserve(traj.states.size());
    same.reserve(traj.states.size());
    opposite.reserve(traj.states.size());
    for (const StateSample& s : traj.states) {
        const auto [xs, xo] = xi_amplitudes(s.rho, infer_cutoff(s.rho), spec);
        times.push_back(s.t_us);
        same.push_back(xs);
        opposite.push_back(xo);
    }
    return correlation_from_series(times, same, opposite, schedule.readout_start_us(),
                                   schedule.readout_end_us());
}

// ---- simple state functionals ----------------------------------------------------

// Mean photon number of each mode; the cutoff is inferred from the matrix size.
inline std::pair<double, double> mean_photon_numbers(const Matrix& rho) {
    const FockCutoff cutoff = infer_cutoff(rho);
    const int n = cutoff.dim;
    double nl = 0.0, nr = 0.0;
    for (int l = 0; l < n; ++l) {
        for (int r = 0; r < n; ++r) {
            const double p = rho(l * n + r, l * n + r).real();
            nl += l * p;
            nr += r * p;
        }
    }
    return {nl, nr};
}

// tr(rho^2) for a Hermitian rho.
inline double purity(const Matrix& rho) { return rho.squaredNorm(); }

// Photon-number parity reflection of one mode, embedded in the joint space.
inline Matrix parity_operator(Mode m, FockCutoff cutoff) {
    Matrix p = Matrix::Zero(cutoff.dim, cutoff.dim);
    for (int k = 0; k < cutoff.dim; ++k) p(k, k) = (k % 2 == 0) ? 1.0 : -1.0;
    return embed_mode(p, m, cutoff);
}

// ---- classical metapotential ------------------------------------------------------

// Semiclassical landscape of the left oscillator at fixed right-mode amplitude:
//   V(x) = (K/2)|x|^4 + (p/2)(x*^2 + x^2) + g (e^{-i theta_p / 2} alpha_R x* + c.c.)
// All coefficients are plain MHz, matching the Hamiltonian convention.
inline double metapotential_mhz(Complex x, double kerr_mhz, double pump_mhz, double g_mhz,
                                double theta_p, Complex alpha_r) {
    const double n2 = std::norm(x);
    const Complex drive = std::exp(Complex(0.0, -0.5 * theta_p)) * alpha_r * std::conj(x);
    return 0.5 * kerr_mhz * n2 * n2 + pump_mhz * (x * x).real() + 2.0 * g_mhz * drive.real();
}

}  // namespace kpo
