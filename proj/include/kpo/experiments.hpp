#pragma once

// Canned parameter sweeps: pump-phase, dephasing, and photon-loss scans of the
// readout correlation, plus the short-schedule variant.  Each sweep point is
// an independent evolve-and-reduce job; failures are recorded per point and
// never abort the sweep.

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "kpo/errors.hpp"
#include "kpo/fock.hpp"
#include "kpo/lindblad.hpp"
#include "kpo/model.hpp"
#include "kpo/observables.hpp"
#include "kpo/spectrum.hpp"
#include "kpo/version.hpp"

namespace kpo {

// ---- sweep specification --------------------------------------------------------

enum class Preset { Paper, Fast };
enum class SweepAxis { ThetaP, Gamma, KappaScale, PumpSpectrum };

// Base loss rates scaled by the kappa_scale axis (total photon loss, MHz).
inline constexpr std::array<double, 2> kKappaScaleBaseMhz{1.00, 0.86};

struct SweepSpec {
    Preset preset = Preset::Paper;
    Profile profile = Profile::Paper;
    SweepAxis axis = SweepAxis::ThetaP;
    std::vector<double> points;  // axis values; empty = axis default

    // Optional patches applied to every point.
    std::optional<SystemParams> params;         // explicit base set; else preset + profile
    std::optional<PumpSchedule> schedule;       // explicit schedule; else preset
    std::optional<double> theta_p_rad;          // fixed phase for gamma/kappa sweeps
    std::optional<double> gamma_khz;            // fixed dephasing for theta sweeps
    std::vector<double> gamma_families_khz;     // kappa sweep families; empty = default
    double dt_ns = 0.0;                         // integrator step; 0 = automatic
    int cutoff_dim = 0;                         // per-mode cutoff; 0 = profile default
    QGridSpec grid{};                           // readout Q grid
    int threads = 1;
};

struct SweepPoint {
    double axis = 0.0;       // theta_p [rad], gamma [kHz], or loss scale M
    double gamma_khz = 0.0;  // dephasing actually applied (family value for kappa sweeps)
    bool ok = false;
    std::string error;       // failure reason when !ok
    double correlation = 0.0;
    double n_l = 0.0, n_r = 0.0;  // mean photon numbers at the end of the run
    double dt_us = 0.0;      // integrator step used (the stability bound tracks the phase)
    double runtime_s = 0.0;
};

struct SweepResult {
    SweepSpec spec;              // resolved: defaults filled in
    SystemParams base_params;    // before the per-point axis value is applied
    PumpSchedule schedule;
    int cutoff_dim = 0;
    double sample_interval_us = 0.0;
    double state_interval_us = 0.0;
    std::string version = kVersionString;
    std::vector<SweepPoint> points;
};

// ---- axis defaults ---------------------------------------------------------------

inline std::vector<double> default_theta_points() {
    std::vector<double> v;
    for (int i = 0; i <= 16; ++i) v.push_back(kTwoPi * i / 16.0);  // 0..2pi step pi/8
    return v;
}

inline std::vector<double> default_gamma_points_khz() {
    return {0.0, 5.0, 15.0, 25.0, 35.8, 45.0, 60.0};
}

inline std::vector<double> default_kappa_scale_points() {
    return {0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0};
}

inline std::vector<double> default_gamma_families_khz() { return {0.0, 15.0, 35.8, 60.0}; }

// ---- single-point pipeline --------------------------------------------------------

struct PointOutcome {
    double correlation = 0.0;
    double n_l = 0.0, n_r = 0.0;
    double dt_us = 0.0;
};

// Evolve through the readout window and reduce the snapshots on the fly to the
// readout-averaged same-phase probability.  Snapshots are never stored.
inline PointOutcome run_correlation_point(const SystemParams& prm, const PumpSchedule& sched,
                                          FockCutoff cutoff, const QGridSpec& grid,
                                          double dt_ns = 0.0, double sample_interval_us = 0.025,
                                          double state_interval_us = 0.05,
                                          std::optional<DissipationRates> rates_override = {}) {
    std::vector<double> times, same, opposite;
    EvolveOptions opts;
    opts.dt_ns = dt_ns;
    opts.t_end_us = sched.readout_end_us();
    opts.sample_interval_us = sample_interval_us;
    opts.state_interval_us = state_interval_us;
    opts.store_states = false;
    opts.track_min_eig = false;
    opts.rates_override = rates_override;
    opts.on_snapshot = [&](double t_us, const Matrix& rho) {
        const auto [s, o] = xi_amplitudes(rho, cutoff, grid);
        times.push_back(t_us);
        same.push_back(s);
        opposite.push_back(o);
    };
    const Trajectory traj = evolve(prm, sched, cutoff, opts);
    const CorrelationRecord rec = correlation_from_series(times, same, opposite,
                                                          sched.readout_start_us(),
                                                          sched.readout_end_us());
    PointOutcome out;
    out.correlation = rec.readout_average;
    out.n_l = traj.monitors.back().n_l;
    out.n_r = traj.monitors.back().n_r;
    out.dt_us = traj.dt_us;
    return out;
}

// ---- sweep machinery ---------------------------------------------------------------

namespace detail {

inline void run_pool(int threads, int njobs, const std::function<void(int)>& job) {
    threads = std::max(1, std::min(threads, njobs));
    if (threads == 1) {
        for (int i = 0; i < njobs; ++i) job(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            for (int i; (i = next.fetch_add(1)) < njobs;) job(i);
        });
    }
    for (auto& th : pool) th.join();
}

struct ResolvedSweep {
    SystemParams params;
    PumpSchedule schedule;
    FockCutoff cutoff{2};  // placeholder; resolve_base always assigns
    double sample_us = 0.0;
    double state_us = 0.0;
};

inline ResolvedSweep resolve_base(const SweepSpec& spec) {
    ResolvedSweep r;
    if (spec.params) {
        r.params = *spec.params;
    } else {
        r.params = spec.preset == Preset::Fast ? fast_params() : paper_params();
        r.params = apply_profile(r.params, spec.profile);
    }
    r.schedule = spec.schedule ? *spec.schedule
                               : (spec.preset == Preset::Fast ? fast_schedule() : paper_schedule());
    r.cutoff = FockCutoff{spec.cutoff_dim > 0 ? spec.cutoff_dim : default_cutoff(spec.profile)};
    // The short schedule needs proportionally finer monitor/snapshot spacing.
    r.sample_us = spec.preset == Preset::Fast ? 0.0025 : 0.025;
    r.state_us = spec.preset == Preset::Fast ? 0.01 : 0.05;
    if (spec.gamma_khz) r.params.gamma_mhz = {*spec.gamma_khz / 1000.0, *spec.gamma_khz / 1000.0};
    if (spec.theta_p_rad) r.params.theta_p_rad = *spec.theta_p_rad;
    return r;
}

// Shared driver: `apply(i, pt, prm)` pins the i-th axis value onto a parameter
// set and may return a dissipator override to use instead of the
// parameter-derived rates.
template <typename Apply>
inline SweepResult drive_sweep(SweepSpec spec, const Apply& apply) {
    ResolvedSweep base = resolve_base(spec);
    base.params.validate();
    base.schedule.validate();

    SweepResult result;
    result.spec = spec;
    result.base_params = base.params;
    result.schedule = base.schedule;
    result.cutoff_dim = base.cutoff.dim;
    result.sample_interval_us = base.sample_us;
    result.state_interval_us = base.state_us;
    result.points.resize(spec.points.size());

    detail::run_pool(spec.threads, static_cast<int>(spec.points.size()), [&](int i) {
        SweepPoint& pt = result.points[i];
        pt.axis = spec.points[i];
        const auto t0 = std::chrono::steady_clock::now();
        try {
            SystemParams prm = base.params;
            const std::optional<DissipationRates> rates = apply(i, pt, prm);
            prm.validate();
            pt.gamma_khz = 1000.0 * prm.gamma_mhz[0];
            const PointOutcome out =
                run_correlation_point(prm, base.schedule, base.cutoff, spec.grid, spec.dt_ns,
                                      base.sample_us, base.state_us, rates);
            pt.correlation = out.correlation;
            pt.n_l = out.n_l;
            pt.n_r = out.n_r;
            pt.dt_us = out.dt_us;
            pt.ok = true;
        } catch (const std::exception& e) {
            pt.ok = false;
            pt.error = e.what();
        }
        pt.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    });
    return result;
}

}  // namespace detail

// ---- sweep entry points -------------------------------------------------------------

// Correlation vs. relative pump phase.
inline SweepResult sweep_theta_p(SweepSpec spec) {
    spec.axis = SweepAxis::ThetaP;
    if (spec.points.empty()) spec.points = default_theta_points();
    for (double th : spec.points)
        if (!std::isfinite(th)) throw std::invalid_argument("sweep_theta_p: non-finite phase");
    return detail::drive_sweep(spec, [](int, SweepPoint& pt, SystemParams& prm) {
        prm.theta_p_rad = pt.axis;
        return std::optional<DissipationRates>{};
    });
}

// Correlation vs. pure dephasing rate (axis in kHz) at fixed pump phase.
inline SweepResult sweep_gamma(SweepSpec spec) {
    spec.axis = SweepAxis::Gamma;
    if (spec.points.empty()) spec.points = default_gamma_points_khz();
    if (!spec.theta_p_rad) spec.theta_p_rad = 0.0;
    return detail::drive_sweep(spec, [](int, SweepPoint& pt, SystemParams& prm) {
        prm.gamma_mhz = {pt.axis / 1000.0, pt.axis / 1000.0};
        return std::optional<DissipationRates>{};
    });
}

// Correlation vs. total photon loss scaled as M * (1.00, 0.86) MHz, one point
// per (gamma family, M) pair, family-major order.  The scaled loss enters
// through a dissipator override: it replaces the parameter-derived loss rates
// outright rather than being decomposed into external/internal contributions.
inline SweepResult sweep_kappa_scale(SweepSpec spec) {
    spec.axis = SweepAxis::KappaScale;
    if (spec.points.empty()) spec.points = default_kappa_scale_points();
    if (spec.gamma_families_khz.empty()) spec.gamma_families_khz = default_gamma_families_khz();
    if (!spec.theta_p_rad) spec.theta_p_rad = 0.0;
    for (double m : spec.points)
        if (!std::isfinite(m) || m < 0.0 || m > 3.0)
            throw std::invalid_argument("sweep_kappa_scale: loss scale must lie in [0, 3]");

    // Expand the (family x scale) grid into a flat point list, family-major.
    std::vector<double> families;  // parallel to the flattened points
    SweepSpec flat = spec;
    flat.points.clear();
    for (double fam : spec.gamma_families_khz) {
        for (double m : spec.points) {
            flat.points.push_back(m);
            families.push_back(fam);
        }
    }

    SweepResult result =
        detail::drive_sweep(flat, [&](int i, SweepPoint& pt, SystemParams& prm) {
            prm.gamma_mhz = {families[i] / 1000.0, families[i] / 1000.0};
            DissipationRates rates;
            rates.kappa_ang = {kTwoPi * pt.axis * kKappaScaleBaseMhz[0],
                               kTwoPi * pt.axis * kKappaScaleBaseMhz[1]};
            rates.gamma_ang = {kTwoPi * prm.gamma_mhz[0], kTwoPi * prm.gamma_mhz[1]};
            return std::optional<DissipationRates>(rates);
        });
    result.spec.gamma_families_khz = spec.gamma_families_khz;
    result.spec.points = spec.points;  // keep the unexpanded scale grid in the spec
    return result;
}

// ---- short-schedule variant -----------------------------------------------------------

// The short schedule relies on the pump-off Hamiltonian having the vacuum as
// its highest-energy eigenstate, so that ramping the pump from zero carries
// the vacuum adiabatically into the top branch.  True for red-detuned
// parameters; false on resonance, where photon-number states sit above it.
inline bool fast_preset_precondition(const SystemParams& prm, FockCutoff cutoff) {
    const Matrix h0 = hamiltonian_with_pumps(0.0, 0.0, prm, cutoff);
    const auto top = top_eigenpairs(h0, 1);
    return std::abs(top[0].vector(0)) > 0.999;
}

// Pump-phase sweep under the short schedule.  Checks the adiabatic
// precondition before spending any integrator time.
inline SweepResult run_fast_schedule(SweepSpec spec) {
    spec.preset = Preset::Fast;
    const detail::ResolvedSweep base = detail::resolve_base(spec);
    if (!fast_preset_precondition(base.params, base.cutoff))
        throw InvariantViolation(
            "short-schedule sweep requires the vacuum to top the pump-off spectrum", 0.0);
    return sweep_theta_p(std::move(spec));
}

// ---- distinguished eigenstates ---------------------------------------------------------

// The even-parity member of the lowest near-degenerate opposite-correlation
// doublet of the fully pumped Hamiltonian.  The doublet is located by scanning
// the top-k eigenstates for the first (highest) adjacent near-degenerate pair
// whose lobes sit in the mixed quadrants; the parity operator is then
// diagonalised inside that two-dimensional span, which stays well-defined even
// when the eigensolver returns parity-mixed combinations.
inline Vector even_parity_opposite_state(const SystemParams& prm, FockCutoff cutoff, int k = 8) {
    prm.validate();
    const auto pmax = pump_amplitudes_mhz(prm);
    const Matrix h = hamiltonian_with_pumps(pmax[0], pmax[1], prm, cutoff);
    const auto pairs = top_eigenpairs(h, k);

    const auto p_same_of = [&](const Vector& v) {
        const QGrid q = eigenstate_qfunction(v);
        const auto [s, o] = xi_amplitudes(q);
        return same_phase_probability(s, o);
    };

    const Matrix pi_l = parity_operator(Mode::L, cutoff);
    const Matrix pi_r = parity_operator(Mode::R, cutoff);
    const Matrix pi_lr = pi_l * pi_r;

    for (int i = 0; i + 1 < static_cast<int>(pairs.size()); ++i) {
        const double e0 = pairs[i].value, e1 = pairs[i + 1].value;
        const double scale = std::max({std::abs(e0), std::abs(e1), 1.0});
        if (std::abs(e0 - e1) > 1e-5 * scale) continue;
        if (p_same_of(pairs[i].vector) > 0.5) continue;

        // Diagonalise parity in span{v0, v1}.
        const Vector& v0 = pairs[i].vector;
        const Vector& v1 = pairs[i + 1].vector;
        Eigen::Matrix2cd pmat;
        pmat << v0.dot(pi_lr * v0), v0.dot(pi_lr * v1), v1.dot(pi_lr * v0), v1.dot(pi_lr * v1);
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix2cd> es(pmat);
        if (es.info() != Eigen::Success)
            throw std::runtime_error("even_parity_opposite_state: parity diagonalisation failed");
        const Eigen::Vector2cd c = es.eigenvectors().col(1);  // eigenvalue closest to +1
        Vector v = c(0) * v0 + c(1) * v1;
        v.normalize();

        const double par = std::real(v.dot(pi_lr * v));
        if (par < 0.99 || p_same_of(v) > 0.1)
            throw BranchAmbiguous("even_parity_opposite_state: candidate pair is not a clean "
                                  "even/odd opposite-correlation doublet");
        return v;
    }
    throw BranchAmbiguous(
        "even_parity_opposite_state: no near-degenerate opposite-correlation pair among the top " +
        std::to_string(k) + " levels");
}

}  // namespace kpo
