#pragma once

#include <array>
#include <cmath>
#include <string>

#include "kpo/fock.hpp"

namespace kpo {

// All frequency-like parameters are plain frequencies in MHz (the f in
// w = 2*pi*f); times are in microseconds. The factor 2*pi enters exactly once,
// when operators are assembled in angular units (rad/us).

// ----------------------------- parameters ----------------------------------

struct SystemParams {
    std::array<double, 2> delta_mhz{0.0, 0.0};           // rotating-frame detuning
    std::array<double, 2> kerr_mhz{-10.4, -10.3};        // self-Kerr, negative
    double g_mhz = 7.35;                                 // static coupling
    std::array<double, 2> kappa_e_mhz{0.82, 0.63};       // external loss
    std::array<double, 2> kappa_i_meas_mhz{0.18, 0.23};  // measured internal loss
    std::array<double, 2> gamma_mhz{0.0358, 0.0358};     // pure dephasing
    double theta_p_rad = 0.0;                            // relative pump phase
    std::array<double, 2> alpha_target{2.8, 2.5};        // design oscillation amplitude

    // Actual internal loss once the dephasing contribution is removed.
    double kappa_star_mhz(int m) const { return kappa_i_meas_mhz[m] - 2.0 * gamma_mhz[m]; }
    // Total photon loss rate entering the dissipator.
    double kappa_a_mhz(int m) const { return kappa_e_mhz[m] + kappa_star_mhz(m); }

    void validate() const {
        for (int m = 0; m < 2; ++m) {
            const char* side = (m == 0) ? "L" : "R";
            if (!(kerr_mhz[m] < 0.0))
                throw std::invalid_argument(std::string("SystemParams: kerr_") + side +
                                            " must be negative");
            if (kappa_e_mhz[m] < 0.0 || kappa_i_meas_mhz[m] < 0.0 || gamma_mhz[m] < 0.0)
                throw std::invalid_argument(std::string("SystemParams: loss rates for mode ") +
                                            side + " must be nonnegative");
            if (kappa_star_mhz(m) < 0.0)
                throw std::invalid_argument(
                    std::string("SystemParams: kappa_i_meas_") + side +
                    " - 2*gamma is negative; dephasing exceeds the measured internal loss");
            if (alpha_target[m] < 0.0)
                throw std::invalid_argument("SystemParams: alpha_target must be nonnegative");
        }
        if (g_mhz < 0.0) throw std::invalid_argument("SystemParams: g must be nonnegative");
    }
};

// ----------------------------- schedule -------------------------------------

struct PumpSchedule {
    double ramp_up_us = 3.0;
    double plateau_us = 2.8;
    double readout_delay_us = 0.5;
    double readout_window_us = 1.0;

    double total_time_us() const { return ramp_up_us + plateau_us; }
    double readout_start_us() const { return ramp_up_us + readout_delay_us; }
    double readout_end_us() const { return readout_start_us() + readout_window_us; }

    // Dimensionless pump envelope: linear 0 -> 1 over the ramp, then flat.
    double envelope(double t_us) const {
        if (t_us < 0.0 || t_us > total_time_us() + 1e-9)
            throw std::invalid_argument("PumpSchedule::envelope: t = " + std::to_string(t_us) +
                                        " us outside [0, " + std::to_string(total_time_us()) +
                                        "]");
        if (ramp_up_us <= 0.0 || t_us >= ramp_up_us) return 1.0;
        return t_us / ramp_up_us;
    }

    void validate() const {
        if (ramp_up_us < 0.0 || plateau_us <= 0.0 || readout_delay_us < 0.0 ||
            readout_window_us <= 0.0)
            throw std::invalid_argument("PumpSchedule: durations must be positive "
                                        "(ramp and delay may be zero)");
        if (readout_delay_us + readout_window_us > plateau_us + 1e-9)
            throw std::invalid_argument("PumpSchedule: readout window must fit inside the plateau");
    }
};

// ----------------------------- presets --------------------------------------

inline SystemParams paper_params() { return SystemParams{}; }

inline PumpSchedule paper_schedule() { return PumpSchedule{}; }

// Short-schedule variant: detune both modes and read out right away.
inline SystemParams fast_params() {
    SystemParams p;
    p.delta_mhz = {-20.0, -20.0};
    return p;
}

inline PumpSchedule fast_schedule() {
    PumpSchedule s;
    s.ramp_up_us = 0.1;
    s.plateau_us = 0.2;
    s.readout_delay_us = 0.0;
    s.readout_window_us = 0.2;
    return s;
}

enum class Profile { Reduced, Paper };

inline SystemParams apply_profile(SystemParams p, Profile prof) {
    if (prof == Profile::Reduced) p.alpha_target = {1.6, 1.5};
    return p;
}

inline int default_cutoff(Profile prof) { return prof == Profile::Reduced ? 12 : 24; }

// ----------------------------- derived values --------------------------------

// Plateau pump amplitudes chosen so each oscillator settles near alpha_target.
inline std::array<double, 2> pump_amplitudes_mhz(const SystemParams& p) {
    return {std::abs(p.kerr_mhz[0]) * p.alpha_target[0] * p.alpha_target[0],
            std::abs(p.kerr_mhz[1]) * p.alpha_target[1] * p.alpha_target[1]};
}

// Steady oscillation amplitude implied by a pump value (diagnostic only).
inline double steady_alpha_estimate(double p_mhz, double delta_mhz, double kerr_mhz) {
    double x = (p_mhz + delta_mhz) / std::abs(kerr_mhz);
    return x > 0.0 ? std::sqrt(x) : 0.0;
}

// cos(theta/2) written so the value is exactly zero at theta = pi.
inline double cos_half(double theta_rad) { return std::sin(0.5 * (M_PI - theta_rad)); }

// Effective Ising coupling between the two oscillators.
inline double effective_coupling_mhz(const SystemParams& p) {
    return 2.0 * cos_half(p.theta_p_rad) * p.g_mhz * p.alpha_target[0] * p.alpha_target[1];
}

struct IsingSpinPair {
    int s_l;
    int s_r;
    IsingSpinPair(int l, int r) : s_l(l), s_r(r) {
        if ((l != 1 && l != -1) || (r != 1 && r != -1))
            throw std::invalid_argument("IsingSpinPair: spins must be +1 or -1");
    }
};

inline double ising_energy_mhz(double j_mhz, IsingSpinPair s) {
    return -j_mhz * s.s_l * s.s_r;
}

// ----------------------------- Hamiltonian -----------------------------------

// Joint-space operator pieces reused across repeated Hamiltonian builds.
struct ModelOps {
    FockCutoff cutoff;
    Matrix kerr_l, kerr_r;    // ad^2 a^2, embedded
    Matrix num_l, num_r;      // photon number, embedded
    Matrix pump_l, pump_r;    // ad^2 + a^2, embedded
    Matrix hop_lr;            // adL aR
    Matrix a_l, a_r;          // ladder operators, embedded

    explicit ModelOps(FockCutoff c) : cutoff(c) {
        Matrix a = annihilation(c);
        Matrix ad = a.adjoint();
        Matrix kerr = ad * ad * a * a;
        Matrix pump = ad * ad + a * a;
        kerr_l = embed_mode(kerr, Mode::L, c);
        kerr_r = embed_mode(kerr, Mode::R, c);
        num_l = embed_mode(number_operator(c), Mode::L, c);
        num_r = embed_mode(number_operator(c), Mode::R, c);
        pump_l = embed_mode(pump, Mode::L, c);
        pump_r = embed_mode(pump, Mode::R, c);
        a_l = embed_mode(a, Mode::L, c);
        a_r = embed_mode(a, Mode::R, c);
        hop_lr = embed_mode(ad, Mode::L, c) * a_r;
    }
};

// Hamiltonian in angular units (rad/us) for explicit pump amplitudes in MHz.
inline Matrix hamiltonian_with_pumps(double pl_mhz, double pr_mhz, const SystemParams& prm,
                                     const ModelOps& ops) {
    Complex phase = std::exp(Complex(0.0, -0.5 * prm.theta_p_rad));
    Matrix h = (0.5 * prm.kerr_mhz[0]) * ops.kerr_l + (0.5 * prm.kerr_mhz[1]) * ops.kerr_r +
               prm.delta_mhz[0] * ops.num_l + prm.delta_mhz[1] * ops.num_r +
               (0.5 * pl_mhz) * ops.pump_l + (0.5 * pr_mhz) * ops.pump_r;
    Matrix hop = prm.g_mhz * phase * ops.hop_lr;
    h += hop + hop.adjoint();
    return kTwoPi * h;
}

inline Matrix hamiltonian_with_pumps(double pl_mhz, double pr_mhz, const SystemParams& prm,
                                     FockCutoff c) {
    return hamiltonian_with_pumps(pl_mhz, pr_mhz, prm, ModelOps(c));
}

// Hamiltonian at a point in the pulse schedule.
inline Matrix hamiltonian_at(double t_us, const SystemParams& prm, const PumpSchedule& sched,
                             const ModelOps& ops) {
    std::array<double, 2> pmax = pump_amplitudes_mhz(prm);
    double e = sched.envelope(t_us);
    return hamiltonian_with_pumps(pmax[0] * e, pmax[1] * e, prm, ops);
}

inline Matrix hamiltonian_at(double t_us, const SystemParams& prm, const PumpSchedule& sched,
                             FockCutoff c) {
    return hamiltonian_at(t_us, prm, sched, ModelOps(c));
}

}  // namespace kpo
