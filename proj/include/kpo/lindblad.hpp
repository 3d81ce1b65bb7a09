#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "kpo/errors.hpp"
#include "kpo/fock.hpp"
#include "kpo/model.hpp"

namespace kpo {

using RealMatrix = Eigen::MatrixXd;

// ---- states ----------------------------------------------------------------

struct DensityMatrix {
    Matrix rho;

    static DensityMatrix vacuum(FockCutoff cutoff) {
        DensityMatrix out;
        out.rho = Matrix::Zero(cutoff.joint_dim(), cutoff.joint_dim());
        out.rho(0, 0) = 1.0;
        return out;
    }

    static DensityMatrix from_pure(const Vector& amps) {
        DensityMatrix out;
        out.rho = amps * amps.adjoint();
        return out;
    }
    static DensityMatrix from_pure(const StateVector& psi) { return from_pure(psi.amps); }

    double trace_deviation() const { return std::abs(rho.trace() - Complex(1.0, 0.0)); }
    double herm_deviation() const { return (rho - rho.adjoint()).cwiseAbs().maxCoeff(); }
};

// ---- dissipation -----------------------------------------------------------

// Angular rates (rad/us) entering the generator.  Built from ordinary-frequency
// parameters in exactly one place so the 2*pi convention cannot be applied twice.
struct DissipationRates {
    std::array<double, 2> kappa_ang{{0.0, 0.0}};  // photon loss, per mode
    std::array<double, 2> gamma_ang{{0.0, 0.0}};  // pure dephasing, per mode

    bool any() const {
        return kappa_ang[0] != 0.0 || kappa_ang[1] != 0.0 ||
               gamma_ang[0] != 0.0 || gamma_ang[1] != 0.0;
    }
};

inline DissipationRates rates_from(const SystemParams& p) {
    DissipationRates r;
    for (int m = 0; m < 2; ++m) {
        r.kappa_ang[m] = kTwoPi * p.kappa_a_mhz(m);
        r.gamma_ang[m] = kTwoPi * p.gamma_mhz[m];
    }
    return r;
}

// ---- dense reference generator ----------------------------------------------

// Textbook form, O(d^3) in matrix products.  Kept as the independent
// cross-check for the structured kernel below; too slow for time evolution.
inline Matrix lindblad_rhs(const Matrix& h, const DissipationRates& rates, const ModelOps& ops,
                           const Matrix& rho) {
    Matrix out = Complex(0.0, -1.0) * (h * rho - rho * h);
    for (int m = 0; m < 2; ++m) {
        const Matrix& a = (m == 0) ? ops.a_l : ops.a_r;
        const Matrix& n = (m == 0) ? ops.num_l : ops.num_r;
        if (rates.kappa_ang[m] != 0.0)
            out += rates.kappa_ang[m] * (a * rho * a.adjoint() - 0.5 * (n * rho + rho * n));
        if (rates.gamma_ang[m] != 0.0)
            out += rates.gamma_ang[m] * (2.0 * (n * rho * n) - n * n * rho - rho * n * n);
    }
    return out;
}

// ---- split complex storage ----------------------------------------------------

// The evolution kernel works on the real and imaginary parts of the state as
// two separate real matrices, so every inner loop is a contiguous stream of
// real fused multiply-adds that the compiler vectorizes well.
struct StatePlanes {
    RealMatrix re, im;

    void resize(int d) {
        re.resize(d, d);
        im.resize(d, d);
    }

    static StatePlanes split(const Matrix& z) {
        StatePlanes p;
        p.re = z.real();
        p.im = z.imag();
        return p;
    }

    Matrix merge() const {
        Matrix z(re.rows(), re.cols());
        z.real() = re;
        z.imag() = im;
        return z;
    }
};

// ---- structured generator kernel --------------------------------------------
//
// Applies the full generator column by column using the band structure of the
// two-mode operators in the L-major product basis (j = l*dim + r):
//   * Kerr and detuning are diagonal,
//   * each two-photon pump couples j <-> j -+ 2*dim (left) or j -+ 2 (right),
//   * the hopping term couples j <-> j -+ (dim - 1),
//   * loss and dephasing act elementwise, plus one photon-refill band per mode.
// Cost is O(d^2) per application instead of O(d^3) for matrix products.
// The result is computed on the lower triangle and mirrored, so the output is
// Hermitian by construction whenever the input is.
class LindbladKernel {
public:
    LindbladKernel(FockCutoff cutoff, const SystemParams& params, const DissipationRates& rates)
        : n_(cutoff.dim), d_(cutoff.joint_dim()) {
        params.validate();
        const int n = n_, d = d_;
        hd_.resize(d);
        pl_lo_.resize(d); pl_hi_.resize(d);
        pr_lo_.resize(d); pr_hi_.resize(d);
        hop_lo_.resize(d); hop_hi_.resize(d);
        auto sq2 = [](int m) { return std::sqrt(double(m + 1) * double(m + 2)); };
        for (int l = 0; l < n; ++l)
            for (int r = 0; r < n; ++r) {
                const int j = l * n + r;
                hd_(j) = kTwoPi * (0.5 * params.kerr_mhz[0] * l * (l - 1) + params.delta_mhz[0] * l +
                                   0.5 * params.kerr_mhz[1] * r * (r - 1) + params.delta_mhz[1] * r);
                pl_lo_(j) = (l >= 2) ? sq2(l - 2) : 0.0;
                pl_hi_(j) = (l <= n - 3) ? sq2(l) : 0.0;
                pr_lo_(j) = (r >= 2) ? sq2(r - 2) : 0.0;
                pr_hi_(j) = (r <= n - 3) ? sq2(r) : 0.0;
                hop_lo_(j) = (l >= 1 && r <= n - 2) ? std::sqrt(double(l) * double(r + 1)) : 0.0;
                hop_hi_(j) = (l <= n - 2 && r >= 1) ? std::sqrt(double(l + 1) * double(r)) : 0.0;
            }
        hop_c_ = kTwoPi * params.g_mhz * std::exp(Complex(0.0, -0.5 * params.theta_p_rad));
        const auto pm = pump_amplitudes_mhz(params);
        pump_base_[0] = 0.5 * kTwoPi * pm[0];
        pump_base_[1] = 0.5 * kTwoPi * pm[1];
        kappa_ = rates.kappa_ang;
        dissipative_ = rates.any();
        if (dissipative_) {
            w_.resize(d, d);
            rl_.resize(d);
            rr_.resize(d);
            const double kl = rates.kappa_ang[0], kr = rates.kappa_ang[1];
            const double gl = rates.gamma_ang[0], gr = rates.gamma_ang[1];
            for (int k = 0; k < d; ++k) {
                const int lk = k / n, rk = k % n;
                double* wk = w_.col(k).data();
                for (int j = 0; j < d; ++j) {
                    const int lj = j / n, rj = j % n;
                    wk[j] = -(0.5 * kl * (lj + lk) + 0.5 * kr * (rj + rk) +
                              gl * double((lj - lk) * (lj - lk)) +
                              gr * double((rj - rk) * (rj - rk)));
                }
            }
            for (int j = 0; j < d; ++j) {
                const int lj = j / n, rj = j % n;
                rl_(j) = (lj <= n - 2) ? std::sqrt(double(lj + 1)) : 0.0;
                rr_(j) = (rj <= n - 2) ? std::sqrt(double(rj + 1)) : 0.0;
            }
        }
    }

    int dim() const { return n_; }
    int joint_dim() const { return d_; }
    bool dissipative() const { return dissipative_; }
    // Angular half-amplitude pi * p_max of each pump; multiply by the envelope
    // to get the q arguments of apply().
    double pump_base_ang(int mode) const { return pump_base_[std::size_t(mode)]; }

    // out = generator(in) at pump half-amplitudes ql, qr (rad/us), on split
    // real/imaginary planes.  The input must be Hermitian (re symmetric, im
    // antisymmetric) and must not alias the output.
    void apply_planes(double ql, double qr, const StatePlanes& in, StatePlanes& out) const {
        if (in.re.rows() != d_ || in.re.cols() != d_ || in.im.rows() != d_ || in.im.cols() != d_)
            throw DimensionMismatch("generator kernel: state has wrong dimension");
        out.resize(d_);
        const int n = n_, d = d_;
        const double cr = hop_c_.real(), ci = hop_c_.imag();
        const double* hd = hd_.data();

        for (int k = 0; k < d; ++k) {
            const double* rR = in.re.col(k).data();
            const double* rI = in.im.col(k).data();
            double* oR = out.re.col(k).data();
            double* oI = out.im.col(k).data();
            const double hdk = hd[k];
            const int lk = k / n, rk_idx = k % n;

            // Diagonal commutator plus elementwise loss/dephasing decay:
            // out[j] = (w[j,k] - i (hd[j] - hd[k])) * in[j].
            if (dissipative_) {
                const double* wk = w_.col(k).data();
                for (int j = k; j < d; ++j) {
                    const double h = hdk - hd[j];
                    oR[j] = wk[j] * rR[j] - h * rI[j];
                    oI[j] = wk[j] * rI[j] + h * rR[j];
                }
            } else {
                for (int j = k; j < d; ++j) {
                    const double h = hdk - hd[j];
                    oR[j] = -h * rI[j];
                    oI[j] = h * rR[j];
                }
            }

            // H*rho band terms: out[j] += C * v[j] * in[j -+ shift] with complex C.
            auto band_dn = [&](const double* v, double xr, double xi, int shift) {
                for (int j = std::max(k, shift); j < d; ++j) {
                    const double s = v[j];
                    oR[j] += s * (xr * rR[j - shift] - xi * rI[j - shift]);
                    oI[j] += s * (xr * rI[j - shift] + xi * rR[j - shift]);
                }
            };
            auto band_up = [&](const double* v, double xr, double xi, int shift) {
                const int jend = d - shift;
                for (int j = k; j < jend; ++j) {
                    const double s = v[j];
                    oR[j] += s * (xr * rR[j + shift] - xi * rI[j + shift]);
                    oI[j] += s * (xr * rI[j + shift] + xi * rR[j + shift]);
                }
            };
            // pump coefficients are -i q; hopping carries -i c and -i conj(c)
            if (ql != 0.0) {
                band_dn(pl_lo_.data(), 0.0, -ql, 2 * n);
                band_up(pl_hi_.data(), 0.0, -ql, 2 * n);
            }
            if (qr != 0.0) {
                band_dn(pr_lo_.data(), 0.0, -qr, 2);
                band_up(pr_hi_.data(), 0.0, -qr, 2);
            }
            band_dn(hop_lo_.data(), ci, -cr, n - 1);
            band_up(hop_hi_.data(), -ci, -cr, n - 1);

            // rho*H band terms: whole-column contributions with scalar weights,
            // out[., k] += C * in[., k'].
            auto col_axpy = [&](int kp, double xr, double xi) {
                const double* aR = in.re.col(kp).data();
                const double* aI = in.im.col(kp).data();
                for (int j = k; j < d; ++j) {
                    oR[j] += xr * aR[j] - xi * aI[j];
                    oI[j] += xr * aI[j] + xi * aR[j];
                }
            };
            // pump coefficients are +i q sq2; hopping carries +i conj(c), +i c
            if (ql != 0.0) {
                if (lk >= 2) col_axpy(k - 2 * n, 0.0, ql * pl_lo_(k));
                if (lk <= n - 3) col_axpy(k + 2 * n, 0.0, ql * pl_hi_(k));
            }
            if (qr != 0.0) {
                if (rk_idx >= 2) col_axpy(k - 2, 0.0, qr * pr_lo_(k));
                if (rk_idx <= n - 3) col_axpy(k + 2, 0.0, qr * pr_hi_(k));
            }
            if (hop_lo_(k) != 0.0) col_axpy(k - (n - 1), ci * hop_lo_(k), cr * hop_lo_(k));
            if (hop_hi_(k) != 0.0) col_axpy(k + (n - 1), -ci * hop_hi_(k), cr * hop_hi_(k));

            // Photon refill bands of the loss channels (real coefficients).
            if (dissipative_) {
                if (kappa_[0] != 0.0 && k < d - n) {
                    const double cl = kappa_[0] * rl_(k);
                    const double* aR = in.re.col(k + n).data();
                    const double* aI = in.im.col(k + n).data();
                    const double* rv = rl_.data();
                    const int jend = d - n;
                    for (int j = k; j < jend; ++j) {
                        const double s = cl * rv[j];
                        oR[j] += s * aR[j + n];
                        oI[j] += s * aI[j + n];
                    }
                }
                if (kappa_[1] != 0.0 && rr_(k) != 0.0) {
                    const double crf = kappa_[1] * rr_(k);
                    const double* aR = in.re.col(k + 1).data();
                    const double* aI = in.im.col(k + 1).data();
                    const double* rv = rr_.data();
                    const int jend = d - 1;
                    for (int j = k; j < jend; ++j) {
                        const double s = crf * rv[j];
                        oR[j] += s * aR[j + 1];
                        oI[j] += s * aI[j + 1];
                    }
                }
            }
        }
        mirror(out);
    }

    // Convenience complex interface; used by tests and one-off evaluations.
    void apply(double ql, double qr, const Matrix& rho, Matrix& out) const {
        StatePlanes in = StatePlanes::split(rho);
        StatePlanes o;
        apply_planes(ql, qr, in, o);
        out = o.merge();
    }

    // Restore Hermitian symmetry from the computed lower triangle.
    static void mirror(StatePlanes& p) {
        const int d = int(p.re.rows());
        for (int k = 1; k < d; ++k) {
            double* cR = p.re.col(k).data();
            double* cI = p.im.col(k).data();
            for (int j = 0; j < k; ++j) {
                cR[j] = p.re(k, j);
                cI[j] = -p.im(k, j);
            }
        }
    }

    // Largest stable integrator step (us) for this system, from the spectral
    // spread of the fully pumped Hamiltonian.  The commutator spectrum lies on
    // the imaginary axis within +-i*spread; 2.5 leaves margin inside the
    // classical RK4 stability interval of 2*sqrt(2).
    static double stable_step_us(const SystemParams& params, FockCutoff cutoff) {
        const auto pm = pump_amplitudes_mhz(params);
        Matrix h = hamiltonian_with_pumps(pm[0], pm[1], params, cutoff);
        Eigen::SelfAdjointEigenSolver<Matrix> es(h, Eigen::EigenvaluesOnly);
        const double spread = es.eigenvalues().maxCoeff() - es.eigenvalues().minCoeff();
        if (spread <= 0.0) return 0.2e-3;
        return 2.5 / spread;
    }

private:
    int n_ = 0, d_ = 0;
    Eigen::VectorXd hd_;
    Eigen::VectorXd pl_lo_, pl_hi_, pr_lo_, pr_hi_, hop_lo_, hop_hi_;
    Eigen::VectorXd rl_, rr_;
    RealMatrix w_;
    Complex hop_c_{0.0, 0.0};
    std::array<double, 2> pump_base_{{0.0, 0.0}};
    std::array<double, 2> kappa_{{0.0, 0.0}};
    bool dissipative_ = false;
};

// Sup norm of the generator applied to a state at fixed pump half-amplitudes;
// a state is numerically stationary when this is small.
inline double generator_sup_norm(const LindbladKernel& kernel, double ql, double qr,
                                 const Matrix& rho) {
    Matrix out;
    kernel.apply(ql, qr, rho, out);
    return out.cwiseAbs().maxCoeff();
}

// ---- time evolution ----------------------------------------------------------

struct MonitorSample {
    double t_us = 0.0;
    double n_l = 0.0;        // mean photon number, left mode
    double n_r = 0.0;        // mean photon number, right mode
    double trace_dev = 0.0;  // |tr(rho) - 1|
    double herm_dev = 0.0;   // max |rho - rho^dagger|
    double min_eig = 0.0;    // power-iteration estimate (upper bound) of min eigenvalue
};

struct StateSample {
    double t_us = 0.0;
    Matrix rho;
};

struct EvolveOptions {
    double dt_ns = 0.0;                 // <= 0: automatic, min(0.2 ns, stability bound)
    double t_end_us = -1.0;             // < 0: run the whole schedule
    double sample_interval_us = 0.025;  // monitor spacing
    double state_interval_us = 0.05;    // snapshot spacing inside the readout window
    bool store_states = true;           // keep snapshots in the trajectory
    bool unitary = false;               // drop the dissipator entirely
    bool track_min_eig = true;
    int min_eig_iters = 40;
    double trace_tol = 1e-7;
    double herm_tol = 1e-9;
    bool check_invariants = true;
    std::optional<DissipationRates> rates_override;  // replaces rates_from(params)
    std::optional<Matrix> initial;                   // default: joint vacuum
    // Called with every snapshot (readout window and final state), whether or
    // not snapshots are stored; lets callers reduce states on the fly.
    std::function<void(double, const Matrix&)> on_snapshot;
};

struct Trajectory {
    std::vector<MonitorSample> monitors;
    std::vector<StateSample> states;
    double dt_us = 0.0;
    long steps = 0;
    double min_eig_worst = 0.0;
};

// Power-iteration estimate of the smallest eigenvalue of a Hermitian state
// with spectrum expected near [0, 1].  Converges from above; gross positivity
// loss is detected quickly, mild negativity may be underestimated.
inline double min_eig_estimate(const Matrix& rho, int iters = 40) {
    const int d = int(rho.rows());
    Vector v(d);
    for (int j = 0; j < d; ++j) v(j) = Complex(std::sin(0.7 * j + 0.3), std::cos(1.3 * j + 0.1));
    v.normalize();
    Vector w(d);
    for (int it = 0; it < iters; ++it) {
        w.noalias() = v - rho * v;  // (I - rho) v
        const double nrm = w.norm();
        if (nrm == 0.0) return 1.0;
        v = w / nrm;
    }
    const double rayleigh = (v.dot(v - rho * v)).real();
    return 1.0 - rayleigh;
}

namespace detail {

// One classical RK4 step of d(state)/dt = L(t, state) on split planes.  The
// scratch objects must be distinct from the state.  Linear combinations are
// flat loops over both planes so they vectorize as plain double arrays.
template <typename Rhs>
void rk4_step(const Rhs& rhs, double t, double dt, StatePlanes& y, StatePlanes& ks,
              StatePlanes& acc, StatePlanes& stage) {
    const std::ptrdiff_t m = y.re.size();
    double* yv[2] = {y.re.data(), y.im.data()};
    double* kv[2] = {ks.re.data(), ks.im.data()};
    double* av[2] = {acc.re.data(), acc.im.data()};
    double* sv[2] = {stage.re.data(), stage.im.data()};

    rhs(t, y, ks);
    for (int p = 0; p < 2; ++p)
        for (std::ptrdiff_t i = 0; i < m; ++i) {
            av[p][i] = yv[p][i] + (dt / 6.0) * kv[p][i];
            sv[p][i] = yv[p][i] + (0.5 * dt) * kv[p][i];
        }
    rhs(t + 0.5 * dt, stage, ks);
    for (int p = 0; p < 2; ++p)
        for (std::ptrdiff_t i = 0; i < m; ++i) {
            av[p][i] += (dt / 3.0) * kv[p][i];
            sv[p][i] = yv[p][i] + (0.5 * dt) * kv[p][i];
        }
    rhs(t + 0.5 * dt, stage, ks);
    for (int p = 0; p < 2; ++p)
        for (std::ptrdiff_t i = 0; i < m; ++i) {
            av[p][i] += (dt / 3.0) * kv[p][i];
            sv[p][i] = yv[p][i] + dt * kv[p][i];
        }
    rhs(t + dt, stage, ks);
    for (int p = 0; p < 2; ++p)
        for (std::ptrdiff_t i = 0; i < m; ++i) yv[p][i] = av[p][i] + (dt / 6.0) * kv[p][i];
}

}  // namespace detail

inline Trajectory evolve(const SystemParams& params, const PumpSchedule& schedule,
                         FockCutoff cutoff, const EvolveOptions& opts = {}) {
    params.validate();
    schedule.validate();
    const int d = cutoff.joint_dim();
    const double total = schedule.total_time_us();

    DissipationRates rates;
    if (!opts.unitary)
        rates = opts.rates_override ? *opts.rates_override : rates_from(params);
    const LindbladKernel kernel(cutoff, params, rates);

    const double sample = opts.sample_interval_us;
    if (sample <= 0.0) throw std::invalid_argument("sample_interval_us must be positive");
    double t_end = opts.t_end_us < 0.0 ? total : opts.t_end_us;
    if (t_end <= 0.0) throw std::invalid_argument("t_end_us must be positive");
    const long n_samples = std::lround(std::ceil(t_end / sample - 1e-9));
    t_end = double(n_samples) * sample;

    double dt_target;
    if (opts.dt_ns > 0.0) {
        dt_target = opts.dt_ns * 1e-3;
    } else {
        dt_target = std::min(0.2e-3, LindbladKernel::stable_step_us(params, cutoff));
    }
    const long n_sub = std::max<long>(1, std::lround(std::ceil(sample / dt_target - 1e-9)));
    const double dt = sample / double(n_sub);

    StatePlanes y;
    if (opts.initial) {
        if (opts.initial->rows() != d || opts.initial->cols() != d)
            throw DimensionMismatch("evolve: initial state has wrong dimension");
        // The kernel computes half of each output and mirrors, which is exact
        // only for Hermitian input; scrub any asymmetry in caller-supplied states.
        y.re = 0.5 * (opts.initial->real() + opts.initial->real().transpose());
        y.im = 0.5 * (opts.initial->imag() - opts.initial->imag().transpose());
    } else {
        y.resize(d);
        y.re.setZero();
        y.im.setZero();
        y.re(0, 0) = 1.0;
    }
    StatePlanes ks, acc, stage;
    ks.resize(d);
    acc.resize(d);
    stage.resize(d);

    Trajectory traj;
    traj.dt_us = dt;
    traj.monitors.reserve(std::size_t(n_samples) + 1);
    traj.min_eig_worst = 1.0;

    auto rhs = [&](double t, const StatePlanes& in, StatePlanes& out) {
        const double env = schedule.envelope(std::min(t, total));
        kernel.apply_planes(kernel.pump_base_ang(0) * env, kernel.pump_base_ang(1) * env, in, out);
    };

    const int n = cutoff.dim;
    auto record = [&](double t, const StatePlanes& p) {
        MonitorSample ms;
        ms.t_us = t;
        double tr = 0.0;
        for (int j = 0; j < d; ++j) {
            const double diag = p.re(j, j);
            tr += diag;
            ms.n_l += (j / n) * diag;
            ms.n_r += (j % n) * diag;
            ms.herm_dev = std::max(ms.herm_dev, 2.0 * std::abs(p.im(j, j)));
        }
        ms.trace_dev = std::abs(tr - 1.0);
        const double sup = std::max(p.re.cwiseAbs().maxCoeff(), p.im.cwiseAbs().maxCoeff());

        Matrix merged;
        const bool need_merge = opts.track_min_eig || opts.on_snapshot || opts.store_states;
        if (opts.track_min_eig) {
            merged = p.merge();
            ms.min_eig = min_eig_estimate(merged, opts.min_eig_iters);
            traj.min_eig_worst = std::min(traj.min_eig_worst, ms.min_eig);
        }
        if (opts.check_invariants) {
            if (!(sup <= 2.0))
                throw InvariantViolation("state norm blew up (entry magnitude > 2)", t);
            if (ms.trace_dev > opts.trace_tol)
                throw InvariantViolation("trace deviates beyond tolerance", t);
            if (ms.herm_dev > opts.herm_tol)
                throw InvariantViolation("state lost Hermiticity beyond tolerance", t);
        }
        traj.monitors.push_back(ms);

        const double w0 = schedule.readout_start_us(), w1 = schedule.readout_end_us();
        bool snap = false;
        if (t >= w0 - 1e-9 && t <= w1 + 1e-9 && opts.state_interval_us > 0.0) {
            const double offs = (t - w0) / opts.state_interval_us;
            snap = std::abs(offs - std::round(offs)) < 1e-6;
        }
        const bool is_final = std::abs(t - t_end) < 1e-9;
        if ((snap || is_final) && need_merge) {
            if (merged.size() == 0) merged = p.merge();
            if (opts.on_snapshot) opts.on_snapshot(t, merged);
            if (opts.store_states) {
                if (traj.states.empty() || std::abs(traj.states.back().t_us - t) > 1e-9)
                    traj.states.push_back({t, merged});
            }
        }
    };

    record(0.0, y);
    for (long i = 0; i < n_samples; ++i) {
        const double t0 = double(i) * sample;
        for (long j = 0; j < n_sub; ++j) {
            detail::rk4_step(rhs, t0 + double(j) * dt, dt, y, ks, acc, stage);
            ++traj.steps;
        }
        record(double(i + 1) * sample, y);
    }
    return traj;
}

}  // namespace kpo
