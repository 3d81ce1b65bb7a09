#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <random>

#include "kpo/lindblad.hpp"

using namespace kpo;

namespace {

Matrix random_hermitian(int d, unsigned seed) {
    std::mt19937 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    Matrix a(d, d);
    for (int k = 0; k < d; ++k)
        for (int j = 0; j < d; ++j) a(j, k) = Complex(g(rng), g(rng));
    Matrix h = 0.5 * (a + a.adjoint());
    h /= h.cwiseAbs().maxCoeff();
    return h;
}

SystemParams decoupled_params() {
    SystemParams p = paper_params();
    p.g_mhz = 0.0;
    p.alpha_target = {0.0, 0.0};  // no pump drive
    p.delta_mhz = {0.0, 0.0};
    return p;
}

}  // namespace

TEST_CASE("kernel matches the dense generator", "[lindblad]") {
    for (int dim : {5, 6}) {
        FockCutoff c(dim);
        ModelOps ops(c);
        SystemParams p = paper_params();
        p.theta_p_rad = 0.7;
        PumpSchedule sched = paper_schedule();
        const double t = 1.7;  // mid-ramp, both pumps on
        const double env = sched.envelope(t);
        const auto pmax = pump_amplitudes_mhz(p);
        Matrix h = hamiltonian_with_pumps(pmax[0] * env, pmax[1] * env, p, ops);
        Matrix rho = random_hermitian(c.joint_dim(), 991 + dim);

        SECTION("with loss and dephasing") {
            DissipationRates rates = rates_from(p);
            LindbladKernel kernel(c, p, rates);
            Matrix ref = lindblad_rhs(h, rates, ops, rho);
            Matrix got;
            kernel.apply(kernel.pump_base_ang(0) * env, kernel.pump_base_ang(1) * env, rho, got);
            const double scale = ref.cwiseAbs().maxCoeff();
            REQUIRE((got - ref).cwiseAbs().maxCoeff() < 1e-12 * scale);
        }
        SECTION("unitary part only") {
            DissipationRates none;
            LindbladKernel kernel(c, p, none);
            Matrix ref = lindblad_rhs(h, none, ops, rho);
            Matrix got;
            kernel.apply(kernel.pump_base_ang(0) * env, kernel.pump_base_ang(1) * env, rho, got);
            const double scale = ref.cwiseAbs().maxCoeff();
            REQUIRE((got - ref).cwiseAbs().maxCoeff() < 1e-12 * scale);
        }
        SECTION("dephasing without loss") {
            DissipationRates rates;
            rates.gamma_ang[0] = kTwoPi * 0.04;
            rates.gamma_ang[1] = kTwoPi * 0.02;
            LindbladKernel kernel(c, p, rates);
            Matrix ref = lindblad_rhs(h, rates, ops, rho);
            Matrix got;
            kernel.apply(kernel.pump_base_ang(0) * env, kernel.pump_base_ang(1) * env, rho, got);
            const double scale = ref.cwiseAbs().maxCoeff();
            REQUIRE((got - ref).cwiseAbs().maxCoeff() < 1e-12 * scale);
        }
    }
}

TEST_CASE("kernel at zero phase and zero pumps matches the dense generator", "[lindblad]") {
    FockCutoff c(6);
    ModelOps ops(c);
    SystemParams p = paper_params();
    p.delta_mhz = {-3.0, 2.0};
    Matrix h = hamiltonian_with_pumps(0.0, 0.0, p, ops);
    Matrix rho = random_hermitian(c.joint_dim(), 1237);
    DissipationRates rates = rates_from(p);
    LindbladKernel kernel(c, p, rates);
    Matrix ref = lindblad_rhs(h, rates, ops, rho);
    Matrix got;
    kernel.apply(0.0, 0.0, rho, got);
    REQUIRE((got - ref).cwiseAbs().maxCoeff() < 1e-12 * ref.cwiseAbs().maxCoeff());
}

TEST_CASE("two uncoupled lossy modes follow the closed-form decay", "[lindblad]") {
    FockCutoff c(4);
    SystemParams p = decoupled_params();
    p.kappa_e_mhz = {1.0, 0.5};
    p.kappa_i_meas_mhz = {0.0, 0.0};
    p.gamma_mhz = {0.0, 0.0};

    Vector one_plus_zero(4);
    one_plus_zero << 1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0), 0.0, 0.0;
    StateVector psi;
    psi.amps = product_state(one_plus_zero, one_plus_zero);

    EvolveOptions opts;
    opts.dt_ns = 1.0;
    opts.t_end_us = 1.0;
    opts.initial = DensityMatrix::from_pure(psi).rho;

    const double kl = kTwoPi * 1.0, kr = kTwoPi * 0.5;

    SECTION("rates derived from the system parameters") {
        Trajectory traj = evolve(p, paper_schedule(), c, opts);
        for (const auto& m : traj.monitors) {
            REQUIRE(std::abs(m.n_l - 0.5 * std::exp(-kl * m.t_us)) < 1e-9);
            REQUIRE(std::abs(m.n_r - 0.5 * std::exp(-kr * m.t_us)) < 1e-9);
        }
        const Matrix& fin = traj.states.back().rho;
        const double t = traj.states.back().t_us;
        const double pl1 = 0.5 * std::exp(-kl * t), pr1 = 0.5 * std::exp(-kr * t);
        REQUIRE(std::abs(fin(0, 0).real() - (1 - pl1) * (1 - pr1)) < 1e-9);
        REQUIRE(std::abs(fin(5, 5).real() - pl1 * pr1) < 1e-9);
        // |0,0><1,1| coherence: half the geometric mean decay, no phase at Delta=0
        REQUIRE(std::abs(fin(0, 5) - Complex(0.25 * std::exp(-0.5 * (kl + kr) * t), 0.0)) < 1e-9);
    }
    SECTION("explicitly overridden rates take precedence") {
        SystemParams lossless = p;
        lossless.kappa_e_mhz = {0.0, 0.0};
        DissipationRates rates;
        rates.kappa_ang = {kl, kr};
        opts.rates_override = rates;
        Trajectory traj = evolve(lossless, paper_schedule(), c, opts);
        const auto& m = traj.monitors.back();
        REQUIRE(std::abs(m.n_l - 0.5 * std::exp(-kl * m.t_us)) < 1e-9);
        REQUIRE(std::abs(m.n_r - 0.5 * std::exp(-kr * m.t_us)) < 1e-9);
    }
}

TEST_CASE("pure dephasing damps coherences at the quadratic-difference rate", "[lindblad]") {
    FockCutoff c(4);
    SystemParams p = decoupled_params();
    p.kappa_e_mhz = {0.0, 0.0};
    p.kappa_i_meas_mhz = {0.1, 0.1};
    p.gamma_mhz = {0.05, 0.05};  // kappa_a = 0.1 - 2*0.05 + 0 = 0: dephasing only
    REQUIRE(p.kappa_a_mhz(0) == 0.0);

    Vector zero_plus_two(4);
    zero_plus_two << 1.0 / std::sqrt(2.0), 0.0, 1.0 / std::sqrt(2.0), 0.0;
    Vector ground(4);
    ground << 1.0, 0.0, 0.0, 0.0;
    StateVector psi;
    psi.amps = product_state(zero_plus_two, ground);

    EvolveOptions opts;
    opts.dt_ns = 0.2;  // the coherence also carries a fast Kerr phase
    opts.t_end_us = 0.5;
    opts.initial = DensityMatrix::from_pure(psi).rho;

    Trajectory traj = evolve(p, paper_schedule(), c, opts);
    const double gamma_ang = kTwoPi * 0.05;
    const Matrix& fin = traj.states.back().rho;
    const double t = traj.states.back().t_us;
    // populations frozen, two-photon coherence decays at gamma * (0 - 2)^2
    REQUIRE(std::abs(fin(0, 0).real() - 0.5) < 1e-9);
    REQUIRE(std::abs(fin(8, 8).real() - 0.5) < 1e-9);
    REQUIRE(std::abs(std::abs(fin(0, 8)) - 0.5 * std::exp(-4.0 * gamma_ang * t)) < 1e-9);
    for (const auto& m : traj.monitors) REQUIRE(std::abs(m.n_l - 1.0) < 1e-9);
}

TEST_CASE("vacuum is stationary at zero pump", "[lindblad]") {
    FockCutoff c(8);
    SystemParams p = paper_params();
    LindbladKernel kernel(c, p, rates_from(p));
    Matrix vac = DensityMatrix::vacuum(c).rho;
    REQUIRE(generator_sup_norm(kernel, 0.0, 0.0, vac) < 1e-14);
}

TEST_CASE("unitary evolution preserves trace and purity", "[lindblad]") {
    SystemParams p = apply_profile(paper_params(), Profile::Reduced);
    FockCutoff c(default_cutoff(Profile::Reduced));
    EvolveOptions opts;
    opts.unitary = true;
    opts.t_end_us = 0.5;
    opts.store_states = true;
    Trajectory traj = evolve(p, paper_schedule(), c, opts);
    const Matrix& fin = traj.states.back().rho;
    REQUIRE(std::abs(fin.squaredNorm() - 1.0) < 1e-6);  // tr(rho^2) for Hermitian rho
    REQUIRE(traj.monitors.back().trace_dev < 1e-10);
    REQUIRE(traj.monitors.back().herm_dev < 1e-12);
}

TEST_CASE("full reduced run conserves trace and stays physical", "[lindblad][slow]") {
    SystemParams p = apply_profile(paper_params(), Profile::Reduced);
    FockCutoff c(default_cutoff(Profile::Reduced));
    EvolveOptions opts;  // defaults: full schedule, auto step, invariant checks on
    Trajectory traj = evolve(p, paper_schedule(), c, opts);

    REQUIRE(traj.monitors.size() == 233);  // 5.8 us at 0.025 us spacing, plus t = 0
    REQUIRE(traj.monitors.back().trace_dev < 1e-9);
    REQUIRE(traj.monitors.back().herm_dev < 1e-11);
    REQUIRE(traj.min_eig_worst > -1e-6);

    // pumped well above vacuum by the end of the ramp
    double n_l_end = 0.0;
    for (const auto& m : traj.monitors)
        if (std::abs(m.t_us - 3.0) < 1e-9) n_l_end = m.n_l;
    REQUIRE(n_l_end > 0.5);

    // snapshots: readout window [3.5, 4.5] every 0.05 us, then the final state
    REQUIRE(traj.states.size() == 22);
    REQUIRE(traj.states.front().t_us == Catch::Approx(3.5));
    REQUIRE(traj.states[20].t_us == Catch::Approx(4.5));
    REQUIRE(traj.states.back().t_us == Catch::Approx(5.8));
}

TEST_CASE("oversized explicit steps trip the invariant monitor", "[lindblad]") {
    SystemParams p = apply_profile(paper_params(), Profile::Reduced);
    FockCutoff c(default_cutoff(Profile::Reduced));
    EvolveOptions opts;
    opts.dt_ns = 5000.0;  // far beyond the stability limit
    opts.t_end_us = 0.5;
    REQUIRE_THROWS_AS(evolve(p, paper_schedule(), c, opts), InvariantViolation);
}

TEST_CASE("evolution is bitwise deterministic", "[lindblad]") {
    SystemParams p = apply_profile(paper_params(), Profile::Reduced);
    FockCutoff c(default_cutoff(Profile::Reduced));
    EvolveOptions opts;
    opts.t_end_us = 0.1;
    Trajectory a = evolve(p, paper_schedule(), c, opts);
    Trajectory b = evolve(p, paper_schedule(), c, opts);
    REQUIRE(a.steps == b.steps);
    REQUIRE(a.dt_us == b.dt_us);
    for (std::size_t i = 0; i < a.monitors.size(); ++i) {
        REQUIRE(a.monitors[i].n_l == b.monitors[i].n_l);
        REQUIRE(a.monitors[i].n_r == b.monitors[i].n_r);
        REQUIRE(a.monitors[i].trace_dev == b.monitors[i].trace_dev);
        REQUIRE(a.monitors[i].min_eig == b.monitors[i].min_eig);
    }
    REQUIRE(a.states.size() == b.states.size());
    const Matrix &fa = a.states.back().rho, &fb = b.states.back().rho;
    REQUIRE((fa.array() == fb.array()).all());
}

TEST_CASE("step size divides the sample interval", "[lindblad]") {
    FockCutoff c(4);
    SystemParams p = decoupled_params();
    EvolveOptions opts;
    opts.t_end_us = 0.05;
    opts.track_min_eig = false;

    SECTION("explicit request is honored exactly") {
        opts.dt_ns = 0.2;
        Trajectory traj = evolve(p, paper_schedule(), c, opts);
        REQUIRE(traj.dt_us == 0.025 / 125.0);
        REQUIRE(traj.steps == 250);
    }
    SECTION("automatic choice defaults to 0.2 ns when that is stable") {
        Trajectory traj = evolve(p, paper_schedule(), c, opts);
        REQUIRE(traj.dt_us == 0.025 / 125.0);
    }
    SECTION("automatic choice respects the stability bound") {
        SystemParams paper = paper_params();
        FockCutoff big(default_cutoff(Profile::Paper));
        const double bound = LindbladKernel::stable_step_us(paper, big);
        REQUIRE(bound < 0.2e-3);  // the default step would be unstable here
        opts.dt_ns = 0.0;
        // dt resolution alone is cheap to check through a tiny horizon run at
        // the reduced cutoff, where the bound is looser than the default
        SystemParams red = apply_profile(paper, Profile::Reduced);
        FockCutoff small(default_cutoff(Profile::Reduced));
        const double red_bound = LindbladKernel::stable_step_us(red, small);
        opts.t_end_us = 0.025;
        Trajectory traj = evolve(red, paper_schedule(), small, opts);
        REQUIRE(traj.dt_us <= red_bound * (1.0 + 1e-12));
        const double n_sub = 0.025 / traj.dt_us;
        REQUIRE(std::abs(n_sub - std::round(n_sub)) < 1e-9);
    }
}

TEST_CASE("negativity estimator flags unphysical states", "[lindblad]") {
    const int d = 16;
    Matrix rho = Matrix::Zero(d, d);
    rho(0, 0) = 0.7;
    rho(1, 1) = 0.35;
    rho(2, 2) = -0.05;
    REQUIRE(min_eig_estimate(rho, 60) < -0.04);

    Matrix psd = Matrix::Zero(d, d);
    psd(0, 0) = 0.5;
    psd(1, 1) = 0.5;
    REQUIRE(min_eig_estimate(psd, 60) > -1e-12);
}
