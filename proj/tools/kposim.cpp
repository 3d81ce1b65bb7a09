// Command-line driver: each subcommand maps to exactly one library entry
// point.  Exit codes: 0 success, 1 usage/config/runtime error, 3 when the
// run completed but an emitted invariant check failed.

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "kpo/config.hpp"
#include "kpo/experiments.hpp"
#include "kpo/io.hpp"
#include "kpo/lindblad.hpp"
#include "kpo/observables.hpp"
#include "kpo/spectrum.hpp"

namespace {

struct CliArgs {
    std::string config_path;
    std::string out_dir = "out";
    std::string profile;   // empty = keep config/default
    int threads = 0;       // 0 = keep
    double dt_ns = -1.0;   // < 0 = keep
    int cutoff = 0;        // 0 = keep
};

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error(path + ": cannot open");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Config file first, then explicit flags on top.
kpo::RunConfig resolve(const CliArgs& a) {
    kpo::RunConfig c;
    if (!a.config_path.empty()) c = kpo::parse_config(read_file(a.config_path));
    if (!a.profile.empty()) {
        c.profile = kpo::profile_from_name(a.profile, 0);
        c.params = kpo::apply_profile(c.params, c.profile);
        if (a.cutoff == 0) c.cutoff_dim = kpo::default_cutoff(c.profile);
    }
    if (c.cutoff_dim == 0) c.cutoff_dim = kpo::default_cutoff(c.profile);
    if (a.threads > 0) c.threads = a.threads;
    if (a.dt_ns >= 0.0) c.dt_ns = a.dt_ns;
    if (a.cutoff > 0) c.cutoff_dim = a.cutoff;
    return c;
}

void report(const kpo::EmitSummary& s) {
    for (const std::string& f : s.files) std::printf("wrote %s\n", f.c_str());
    for (const std::string& w : s.failures) std::fprintf(stderr, "invariant: %s\n", w.c_str());
}

int finish(const kpo::EmitSummary& s) {
    report(s);
    return s.invariants_ok ? 0 : 3;
}

kpo::SweepSpec sweep_spec_for(const kpo::RunConfig& c, kpo::SweepAxis axis) {
    if (!c.sweep_points.empty() && c.axis != axis)
        throw std::invalid_argument(
            "config sweep axis does not match the subcommand; drop the points "
            "list or use the matching subcommand");
    kpo::SweepSpec spec = kpo::to_sweep_spec(c);
    spec.axis = axis;
    return spec;
}

int run_evolution(const kpo::RunConfig& c, const std::string& out_dir, bool with_q) {
    const kpo::FockCutoff cutoff{c.cutoff_dim};
    kpo::EvolveOptions opts;
    opts.dt_ns = c.dt_ns;
    const kpo::Trajectory traj = kpo::evolve(c.params, c.schedule, cutoff, opts);
    const kpo::CorrelationRecord rec = kpo::correlation_over_readout(traj, c.schedule, c.grid);
    if (with_q) {
        const kpo::QGrid q = kpo::husimi_q_real_slice(traj.states.back().rho, cutoff, c.grid);
        return finish(kpo::emit_evolution(traj, rec, c, out_dir, &q));
    }
    return finish(kpo::emit_evolution(traj, rec, c, out_dir));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Coupled Kerr parametric oscillator simulator"};
    app.require_subcommand(1);
    app.fallthrough();  // global flags may follow the subcommand name

    CliArgs args;
    app.add_option("--config", args.config_path, "Config file (text format or manifest.json)");
    app.add_option("--out", args.out_dir, "Output directory");
    app.add_option("--profile", args.profile, "Parameter profile: reduced or paper")
        ->check(CLI::IsMember({"reduced", "paper"}));
    app.add_option("--threads", args.threads, "Worker threads for sweep points");
    app.add_option("--dt-ns", args.dt_ns, "Integrator step in ns (0 = automatic)");
    app.add_option("--cutoff", args.cutoff, "Fock dimension per mode");

    auto* cmd_evolve = app.add_subcommand("evolve", "One full-schedule run; monitor traces");
    auto* cmd_theta = app.add_subcommand("sweep-theta", "Correlation vs pump phase");
    auto* cmd_gamma = app.add_subcommand("sweep-gamma", "Correlation vs pure dephasing");
    auto* cmd_kappa = app.add_subcommand("sweep-kappa", "Correlation vs scaled photon loss");
    auto* cmd_fast = app.add_subcommand("fast", "Phase sweep under the short schedule");
    auto* cmd_spectrum = app.add_subcommand("spectrum", "Eigenenergies along the pump ramp");
    auto* cmd_qfunc = app.add_subcommand("qfunc", "Full run plus final-state Q grid");
    auto* cmd_meta = app.add_subcommand("metapotential", "Classical landscape (normalized units)");

    CLI11_PARSE(app, argc, argv);

    try {
        const kpo::RunConfig c = resolve(args);

        if (cmd_evolve->parsed()) return run_evolution(c, args.out_dir, false);
        if (cmd_qfunc->parsed()) return run_evolution(c, args.out_dir, true);
        if (cmd_theta->parsed())
            return finish(kpo::emit_sweep(kpo::sweep_theta_p(sweep_spec_for(c, kpo::SweepAxis::ThetaP)),
                                          args.out_dir));
        if (cmd_gamma->parsed())
            return finish(kpo::emit_sweep(kpo::sweep_gamma(sweep_spec_for(c, kpo::SweepAxis::Gamma)),
                                          args.out_dir));
        if (cmd_kappa->parsed())
            return finish(kpo::emit_sweep(
                kpo::sweep_kappa_scale(sweep_spec_for(c, kpo::SweepAxis::KappaScale)),
                args.out_dir));
        if (cmd_fast->parsed()) {
            kpo::SweepSpec spec = sweep_spec_for(c, kpo::SweepAxis::ThetaP);
            spec.preset = kpo::Preset::Fast;
            return finish(kpo::emit_sweep(kpo::run_fast_schedule(std::move(spec)), args.out_dir));
        }
        if (cmd_spectrum->parsed()) {
            const kpo::SpectrumSweep sw = kpo::run_pump_sweep(
                c.params, kpo::FockCutoff{c.cutoff_dim}, c.spectrum_points, c.spectrum_levels);
            return finish(kpo::emit_spectrum(sw, c, args.out_dir));
        }
        if (cmd_meta->parsed()) return finish(kpo::emit_metapotential(c, args.out_dir));
        std::fprintf(stderr, "no subcommand\n");
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
