#pragma once

// Artifact emission: CSVs with pinned headers, a JSON manifest carrying the
// full resolved configuration plus per-point outcomes, and the canonical
// config rendering.  A directory written by emit_sweep is sufficient to
// re-run the sweep bit-identically (parse the manifest, run, re-emit).

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "kpo/config.hpp"
#include "kpo/experiments.hpp"
#include "kpo/observables.hpp"
#include "kpo/spectrum.hpp"

namespace kpo {

// ---- formatting ------------------------------------------------------------------

namespace detail {

// CSV cell format: 12 significant digits, dot-decimal, no locale dependence.
inline std::string csv_num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

}  // namespace detail

// ---- invariant summaries ------------------------------------------------------------

struct EmitSummary {
    bool invariants_ok = true;
    std::vector<std::string> failures;   // human-readable invariant violations
    std::vector<std::string> files;      // paths written

    void fail(const std::string& why) {
        invariants_ok = false;
        failures.push_back(why);
    }
};

inline void check_sweep_invariants(const SweepResult& r, EmitSummary& s) {
    for (std::size_t i = 0; i < r.points.size(); ++i) {
        const SweepPoint& p = r.points[i];
        const std::string tag = "point " + std::to_string(i);
        if (!p.ok) {
            s.fail(tag + " failed: " + p.error);
            continue;
        }
        if (!(p.correlation >= 0.0 && p.correlation <= 1.0))
            s.fail(tag + ": correlation outside [0,1]");
        if (!(p.n_l >= 0.0 && p.n_r >= 0.0)) s.fail(tag + ": negative photon number");
    }
}

inline void check_spectrum_invariants(const SpectrumSweep& sw, EmitSummary& s) {
    for (std::size_t i = 1; i < sw.pump_points.size(); ++i)
        if (!(sw.pump_points[i] > sw.pump_points[i - 1])) {
            s.fail("pump points not strictly ascending");
            break;
        }
    for (double g : sw.gaps_mhz)
        if (!(g >= 0.0)) {
            s.fail("negative tracked gap");
            break;
        }
    for (double o : sw.overlaps)
        if (!(o >= 0.0 && o <= 1.0 + 1e-12)) {
            s.fail("branch overlap outside [0,1]");
            break;
        }
}

// ---- CSV renderers --------------------------------------------------------------------

// Failed points carry no row; the manifest records their status and error.
inline std::string sweep_csv(const SweepResult& r) {
    std::string out;
    switch (r.spec.axis) {
        case SweepAxis::ThetaP: out = "theta_p_rad,correlation,n_L,n_R\n"; break;
        case SweepAxis::Gamma: out = "gamma_khz,correlation,n_L,n_R\n"; break;
        case SweepAxis::KappaScale: out = "kappa_scale,gamma_khz,correlation,n_L,n_R\n"; break;
        default:
            throw std::invalid_argument("sweep_csv: no CSV format for this axis");
    }
    for (const SweepPoint& p : r.points) {
        if (!p.ok) continue;
        out += detail::csv_num(p.axis);
        if (r.spec.axis == SweepAxis::KappaScale) out += "," + detail::csv_num(p.gamma_khz);
        out += "," + detail::csv_num(p.correlation);
        out += "," + detail::csv_num(p.n_l);
        out += "," + detail::csv_num(p.n_r);
        out += "\n";
    }
    return out;
}

inline const char* sweep_csv_name(SweepAxis axis) {
    switch (axis) {
        case SweepAxis::ThetaP: return "theta_sweep.csv";
        case SweepAxis::Gamma: return "gamma_sweep.csv";
        case SweepAxis::KappaScale: return "kappa_sweep.csv";
        default: return "sweep.csv";
    }
}

// One row per (pump point, level); the tracked row repeats the point's gap.
inline std::string spectrum_csv(const SpectrumSweep& sw) {
    std::string out = "p_L_MHz,level,energy_MHz,is_tracked,gap_MHz\n";
    for (std::size_t i = 0; i < sw.pump_points.size(); ++i) {
        for (int lvl = 0; lvl < sw.levels[i].size(); ++lvl) {
            out += detail::csv_num(sw.pump_points[i]);
            out += "," + std::to_string(lvl);
            out += "," + detail::csv_num(sw.levels[i](lvl));
            out += ",";
            out += (lvl == sw.branch_id[i]) ? '1' : '0';
            out += "," + detail::csv_num(sw.gaps_mhz[i]);
            out += "\n";
        }
    }
    return out;
}

inline std::string qgrid_csv(const QGrid& q) {
    std::string out = "alpha_L,alpha_R,q\n";
    const int g = q.spec.points();
    for (int i = 0; i < g; ++i)
        for (int j = 0; j < g; ++j)
            out += detail::csv_num(q.spec.value(i)) + "," + detail::csv_num(q.spec.value(j)) +
                   "," + detail::csv_num(q.values(i, j)) + "\n";
    return out;
}

inline std::string monitors_csv(const Trajectory& traj) {
    std::string out = "t_us,n_L,n_R,trace_dev,herm_dev\n";
    for (const MonitorSample& m : traj.monitors)
        out += detail::csv_num(m.t_us) + "," + detail::csv_num(m.n_l) + "," +
               detail::csv_num(m.n_r) + "," + detail::csv_num(m.trace_dev) + "," +
               detail::csv_num(m.herm_dev) + "\n";
    return out;
}

inline std::string correlation_csv(const CorrelationRecord& rec) {
    std::string out = "t_us,xi_same,xi_opposite,p_same\n";
    for (std::size_t i = 0; i < rec.times_us.size(); ++i)
        out += detail::csv_num(rec.times_us[i]) + "," + detail::csv_num(rec.xi_same[i]) + "," +
               detail::csv_num(rec.xi_opposite[i]) + "," + detail::csv_num(rec.p_same[i]) + "\n";
    return out;
}

// ---- manifest -----------------------------------------------------------------------

inline RunConfig run_config_from(const SweepResult& r) {
    RunConfig c;
    c.preset = r.spec.preset;
    c.profile = r.spec.profile;
    c.params = r.base_params;
    c.schedule = r.schedule;
    c.cutoff_dim = r.cutoff_dim;
    c.grid = r.spec.grid;
    c.dt_ns = r.spec.dt_ns;
    c.threads = r.spec.threads;
    c.axis = r.spec.axis;
    c.sweep_points = r.spec.points;
    c.sweep_theta_p_rad = r.spec.theta_p_rad;
    c.sweep_gamma_khz = r.spec.gamma_khz;
    c.gamma_families_khz = r.spec.gamma_families_khz;
    return c;
}

namespace detail {

inline nlohmann::json config_json(const RunConfig& c) {
    nlohmann::json j;
    j["preset"] = preset_name(c.preset);
    j["profile"] = profile_name(c.profile);
    j["axis"] = axis_name(c.axis);
    j["cutoff_dim"] = c.cutoff_dim;
    j["dt_ns"] = c.dt_ns;
    j["threads"] = c.threads;
    j["grid"] = {{"alpha_min", c.grid.alpha_min},
                 {"alpha_max", c.grid.alpha_max},
                 {"step", c.grid.step}};
    nlohmann::json sys;
    for (int m = 0; m < 2; ++m) {
        const std::string s = m == 0 ? "_l" : "_r";
        sys["delta" + s + "_mhz_over_2pi"] = c.params.delta_mhz[m];
        sys["kerr" + s + "_mhz_over_2pi"] = c.params.kerr_mhz[m];
        sys["kappa_e" + s + "_mhz_over_2pi"] = c.params.kappa_e_mhz[m];
        sys["kappa_i_meas" + s + "_mhz_over_2pi"] = c.params.kappa_i_meas_mhz[m];
        sys["gamma" + s + "_mhz_over_2pi"] = c.params.gamma_mhz[m];
        sys["alpha_target" + s] = c.params.alpha_target[m];
    }
    sys["g_mhz_over_2pi"] = c.params.g_mhz;
    sys["theta_p_rad"] = c.params.theta_p_rad;
    j["system"] = sys;
    j["schedule"] = {{"ramp_up_us", c.schedule.ramp_up_us},
                     {"plateau_us", c.schedule.plateau_us},
                     {"readout_delay_us", c.schedule.readout_delay_us},
                     {"readout_window_us", c.schedule.readout_window_us}};
    nlohmann::json sweep;
    sweep["points"] = c.sweep_points;
    sweep["theta_p_rad"] =
        c.sweep_theta_p_rad ? nlohmann::json(*c.sweep_theta_p_rad) : nlohmann::json(nullptr);
    sweep["gamma_khz"] =
        c.sweep_gamma_khz ? nlohmann::json(*c.sweep_gamma_khz) : nlohmann::json(nullptr);
    sweep["gamma_families_khz"] = c.gamma_families_khz;
    j["sweep"] = sweep;
    j["spectrum"] = {{"points", c.spectrum_points}, {"levels", c.spectrum_levels}};
    return j;
}

inline nlohmann::json invariants_json(const EmitSummary& s) {
    return {{"ok", s.invariants_ok}, {"failures", s.failures}};
}

}  // namespace detail

inline std::string sweep_manifest(const SweepResult& r, const EmitSummary& summary) {
    nlohmann::json j = detail::config_json(run_config_from(r));
    j["version"] = r.version;
    j["kind"] = "sweep";
    j["sample_interval_us"] = r.sample_interval_us;
    j["state_interval_us"] = r.state_interval_us;
    nlohmann::json rows = nlohmann::json::array();
    for (const SweepPoint& p : r.points) {
        rows.push_back({{"axis", p.axis},
                        {"gamma_khz", p.gamma_khz},
                        {"ok", p.ok},
                        {"error", p.error},
                        {"correlation", p.correlation},
                        {"n_L", p.n_l},
                        {"n_R", p.n_r},
                        {"dt_us", p.dt_us},
                        {"runtime_s", p.runtime_s}});
    }
    j["results"] = rows;
    j["invariants"] = detail::invariants_json(summary);
    return j.dump(2) + "\n";
}

inline std::string spectrum_manifest(const SpectrumSweep& sw, const RunConfig& c,
                                     const EmitSummary& summary) {
    nlohmann::json j = detail::config_json(c);
    j["version"] = kVersionString;
    j["kind"] = "spectrum";
    j["pump_ratio"] = sw.pump_ratio;
    j["points_solved"] = sw.pump_points.size();
    j["invariants"] = detail::invariants_json(summary);
    return j.dump(2) + "\n";
}

// ---- file output -------------------------------------------------------------------

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error(path + ": " + std::strerror(errno));
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw std::runtime_error(path + ": " + std::strerror(errno));
}

inline void ensure_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw std::runtime_error(dir + ": " + ec.message());
}

// Write manifest + resolved config + the sweep CSV; returns the invariant
// summary (the caller turns a failure into a nonzero exit code).
inline EmitSummary emit_sweep(const SweepResult& r, const std::string& dir) {
    EmitSummary summary;
    check_sweep_invariants(r, summary);
    ensure_dir(dir);
    const std::string csv_path = dir + "/" + sweep_csv_name(r.spec.axis);
    write_text_file(csv_path, sweep_csv(r));
    summary.files.push_back(csv_path);
    const std::string cfg_path = dir + "/config.resolved.ini";
    write_text_file(cfg_path, render_config(run_config_from(r)));
    summary.files.push_back(cfg_path);
    const std::string man_path = dir + "/manifest.json";
    write_text_file(man_path, sweep_manifest(r, summary));
    summary.files.push_back(man_path);
    return summary;
}

inline EmitSummary emit_spectrum(const SpectrumSweep& sw, const RunConfig& c,
                                 const std::string& dir) {
    EmitSummary summary;
    check_spectrum_invariants(sw, summary);
    ensure_dir(dir);
    const std::string csv_path = dir + "/spectrum.csv";
    write_text_file(csv_path, spectrum_csv(sw));
    summary.files.push_back(csv_path);
    const std::string cfg_path = dir + "/config.resolved.ini";
    write_text_file(cfg_path, render_config(c));
    summary.files.push_back(cfg_path);
    const std::string man_path = dir + "/manifest.json";
    write_text_file(man_path, spectrum_manifest(sw, c, summary));
    summary.files.push_back(man_path);
    return summary;
}

// Single-run artifacts: monitor trace, readout correlation trace, and (for
// qfunc runs) the final-state Q grid.
inline EmitSummary emit_evolution(const Trajectory& traj, const CorrelationRecord& rec,
                                  const RunConfig& c, const std::string& dir,
                                  const QGrid* final_q = nullptr) {
    EmitSummary summary;
    if (!(rec.readout_average >= 0.0 && rec.readout_average <= 1.0))
        summary.fail("readout average outside [0,1]");
    double trace_worst = 0.0, herm_worst = 0.0;
    for (const MonitorSample& m : traj.monitors) {
        trace_worst = std::max(trace_worst, m.trace_dev);
        herm_worst = std::max(herm_worst, m.herm_dev);
        if (!(m.n_l >= 0.0 && m.n_r >= 0.0)) summary.fail("negative photon number");
    }
    if (final_q && final_q->values.minCoeff() < -1e-8)
        summary.fail("final-state Q has a significantly negative value");

    ensure_dir(dir);
    const std::string mon_path = dir + "/monitors.csv";
    write_text_file(mon_path, monitors_csv(traj));
    summary.files.push_back(mon_path);
    const std::string cor_path = dir + "/correlation.csv";
    write_text_file(cor_path, correlation_csv(rec));
    summary.files.push_back(cor_path);
    if (final_q) {
        const std::string q_path = dir + "/qgrid.csv";
        write_text_file(q_path, qgrid_csv(*final_q));
        summary.files.push_back(q_path);
    }
    const std::string cfg_path = dir + "/config.resolved.ini";
    write_text_file(cfg_path, render_config(c));
    summary.files.push_back(cfg_path);

    nlohmann::json j = detail::config_json(c);
    j["version"] = kVersionString;
    j["kind"] = final_q ? "qfunc" : "evolve";
    j["dt_us"] = traj.dt_us;
    j["steps"] = traj.steps;
    j["min_eig_worst"] = traj.min_eig_worst;
    j["trace_dev_worst"] = trace_worst;
    j["herm_dev_worst"] = herm_worst;
    j["readout_average"] = rec.readout_average;
    j["invariants"] = detail::invariants_json(summary);
    const std::string man_path = dir + "/manifest.json";
    write_text_file(man_path, j.dump(2) + "\n");
    summary.files.push_back(man_path);
    return summary;
}

// Classical landscape of the left oscillator, in units of |K| with the
// documented normalization p = 4|K| and g*alpha_R = |K|; one column per
// right-oscillator sign.
inline EmitSummary emit_metapotential(const RunConfig& c, const std::string& dir) {
    EmitSummary summary;
    std::string csv = "re_x,im_x,v_plus,v_minus\n";
    const int g = c.grid.points();
    for (int i = 0; i < g; ++i) {
        for (int jx = 0; jx < g; ++jx) {
            const Complex x(c.grid.value(i), c.grid.value(jx));
            const double vp = metapotential_mhz(x, -1.0, 4.0, 1.0, c.params.theta_p_rad, 1.0);
            const double vm = metapotential_mhz(x, -1.0, 4.0, 1.0, c.params.theta_p_rad, -1.0);
            if (!std::isfinite(vp) || !std::isfinite(vm)) summary.fail("non-finite landscape value");
            csv += detail::csv_num(x.real()) + "," + detail::csv_num(x.imag()) + "," +
                   detail::csv_num(vp) + "," + detail::csv_num(vm) + "\n";
        }
    }
    ensure_dir(dir);
    const std::string csv_path = dir + "/metapotential.csv";
    write_text_file(csv_path, csv);
    summary.files.push_back(csv_path);
    const std::string cfg_path = dir + "/config.resolved.ini";
    write_text_file(cfg_path, render_config(c));
    summary.files.push_back(cfg_path);
    nlohmann::json j = detail::config_json(c);
    j["version"] = kVersionString;
    j["kind"] = "metapotential";
    j["invariants"] = detail::invariants_json(summary);
    const std::string man_path = dir + "/manifest.json";
    write_text_file(man_path, j.dump(2) + "\n");
    summary.files.push_back(man_path);
    return summary;
}

}  // namespace kpo
