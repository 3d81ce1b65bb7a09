#pragma once

// Run configuration: a section/key text format (and the JSON manifest emitted
// alongside results) resolving to a closed parameter set before any compute
// starts.  Frequencies carry the _mhz_over_2pi suffix to pin the convention:
// config values are ordinary frequencies, never angular ones.

#include <cctype>
#include <cstdio>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "kpo/errors.hpp"
#include "kpo/experiments.hpp"
#include "kpo/model.hpp"
#include "kpo/observables.hpp"

namespace kpo {

// ---- resolved configuration ---------------------------------------------------

struct RunConfig {
    Preset preset = Preset::Paper;
    Profile profile = Profile::Paper;
    SystemParams params;           // fully resolved
    PumpSchedule schedule;         // fully resolved
    bool params_explicit = false;    // config pinned parameter values itself
    bool schedule_explicit = false;  // config pinned schedule values itself
    int cutoff_dim = 0;            // resolved, >= 2
    QGridSpec grid{};
    double dt_ns = 0.0;            // 0 = automatic
    int threads = 1;

    // Sweep section (points empty = axis default at run time).
    SweepAxis axis = SweepAxis::ThetaP;
    std::vector<double> sweep_points;
    std::optional<double> sweep_theta_p_rad;
    std::optional<double> sweep_gamma_khz;
    std::vector<double> gamma_families_khz;

    // Spectrum section.
    int spectrum_points = 81;
    int spectrum_levels = 8;
};

inline bool operator==(const QGridSpec& a, const QGridSpec& b) {
    return a.alpha_min == b.alpha_min && a.alpha_max == b.alpha_max && a.step == b.step;
}

inline bool operator==(const SystemParams& a, const SystemParams& b) {
    return a.delta_mhz == b.delta_mhz && a.kerr_mhz == b.kerr_mhz && a.g_mhz == b.g_mhz &&
           a.kappa_e_mhz == b.kappa_e_mhz && a.kappa_i_meas_mhz == b.kappa_i_meas_mhz &&
           a.gamma_mhz == b.gamma_mhz && a.theta_p_rad == b.theta_p_rad &&
           a.alpha_target == b.alpha_target;
}

inline bool operator==(const PumpSchedule& a, const PumpSchedule& b) {
    return a.ramp_up_us == b.ramp_up_us && a.plateau_us == b.plateau_us &&
           a.readout_delay_us == b.readout_delay_us && a.readout_window_us == b.readout_window_us;
}

inline bool operator==(const RunConfig& a, const RunConfig& b) {
    return a.preset == b.preset && a.profile == b.profile && a.params == b.params &&
           a.schedule == b.schedule && a.cutoff_dim == b.cutoff_dim && a.grid == b.grid &&
           a.dt_ns == b.dt_ns && a.threads == b.threads && a.axis == b.axis &&
           a.sweep_points == b.sweep_points && a.sweep_theta_p_rad == b.sweep_theta_p_rad &&
           a.sweep_gamma_khz == b.sweep_gamma_khz &&
           a.gamma_families_khz == b.gamma_families_khz &&
           a.spectrum_points == b.spectrum_points && a.spectrum_levels == b.spectrum_levels;
}

// The sweep spec implied by a resolved configuration.  Parameters and schedule
// are pinned explicitly only when the config pinned them itself; otherwise the
// sweep resolves from its preset, which lets preset-swapping commands (the
// short-schedule sweep) pick their own base set.
inline SweepSpec to_sweep_spec(const RunConfig& c) {
    SweepSpec s;
    s.preset = c.preset;
    s.profile = c.profile;
    s.axis = c.axis;
    s.points = c.sweep_points;
    if (c.params_explicit) s.params = c.params;
    if (c.schedule_explicit) s.schedule = c.schedule;
    s.theta_p_rad = c.sweep_theta_p_rad;
    s.gamma_khz = c.sweep_gamma_khz;
    s.gamma_families_khz = c.gamma_families_khz;
    s.dt_ns = c.dt_ns;
    s.cutoff_dim = c.cutoff_dim;
    s.grid = c.grid;
    s.threads = c.threads;
    return s;
}

// ---- enum names -----------------------------------------------------------------

inline const char* preset_name(Preset p) { return p == Preset::Fast ? "fast" : "paper"; }
inline const char* profile_name(Profile p) { return p == Profile::Reduced ? "reduced" : "paper"; }

inline const char* axis_name(SweepAxis a) {
    switch (a) {
        case SweepAxis::ThetaP: return "theta_p";
        case SweepAxis::Gamma: return "gamma";
        case SweepAxis::KappaScale: return "kappa_scale";
        case SweepAxis::PumpSpectrum: return "pump_spectrum";
    }
    return "theta_p";
}

inline Preset preset_from_name(const std::string& s, int line) {
    if (s == "paper") return Preset::Paper;
    if (s == "fast") return Preset::Fast;
    throw ConfigError("unknown preset '" + s + "' (expected paper or fast)", line);
}

inline Profile profile_from_name(const std::string& s, int line) {
    if (s == "paper") return Profile::Paper;
    if (s == "reduced") return Profile::Reduced;
    throw ConfigError("unknown profile '" + s + "' (expected paper or reduced)", line);
}

inline SweepAxis axis_from_name(const std::string& s, int line) {
    if (s == "theta_p") return SweepAxis::ThetaP;
    if (s == "gamma") return SweepAxis::Gamma;
    if (s == "kappa_scale") return SweepAxis::KappaScale;
    if (s == "pump_spectrum") return SweepAxis::PumpSpectrum;
    throw ConfigError("unknown sweep axis '" + s + "'", line);
}

// ---- text-format parsing ----------------------------------------------------------

namespace detail {

struct ConfigEntry {
    std::string value;
    int line = 0;
    bool used = false;
};

// section -> key -> (value, line).  Duplicate keys are rejected.
using ConfigTable = std::map<std::string, std::map<std::string, ConfigEntry>>;

inline std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

inline ConfigTable tokenize_config(const std::string& text) {
    ConfigTable table;
    std::istringstream in(text);
    std::string raw, section;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        const std::size_t hash = raw.find_first_of("#;");
        std::string s = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (s.empty()) continue;
        if (s.front() == '[') {
            if (s.back() != ']' || s.size() < 3)
                throw ConfigError("malformed section header '" + s + "'", line);
            section = trim(s.substr(1, s.size() - 2));
            continue;
        }
        const std::size_t eq = s.find('=');
        if (eq == std::string::npos)
            throw ConfigError("expected key = value, got '" + s + "'", line);
        if (section.empty()) throw ConfigError("key before any [section] header", line);
        const std::string key = trim(s.substr(0, eq));
        const std::string value = trim(s.substr(eq + 1));
        if (key.empty()) throw ConfigError("empty key", line);
        auto [it, fresh] = table[section].emplace(key, ConfigEntry{value, line, false});
        if (!fresh)
            throw ConfigError("duplicate key '" + key + "' (first on line " +
                                  std::to_string(it->second.line) + ")",
                              line);
    }
    return table;
}

inline double parse_double(const std::string& value, int line) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(value, &pos);
    } catch (const std::exception&) {
        throw ConfigError("expected a number, got '" + value + "'", line);
    }
    if (pos != value.size()) throw ConfigError("trailing junk after number '" + value + "'", line);
    return v;
}

inline int parse_int(const std::string& value, int line) {
    std::size_t pos = 0;
    int v = 0;
    try {
        v = std::stoi(value, &pos);
    } catch (const std::exception&) {
        throw ConfigError("expected an integer, got '" + value + "'", line);
    }
    if (pos != value.size()) throw ConfigError("trailing junk after number '" + value + "'", line);
    return v;
}

inline std::vector<double> parse_double_list(const std::string& value, int line) {
    std::vector<double> out;
    std::string item;
    std::istringstream in(value);
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (item.empty()) throw ConfigError("empty entry in number list", line);
        out.push_back(parse_double(item, line));
    }
    if (out.empty()) throw ConfigError("empty number list", line);
    return out;
}

// Typed accessors marking entries as consumed; unknown leftovers are rejected.
struct ConfigReader {
    ConfigTable table;

    ConfigEntry* find(const std::string& section, const std::string& key) {
        auto s = table.find(section);
        if (s == table.end()) return nullptr;
        auto k = s->second.find(key);
        if (k == s->second.end()) return nullptr;
        k->second.used = true;
        return &k->second;
    }

    bool get(const std::string& sec, const std::string& key, double& out, int& line) {
        ConfigEntry* e = find(sec, key);
        if (!e) return false;
        out = parse_double(e->value, e->line);
        line = e->line;
        return true;
    }
    bool get(const std::string& sec, const std::string& key, int& out, int& line) {
        ConfigEntry* e = find(sec, key);
        if (!e) return false;
        out = parse_int(e->value, e->line);
        line = e->line;
        return true;
    }
    bool get(const std::string& sec, const std::string& key, std::string& out, int& line) {
        ConfigEntry* e = find(sec, key);
        if (!e) return false;
        out = e->value;
        line = e->line;
        return true;
    }
    bool get(const std::string& sec, const std::string& key, std::vector<double>& out, int& line) {
        ConfigEntry* e = find(sec, key);
        if (!e) return false;
        out = parse_double_list(e->value, e->line);
        line = e->line;
        return true;
    }

    void reject_unused() const {
        for (const auto& [section, keys] : table)
            for (const auto& [key, entry] : keys)
                if (!entry.used)
                    throw ConfigError("unknown key '" + key + "' in section [" + section + "]",
                                      entry.line);
    }
};

// Dig a double out of a JSON manifest, throwing a ConfigError on absence.
inline double jget(const nlohmann::json& j, const char* key) {
    if (!j.contains(key)) throw ConfigError(std::string("manifest missing field '") + key + "'");
    return j.at(key).get<double>();
}

}  // namespace detail

// ---- parsing --------------------------------------------------------------------

inline RunConfig parse_config_text(const std::string& text) {
    detail::ConfigReader reader{detail::tokenize_config(text)};
    RunConfig c;
    c.params_explicit = reader.table.count("system") > 0;
    c.schedule_explicit = reader.table.count("schedule") > 0;
    int line = 0;
    std::string word;

    // Resolution order: preset -> profile -> explicit per-key overrides.
    if (reader.get("run", "preset", word, line)) c.preset = preset_from_name(word, line);
    if (reader.get("run", "profile", word, line)) c.profile = profile_from_name(word, line);
    c.params = apply_profile(c.preset == Preset::Fast ? fast_params() : paper_params(), c.profile);
    c.schedule = c.preset == Preset::Fast ? fast_schedule() : paper_schedule();
    c.cutoff_dim = default_cutoff(c.profile);

    if (reader.get("run", "cutoff_dim", c.cutoff_dim, line) && c.cutoff_dim < 2)
        throw ConfigError("cutoff_dim must be >= 2", line);
    if (reader.get("run", "dt_ns", c.dt_ns, line) && c.dt_ns < 0.0)
        throw ConfigError("dt_ns must be >= 0 (0 = automatic)", line);
    if (reader.get("run", "threads", c.threads, line) && c.threads < 1)
        throw ConfigError("threads must be >= 1", line);

    // [system]: per-mode keys carry an _l/_r pair; frequencies are plain MHz.
    int gamma_line = 0, kappa_i_line = 0, kerr_line = 0;
    const auto mode_key = [](const char* stem, int m, const char* suffix) {
        return std::string(stem) + (m == 0 ? "_l" : "_r") + suffix;
    };
    for (int m = 0; m < 2; ++m) {
        reader.get("system", mode_key("delta", m, "_mhz_over_2pi"), c.params.delta_mhz[m], line);
        if (reader.get("system", mode_key("kerr", m, "_mhz_over_2pi"), c.params.kerr_mhz[m],
                       line)) {
            kerr_line = line;
            if (!(c.params.kerr_mhz[m] < 0.0))
                throw ConfigError("kerr must be negative (self-truncating oscillator)", line);
        }
        reader.get("system", mode_key("kappa_e", m, "_mhz_over_2pi"), c.params.kappa_e_mhz[m],
                   line);
        if (reader.get("system", mode_key("kappa_i_meas", m, "_mhz_over_2pi"),
                       c.params.kappa_i_meas_mhz[m], line))
            kappa_i_line = std::max(kappa_i_line, line);
        if (reader.get("system", mode_key("gamma", m, "_mhz_over_2pi"), c.params.gamma_mhz[m],
                       line))
            gamma_line = std::max(gamma_line, line);
        reader.get("system", mode_key("alpha_target", m, ""), c.params.alpha_target[m], line);
    }
    reader.get("system", "g_mhz_over_2pi", c.params.g_mhz, line);
    reader.get("system", "theta_p_rad", c.params.theta_p_rad, line);

    reader.get("schedule", "ramp_up_us", c.schedule.ramp_up_us, line);
    reader.get("schedule", "plateau_us", c.schedule.plateau_us, line);
    reader.get("schedule", "readout_delay_us", c.schedule.readout_delay_us, line);
    reader.get("schedule", "readout_window_us", c.schedule.readout_window_us, line);

    reader.get("grid", "alpha_min", c.grid.alpha_min, line);
    reader.get("grid", "alpha_max", c.grid.alpha_max, line);
    reader.get("grid", "step", c.grid.step, line);

    if (reader.get("sweep", "axis", word, line)) c.axis = axis_from_name(word, line);
    reader.get("sweep", "points", c.sweep_points, line);
    double v = 0.0;
    if (reader.get("sweep", "theta_p_rad", v, line)) c.sweep_theta_p_rad = v;
    if (reader.get("sweep", "gamma_khz", v, line)) c.sweep_gamma_khz = v;
    reader.get("sweep", "gamma_families_khz", c.gamma_families_khz, line);

    if (reader.get("spectrum", "points", c.spectrum_points, line) && c.spectrum_points < 2)
        throw ConfigError("spectrum points must be >= 2", line);
    if (reader.get("spectrum", "levels", c.spectrum_levels, line) && c.spectrum_levels < 2)
        throw ConfigError("spectrum levels must be >= 2", line);

    reader.reject_unused();

    // Cross-field checks, attributed to the latest contributing line.
    for (int m = 0; m < 2; ++m) {
        if (c.params.kappa_star_mhz(m) < 0.0)
            throw ConfigError(std::string("kappa_i_meas_") + (m == 0 ? "l" : "r") +
                                  " - 2*gamma must be >= 0 (unscaled internal loss)",
                              std::max(gamma_line, kappa_i_line));
    }
    try {
        c.params.validate();
        c.schedule.validate();
        (void)c.grid.points();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what(), std::max({gamma_line, kappa_i_line, kerr_line, 0}));
    }
    return c;
}

// Recover a resolved configuration from an emitted JSON manifest.
inline RunConfig parse_config_manifest(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("manifest is not valid JSON: ") + e.what());
    }
    RunConfig c;
    using detail::jget;
    c.preset = preset_from_name(j.value("preset", "paper"), 0);
    c.profile = profile_from_name(j.value("profile", "paper"), 0);
    c.axis = axis_from_name(j.value("axis", "theta_p"), 0);
    c.cutoff_dim = j.value("cutoff_dim", default_cutoff(c.profile));
    c.dt_ns = j.value("dt_ns", 0.0);
    c.threads = j.value("threads", 1);
    c.params_explicit = j.contains("system");
    c.schedule_explicit = j.contains("schedule");

    if (j.contains("system")) {
        const auto& s = j.at("system");
        for (int m = 0; m < 2; ++m) {
            const char* suffix = (m == 0) ? "_l" : "_r";
            const auto f = [&](const char* stem, const char* tail) {
                return std::string(stem) + suffix + tail;
            };
            c.params.delta_mhz[m] = jget(s, f("delta", "_mhz_over_2pi").c_str());
            c.params.kerr_mhz[m] = jget(s, f("kerr", "_mhz_over_2pi").c_str());
            c.params.kappa_e_mhz[m] = jget(s, f("kappa_e", "_mhz_over_2pi").c_str());
            c.params.kappa_i_meas_mhz[m] = jget(s, f("kappa_i_meas", "_mhz_over_2pi").c_str());
            c.params.gamma_mhz[m] = jget(s, f("gamma", "_mhz_over_2pi").c_str());
            c.params.alpha_target[m] = jget(s, f("alpha_target", "").c_str());
        }
        c.params.g_mhz = jget(s, "g_mhz_over_2pi");
        c.params.theta_p_rad = jget(s, "theta_p_rad");
    } else {
        c.params =
            apply_profile(c.preset == Preset::Fast ? fast_params() : paper_params(), c.profile);
    }
    if (j.contains("schedule")) {
        const auto& s = j.at("schedule");
        c.schedule.ramp_up_us = jget(s, "ramp_up_us");
        c.schedule.plateau_us = jget(s, "plateau_us");
        c.schedule.readout_delay_us = jget(s, "readout_delay_us");
        c.schedule.readout_window_us = jget(s, "readout_window_us");
    } else {
        c.schedule = c.preset == Preset::Fast ? fast_schedule() : paper_schedule();
    }
    if (j.contains("grid")) {
        const auto& g = j.at("grid");
        c.grid.alpha_min = jget(g, "alpha_min");
        c.grid.alpha_max = jget(g, "alpha_max");
        c.grid.step = jget(g, "step");
    }
    if (j.contains("sweep")) {
        const auto& s = j.at("sweep");
        if (s.contains("points")) c.sweep_points = s.at("points").get<std::vector<double>>();
        if (s.contains("theta_p_rad") && !s.at("theta_p_rad").is_null())
            c.sweep_theta_p_rad = s.at("theta_p_rad").get<double>();
        if (s.contains("gamma_khz") && !s.at("gamma_khz").is_null())
            c.sweep_gamma_khz = s.at("gamma_khz").get<double>();
        if (s.contains("gamma_families_khz"))
            c.gamma_families_khz = s.at("gamma_families_khz").get<std::vector<double>>();
    }
    if (j.contains("spectrum")) {
        c.spectrum_points = j.at("spectrum").value("points", 81);
        c.spectrum_levels = j.at("spectrum").value("levels", 8);
    }
    try {
        c.params.validate();
        c.schedule.validate();
        (void)c.grid.points();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    return c;
}

// Accepts either format: JSON manifests start with '{'.
inline RunConfig parse_config(const std::string& text) {
    for (char ch : text) {
        if (std::isspace(static_cast<unsigned char>(ch))) continue;
        if (ch == '{') return parse_config_manifest(text);
        break;
    }
    return parse_config_text(text);
}

// ---- canonical emission --------------------------------------------------------------

namespace detail {

// Shortest decimal that parses back to the same double.
inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::string fmt_list(const std::vector<double>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ", ";
        out += fmt_double(v[i]);
    }
    return out;
}

}  // namespace detail

// Render a resolved configuration in the text format; parse_config of the
// output reproduces the configuration exactly (round-trip identity).
inline std::string render_config(const RunConfig& c) {
    using detail::fmt_double;
    using detail::fmt_list;
    std::string out;
    out += "[run]\n";
    out += std::string("preset = ") + preset_name(c.preset) + "\n";
    out += std::string("profile = ") + profile_name(c.profile) + "\n";
    out += "cutoff_dim = " + std::to_string(c.cutoff_dim) + "\n";
    out += "dt_ns = " + fmt_double(c.dt_ns) + "\n";
    out += "threads = " + std::to_string(c.threads) + "\n";
    out += "\n[system]\n";
    for (int m = 0; m < 2; ++m) {
        const std::string s = m == 0 ? "_l" : "_r";
        out += "delta" + s + "_mhz_over_2pi = " + fmt_double(c.params.delta_mhz[m]) + "\n";
        out += "kerr" + s + "_mhz_over_2pi = " + fmt_double(c.params.kerr_mhz[m]) + "\n";
        out += "kappa_e" + s + "_mhz_over_2pi = " + fmt_double(c.params.kappa_e_mhz[m]) + "\n";
        out += "kappa_i_meas" + s + "_mhz_over_2pi = " +
               fmt_double(c.params.kappa_i_meas_mhz[m]) + "\n";
        out += "gamma" + s + "_mhz_over_2pi = " + fmt_double(c.params.gamma_mhz[m]) + "\n";
        out += "alpha_target" + s + " = " + fmt_double(c.params.alpha_target[m]) + "\n";
    }
    out += "g_mhz_over_2pi = " + fmt_double(c.params.g_mhz) + "\n";
    out += "theta_p_rad = " + fmt_double(c.params.theta_p_rad) + "\n";
    out += "\n[schedule]\n";
    out += "ramp_up_us = " + fmt_double(c.schedule.ramp_up_us) + "\n";
    out += "plateau_us = " + fmt_double(c.schedule.plateau_us) + "\n";
    out += "readout_delay_us = " + fmt_double(c.schedule.readout_delay_us) + "\n";
    out += "readout_window_us = " + fmt_double(c.schedule.readout_window_us) + "\n";
    out += "\n[grid]\n";
    out += "alpha_min = " + fmt_double(c.grid.alpha_min) + "\n";
    out += "alpha_max = " + fmt_double(c.grid.alpha_max) + "\n";
    out += "step = " + fmt_double(c.grid.step) + "\n";
    out += "\n[sweep]\n";
    out += std::string("axis = ") + axis_name(c.axis) + "\n";
    if (!c.sweep_points.empty()) out += "points = " + fmt_list(c.sweep_points) + "\n";
    if (c.sweep_theta_p_rad) out += "theta_p_rad = " + fmt_double(*c.sweep_theta_p_rad) + "\n";
    if (c.sweep_gamma_khz) out += "gamma_khz = " + fmt_double(*c.sweep_gamma_khz) + "\n";
    if (!c.gamma_families_khz.empty())
        out += "gamma_families_khz = " + fmt_list(c.gamma_families_khz) + "\n";
    out += "\n[spectrum]\n";
    out += "points = " + std::to_string(c.spectrum_points) + "\n";
    out += "levels = " + std::to_string(c.spectrum_levels) + "\n";
    return out;
}

}  // namespace kpo
