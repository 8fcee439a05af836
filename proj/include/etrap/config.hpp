// SPDX-License-Identifier: Apache-2.0
#pragma once

// Run configuration: a flat "key = value [unit]  # note" text format with a
// fixed schema. Keys carry their unit in the name; values may restate a
// compatible unit and are converted to SI on access.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <initializer_list>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "etrap/analysis.hpp"
#include "etrap/dynamics.hpp"
#include "etrap/error.hpp"
#include "etrap/model.hpp"
#include "etrap/stats.hpp"
#include "etrap/units.hpp"

namespace etrap {

namespace config {

enum class Kind { number, integer, seed, text, boolean };

struct KeySpec {
    const char* name;
    const char* unit;  // "" for dimensionless
    Kind kind;
    double min;
    double max;
    const char* fallback;  // nullptr: no built-in default
    const char* choices;   // text keys: '|' separated
};

// clang-format off
inline const std::vector<KeySpec>& schema()
{
    static const std::vector<KeySpec> keys = {
        {"profile",                 "",          Kind::text,    0, 0,    nullptr, "paper-trap"},
        {"seed",                    "",          Kind::seed,    0, 0,    "0",     nullptr},
        {"workers",                 "",          Kind::integer, 0, 1024, "1",     nullptr},
        // drive and particle
        {"drive_freq_GHz",          "GHz",       Kind::number,  1e-3, 1e3, nullptr, nullptr},
        {"drive_amplitude_scale",   "",          Kind::number,  0, 1e3,  "1",     nullptr},
        {"particle_mass_kg",        "kg",        Kind::number,  1e-40, 1, "9.1093837015e-31", nullptr},
        {"particle_charge_C",       "C",         Kind::number,  -1e-15, 1e-15, "-1.602176634e-19", nullptr},
        // field model
        {"variant",                 "",          Kind::text,    0, 0,    nullptr, "calibrated|harmonic|anharmonic"},
        {"gradient_V_per_m2",       "V_per_m2",  Kind::number,  0, 1e14, nullptr, nullptr},
        {"rolloff_scale_um",        "um",        Kind::number,  1e-3, 1e6, nullptr, nullptr},
        {"rolloff_order",           "",          Kind::number,  0, 64,   nullptr, nullptr},
        {"rolloff_power",           "",          Kind::integer, 1, 4,    "2",     nullptr},
        {"axial_freq_MHz",          "MHz",       Kind::number,  1e-3, 1e4, nullptr, nullptr},
        {"static_cubic_V_per_m3",   "V_per_m3",  Kind::number,  -1e20, 1e20, "0",  nullptr},
        {"static_quartic_V_per_m4", "V_per_m4",  Kind::number,  -1e24, 1e24, "0",  nullptr},
        // calibration targets
        {"target_secular_MHz",      "MHz",       Kind::number,  1e-3, 1e4, nullptr, nullptr},
        {"target_depth_eV",         "eV",        Kind::number,  1e-6, 1e3, nullptr, nullptr},
        {"target_dev_pct",          "pct",       Kind::number,  1e-6, 100, nullptr, nullptr},
        {"target_extent_um",        "um",        Kind::number,  1e-3, 1e6, nullptr, nullptr},
        // integration
        {"cap_ms",                  "ms",        Kind::number,  1e-9, 1e4, nullptr, nullptr},
        {"escape_radius_um",        "um",        Kind::number,  1e-3, 1e6, "500",  nullptr},
        {"steps_per_period",        "",          Kind::integer, 32, 1e6, "128",   nullptr},
        {"decimation",              "",          Kind::integer, 0, 1e6,  "0",     nullptr},
        // trajectory
        {"x0_um",                   "um",        Kind::number,  -1e6, 1e6, "50",  nullptr},
        {"phase_rad",               "rad",       Kind::number,  -1e6, 1e6, "0",   nullptr},
        // sweep
        {"grid_distances",          "",          Kind::integer, 2, 1e6,  nullptr, nullptr},
        {"grid_phases",             "",          Kind::integer, 2, 1e6,  nullptr, nullptr},
        {"distance_min_um",         "um",        Kind::number,  0, 1e6,  "5",     nullptr},
        {"distance_max_um",         "um",        Kind::number,  0, 1e6,  "500",   nullptr},
        {"lock_tolerance_bins",     "",          Kind::number,  1e-6, 1e3, "3",   nullptr},
        {"lock_max_order",          "",          Kind::integer, 2, 1000, "12",    nullptr},
        // tickle
        {"tickle_fmin_MHz",         "MHz",       Kind::number,  1e-6, 1e5, nullptr, nullptr},
        {"tickle_fmax_MHz",         "MHz",       Kind::number,  1e-6, 1e5, nullptr, nullptr},
        {"tickle_step_MHz",         "MHz",       Kind::number,  1e-6, 1e5, nullptr, nullptr},
        {"tickle_amp_V_per_m",      "V_per_m",   Kind::number,  0, 1e9,  "10",    nullptr},
        {"tickle_duration_us",      "us",        Kind::number,  1e-6, 1e6, "2",   nullptr},
        {"tickle_ensemble",         "",          Kind::integer, 1, 1e6,  "16",    nullptr},
        {"tickle_extent_um",        "um",        Kind::number,  0, 1e6,  "50",    nullptr},
        {"tickle_angle_deg",        "deg",       Kind::number,  -360, 360, "45",  nullptr},
        {"tickle_loss_radius_um",   "um",        Kind::number,  1e-3, 1e6, "150", nullptr},
        // stability diagram
        {"mathieu_a",               "",          Kind::number,  -1e3, 1e3, "0",   nullptr},
        {"mathieu_qmin",            "",          Kind::number,  -1e3, 1e3, "0",   nullptr},
        {"mathieu_qmax",            "",          Kind::number,  -1e3, 1e3, "1",   nullptr},
        {"mathieu_qstep",           "",          Kind::number,  1e-9, 1e3, "0.001", nullptr},
        // detection and statistics
        {"chain_extraction",        "",          Kind::number,  0, 1,    nullptr, nullptr},
        {"chain_mesh",              "",          Kind::number,  0, 1,    nullptr, nullptr},
        {"chain_mcp",               "",          Kind::number,  0, 1,    nullptr, nullptr},
        {"chain_voltage",           "",          Kind::number,  0, 1,    nullptr, nullptr},
        {"deadtime_ns",             "ns",        Kind::number,  0, 1e9,  nullptr, nullptr},
        {"readout_width_ns",        "ns",        Kind::number,  1e-6, 1e9, nullptr, nullptr},
        {"background_per_cycle",    "",          Kind::number,  0, 1,    nullptr, nullptr},
        {"pulse_fwhm_ns",           "ns",        Kind::number,  0, 1e6,  nullptr, nullptr},
        {"t_load_us",               "us",        Kind::number,  0, 1e9,  "10",    nullptr},
        {"t_wait_ms",               "ms",        Kind::number,  0, 1e9,  "0",     nullptr},
        {"n_mean",                  "",          Kind::number,  0, 1e6,  "1.04",  nullptr},
        {"cycles",                  "",          Kind::integer, 1, 1e10, "1000000", nullptr},
        {"p_detect",                "",          Kind::number,  0, 1,    nullptr, nullptr},
        {"histogram_bin_ns",        "ns",        Kind::number,  1e-6, 1e9, "1",   nullptr},
        {"storage_two_exponential", "",          Kind::boolean, 0, 0,    "false", nullptr},
    };
    return keys;
}
// clang-format on

/// Scale of a unit token relative to SI, with its dimension tag.
struct UnitInfo {
    const char* dimension;
    double scale;
};

inline std::optional<UnitInfo> unit_info(std::string_view u)
{
    static const std::map<std::string_view, UnitInfo> table = {
        {"", {"1", 1.0}},
        {"Hz", {"frequency", 1.0}},         {"kHz", {"frequency", 1e3}},
        {"MHz", {"frequency", 1e6}},        {"GHz", {"frequency", 1e9}},
        {"m", {"length", 1.0}},             {"mm", {"length", 1e-3}},
        {"um", {"length", 1e-6}},           {"nm", {"length", 1e-9}},
        {"s", {"time", 1.0}},               {"ms", {"time", 1e-3}},
        {"us", {"time", 1e-6}},             {"ns", {"time", 1e-9}},
        {"eV", {"energy", constants::elementary_charge}},
        {"meV", {"energy", 1e-3 * constants::elementary_charge}},
        {"J", {"energy", 1.0}},
        {"kg", {"mass", 1.0}},              {"C", {"charge", 1.0}},
        {"V_per_m", {"field", 1.0}},        {"V_per_m2", {"gradient", 1.0}},
        {"V_per_m3", {"cubic", 1.0}},       {"V_per_m4", {"quartic", 1.0}},
        {"rad", {"angle", 1.0}},            {"deg", {"angle", pi / 180.0}},
        {"pct", {"1", 1e-2}},
    };
    const auto it = table.find(u);
    if (it == table.end()) {
        return std::nullopt;
    }
    return it->second;
}

inline const KeySpec* find_key(std::string_view name)
{
    for (const auto& k : schema()) {
        if (name == k.name) {
            return &k;
        }
    }
    return nullptr;
}

inline std::string trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

inline std::string range_text(const KeySpec& k)
{
    if (k.kind == Kind::text) {
        return std::string("one of ") + k.choices;
    }
    if (k.kind == Kind::boolean) {
        return "true or false";
    }
    if (k.kind == Kind::seed) {
        return "an unsigned 64-bit integer";
    }
    char buf[128];
    std::snprintf(buf, sizeof buf, "[%g, %g]%s%s", k.min, k.max, *k.unit ? " " : "", k.unit);
    return buf;
}

inline std::optional<double> parse_double(std::string_view s)
{
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        return std::nullopt;
    }
    return v;
}

struct Entry {
    std::string value;  // as written, including any unit token
    std::string note;
};

}  // namespace config

/// Bundled defaults; each value carries the source it was taken from.
inline constexpr std::string_view paper_trap_profile = R"(# paper-trap profile
drive_freq_GHz = 1.6            # reported drive frequency, 2 pi x 1.60 GHz
variant = calibrated            # anharmonic surrogate calibrated to the reported trap
target_secular_MHz = 300        # reported radial secular frequency, about 2 pi x 300 MHz
target_depth_eV = 1.3           # reported pseudopotential depth, about 1.3 eV
target_dev_pct = 2              # reported harmonic deviation bound, below 2 percent
target_extent_um = 200          # reported extent of the harmonic region, 200 um
axial_freq_MHz = 40             # reported axial mode, about 2 pi x 40 MHz
cap_ms = 1                      # reported storage-map integration cap, 1 ms
grid_distances = 100            # storage-map grid, ionization distances
grid_phases = 50                # storage-map grid, drive phases
tickle_fmin_MHz = 20            # reported tickle scan start, 20 MHz
tickle_fmax_MHz = 350           # reported tickle scan end, 350 MHz
tickle_step_MHz = 1             # reported tickle scan increment, 1 MHz
chain_extraction = 1            # extraction efficiency taken as 1
chain_mesh = 0.5                # reported mesh open area, 0.5
chain_mcp = 0.6                 # reported MCP open area, about 0.6
chain_voltage = 0.4             # reported MCP voltage factor, about 40 percent
deadtime_ns = 60                # reported TDC deadtime, 60 ns
readout_width_ns = 50           # reported readout summation window, 50 ns
background_per_cycle = 1e-4     # reported background level, about 1e-4 per cycle
pulse_fwhm_ns = 2               # reported readout peak width, about 2 ns FWHM
)";

class Config {
  public:
    /// Parse config text. Unknown keys, duplicates, bad numbers, unit
    /// mismatches and out-of-range values raise ConfigError naming the key.
    /// A `profile` key pulls in the bundled defaults underneath.
    static Config parse(std::string_view text, std::string_view origin = "config")
    {
        Config c;
        c.read(text, origin, false);
        if (c.has("profile")) {
            c.apply_profile(c.text("profile"));
        }
        c.apply_fallbacks();
        return c;
    }

    /// Bundled profile plus built-in defaults.
    static Config from_profile(std::string_view name = "paper-trap")
    {
        Config c;
        c.set("profile", std::string(name), "bundled profile");
        c.apply_profile(name);
        c.apply_fallbacks();
        return c;
    }

    void apply_profile(std::string_view name)
    {
        if (name != "paper-trap") {
            throw ConfigError("profile: unknown profile '" + std::string(name) + "' (accepted: paper-trap)");
        }
        read(paper_trap_profile, "profile paper-trap", true);
    }

    /// Set (or override) one value; validated like parsed text.
    void set(const std::string& key, const std::string& value, const std::string& note = "set on command line")
    {
        const config::KeySpec& k = spec(key);
        validate_value(k, value);
        entries_[key] = config::Entry{value, note};
    }

    void set_number(const std::string& key, double value, const std::string& note = "set on command line")
    {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.17g", value);
        set(key, buf, note);
    }

    bool has(const std::string& key) const { return entries_.count(key) > 0; }

    /// Numeric value converted to SI.
    double number(const std::string& key) const
    {
        const config::KeySpec& k = spec(key);
        return to_si(k, raw(key));
    }

    /// Value expressed in the key's own unit.
    double in_key_unit(const std::string& key) const
    {
        const config::KeySpec& k = spec(key);
        return to_si(k, raw(key)) / config::unit_info(k.unit)->scale;
    }

    long long integer(const std::string& key) const { return static_cast<long long>(std::llround(number(key))); }

    std::uint64_t seed() const { return std::stoull(raw("seed")); }

    std::string text(const std::string& key) const { return raw(key); }

    bool flag(const std::string& key) const { return raw(key) == "true"; }

    void require(std::initializer_list<const char*> keys) const
    {
        for (const char* key : keys) {
            raw(key);
        }
    }

    /// Resolved configuration, one "key = value  # note" line per entry in
    /// schema order. The worker count is left out: it never changes results.
    std::vector<std::string> echo() const
    {
        std::vector<std::string> lines;
        for (const auto& k : config::schema()) {
            const auto it = entries_.find(k.name);
            if (it == entries_.end() || std::string_view(k.name) == "workers") {
                continue;
            }
            std::string line = std::string(k.name) + " = " + it->second.value;
            if (!it->second.note.empty()) {
                line += "  # " + it->second.note;
            }
            lines.push_back(std::move(line));
        }
        return lines;
    }

    /// Re-parseable text of the resolved configuration.
    std::string emit() const
    {
        std::string out;
        for (const auto& l : echo()) {
            out += l + '\n';
        }
        return out;
    }

  private:
    std::map<std::string, config::Entry> entries_;

    static const config::KeySpec& spec(const std::string& key)
    {
        const config::KeySpec* k = config::find_key(key);
        if (!k) {
            throw ConfigError(key + ": unknown key");
        }
        return *k;
    }

    const std::string& raw(const std::string& key) const
    {
        const config::KeySpec& k = spec(key);
        const auto it = entries_.find(key);
        if (it == entries_.end()) {
            throw ConfigError(key + ": missing key (accepted " + config::range_text(k) + ")");
        }
        return it->second.value;
    }

    static double to_si(const config::KeySpec& k, const std::string& value)
    {
        const auto space = value.find(' ');
        const std::string number = value.substr(0, space);
        const std::string unit = space == std::string::npos ? k.unit : config::trim(value.substr(space + 1));
        const auto parsed = config::parse_double(number);
        const auto key_unit = config::unit_info(k.unit);
        const auto given = config::unit_info(unit);
        if (!parsed || !std::isfinite(*parsed)) {
            throw ConfigError(std::string(k.name) + ": '" + value + "' is not a finite number");
        }
        if (!given || std::string_view(given->dimension) != key_unit->dimension) {
            throw ConfigError(std::string(k.name) + ": unit '" + unit + "' does not match " +
                              (*k.unit ? k.unit : "a dimensionless value"));
        }
        return *parsed * given->scale;
    }

    static void validate_value(const config::KeySpec& k, const std::string& value)
    {
        using config::Kind;
        switch (k.kind) {
        case Kind::text: {
            std::string_view choices = k.choices;
            std::size_t pos = 0;
            while (pos <= choices.size()) {
                const auto bar = choices.find('|', pos);
                const auto item = choices.substr(pos, bar == std::string_view::npos ? std::string_view::npos : bar - pos);
                if (item == value) {
                    return;
                }
                if (bar == std::string_view::npos) {
                    break;
                }
                pos = bar + 1;
            }
            throw ConfigError(std::string(k.name) + ": '" + value + "' not accepted (accepted " + config::range_text(k)
                              + ")");
        }
        case Kind::boolean:
            if (value != "true" && value != "false") {
                throw ConfigError(std::string(k.name) + ": '" + value + "' not accepted (accepted true or false)");
            }
            return;
        case Kind::seed: {
            std::uint64_t v = 0;
            const auto res = std::from_chars(value.data(), value.data() + value.size(), v);
            if (res.ec != std::errc() || res.ptr != value.data() + value.size()) {
                throw ConfigError(std::string(k.name) + ": '" + value + "' is not " + config::range_text(k));
            }
            return;
        }
        case Kind::number:
        case Kind::integer: {
            const double si = to_si(k, value);
            const double v = si / config::unit_info(k.unit)->scale;
            if (k.kind == Kind::integer && std::fabs(v - std::round(v)) > 1e-9 * std::max(1.0, std::fabs(v))) {
                throw ConfigError(std::string(k.name) + ": '" + value + "' is not an integer");
            }
            if (!(v >= k.min && v <= k.max)) {
                throw ConfigError(std::string(k.name) + ": value " + value + " out of range (accepted "
                                  + config::range_text(k) + ")");
            }
            return;
        }
        }
    }

    void read(std::string_view text, std::string_view origin, bool only_missing)
    {
        std::istringstream in{std::string(text)};
        std::string line;
        int number = 0;
        std::map<std::string, bool> seen;
        while (std::getline(in, line)) {
            ++number;
            std::string note;
            const auto hash = line.find('#');
            if (hash != std::string::npos) {
                note = config::trim(line.substr(hash + 1));
                line = line.substr(0, hash);
            }
            const std::string body = config::trim(line);
            if (body.empty()) {
                continue;
            }
            const auto eq = body.find('=');
            if (eq == std::string::npos) {
                throw ConfigError(std::string(origin) + ":" + std::to_string(number) + ": expected 'key = value'");
            }
            const std::string key = config::trim(body.substr(0, eq));
            std::string value = config::trim(body.substr(eq + 1));
            // Collapse internal whitespace to one space so "1.6   GHz" round-trips.
            std::string collapsed;
            for (char ch : value) {
                if (ch == ' ' || ch == '\t') {
                    if (!collapsed.empty() && collapsed.back() != ' ') {
                        collapsed += ' ';
                    }
                } else {
                    collapsed += ch;
                }
            }
            if (!config::find_key(key)) {
                throw ConfigError(key + ": unknown key (" + std::string(origin) + ":" + std::to_string(number) + ")");
            }
            if (seen[key]) {
                throw ConfigError(key + ": duplicate key (" + std::string(origin) + ":" + std::to_string(number) + ")");
            }
            seen[key] = true;
            if (only_missing && has(key)) {
                continue;
            }
            set(key, collapsed, note.empty() ? "from " + std::string(origin) : note);
        }
    }

    void apply_fallbacks()
    {
        for (const auto& k : config::schema()) {
            if (k.fallback && !has(k.name)) {
                entries_[k.name] = config::Entry{k.fallback, "default"};
            }
        }
    }
};

/// Parse config text (see Config::parse).
inline Config parse_config(std::string_view text) { return Config::parse(text); }

// ---------------------------------------------------------------------------
// Domain objects from a resolved configuration.

inline DriveSpec drive_from(const Config& c)
{
    DriveSpec d;
    d.omega = units::angular(c.number("drive_freq_GHz"));
    d.amplitude_scale = c.number("drive_amplitude_scale");
    d.validate();
    return d;
}

inline ParticleSpec particle_from(const Config& c)
{
    ParticleSpec p;
    p.mass = c.number("particle_mass_kg");
    p.charge = c.number("particle_charge_C");
    p.validate();
    return p;
}

inline CalibrationTargets targets_from(const Config& c)
{
    CalibrationTargets t;
    t.secular_omega = units::angular(c.number("target_secular_MHz"));
    t.depth = c.number("target_depth_eV");
    t.max_deviation = c.number("target_dev_pct");
    t.deviation_extent = c.number("target_extent_um");
    t.drive = drive_from(c);
    t.particle = particle_from(c);
    t.rolloff_power = static_cast<int>(c.integer("rolloff_power"));
    return t;
}

/// Radial model: "calibrated" runs the calibration; "harmonic" and
/// "anharmonic" take explicit parameters, with the gradient defaulting to
/// the secular-frequency target.
inline RadialModel radial_model_from(const Config& c)
{
    const std::string v = c.text("variant");
    if (v == "calibrated") {
        return calibrate_anharmonic(targets_from(c)).model;
    }
    double gradient = 0.0;
    if (c.has("gradient_V_per_m2")) {
        gradient = c.number("gradient_V_per_m2");
    } else {
        gradient = gradient_for_secular_omega(units::angular(c.number("target_secular_MHz")), drive_from(c),
                                              particle_from(c));
    }
    if (v == "harmonic") {
        return HarmonicRF1D{gradient};
    }
    Anharmonic1D m;
    m.gradient = gradient;
    m.rolloff_scale = c.number("rolloff_scale_um");
    m.rolloff_order = c.number("rolloff_order");
    m.rolloff_power = static_cast<int>(c.integer("rolloff_power"));
    return m;
}

inline FieldModel model_from(const Config& c)
{
    const RadialModel r = radial_model_from(c);
    return std::visit([](const auto& m) -> FieldModel { return m; }, r);
}

inline Separable3D model3d_from(const Config& c)
{
    Separable3D s = make_separable(radial_model_from(c), units::angular(c.number("axial_freq_MHz")), particle_from(c));
    s.static_cubic = c.number("static_cubic_V_per_m3");
    s.static_quartic = c.number("static_quartic_V_per_m4");
    return s;
}

inline TerminationSpec termination_from(const Config& c)
{
    TerminationSpec t;
    t.time_cap = c.number("cap_ms");
    t.escape_radius = c.number("tickle_loss_radius_um");
    t.steps_per_period = static_cast<int>(c.integer("steps_per_period"));
    t.decimation = static_cast<int>(c.integer("decimation"));
    return t;
}

inline SweepSpec sweep_spec_from(const Config& c)
{
    SweepSpec s;
    s.distance_min = c.number("distance_min_um");
    s.distance_max = c.number("distance_max_um");
    s.distance_count = static_cast<int>(c.integer("grid_distances"));
    s.phase_count = static_cast<int>(c.integer("grid_phases"));
    s.term = termination_from(c);
    s.model = model_from(c);
    s.drive = drive_from(c);
    s.particle = particle_from(c);
    s.workers = static_cast<unsigned>(c.integer("workers"));
    s.lock_tolerance_bins = c.number("lock_tolerance_bins");
    s.lock_max_order = static_cast<int>(c.integer("lock_max_order"));
    s.seed = c.seed();
    return s;
}

inline TickleScanSpec tickle_spec_from(const Config& c)
{
    TickleScanSpec t;
    t.f_min = c.number("tickle_fmin_MHz");
    t.f_max = c.number("tickle_fmax_MHz");
    t.f_step = c.number("tickle_step_MHz");
    t.amplitude = c.number("tickle_amp_V_per_m");
    t.duration = c.number("tickle_duration_us");
    const double angle = c.number("tickle_angle_deg");
    t.direction = Vec3{std::cos(angle), 0.0, std::sin(angle)};
    t.escape_radius = c.number("tickle_loss_radius_um");
    t.steps_per_period = static_cast<int>(c.integer("steps_per_period"));
    t.workers = static_cast<unsigned>(c.integer("workers"));
    return t;
}

inline DetectionChain chain_from(const Config& c)
{
    DetectionChain d;
    d.extraction_efficiency = c.number("chain_extraction");
    d.mesh_open_area = c.number("chain_mesh");
    d.mcp_open_area = c.number("chain_mcp");
    d.voltage_factor = c.number("chain_voltage");
    return d;
}

inline CycleProtocol protocol_from(const Config& c)
{
    CycleProtocol p;
    p.t_load = c.number("t_load_us");
    p.t_wait = c.number("t_wait_ms");
    p.readout_width_ns = c.number("readout_width_ns") / units::ns;
    p.background_per_cycle = c.number("background_per_cycle");
    p.pulse_fwhm_ns = c.number("pulse_fwhm_ns") / units::ns;
    return p;
}

}  // namespace etrap
