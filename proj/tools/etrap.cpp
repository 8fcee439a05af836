// SPDX-License-Identifier: Apache-2.0
// etrap: command-line front end for trajectories, storage maps, tickle scans,
// stability diagrams, calibration, fits and detection statistics.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "etrap/etrap.hpp"

namespace {

using etrap::Config;

std::string fmt(const char* f, double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

std::string read_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw etrap::ConfigError("cannot open '" + path + "'");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string> header_for(const std::string& command, const Config& cfg)
{
    std::vector<std::string> h{std::string("code_version = ") + etrap::version_string, "command = " + command};
    for (const auto& line : cfg.echo()) {
        h.push_back("config " + line);
    }
    return h;
}

void write_header(std::ostream& os, const std::vector<std::string>& header)
{
    for (const auto& line : header) {
        os << "# " << line << '\n';
    }
}

/// Rows "t_s,value[,sigma]"; '#' lines and a non-numeric first row are skipped.
std::vector<etrap::DataPoint> read_points(const std::string& path)
{
    std::istringstream in(read_file(path));
    std::vector<etrap::DataPoint> pts;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') {
            continue;
        }
        etrap::DataPoint p;
        const int n = std::sscanf(line.c_str(), "%lf,%lf,%lf", &p.t, &p.value, &p.sigma);
        if (n < 2) {
            if (first) {
                first = false;
                continue;
            }
            throw etrap::ConfigError(path + ": malformed row '" + line + "'");
        }
        first = false;
        pts.push_back(p);
    }
    return pts;
}

void write_fit(std::ostream& os, const etrap::DecayFit& fit)
{
    os << "# model = " << etrap::decay_model_name(fit.kind) << '\n';
    os << "# converged = " << (fit.converged ? "true" : "false") << '\n';
    os << "# identifiable = " << (fit.identifiable ? "true" : "false") << '\n';
    os << "# iterations = " << fit.iterations << '\n';
    os << "# residual_norm = " << fmt("%.10g", fit.residual_norm) << '\n';
    os << "parameter,value,sigma\n";
    for (const auto& p : fit.parameters) {
        os << p.name << ',' << fmt("%.10g", p.value) << ',' << fmt("%.10g", p.sigma) << '\n';
    }
    if (!std::isnan(fit.decaying_fraction)) {
        os << "decaying_fraction," << fmt("%.10g", fit.decaying_fraction) << ",nan\n";
    }
}

int run_trajectory(const Config& cfg, std::ostream& os)
{
    const auto model = etrap::model_from(cfg);
    const auto drive = etrap::drive_from(cfg);
    etrap::InitialCondition init;
    init.position = etrap::Vec3{cfg.number("x0_um"), 0.0, 0.0};
    init.phase = cfg.number("phase_rad");
    auto term = etrap::termination_from(cfg);
    term.record_trajectory = true;
    const auto out = etrap::integrate(model, drive, etrap::particle_from(cfg), init, term);
    auto header = header_for("trajectory", cfg);
    header.push_back("storage_time_s = " + fmt("%.10g", out.storage_time));
    header.push_back(std::string("escaped = ") + (out.escaped ? "true" : "false"));
    header.push_back(std::string("capped = ") + (out.capped ? "true" : "false"));
    if (out.capped) {
        try {
            const auto s = etrap::summarize_motion(*out.trajectory, drive.omega, cfg.number("lock_tolerance_bins"),
                                                   static_cast<int>(cfg.integer("lock_max_order")));
            header.push_back("secular_MHz = " + fmt("%.10g", s.secular_frequency / etrap::units::MHz));
            header.push_back("amplitude_um = " + fmt("%.10g", s.amplitude / etrap::units::um));
            header.push_back("lock_order = " + std::to_string(s.lock_order.value_or(0)));
        } catch (const etrap::NoSecularMotion&) {
            header.push_back("secular_MHz = nan");
        } catch (const etrap::InvalidArgument&) {
            header.push_back("secular_MHz = nan");
        }
    }
    etrap::write_trajectory(os, *out.trajectory, header);
    return 0;
}

int run_sweep(const Config& cfg, std::ostream& os)
{
    const auto spec = etrap::sweep_spec_from(cfg);
    const auto map = etrap::run_sweep(spec);
    etrap::write_sweep(os, map, header_for("sweep", cfg));
    return 0;
}

int run_tickle(const Config& cfg, std::ostream& os)
{
    const auto model = etrap::model3d_from(cfg);
    const double extent = cfg.number("tickle_extent_um");
    const auto ensemble = etrap::make_tickle_ensemble(static_cast<std::size_t>(cfg.integer("tickle_ensemble")),
                                                      etrap::Vec3{extent, extent, extent}, cfg.seed());
    const auto spectrum =
        etrap::tickle_scan(ensemble, model, etrap::drive_from(cfg), etrap::particle_from(cfg), etrap::tickle_spec_from(cfg));
    auto header = header_for("tickle", cfg);
    header.push_back("baseline = " + fmt("%.10g", spectrum.baseline));
    header.push_back("sigma = " + fmt("%.10g", spectrum.sigma));
    etrap::write_tickle(os, spectrum, header);
    return 0;
}

int run_stability(const Config& cfg, std::ostream& os)
{
    const auto rows = etrap::stability_scan(cfg.number("mathieu_a"), cfg.number("mathieu_qmin"),
                                            cfg.number("mathieu_qmax"), cfg.number("mathieu_qstep"));
    write_header(os, header_for("stability-diagram", cfg));
    etrap::write_stability_rows(os, rows);
    return 0;
}

void write_calibration(std::ostream& os, const etrap::CalibrationReport& r)
{
    using etrap::units::MHz;
    os << "rolloff_power = " << r.model.rolloff_power << '\n';
    os << "rolloff_order = " << fmt("%.17g", r.model.rolloff_order) << '\n';
    os << "rolloff_scale_um = " << fmt("%.17g", r.model.rolloff_scale / etrap::units::um) << '\n';
    os << "gradient_V_per_m2 = " << fmt("%.17g", r.model.gradient) << '\n';
    os << "secular_MHz = " << fmt("%.10g", etrap::units::hertz(r.achieved_secular_omega) / MHz) << '\n';
    os << "depth_eV = " << fmt("%.10g", r.achieved_depth / etrap::units::eV) << '\n';
    os << "depth_location_um = " << fmt("%.10g", r.depth_location / etrap::units::um) << '\n';
    os << "max_deviation_pct = " << fmt("%.10g", 100.0 * r.achieved_max_deviation) << '\n';
    os << "frequency_met = " << (r.frequency_met ? "true" : "false") << '\n';
    os << "depth_met = " << (r.depth_met ? "true" : "false") << '\n';
    os << "deviation_met = " << (r.deviation_met ? "true" : "false") << '\n';
}

int run_calibrate(const Config& cfg, std::ostream& os)
{
    write_header(os, header_for("calibrate", cfg));
    try {
        write_calibration(os, etrap::calibrate_anharmonic(etrap::targets_from(cfg)).report);
    } catch (const etrap::CalibrationFailure& e) {
        write_calibration(os, e.best());
        throw;
    }
    return 0;
}

int run_fit(const Config& cfg, const std::string& file, bool storage, std::ostream& os)
{
    const auto pts = read_points(file);
    write_header(os, header_for(storage ? "fit-storage" : "fit-loading", cfg));
    os << "# data = " << file << '\n';
    try {
        write_fit(os, storage ? etrap::fit_storage(pts, cfg.flag("storage_two_exponential")) : etrap::fit_loading(pts));
    } catch (const etrap::FitFailure& e) {
        write_fit(os, e.best());
        throw;
    }
    return 0;
}

void write_estimate(std::ostream& os, const etrap::PoissonEstimate& e, double eta)
{
    os << "chain_efficiency = " << fmt("%.10g", eta) << '\n';
    os << "p_detect = " << fmt("%.10g", e.p_detect) << '\n';
    os << "lambda = " << fmt("%.10g", e.lambda) << '\n';
    os << "mean_electrons = " << fmt("%.10g", e.mean_electrons) << '\n';
    if (e.mean_electrons_sigma > 0.0) {
        os << "lambda_sigma = " << fmt("%.10g", e.lambda_sigma) << '\n';
        os << "mean_electrons_sigma = " << fmt("%.10g", e.mean_electrons_sigma) << '\n';
    }
}

int run_estimate(const Config& cfg, std::ostream& os)
{
    const auto chain = etrap::chain_from(cfg);
    const auto e = etrap::estimate_mean_electrons(cfg.number("p_detect"), chain);
    write_header(os, header_for("estimate-n", cfg));
    write_estimate(os, e, etrap::chain_efficiency(chain));
    return 0;
}

int run_simulate(const Config& cfg, std::ostream& os, const std::string& histogram_path)
{
    const auto chain = etrap::chain_from(cfg);
    const auto protocol = etrap::protocol_from(cfg);
    const auto cycles = static_cast<std::uint64_t>(cfg.integer("cycles"));
    const auto raw = etrap::simulate_cycles(protocol, cfg.number("n_mean"), chain, cycles, cfg.seed(),
                                            static_cast<unsigned>(cfg.integer("workers")),
                                            cfg.number("deadtime_ns") / etrap::units::ns);
    const auto kept = etrap::apply_deadtime(raw);
    const double p = etrap::detection_probability(kept, protocol.window_start(), protocol.window_end(), cycles);
    auto header = header_for("simulate-cycles", cfg);
    header.push_back("readout_window_ns = " + fmt("%.17g", protocol.window_start()) + " .. "
                     + fmt("%.17g", protocol.window_end()));
    if (p < 1.0) {
        const auto e = etrap::estimate_mean_electrons(p, chain, cycles);
        std::ostringstream ss;
        write_estimate(ss, e, etrap::chain_efficiency(chain));
        std::istringstream lines(ss.str());
        for (std::string l; std::getline(lines, l);) {
            header.push_back(l);
        }
    } else {
        header.push_back("p_detect = 1 (saturated)");
    }
    etrap::write_events(os, kept, header);
    if (!histogram_path.empty()) {
        std::ofstream h(histogram_path);
        if (!h) {
            throw etrap::ConfigError("cannot write '" + histogram_path + "'");
        }
        write_header(h, header_for("simulate-cycles", cfg));
        etrap::write_histogram(h, etrap::build_histogram(kept, cfg.number("histogram_bin_ns") / etrap::units::ns, cycles));
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Electron Paul-trap simulation and detection statistics"};
    app.set_version_flag("--version", etrap::version_string);
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::string out_path;
    std::vector<std::string> overrides;
    std::optional<std::string> seed;
    std::optional<long long> workers;
    app.add_option("--config", config_path, "configuration file (default: bundled paper-trap profile)");
    app.add_option("--out", out_path, "output file (default: stdout)");
    app.add_option("--set", overrides, "override a configuration key, key=value");
    app.add_option("--seed", seed, "64-bit seed");
    app.add_option("--workers", workers, "worker threads (0 = hardware concurrency)");

    // Flag values held as text so they pass through config validation and
    // appear verbatim in the echo.
    struct Flag {
        std::string key;
        std::optional<std::string> value;
    };
    std::vector<std::pair<CLI::App*, std::vector<Flag>>> flag_sets;
    auto bind = [&](CLI::App* sub, std::vector<std::pair<std::string, std::string>> spec) {
        std::vector<Flag> flags;
        flags.reserve(spec.size());
        for (auto& [flag, key] : spec) {
            flags.push_back({key, std::nullopt});
        }
        flag_sets.emplace_back(sub, std::move(flags));
        auto& bound = flag_sets.back().second;
        for (std::size_t i = 0; i < spec.size(); ++i) {
            sub->add_option(spec[i].first, bound[i].value, bound[i].key);
        }
    };
    flag_sets.reserve(16);

    auto* traj = app.add_subcommand("trajectory", "integrate one electron from rest");
    bind(traj, {{"--x0-um", "x0_um"}, {"--phase-rad", "phase_rad"}, {"--cap-ms", "cap_ms"}});

    auto* sweep = app.add_subcommand("sweep", "storage map over ionization distance and drive phase");
    std::string grid;
    sweep->add_option("--grid", grid, "NxM: distances x phases");
    bind(sweep, {{"--cap-ms", "cap_ms"}});

    auto* tickle = app.add_subcommand("tickle", "tickle spectroscopy on the 3D separable model");
    bind(tickle, {{"--fmin-mhz", "tickle_fmin_MHz"},
                  {"--fmax-mhz", "tickle_fmax_MHz"},
                  {"--step-mhz", "tickle_step_MHz"},
                  {"--amp", "tickle_amp_V_per_m"},
                  {"--duration-us", "tickle_duration_us"},
                  {"--ensemble", "tickle_ensemble"}});

    auto* stab = app.add_subcommand("stability-diagram", "Floquet stability along q at fixed a");
    bind(stab, {{"--a", "mathieu_a"}, {"--qmin", "mathieu_qmin"}, {"--qmax", "mathieu_qmax"}, {"--qstep", "mathieu_qstep"}});

    auto* cal = app.add_subcommand("calibrate", "calibrate the anharmonic surrogate");
    bind(cal, {{"--freq-mhz", "target_secular_MHz"},
               {"--depth-ev", "target_depth_eV"},
               {"--dev-pct", "target_dev_pct"},
               {"--extent-um", "target_extent_um"}});

    std::string fit_file;
    auto* fit_load = app.add_subcommand("fit-loading", "fit P_max (1 - exp(-t/tau)) to t_s,p rows");
    fit_load->add_option("file", fit_file, "data file")->required();
    auto* fit_store = app.add_subcommand("fit-storage", "fit A exp(-t/tau) + C to t_s,p rows");
    fit_store->add_option("file", fit_file, "data file")->required();
    bool two_exp = false;
    fit_store->add_flag("--two-exponential", two_exp, "slow population decays with tau2 >= 10 s");

    auto* est = app.add_subcommand("estimate-n", "Poisson inversion of a detection probability");
    bind(est, {{"--p", "p_detect"}});

    auto* sim = app.add_subcommand("simulate-cycles", "Monte Carlo detection cycles");
    std::string histogram_path;
    sim->add_option("--histogram", histogram_path, "also write the readout histogram here");
    bind(sim, {{"--n-mean", "n_mean"}, {"--cycles", "cycles"}, {"--t-load-us", "t_load_us"}});

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        Config cfg = config_path.empty() ? Config::from_profile() : Config::parse(read_file(config_path), config_path);
        for (const auto& kv : overrides) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) {
                throw etrap::ConfigError("--set expects key=value, got '" + kv + "'");
            }
            cfg.set(etrap::config::trim(kv.substr(0, eq)), etrap::config::trim(kv.substr(eq + 1)));
        }
        if (seed) {
            cfg.set("seed", *seed);
        }
        if (workers) {
            cfg.set("workers", std::to_string(*workers));
        }
        for (const auto& [sub, flags] : flag_sets) {
            if (!sub->parsed()) {
                continue;
            }
            for (const auto& f : flags) {
                if (f.value) {
                    cfg.set(f.key, *f.value);
                }
            }
        }
        if (sweep->parsed() && !grid.empty()) {
            const auto x = grid.find('x');
            if (x == std::string::npos) {
                throw etrap::ConfigError("--grid expects NxM, got '" + grid + "'");
            }
            cfg.set("grid_distances", grid.substr(0, x));
            cfg.set("grid_phases", grid.substr(x + 1));
        }
        if (fit_store->parsed() && two_exp) {
            cfg.set("storage_two_exponential", "true");
        }

        std::ofstream file;
        if (!out_path.empty()) {
            file.open(out_path);
            if (!file) {
                throw etrap::ConfigError("cannot write '" + out_path + "'");
            }
        }
        std::ostream& os = out_path.empty() ? std::cout : file;

        if (traj->parsed()) {
            return run_trajectory(cfg, os);
        }
        if (sweep->parsed()) {
            return run_sweep(cfg, os);
        }
        if (tickle->parsed()) {
            return run_tickle(cfg, os);
        }
        if (stab->parsed()) {
            return run_stability(cfg, os);
        }
        if (cal->parsed()) {
            return run_calibrate(cfg, os);
        }
        if (fit_load->parsed() || fit_store->parsed()) {
            return run_fit(cfg, fit_file, fit_store->parsed(), os);
        }
        if (est->parsed()) {
            return run_estimate(cfg, os);
        }
        if (sim->parsed()) {
            return run_simulate(cfg, os, histogram_path);
        }
        return 2;
    } catch (const etrap::ConfigError& e) {
        std::cerr << "etrap: config error: " << e.what() << '\n';
        return 2;
    } catch (const etrap::InvalidArgument& e) {
        std::cerr << "etrap: invalid argument: " << e.what() << '\n';
        return 2;
    } catch (const etrap::DomainError& e) {
        std::cerr << "etrap: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "etrap: " << e.what() << '\n';
        return 1;
    }
}
