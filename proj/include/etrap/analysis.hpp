// SPDX-License-Identifier: Apache-2.0
#pragma once

// Motion extraction from trajectories, the (ionization distance x drive
// phase) storage map, and tickle spectroscopy.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "etrap/dynamics.hpp"
#include "etrap/error.hpp"
#include "etrap/model.hpp"
#include "etrap/parallel.hpp"
#include "etrap/spectrum.hpp"
#include "etrap/units.hpp"
#include "etrap/version.hpp"

namespace etrap {

struct MotionSummary {
    double secular_frequency = 0.0;  // Hz
    double amplitude = 0.0;          // m
    std::optional<int> lock_order;
    double spectral_peak_height = 0.0;
    double bin_width = 0.0;  // Hz, spectral resolution behind secular_frequency
};

/// Fraction of a trajectory dropped before any extraction (micromotion ring-in).
inline constexpr double transient_fraction = 0.1;

namespace detail {

inline std::size_t transient_samples(const Trajectory& traj)
{
    return static_cast<std::size_t>(std::floor(transient_fraction * static_cast<double>(traj.size())));
}

}  // namespace detail

/// Secular frequency (Hz) and peak height from the x series after the
/// transient, restricted to f < Omega / (3 * 2 pi).
inline SpectralPeak extract_secular_frequency(const Trajectory& traj, double omega_drive)
{
    detail::require(omega_drive > 0.0, "drive omega must be positive");
    detail::require(traj.sample_interval > 0.0, "trajectory sample interval must be positive");
    const double f_drive = units::hertz(omega_drive);
    detail::require(0.5 / traj.sample_interval > f_drive / 3.0,
                    "trajectory decimation leaves no Nyquist margin below Omega/3");
    const std::size_t skip = detail::transient_samples(traj);
    std::vector<double> x;
    x.reserve(traj.size() - skip);
    for (std::size_t i = skip; i < traj.size(); ++i) {
        x.push_back(traj.positions[i].x);
    }
    detail::require(x.size() >= 16, "trajectory too short for spectral analysis");
    const SpectralPeak peak = dominant_frequency(x, traj.sample_interval, f_drive / 3.0);
    const double span = static_cast<double>(x.size()) * traj.sample_interval;
    detail::require(span * peak.frequency >= 16.0, "trajectory spans fewer than 16 secular cycles");
    return peak;
}

/// Largest |x| after the transient.
inline double extract_amplitude(const Trajectory& traj)
{
    detail::require(traj.size() > 0, "trajectory is empty");
    double amp = 0.0;
    for (std::size_t i = detail::transient_samples(traj); i < traj.size(); ++i) {
        amp = std::max(amp, std::fabs(traj.positions[i].x));
    }
    return amp;
}

/// Smallest n in [2, n_max] with |freq - f_drive / n| <= tolerance.
inline std::optional<int> detect_subharmonic_lock(double freq, double omega_drive, double tolerance, int n_max)
{
    detail::require(freq > 0.0 && std::isfinite(freq), "frequency must be positive");
    detail::require(tolerance > 0.0, "tolerance must be positive");
    detail::require(n_max >= 2, "n_max must be >= 2");
    const double f_drive = units::hertz(omega_drive);
    for (int n = 2; n <= n_max; ++n) {
        if (std::fabs(freq - f_drive / n) <= tolerance) {
            return n;
        }
    }
    return std::nullopt;
}

inline MotionSummary summarize_motion(const Trajectory& traj, double omega_drive, double lock_tolerance_bins,
                                      int lock_max_order)
{
    const SpectralPeak peak = extract_secular_frequency(traj, omega_drive);
    MotionSummary s;
    s.secular_frequency = peak.frequency;
    s.spectral_peak_height = peak.height;
    s.bin_width = peak.bin_width;
    s.amplitude = extract_amplitude(traj);
    s.lock_order = detect_subharmonic_lock(peak.frequency, omega_drive, lock_tolerance_bins * peak.bin_width,
                                           lock_max_order);
    return s;
}

struct SweepSpec {
    double distance_min = 5.0 * units::um;
    double distance_max = 500.0 * units::um;
    int distance_count = 100;
    int phase_count = 50;  // phases 2 pi j / phase_count
    TerminationSpec term{};
    FieldModel model = HarmonicRF1D{};
    DriveSpec drive{};
    ParticleSpec particle{};
    unsigned workers = 1;
    double lock_tolerance_bins = 3.0;
    int lock_max_order = 12;
    std::uint64_t seed = 0;

    double distance(int i) const
    {
        return distance_min + (distance_max - distance_min) * static_cast<double>(i) / (distance_count - 1);
    }
    double phase(int j) const { return two_pi * static_cast<double>(j) / phase_count; }

    void validate() const
    {
        detail::require(distance_count >= 2 && phase_count >= 2, "sweep axes need at least 2 points");
        detail::require(std::isfinite(distance_min) && std::isfinite(distance_max) && distance_max > distance_min,
                        "distance axis must be strictly increasing");
        detail::require(lock_tolerance_bins > 0.0, "lock tolerance must be positive");
        detail::require(lock_max_order >= 2, "lock order limit must be >= 2");
        term.validate();
        validate_model();
    }

  private:
    void validate_model() const
    {
        etrap::validate(model);
        drive.validate();
        particle.validate();
    }
};

struct SweepCell {
    SimOutcome outcome;  // trajectory not retained
    std::optional<MotionSummary> summary;
    bool diverged = false;
};

struct SweepMap {
    SweepSpec spec;
    std::vector<SweepCell> cells;  // distance-major: index = i * phase_count + j
    std::string code_version = version_string;

    const SweepCell& cell(int distance_index, int phase_index) const
    {
        return cells[static_cast<std::size_t>(distance_index) * spec.phase_count + phase_index];
    }
};

/// Integrate every (x0, phi) cell from rest. Capped cells get a MotionSummary
/// from the trajectory recorded during the same run; the trajectory is
/// dropped as soon as the cell finishes so memory stays bounded. Diverged
/// cells are flagged. Work is split by distance row; results do not depend
/// on the worker count.
inline SweepMap run_sweep(const SweepSpec& spec)
{
    spec.validate();
    TerminationSpec term = spec.term;
    term.record_trajectory = true;

    auto run_row = [&](std::size_t i) {
        std::vector<InitialCondition> inits(static_cast<std::size_t>(spec.phase_count));
        for (int j = 0; j < spec.phase_count; ++j) {
            inits[static_cast<std::size_t>(j)].position = Vec3{spec.distance(static_cast<int>(i)), 0.0, 0.0};
            inits[static_cast<std::size_t>(j)].phase = spec.phase(j);
        }
        std::vector<SweepCell> row(inits.size());
        integrate_each(spec.model, spec.drive, spec.particle, inits, term, [&](std::size_t j, BatchOutcome&& b) {
            SweepCell& cell = row[j];
            cell.diverged = b.diverged;
            cell.outcome = std::move(b.outcome);
            if (cell.outcome.capped && cell.outcome.trajectory) {
                try {
                    cell.summary = summarize_motion(*cell.outcome.trajectory, spec.drive.omega,
                                                    spec.lock_tolerance_bins, spec.lock_max_order);
                } catch (const NoSecularMotion&) {
                    // At rest on the axis: nothing to summarize.
                }
            }
            cell.outcome.trajectory.reset();
        });
        return row;
    };

    SweepMap map;
    map.spec = spec;
    const auto rows = parallel_map(static_cast<std::size_t>(spec.distance_count), spec.workers, run_row);
    map.cells.reserve(static_cast<std::size_t>(spec.distance_count) * spec.phase_count);
    for (const auto& row : rows) {
        map.cells.insert(map.cells.end(), row.begin(), row.end());
    }
    return map;
}

class OffGridPhase : public InvalidArgument {
  public:
    OffGridPhase(double requested, double nearest, int nearest_index)
        : InvalidArgument("phase " + std::to_string(requested) + " rad is not on the sweep grid; nearest grid phase is "
                          + std::to_string(nearest) + " rad (index " + std::to_string(nearest_index) + ")"),
          nearest_(nearest), nearest_index_(nearest_index)
    {
    }
    double nearest() const { return nearest_; }
    int nearest_index() const { return nearest_index_; }

  private:
    double nearest_;
    int nearest_index_;
};

/// Index of the grid phase closest to `phase` (circular distance).
inline int nearest_phase_index(const SweepSpec& spec, double phase)
{
    double p = std::fmod(phase, two_pi);
    if (p < 0.0) {
        p += two_pi;
    }
    const int j = static_cast<int>(std::lround(p / two_pi * spec.phase_count)) % spec.phase_count;
    return j;
}

struct SliceRow {
    double distance = 0.0;
    double storage_time = 0.0;
    bool capped = false;
    double amplitude = std::numeric_limits<double>::quiet_NaN();
    double frequency = std::numeric_limits<double>::quiet_NaN();
    std::optional<int> lock_order;
};

struct PhaseSlice {
    double phase = 0.0;
    int phase_index = 0;
    std::vector<SliceRow> rows;
};

/// Amplitude and frequency versus x0 at one grid phase.
inline PhaseSlice phase_slice(const SweepMap& map, double phase)
{
    detail::require_finite(phase, "phase");
    const int j = nearest_phase_index(map.spec, phase);
    double p = std::fmod(phase, two_pi);
    if (p < 0.0) {
        p += two_pi;
    }
    double gap = std::fabs(p - map.spec.phase(j));
    gap = std::min(gap, two_pi - gap);
    if (gap > 1e-9 * two_pi) {
        throw OffGridPhase(phase, map.spec.phase(j), j);
    }
    PhaseSlice slice;
    slice.phase = map.spec.phase(j);
    slice.phase_index = j;
    for (int i = 0; i < map.spec.distance_count; ++i) {
        const SweepCell& c = map.cell(i, j);
        SliceRow row;
        row.distance = map.spec.distance(i);
        row.storage_time = c.outcome.storage_time;
        row.capped = c.outcome.capped;
        if (c.summary) {
            row.amplitude = c.summary->amplitude;
            row.frequency = c.summary->secular_frequency;
            row.lock_order = c.summary->lock_order;
        }
        slice.rows.push_back(row);
    }
    return slice;
}

/// Per-phase structure of the loss boundary.
struct PhaseBoundary {
    int phase_index = 0;
    std::optional<int> first_loss;        // first non-capped distance index
    std::optional<int> last_stable;       // first_loss - 1 when that cell is capped with a summary
    std::optional<double> last_stable_frequency;
    std::optional<double> last_stable_amplitude;
    std::optional<int> lock_onset;        // first distance index with the requested lock order
    std::optional<double> onset_amplitude_ratio;  // amplitude(onset) / amplitude(onset - 1)
    std::optional<int> first_jump;        // first index with amplitude ratio above the jump threshold
};

inline PhaseBoundary analyze_phase(const SweepMap& map, int j, int lock_order, double jump_ratio)
{
    PhaseBoundary b;
    b.phase_index = j;
    const int n = map.spec.distance_count;
    for (int i = 0; i < n; ++i) {
        if (!map.cell(i, j).outcome.capped) {
            b.first_loss = i;
            break;
        }
    }
    if (b.first_loss && *b.first_loss > 0) {
        const SweepCell& c = map.cell(*b.first_loss - 1, j);
        if (c.summary) {
            b.last_stable = *b.first_loss - 1;
            b.last_stable_frequency = c.summary->secular_frequency;
            b.last_stable_amplitude = c.summary->amplitude;
        }
    }
    const int limit = b.first_loss.value_or(n);
    for (int i = 1; i < limit; ++i) {
        const auto& prev = map.cell(i - 1, j).summary;
        const auto& cur = map.cell(i, j).summary;
        if (!prev || !cur || prev->amplitude <= 0.0) {
            continue;
        }
        const double ratio = cur->amplitude / prev->amplitude;
        if (!b.first_jump && ratio > jump_ratio) {
            b.first_jump = i;
        }
        if (!b.lock_onset && cur->lock_order == lock_order && prev->lock_order != lock_order) {
            b.lock_onset = i;
            b.onset_amplitude_ratio = ratio;
        }
    }
    return b;
}

/// Delimited SweepMap export with a header block echoing the spec.
inline void write_sweep(std::ostream& os, const SweepMap& map, const std::vector<std::string>& header = {})
{
    const SweepSpec& s = map.spec;
    char buf[256];
    os << "# etrap sweep map\n";
    os << "# code_version = " << map.code_version << '\n';
    os << "# seed = " << s.seed << '\n';
    std::snprintf(buf, sizeof buf, "# distance_um = %.10g .. %.10g (%d points)\n", s.distance_min / units::um,
                  s.distance_max / units::um, s.distance_count);
    os << buf;
    std::snprintf(buf, sizeof buf, "# phase_rad = 2 pi j / %d (%d points)\n", s.phase_count, s.phase_count);
    os << buf;
    std::snprintf(buf, sizeof buf, "# time_cap_s = %.10g, escape_radius_um = %.10g, steps_per_period = %d\n",
                  s.term.time_cap, s.term.escape_radius / units::um, s.term.steps_per_period);
    os << buf;
    for (const auto& line : header) {
        os << "# " << line << '\n';
    }
    os << "x0_um,phase_rad,storage_time_s,escaped,capped,secular_MHz,amplitude_um,lock_order\n";
    for (int i = 0; i < s.distance_count; ++i) {
        for (int j = 0; j < s.phase_count; ++j) {
            const SweepCell& c = map.cell(i, j);
            const double f = c.summary ? c.summary->secular_frequency / units::MHz : std::nan("");
            const double a = c.summary ? c.summary->amplitude / units::um : std::nan("");
            const int lock = c.summary && c.summary->lock_order ? *c.summary->lock_order : 0;
            std::snprintf(buf, sizeof buf, "%.10g,%.10g,%.10g,%d,%d,%.10g,%.10g,%d\n", s.distance(i) / units::um,
                          s.phase(j), c.outcome.storage_time, c.outcome.escaped ? 1 : 0, c.outcome.capped ? 1 : 0, f,
                          a, lock);
            os << buf;
        }
    }
}

// ---------------------------------------------------------------------------
// Tickle spectroscopy

struct Dip {
    double center = 0.0;  // Hz
    double depth = 0.0;   // survival drop below baseline
    double width = 0.0;   // Hz, full width at half depth
};

struct TickleSpectrum {
    std::vector<double> frequencies;  // Hz
    std::vector<double> survival;
    std::vector<bool> in_dip;
    std::vector<Dip> dips;
    double baseline = 1.0;
    double sigma = 0.0;
    std::size_t ensemble_size = 0;
};

struct TickleScanSpec {
    double f_min = 20.0 * units::MHz;
    double f_max = 350.0 * units::MHz;
    double f_step = 1.0 * units::MHz;
    double amplitude = 0.0;  // V/m
    double duration = 2.0 * units::us;
    Vec3 direction{1.0 / std::numbers::sqrt2, 0.0, 1.0 / std::numbers::sqrt2};
    double escape_radius = 500.0 * units::um;
    int steps_per_period = 128;
    unsigned workers = 1;

    std::vector<double> frequencies() const
    {
        const long n = static_cast<long>(std::floor((f_max - f_min) / f_step + 1e-9)) + 1;
        std::vector<double> f(static_cast<std::size_t>(n));
        for (long k = 0; k < n; ++k) {
            f[static_cast<std::size_t>(k)] = f_min + static_cast<double>(k) * f_step;
        }
        return f;
    }

    void validate() const
    {
        detail::require(std::isfinite(f_min) && std::isfinite(f_max) && f_min > 0.0 && f_max >= f_min,
                        "tickle scan needs 0 < f_min <= f_max");
        detail::require(f_step > 0.0 && std::isfinite(f_step), "tickle step must be positive");
        detail::require(amplitude >= 0.0 && std::isfinite(amplitude), "tickle amplitude must be >= 0");
        detail::require(duration > 0.0 && std::isfinite(duration), "tickle duration must be positive");
    }
};

class InvalidEnsemble : public DomainError {
  public:
    using DomainError::DomainError;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

inline double unit_interval(std::uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1.0p-53; }

}  // namespace detail

/// Low-discrepancy (additive recurrence) spread of starting points in
/// [-half_extent, half_extent] per axis, at rest, with stratified phases.
inline std::vector<InitialCondition> make_tickle_ensemble(std::size_t count, const Vec3& half_extent,
                                                          std::uint64_t seed)
{
    detail::require(count >= 1, "ensemble needs at least one member");
    // Generalized golden ratio for 4 dimensions: root of x^5 = x + 1.
    constexpr double g = 1.1673039782614187;
    const double alpha[4] = {1.0 / g, 1.0 / (g * g), 1.0 / (g * g * g), 1.0 / (g * g * g * g)};
    double offset[4];
    std::uint64_t state = seed;
    for (double& o : offset) {
        state = detail::splitmix64(state);
        o = detail::unit_interval(state);
    }
    std::vector<InitialCondition> ensemble(count);
    for (std::size_t i = 0; i < count; ++i) {
        double u[4];
        for (int d = 0; d < 4; ++d) {
            const double v = offset[d] + static_cast<double>(i + 1) * alpha[d];
            u[d] = v - std::floor(v);
        }
        ensemble[i].position = Vec3{(2.0 * u[0] - 1.0) * half_extent.x, (2.0 * u[1] - 1.0) * half_extent.y,
                                    (2.0 * u[2] - 1.0) * half_extent.z};
        ensemble[i].phase = two_pi * (static_cast<double>(i) + u[3]) / static_cast<double>(count);
    }
    return ensemble;
}

/// Dips: contiguous runs below median - 3 sigma. sigma is the larger of the
/// MAD-based spread, the binomial error at the baseline and 1/N.
inline std::vector<Dip> detect_dips(const std::vector<double>& frequencies, const std::vector<double>& survival,
                                    std::size_t ensemble_size, double* baseline_out = nullptr,
                                    double* sigma_out = nullptr, std::vector<bool>* in_dip_out = nullptr)
{
    detail::require(frequencies.size() == survival.size() && !survival.empty(), "mismatched spectrum axes");
    detail::require(ensemble_size >= 1, "ensemble size must be positive");
    const std::size_t n = survival.size();
    std::vector<double> sorted = survival;
    std::sort(sorted.begin(), sorted.end());
    const double baseline = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    std::vector<double> dev(n);
    for (std::size_t k = 0; k < n; ++k) {
        dev[k] = std::fabs(survival[k] - baseline);
    }
    std::sort(dev.begin(), dev.end());
    const double mad = n % 2 ? dev[n / 2] : 0.5 * (dev[n / 2 - 1] + dev[n / 2]);
    const double nn = static_cast<double>(ensemble_size);
    const double sigma = std::max({1.4826 * mad, std::sqrt(baseline * (1.0 - baseline) / nn), 1.0 / nn});
    const double threshold = baseline - 3.0 * sigma;
    const double step = n > 1 ? frequencies[1] - frequencies[0] : 0.0;

    std::vector<Dip> dips;
    std::vector<bool> in_dip(n, false);
    std::size_t k = 0;
    while (k < n) {
        if (survival[k] >= threshold) {
            ++k;
            continue;
        }
        std::size_t end = k;
        std::size_t lowest = k;
        while (end < n && survival[end] < threshold) {
            in_dip[end] = true;
            if (survival[end] < survival[lowest]) {
                lowest = end;
            }
            ++end;
        }
        // A saturated dip has a flat bottom; centre on it.
        std::size_t last_lowest = lowest;
        for (std::size_t j = lowest; j < end; ++j) {
            if (survival[j] == survival[lowest]) {
                last_lowest = j;
            }
        }
        Dip d;
        d.center = 0.5 * (frequencies[lowest] + frequencies[last_lowest]);
        d.depth = baseline - survival[lowest];
        const double half = baseline - 0.5 * d.depth;
        std::size_t lo = lowest;
        while (lo > 0 && survival[lo - 1] <= half) {
            --lo;
        }
        std::size_t hi = lowest;
        while (hi + 1 < n && survival[hi + 1] <= half) {
            ++hi;
        }
        d.width = static_cast<double>(hi - lo + 1) * step;
        dips.push_back(d);
        k = end;
    }
    if (baseline_out) {
        *baseline_out = baseline;
    }
    if (sigma_out) {
        *sigma_out = sigma;
    }
    if (in_dip_out) {
        *in_dip_out = std::move(in_dip);
    }
    return dips;
}

/// Survival fraction versus tickle frequency for an ensemble in a 3D model.
/// The tickle is on for the whole duration; survival = capped / total.
inline TickleSpectrum tickle_scan(const std::vector<InitialCondition>& ensemble, const FieldModel& model,
                                  const DriveSpec& drive, const ParticleSpec& particle, const TickleScanSpec& scan)
{
    scan.validate();
    detail::require(!ensemble.empty(), "tickle ensemble is empty");
    detail::require(is_three_dimensional(model), "tickle scans need a 3D separable model");

    TerminationSpec term;
    term.time_cap = scan.duration;
    term.escape_radius = scan.escape_radius;
    term.steps_per_period = scan.steps_per_period;

    const auto untickled = parallel_map(ensemble.size(), scan.workers, [&](std::size_t m) {
        return integrate(model, drive, particle, ensemble[m], term).capped;
    });
    if (std::find(untickled.begin(), untickled.end(), false) != untickled.end()) {
        throw InvalidEnsemble("ensemble is not stable without tickle over the scan duration");
    }

    TickleSpectrum spec;
    spec.ensemble_size = ensemble.size();
    spec.frequencies = scan.frequencies();
    const std::size_t nf = spec.frequencies.size();
    const std::size_t nm = ensemble.size();

    if (scan.amplitude == 0.0) {
        // A zero-amplitude tone leaves every run identical to the check above.
        spec.survival.assign(nf, 1.0);
    } else {
        const auto capped = parallel_map(nf * nm, scan.workers, [&](std::size_t index) {
            TickleSpec t;
            t.omega = units::angular(spec.frequencies[index / nm]);
            t.field_amplitude = scan.amplitude;
            t.direction = scan.direction;
            return integrate(model, drive, particle, ensemble[index % nm], term, t).capped;
        });
        spec.survival.resize(nf);
        for (std::size_t k = 0; k < nf; ++k) {
            std::size_t alive = 0;
            for (std::size_t m = 0; m < nm; ++m) {
                alive += capped[k * nm + m] ? 1 : 0;
            }
            spec.survival[k] = static_cast<double>(alive) / static_cast<double>(nm);
        }
    }
    spec.dips = detect_dips(spec.frequencies, spec.survival, nm, &spec.baseline, &spec.sigma, &spec.in_dip);
    return spec;
}

/// Delimited export freq_MHz,survival,is_dip.
inline void write_tickle(std::ostream& os, const TickleSpectrum& s, const std::vector<std::string>& header = {})
{
    for (const auto& line : header) {
        os << "# " << line << '\n';
    }
    char buf[128];
    for (const Dip& d : s.dips) {
        std::snprintf(buf, sizeof buf, "# dip center_MHz = %.10g depth = %.6g width_MHz = %.6g\n",
                      d.center / units::MHz, d.depth, d.width / units::MHz);
        os << buf;
    }
    os << "freq_MHz,survival,is_dip\n";
    for (std::size_t k = 0; k < s.frequencies.size(); ++k) {
        std::snprintf(buf, sizeof buf, "%.10g,%.10g,%d\n", s.frequencies[k] / units::MHz, s.survival[k],
                      s.in_dip[k] ? 1 : 0);
        os << buf;
    }
}

}  // namespace etrap
