// SPDX-License-Identifier: Apache-2.0
#pragma once

// Single-electron equation of motion m r'' = q E(r, t) in a trap field model,
// with optional tickle tone and piecewise-constant drive-amplitude noise.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "etrap/error.hpp"
#include "etrap/integrator.hpp"
#include "etrap/model.hpp"
#include "etrap/units.hpp"
#include "etrap/vec3.hpp"

namespace etrap {

struct InitialCondition {
    Vec3 position;
    Vec3 velocity;
    double phase = 0.0;  // drive phase at t = 0, rad

    /// Phase folded into [0, 2 pi).
    double normalized_phase() const
    {
        double p = std::fmod(phase, two_pi);
        if (p < 0.0) {
            p += two_pi;
        }
        return p >= two_pi ? 0.0 : p;
    }

    void validate() const
    {
        detail::require(is_finite(position), "initial position must be finite");
        detail::require(is_finite(velocity), "initial velocity must be finite");
        detail::require_finite(phase, "initial phase");
    }
};

struct TerminationSpec {
    double time_cap = 1.0 * units::ms;
    double escape_radius = 500.0 * units::um;  // per axis
    int steps_per_period = 128;
    bool record_trajectory = false;
    int decimation = 0;  // 0 selects the default for spectral work

    /// Stored sample rate must stay >= 4/3 of the drive frequency, which keeps
    /// every sub-drive frequency below Nyquist.
    int effective_decimation() const
    {
        return decimation > 0 ? decimation : std::max(1, 3 * steps_per_period / 4);
    }

    void validate() const
    {
        detail::require_finite(time_cap, "time_cap");
        detail::require_finite(escape_radius, "escape_radius");
        detail::require(time_cap > 0.0, "time_cap must be positive");
        detail::require(escape_radius > 0.0, "escape_radius must be positive");
        detail::require(steps_per_period >= 32, "steps_per_period must be >= 32");
        detail::require(decimation >= 0, "decimation must be >= 0");
    }
};

struct TickleSpec {
    double omega = 0.0;            // rad/s
    double field_amplitude = 0.0;  // V/m
    Vec3 direction{1.0, 0.0, 0.0};
    double t_on = 0.0;
    double t_off = std::numeric_limits<double>::infinity();

    void validate() const
    {
        detail::require_finite(omega, "tickle omega");
        detail::require_finite(field_amplitude, "tickle amplitude");
        detail::require(field_amplitude >= 0.0, "tickle amplitude must be >= 0");
        detail::require(is_finite(direction), "tickle direction must be finite");
        detail::require(std::fabs(norm(direction) - 1.0) <= 1e-9, "tickle direction must be a unit vector");
        detail::require(!std::isnan(t_on) && !std::isnan(t_off) && t_on < t_off, "tickle window needs t_on < t_off");
    }

    bool active(double t) const { return t >= t_on && t < t_off; }
};

struct DriveNoiseSpec {
    double relative_sigma = 0.0;
    int hold_periods = 1;
    std::uint64_t seed = 0;

    void validate() const
    {
        detail::require_finite(relative_sigma, "noise relative_sigma");
        detail::require(relative_sigma >= 0.0, "noise relative_sigma must be >= 0");
        detail::require(hold_periods >= 1, "noise hold_periods must be >= 1");
    }
};

/// Decimated position samples; sample i is at time i * sample_interval.
struct Trajectory {
    int decimation = 1;
    double sample_interval = 0.0;  // s
    std::vector<Vec3> positions;

    double time(std::size_t i) const { return static_cast<double>(i) * sample_interval; }
    std::size_t size() const { return positions.size(); }
};

struct SimOutcome {
    double storage_time = 0.0;
    bool escaped = false;
    bool capped = false;
    Vec3 final_position;
    Vec3 final_velocity;
    std::optional<Trajectory> trajectory;
};

class IntegrationDiverged : public DomainError {
  public:
    IntegrationDiverged(double last_valid_time)
        : DomainError("integration diverged after t = " + std::to_string(last_valid_time) + " s"),
          last_valid_time_(last_valid_time)
    {
    }
    double last_valid_time() const { return last_valid_time_; }

  private:
    double last_valid_time_;
};

/// q [E_rf (1 + noise) cos(Omega t + phase) + E_tickle cos(omega_t t) + E_static], in newtons.
inline Vec3 total_force(const FieldModel& model, const DriveSpec& drive, const ParticleSpec& particle,
                        const Vec3& position, double time, double phase,
                        const std::optional<TickleSpec>& tickle = std::nullopt, double noise_epsilon = 0.0)
{
    detail::require(is_finite(position), "position must be finite");
    detail::require_finite(time, "time");
    detail::require_finite(phase, "phase");
    detail::require_finite(noise_epsilon, "noise epsilon");
    Vec3 e = rf_envelope(model, position) * (drive.amplitude_scale * std::cos(drive.omega * time + phase));
    if (noise_epsilon != 0.0) {
        e *= 1.0 + noise_epsilon;
    }
    e += static_field(model, position);
    if (tickle && tickle->active(time)) {
        e += tickle->direction * (tickle->field_amplitude * std::cos(tickle->omega * time));
    }
    return e * particle.charge;
}

namespace detail {

/// Amplitude multiplier epsilon, resampled every hold period from N(0, sigma).
class AmplitudeNoise {
  public:
    AmplitudeNoise(const std::optional<DriveNoiseSpec>& spec, long steps_per_hold)
        : sigma_(spec ? spec->relative_sigma : 0.0), steps_per_hold_(steps_per_hold),
          engine_(spec ? spec->seed : 0)
    {
    }

    bool enabled() const { return sigma_ > 0.0; }

    /// Epsilon for the step starting at index `step`; steps must be visited in order.
    double at(long step)
    {
        if (!enabled()) {
            return 0.0;
        }
        if (step % steps_per_hold_ == 0) {
            current_ = sigma_ * normal_(engine_);
        }
        return current_;
    }

  private:
    double sigma_;
    long steps_per_hold_;
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    double current_ = 0.0;
};

inline double max_abs(double x) { return std::fabs(x); }
inline double max_abs(const Vec3& r) { return std::max({std::fabs(r.x), std::fabs(r.y), std::fabs(r.z)}); }
inline Vec3 as_vec3(double x) { return Vec3{x, 0.0, 0.0}; }
inline Vec3 as_vec3(const Vec3& r) { return r; }
inline bool finite_state(double x) { return std::isfinite(x); }
inline bool finite_state(const Vec3& r) { return is_finite(r); }

// Fraction of the last step at which the state first left the box.
inline double crossing_fraction(double a, double b, double radius)
{
    const double fa = std::fabs(a);
    const double fb = std::fabs(b);
    if (fb <= radius) {
        return 1.0;
    }
    if (fa >= radius || fb == fa) {
        return 0.0;
    }
    return (radius - fa) / (fb - fa);
}
inline double crossing_fraction(const Vec3& a, const Vec3& b, double radius)
{
    return std::min({crossing_fraction(a.x, b.x, radius), crossing_fraction(a.y, b.y, radius),
                     crossing_fraction(a.z, b.z, radius)});
}

/// Fixed-step driver shared by the 1D and 3D paths.
///
/// `accel(rf_cos, tickle_cos, noise, r)` returns the acceleration; rf_cos is
/// the scaled drive factor at the stage time, tickle_cos the tickle factor
/// (0 outside the window).
template <class T, class Accel>
SimOutcome run_fixed_step(PhaseSpace<T> y, const Accel& accel, const DriveSpec& drive, double phase,
                          const TerminationSpec& term, const std::optional<TickleSpec>& tickle,
                          const std::optional<DriveNoiseSpec>& noise)
{
    const int spp = term.steps_per_period;
    const int table_size = 2 * spp;
    const double h = drive.period() / spp;
    std::vector<double> rf_table(table_size);
    for (int j = 0; j < table_size; ++j) {
        rf_table[j] = drive.amplitude_scale * std::cos(phase + two_pi * j / table_size);
    }

    const long steps = static_cast<long>(std::floor(term.time_cap / h * (1.0 + 1e-12)));
    const int decimation = term.effective_decimation();
    const double radius = term.escape_radius;

    AmplitudeNoise noise_process(noise, static_cast<long>(noise ? noise->hold_periods : 1) * spp);

    SimOutcome out;
    if (term.record_trajectory) {
        Trajectory traj;
        traj.decimation = decimation;
        traj.sample_interval = h * decimation;
        traj.positions.reserve(static_cast<std::size_t>(steps / decimation + 2));
        out.trajectory = std::move(traj);
    }

    if (max_abs(y.r) > radius) {
        out.escaped = true;
        out.storage_time = 0.0;
        out.final_position = as_vec3(y.r);
        out.final_velocity = as_vec3(y.v);
        return out;
    }

    const bool tickled = tickle.has_value() && tickle->field_amplitude != 0.0;
    for (long i = 0; i < steps; ++i) {
        if (out.trajectory && i % decimation == 0) {
            out.trajectory->positions.push_back(as_vec3(y.r));
        }
        const double t0 = static_cast<double>(i) * h;
        const int base = static_cast<int>((2 * i) % table_size);
        const double eps = noise_process.at(i);
        double tickle_cos[3] = {0.0, 0.0, 0.0};
        if (tickled) {
            for (int s = 0; s < 3; ++s) {
                const double ts = t0 + 0.5 * h * s;
                tickle_cos[s] = tickle->active(ts) ? std::cos(tickle->omega * ts) : 0.0;
            }
        }
        auto deriv = [&](int stage, const PhaseSpace<T>& s) {
            const double c = rf_table[(base + stage) % table_size];
            return PhaseSpace<T>{s.v, accel(c, tickle_cos[stage], eps, s.r)};
        };
        const PhaseSpace<T> next = rk4_step(deriv, y, h);
        if (!finite_state(next.r) || !finite_state(next.v)) {
            throw IntegrationDiverged(t0);
        }
        if (max_abs(next.r) > radius) {
            out.escaped = true;
            out.storage_time = std::min(term.time_cap, t0 + h * crossing_fraction(y.r, next.r, radius));
            out.final_position = as_vec3(next.r);
            out.final_velocity = as_vec3(next.v);
            return out;
        }
        y = next;
    }
    out.capped = true;
    out.storage_time = term.time_cap;
    out.final_position = as_vec3(y.r);
    out.final_velocity = as_vec3(y.v);
    return out;
}

inline bool is_1d_model(const FieldModel& m) { return !is_three_dimensional(m); }

/// Calls fn(FixedAnharmonic1D<Power, Q>) when the model matches one of the
/// compiled shapes (orders 1 to 2 in quarter steps).
template <int Power, int Quarters = 4, class Fn>
bool with_fixed_shape(const Anharmonic1D& m, const Fn& fn)
{
    if constexpr (Quarters > 8) {
        return false;
    } else {
        if (m.rolloff_power == Power && order_quarters(m.rolloff_order) == Quarters) {
            fn(FixedAnharmonic1D<Power, Quarters>{m});
            return true;
        }
        return with_fixed_shape<Power, Quarters + 1>(m, fn);
    }
}

}  // namespace detail

/// Integrate one trajectory with RK4 at h = 2 pi / (Omega * steps_per_period).
///
/// Escape is the first step at which any |coordinate| exceeds the escape
/// radius; storage_time is then linearly interpolated within that step.
inline SimOutcome integrate(const FieldModel& model, const DriveSpec& drive, const ParticleSpec& particle,
                            const InitialCondition& init, const TerminationSpec& term,
                            const std::optional<TickleSpec>& tickle = std::nullopt,
                            const std::optional<DriveNoiseSpec>& noise = std::nullopt)
{
    validate(model);
    drive.validate();
    particle.validate();
    init.validate();
    term.validate();
    if (tickle) {
        tickle->validate();
    }
    if (noise) {
        noise->validate();
    }
    detail::require(term.escape_radius <= validity_radius(model), "escape radius exceeds the model validity domain");

    const double qm = particle.charge / particle.mass;
    const double phase = init.normalized_phase();
    const double tickle_amp = tickle ? tickle->field_amplitude : 0.0;
    const Vec3 tickle_dir = tickle ? tickle->direction : Vec3{};

    const bool planar_start = init.position.y == 0.0 && init.position.z == 0.0 && init.velocity.y == 0.0
                              && init.velocity.z == 0.0;
    const bool tickle_along_x = tickle_amp == 0.0 || (tickle_dir.y == 0.0 && tickle_dir.z == 0.0);

    if (detail::is_1d_model(model) && planar_start && tickle_along_x) {
        // Motion stays on the x axis; integrate the scalar equation.
        const double tx = tickle_amp * tickle_dir.x;
        auto run = [&](const auto& radial) {
            auto accel = [&](double rf, double tc, double eps, double x) {
                double e = rf_profile(radial, x) * rf;
                if (eps != 0.0) {
                    e *= 1.0 + eps;
                }
                return qm * (e + tx * tc);
            };
            PhaseSpace<double> y{init.position.x, init.velocity.x};
            return detail::run_fixed_step(y, accel, drive, phase, term, tickle, noise);
        };
        if (const auto* h = std::get_if<HarmonicRF1D>(&model)) {
            return run(*h);
        }
        const auto& a = std::get<Anharmonic1D>(model);
        SimOutcome out;
        auto keep = [&](const auto& fixed) { out = run(fixed); };
        if (detail::with_fixed_shape<1>(a, keep) || detail::with_fixed_shape<2>(a, keep)) {
            return out;
        }
        return run(a);
    }

    const Vec3 tickle_field = tickle_dir * tickle_amp;
    auto accel = [&](double rf, double tc, double eps, const Vec3& r) {
        Vec3 e = rf_envelope(model, r) * rf;
        if (eps != 0.0) {
            e *= 1.0 + eps;
        }
        e += static_field(model, r);
        e += tickle_field * tc;
        return e * qm;
    };
    PhaseSpace<Vec3> y{init.position, init.velocity};
    return detail::run_fixed_step(y, accel, drive, phase, term, tickle, noise);
}

/// Result slot for batched integration: either an outcome or a divergence.
struct BatchOutcome {
    SimOutcome outcome;
    bool diverged = false;
    double diverged_time = 0.0;
};

namespace detail {

inline bool batchable(const FieldModel& model, const InitialCondition& init)
{
    return is_1d_model(model) && init.position.y == 0.0 && init.position.z == 0.0 && init.velocity.y == 0.0
           && init.velocity.z == 0.0;
}

/// Lane-interleaved RK4 over many 1D starts. Every lane repeats the scalar
/// path's arithmetic operation for operation, so each result is
/// bit-identical to integrate(); interleaving only buys instruction-level
/// parallelism. A lane that finishes is refilled with the next start.
template <int Lanes, class Radial, class Done>
void run_lanes_1d(const Radial& radial, const DriveSpec& drive, double qm, const std::vector<InitialCondition>& inits,
                  const TerminationSpec& term, const Done& done)
{
    const int spp = term.steps_per_period;
    const int table_size = 2 * spp;
    const double h = drive.period() / spp;
    const long steps = static_cast<long>(std::floor(term.time_cap / h * (1.0 + 1e-12)));
    const int decimation = term.effective_decimation();
    const double radius = term.escape_radius;

    struct Lane {
        std::size_t index = 0;
        bool active = false;
        long step = 0;
        int base = 0;          // (2 * step) % table_size
        int until_sample = 0;  // steps left before the next recorded sample
        std::vector<double> table;
        std::optional<Trajectory> traj;
    };
    std::array<Lane, Lanes> lanes;
    double x[Lanes] = {};
    double v[Lanes] = {};
    std::size_t next = 0;

    auto finish = [&](int l, SimOutcome out) {
        out.trajectory = std::move(lanes[l].traj);
        lanes[l].traj.reset();
        BatchOutcome b;
        b.outcome = std::move(out);
        done(lanes[l].index, std::move(b));
        lanes[l].active = false;
    };
    // Load the next start into lane l; starts outside the box finish at once.
    auto load = [&](int l) {
        while (next < inits.size()) {
            const std::size_t index = next++;
            const InitialCondition& init = inits[index];
            Lane& lane = lanes[l];
            lane.index = index;
            lane.step = 0;
            lane.base = 0;
            lane.until_sample = 0;
            lane.table.resize(table_size);
            const double phase = init.normalized_phase();
            for (int j = 0; j < table_size; ++j) {
                lane.table[j] = drive.amplitude_scale * std::cos(phase + two_pi * j / table_size);
            }
            if (term.record_trajectory) {
                Trajectory traj;
                traj.decimation = decimation;
                traj.sample_interval = h * decimation;
                traj.positions.reserve(static_cast<std::size_t>(steps / decimation + 2));
                lane.traj = std::move(traj);
            }
            x[l] = init.position.x;
            v[l] = init.velocity.x;
            lane.active = true;
            if (std::fabs(x[l]) > radius) {
                SimOutcome out;
                out.escaped = true;
                out.final_position = as_vec3(x[l]);
                out.final_velocity = as_vec3(v[l]);
                finish(l, std::move(out));
                continue;
            }
            if (steps == 0) {
                SimOutcome out;
                out.capped = true;
                out.storage_time = term.time_cap;
                out.final_position = as_vec3(x[l]);
                out.final_velocity = as_vec3(v[l]);
                finish(l, std::move(out));
                continue;
            }
            return;
        }
    };
    for (int l = 0; l < Lanes; ++l) {
        load(l);
    }

    const Radial model = radial;
    auto accel = [model, qm](double rf, double xx) { return qm * (rf_profile(model, xx) * rf); };
    while (true) {
        bool any = false;
        for (int l = 0; l < Lanes; ++l) {
            any = any || lanes[l].active;
        }
        if (!any) {
            break;
        }
        double c0[Lanes], c1[Lanes], c2[Lanes];
        for (int l = 0; l < Lanes; ++l) {
            if (!lanes[l].active) {
                c0[l] = c1[l] = c2[l] = 0.0;
                x[l] = v[l] = 0.0;
                continue;
            }
            Lane& lane = lanes[l];
            if (lane.until_sample == 0) {
                if (lane.traj) {
                    lane.traj->positions.push_back(as_vec3(x[l]));
                }
                lane.until_sample = decimation;
            }
            --lane.until_sample;
            const int base = lane.base;
            c0[l] = lane.table[base];
            c1[l] = lane.table[base + 1];
            c2[l] = lane.table[base + 2 == table_size ? 0 : base + 2];
            lane.base = base + 2 == table_size ? 0 : base + 2;
        }
        double k1x[Lanes], k1v[Lanes], k2x[Lanes], k2v[Lanes], k3x[Lanes], k3v[Lanes], k4x[Lanes], k4v[Lanes];
        double nx[Lanes], nv[Lanes];
        for (int l = 0; l < Lanes; ++l) {
            k1x[l] = v[l];
            k1v[l] = accel(c0[l], x[l]);
        }
        for (int l = 0; l < Lanes; ++l) {
            k2x[l] = v[l] + (0.5 * h) * k1v[l];
            k2v[l] = accel(c1[l], x[l] + (0.5 * h) * k1x[l]);
        }
        for (int l = 0; l < Lanes; ++l) {
            k3x[l] = v[l] + (0.5 * h) * k2v[l];
            k3v[l] = accel(c1[l], x[l] + (0.5 * h) * k2x[l]);
        }
        for (int l = 0; l < Lanes; ++l) {
            k4x[l] = v[l] + h * k3v[l];
            k4v[l] = accel(c2[l], x[l] + h * k3x[l]);
        }
        for (int l = 0; l < Lanes; ++l) {
            nx[l] = x[l] + (h / 6.0) * (((k1x[l] + 2.0 * k2x[l]) + 2.0 * k3x[l]) + k4x[l]);
            nv[l] = v[l] + (h / 6.0) * (((k1v[l] + 2.0 * k2v[l]) + 2.0 * k3v[l]) + k4v[l]);
        }
        for (int l = 0; l < Lanes; ++l) {
            if (!lanes[l].active) {
                continue;
            }
            const long i = lanes[l].step;
            const double t0 = static_cast<double>(i) * h;
            if (!std::isfinite(nx[l]) || !std::isfinite(nv[l])) {
                BatchOutcome b;
                b.diverged = true;
                b.diverged_time = t0;
                b.outcome.storage_time = t0;
                lanes[l].traj.reset();
                done(lanes[l].index, std::move(b));
                lanes[l].active = false;
                load(l);
                continue;
            }
            if (std::fabs(nx[l]) > radius) {
                SimOutcome out;
                out.escaped = true;
                out.storage_time = std::min(term.time_cap, t0 + h * crossing_fraction(x[l], nx[l], radius));
                out.final_position = as_vec3(nx[l]);
                out.final_velocity = as_vec3(nv[l]);
                finish(l, std::move(out));
                load(l);
                continue;
            }
            x[l] = nx[l];
            v[l] = nv[l];
            lanes[l].step = i + 1;
            if (lanes[l].step == steps) {
                SimOutcome out;
                out.capped = true;
                out.storage_time = term.time_cap;
                out.final_position = as_vec3(x[l]);
                out.final_velocity = as_vec3(v[l]);
                finish(l, std::move(out));
                load(l);
            }
        }
    }
}

}  // namespace detail

/// Integrate many starts without tickle or noise, reporting each result to
/// `done(index, BatchOutcome)` as soon as it finishes (in no particular
/// order). Results equal integrate() bit for bit; diverged runs are
/// reported rather than thrown. 1D models with on-axis starts share
/// interleaved lanes.
template <class Done>
void integrate_each(const FieldModel& model, const DriveSpec& drive, const ParticleSpec& particle,
                    const std::vector<InitialCondition>& inits, const TerminationSpec& term, const Done& done)
{
    validate(model);
    drive.validate();
    particle.validate();
    term.validate();
    detail::require(term.escape_radius <= validity_radius(model), "escape radius exceeds the model validity domain");
    const bool all_batchable = std::all_of(inits.begin(), inits.end(), [&](const InitialCondition& i) {
        i.validate();
        return detail::batchable(model, i);
    });
    if (all_batchable && !inits.empty()) {
        const double qm = particle.charge / particle.mass;
        auto run = [&](const auto& radial) { detail::run_lanes_1d<8>(radial, drive, qm, inits, term, done); };
        if (const auto* h = std::get_if<HarmonicRF1D>(&model)) {
            run(*h);
        } else {
            const auto& a = std::get<Anharmonic1D>(model);
            if (!detail::with_fixed_shape<1>(a, run) && !detail::with_fixed_shape<2>(a, run)) {
                run(a);
            }
        }
        return;
    }
    for (std::size_t k = 0; k < inits.size(); ++k) {
        BatchOutcome b;
        try {
            b.outcome = integrate(model, drive, particle, inits[k], term);
        } catch (const IntegrationDiverged& e) {
            b.diverged = true;
            b.diverged_time = e.last_valid_time();
            b.outcome.storage_time = e.last_valid_time();
        }
        done(k, std::move(b));
    }
}

/// Integrate at steps_per_period and at twice that.
inline std::pair<SimOutcome, SimOutcome> convergence_probe(const FieldModel& model, const DriveSpec& drive,
                                                           const ParticleSpec& particle, const InitialCondition& init,
                                                           const TerminationSpec& term)
{
    TerminationSpec fine = term;
    fine.steps_per_period = 2 * term.steps_per_period;
    if (term.decimation > 0) {
        fine.decimation = 2 * term.decimation;
    }
    return {integrate(model, drive, particle, init, term), integrate(model, drive, particle, init, fine)};
}

/// Propagate from t0 over `duration` (may be negative) in `steps` equal RK4
/// steps, evaluating the drive directly at each stage time. No escape test.
inline PhaseSpace<Vec3> propagate(const FieldModel& model, const DriveSpec& drive, const ParticleSpec& particle,
                                  PhaseSpace<Vec3> state, double t0, double phase, double duration, long steps)
{
    detail::require(steps > 0, "steps must be positive");
    const double h = duration / static_cast<double>(steps);
    const double qm = particle.charge / particle.mass;
    for (long i = 0; i < steps; ++i) {
        const double ti = t0 + static_cast<double>(i) * h;
        auto deriv = [&](int stage, const PhaseSpace<Vec3>& s) {
            const double t = ti + 0.5 * h * stage;
            const Vec3 e = rf_envelope(model, s.r) * (drive.amplitude_scale * std::cos(drive.omega * t + phase))
                           + static_field(model, s.r);
            return PhaseSpace<Vec3>{s.v, e * qm};
        };
        state = rk4_step(deriv, state, h);
    }
    return state;
}

/// Delimited trajectory export: header comments, then time_s,x_m,y_m,z_m rows.
inline void write_trajectory(std::ostream& os, const Trajectory& traj, const std::vector<std::string>& header = {})
{
    for (const auto& line : header) {
        os << "# " << line << '\n';
    }
    os << "# decimation = " << traj.decimation << '\n';
    os << "time_s,x_m,y_m,z_m\n";
    char buf[128];
    for (std::size_t i = 0; i < traj.size(); ++i) {
        const Vec3& p = traj.positions[i];
        std::snprintf(buf, sizeof buf, "%.12g,%.12g,%.12g,%.12g\n", traj.time(i), p.x, p.y, p.z);
        os << buf;
    }
}

}  // namespace etrap
