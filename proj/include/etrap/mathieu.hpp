// SPDX-License-Identifier: Apache-2.0
#pragma once

// Linear (Mathieu) description of the trap near its centre.
//
// With tau = Omega t / 2 the linearized motion along one axis reads
//   x'' + (a - 2 q cos 2 tau) x = 0,
// where for E = E' x cos(Omega t) and a static potential curvature U''
//   q = 2 |e| E' / (m Omega^2),   a = 4 e U'' / (m Omega^2).
// The Floquet classifier below is the reference for everything else here.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <vector>

#include "etrap/error.hpp"
#include "etrap/integrator.hpp"
#include "etrap/model.hpp"
#include "etrap/units.hpp"

namespace etrap {

struct MathieuParams {
    double a = 0.0;
    double q = 0.0;
};

/// Per-axis parameters. 1D models fill x only (y and z are force-free).
struct MathieuAxes {
    MathieuParams x;
    MathieuParams y;
    MathieuParams z;
};

struct StabilityVerdict {
    bool stable = false;
    double multiplier_magnitude = 0.0;  // max |eigenvalue| of the one-period map
    double beta = 0.0;                  // characteristic exponent, lowest region
    double secular_frequency = 0.0;     // rad/s; beta * Omega / 2 (0 when unstable)
    double determinant = 1.0;           // of the monodromy matrix
    bool saturated = false;             // overflow deep in an unstable region
};

inline MathieuAxes mathieu_axes(const FieldModel& model, const DriveSpec& drive, const ParticleSpec& particle)
{
    validate(model);
    drive.validate();
    particle.validate();
    const double w2 = drive.omega * drive.omega;
    const double e = gradient_of(model) * drive.amplitude_scale;
    const double q = 2.0 * std::fabs(particle.charge) * std::fabs(e) / (particle.mass * w2);

    MathieuAxes axes;
    axes.x.q = q;
    if (const auto* s = std::get_if<Separable3D>(&model)) {
        // Potential curvature along z is K, along x and y it is -K/2.
        const double az = 4.0 * particle.charge * s->static_curvature / (particle.mass * w2);
        axes.z = {az, 0.0};
        axes.x = {-0.5 * az, q};
        axes.y = {-0.5 * az, q};
    }
    for (const auto* p : {&axes.x, &axes.y, &axes.z}) {
        if (!std::isfinite(p->a) || !std::isfinite(p->q)) {
            throw DomainError("model cannot be linearized at the origin");
        }
    }
    return axes;
}

/// Radial (x-axis) Mathieu parameters.
inline MathieuParams mathieu_params(const FieldModel& model, const DriveSpec& drive, const ParticleSpec& particle)
{
    return mathieu_axes(model, drive, particle).x;
}

/// Floquet classification from the one-period monodromy matrix, integrated
/// with the same RK4 step as the dynamics module (512 steps per period).
inline StabilityVerdict classify_stability(const MathieuParams& params, const DriveSpec& drive = {},
                                           int steps_per_period = 512)
{
    detail::require_finite(params.a, "Mathieu a");
    detail::require_finite(params.q, "Mathieu q");
    detail::require(steps_per_period >= 32, "steps_per_period must be >= 32");

    // tau spans [0, pi] for one drive period.
    const double h = pi / steps_per_period;
    std::vector<double> coeff(2 * steps_per_period + 1);
    for (std::size_t j = 0; j < coeff.size(); ++j) {
        const double tau = 0.5 * h * static_cast<double>(j);
        coeff[j] = params.a - 2.0 * params.q * std::cos(2.0 * tau);
    }

    PhaseSpace<double> c{1.0, 0.0};
    PhaseSpace<double> s{0.0, 1.0};
    for (int i = 0; i < steps_per_period; ++i) {
        auto deriv = [&](int stage, const PhaseSpace<double>& y) {
            return PhaseSpace<double>{y.v, -coeff[2 * i + stage] * y.r};
        };
        c = rk4_step(deriv, c, h);
        s = rk4_step(deriv, s, h);
    }

    StabilityVerdict v;
    const double trace = c.r + s.v;
    v.determinant = c.r * s.v - s.r * c.v;
    if (!std::isfinite(trace) || !std::isfinite(v.determinant)) {
        v.saturated = true;
        v.stable = false;
        v.multiplier_magnitude = std::numeric_limits<double>::max();
        return v;
    }
    const double half = 0.5 * trace;
    if (std::fabs(half) <= 1.0) {
        v.multiplier_magnitude = 1.0;
    } else {
        v.multiplier_magnitude = std::fabs(half) + std::sqrt(half * half - 1.0);
    }
    v.stable = v.multiplier_magnitude <= 1.0 + 1e-9;
    if (v.stable) {
        v.beta = std::acos(std::clamp(half, -1.0, 1.0)) / pi;
        v.secular_frequency = 0.5 * v.beta * drive.omega;
    }
    return v;
}

class NoRealSecularFrequency : public DomainError {
  public:
    using DomainError::DomainError;
};

/// Lowest-order estimate omega ~ (Omega / 2) sqrt(a + q^2 / 2). Only accurate for q << 1.
inline double secular_estimate(const MathieuParams& params, const DriveSpec& drive)
{
    const double radicand = params.a + 0.5 * params.q * params.q;
    if (radicand < 0.0) {
        throw NoRealSecularFrequency("a + q^2/2 < 0: no real secular frequency at lowest order");
    }
    return 0.5 * drive.omega * std::sqrt(radicand);
}

struct StabilityRow {
    double a = 0.0;
    double q = 0.0;
    bool stable = false;
    double beta = 0.0;
};

/// Classify a q scan at fixed a; q_i = q_min + i * q_step.
inline std::vector<StabilityRow> stability_scan(double a, double q_min, double q_max, double q_step)
{
    detail::require_finite(a, "a");
    detail::require_finite(q_min, "q_min");
    detail::require_finite(q_max, "q_max");
    detail::require(q_step > 0.0 && std::isfinite(q_step), "q_step must be positive");
    detail::require(q_max >= q_min, "q_max must be >= q_min");
    const long count = static_cast<long>(std::floor((q_max - q_min) / q_step + 1e-9)) + 1;
    std::vector<StabilityRow> rows;
    rows.reserve(static_cast<std::size_t>(count));
    for (long i = 0; i < count; ++i) {
        const double q = q_min + static_cast<double>(i) * q_step;
        const StabilityVerdict v = classify_stability({a, q});
        rows.push_back({a, q, v.stable, v.beta});
    }
    return rows;
}

/// Delimited rows a,q,stable,beta.
inline void write_stability_rows(std::ostream& os, const std::vector<StabilityRow>& rows)
{
    os << "a,q,stable,beta\n";
    char buf[128];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%.10g,%.10g,%d,%.10g\n", r.a, r.q, r.stable ? 1 : 0, r.beta);
        os << buf;
    }
}

}  // namespace etrap
