// SPDX-License-Identifier: Apache-2.0
#pragma once

// Particle, drive and analytic trap-field models.
//
// All RF fields share the time dependence cos(Omega t + phi). A 1D model
// describes the field along x only; Separable3D applies a 1D radial profile
// as a quadrupole in x/y and adds a static, Laplace-consistent potential that
// provides axial confinement.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>

#include "etrap/error.hpp"
#include "etrap/units.hpp"
#include "etrap/vec3.hpp"

namespace etrap {

struct ParticleSpec {
    double charge = -constants::elementary_charge;  // C
    double mass = constants::electron_mass;         // kg

    static constexpr ParticleSpec electron() { return {}; }

    void validate() const
    {
        detail::require_finite(charge, "particle charge");
        detail::require_finite(mass, "particle mass");
        detail::require(mass > 0.0, "particle mass must be positive");
        detail::require(charge != 0.0, "particle charge must be non-zero");
    }
};

struct DriveSpec {
    double omega = units::angular(1.6 * units::GHz);  // rad/s
    double amplitude_scale = 1.0;

    void validate() const
    {
        detail::require_finite(omega, "drive omega");
        detail::require_finite(amplitude_scale, "drive amplitude_scale");
        detail::require(omega > 0.0, "drive omega must be positive");
        detail::require(amplitude_scale >= 0.0, "drive amplitude_scale must be >= 0");
    }

    double period() const { return two_pi / omega; }
};

/// E(x, t) = gradient * x * cos(Omega t + phi).
struct HarmonicRF1D {
    double gradient = 0.0;  // V/m^2
};

/// E(x, t) = gradient * x * (1 + |x/rolloff_scale|^(2 rolloff_power))^(-rolloff_order) * cos(Omega t + phi).
///
/// rolloff_power = 1 is the plain Lorentzian-type rolloff; higher powers keep
/// the core flatter for the same asymptotic decay.
struct Anharmonic1D {
    double gradient = 0.0;       // V/m^2
    double rolloff_scale = 1.0;  // m
    double rolloff_order = 1.0;
    int rolloff_power = 1;
};

using RadialModel = std::variant<HarmonicRF1D, Anharmonic1D>;

/// Radial 1D profile used as E_rf = (E(x), -E(y), 0), plus a static potential
///   V = K/2 (z^2 - rho^2/2) + K3 (z^3 - 3/2 z rho^2) + K4/8 (8 z^4 - 24 z^2 rho^2 + 3 rho^4)
/// with rho^2 = x^2 + y^2. Every term is a solid harmonic, so div E = 0.
struct Separable3D {
    RadialModel radial = HarmonicRF1D{};
    double static_curvature = 0.0;  // K, V/m^2
    double static_cubic = 0.0;      // K3, V/m^3
    double static_quartic = 0.0;    // K4, V/m^4
};

using FieldModel = std::variant<HarmonicRF1D, Anharmonic1D, Separable3D>;

namespace detail {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

inline double ipow(double base, int n)
{
    double r = 1.0;
    for (; n > 0; --n) {
        r *= base;
    }
    return r;
}

// s^(-quarters/4) using only products, square roots and one division.
inline double inverse_quarter_power(double s, int quarters)
{
    const int whole = quarters / 4;
    const int rest = quarters % 4;
    double denominator = ipow(s, whole);
    if (rest == 2) {
        denominator *= std::sqrt(s);
    } else if (rest == 1) {
        denominator *= std::sqrt(std::sqrt(s));
    } else if (rest == 3) {
        const double r = std::sqrt(s);
        denominator *= r * std::sqrt(r);
    }
    return 1.0 / denominator;
}

/// 4p when it is a small non-negative integer (the calibrated profiles
/// always land on that grid), else -1.
inline int order_quarters(double p)
{
    const double quarters = 4.0 * p;
    if (quarters >= 0.0 && quarters <= 64.0 && quarters == std::floor(quarters)) {
        return static_cast<int>(quarters);
    }
    return -1;
}

inline double rolloff_base(double x, double scale, int power)
{
    const double r = x / scale;
    const double u = r * r;
    return 1.0 + (power == 1 ? u : (power == 2 ? u * u : ipow(u, power)));
}

}  // namespace detail

/// Multiplicative rolloff factor E(x) / (gradient * x).
inline double rolloff_factor(const Anharmonic1D& m, double x)
{
    const double s = detail::rolloff_base(x, m.rolloff_scale, m.rolloff_power);
    const int quarters = detail::order_quarters(m.rolloff_order);
    return quarters >= 0 ? detail::inverse_quarter_power(s, quarters) : std::pow(s, -m.rolloff_order);
}

/// Anharmonic1D with power and 4 * order fixed at compile time, for hot
/// loops. Evaluates the same operations as the runtime form.
template <int Power, int Quarters>
struct FixedAnharmonic1D {
    Anharmonic1D model;
};

template <int Power, int Quarters>
inline double rf_profile(const FixedAnharmonic1D<Power, Quarters>& f, double x)
{
    const double s = detail::rolloff_base(x, f.model.rolloff_scale, Power);
    return f.model.gradient * x * detail::inverse_quarter_power(s, Quarters);
}

inline double rolloff_factor(const HarmonicRF1D&, double) { return 1.0; }

/// Nominal RF amplitude profile of a 1D model (V/m), before drive scaling.
inline double rf_profile(const HarmonicRF1D& m, double x) { return m.gradient * x; }
inline double rf_profile(const Anharmonic1D& m, double x) { return m.gradient * x * rolloff_factor(m, x); }
inline double rf_profile(const RadialModel& m, double x)
{
    return std::visit([x](const auto& r) { return rf_profile(r, x); }, m);
}

inline double gradient_of(const RadialModel& m)
{
    return std::visit([](const auto& r) { return r.gradient; }, m);
}

inline double gradient_of(const FieldModel& m)
{
    return std::visit(detail::overloaded{
                          [](const HarmonicRF1D& h) { return h.gradient; },
                          [](const Anharmonic1D& a) { return a.gradient; },
                          [](const Separable3D& s) { return gradient_of(s.radial); },
                      },
                      m);
}

inline bool is_three_dimensional(const FieldModel& m) { return std::holds_alternative<Separable3D>(m); }

inline const char* variant_name(const FieldModel& m)
{
    return std::visit(detail::overloaded{
                          [](const HarmonicRF1D&) { return "harmonic"; },
                          [](const Anharmonic1D&) { return "anharmonic"; },
                          [](const Separable3D&) { return "separable3d"; },
                      },
                      m);
}

/// Radius (per axis) within which the closed forms are trusted.
inline double validity_radius(const RadialModel& m)
{
    return std::visit(detail::overloaded{
                          [](const HarmonicRF1D&) { return 10.0 * units::mm; },
                          [](const Anharmonic1D& a) { return 10.0 * a.rolloff_scale; },
                      },
                      m);
}

inline double validity_radius(const FieldModel& m)
{
    return std::visit(detail::overloaded{
                          [](const HarmonicRF1D&) { return 10.0 * units::mm; },
                          [](const Anharmonic1D& a) { return 10.0 * a.rolloff_scale; },
                          [](const Separable3D& s) { return validity_radius(s.radial); },
                      },
                      m);
}

inline void validate(const RadialModel& m)
{
    std::visit(detail::overloaded{
                   [](const HarmonicRF1D& h) { detail::require_finite(h.gradient, "gradient"); },
                   [](const Anharmonic1D& a) {
                       detail::require_finite(a.gradient, "gradient");
                       detail::require_finite(a.rolloff_scale, "rolloff_scale");
                       detail::require_finite(a.rolloff_order, "rolloff_order");
                       detail::require(a.rolloff_scale > 0.0, "rolloff_scale must be positive");
                       detail::require(a.rolloff_order >= 0.0, "rolloff_order must be >= 0");
                       detail::require(a.rolloff_power >= 1 && a.rolloff_power <= 8, "rolloff_power must be in [1, 8]");
                   },
               },
               m);
}

inline void validate(const FieldModel& m)
{
    std::visit(detail::overloaded{
                   [](const HarmonicRF1D& h) { validate(RadialModel{h}); },
                   [](const Anharmonic1D& a) { validate(RadialModel{a}); },
                   [](const Separable3D& s) {
                       validate(s.radial);
                       detail::require_finite(s.static_curvature, "static_curvature");
                       detail::require_finite(s.static_cubic, "static_cubic");
                       detail::require_finite(s.static_quartic, "static_quartic");
                   },
               },
               m);
}

/// RF field envelope (V/m) at a position, nominal amplitude (drive scale not applied).
inline Vec3 rf_envelope(const FieldModel& m, const Vec3& r)
{
    return std::visit(detail::overloaded{
                          [&](const HarmonicRF1D& h) { return Vec3{rf_profile(h, r.x), 0.0, 0.0}; },
                          [&](const Anharmonic1D& a) { return Vec3{rf_profile(a, r.x), 0.0, 0.0}; },
                          [&](const Separable3D& s) {
                              return Vec3{rf_profile(s.radial, r.x), -rf_profile(s.radial, r.y), 0.0};
                          },
                      },
                      m);
}

inline Vec3 static_field(const Separable3D& s, const Vec3& r)
{
    const double rho2 = r.x * r.x + r.y * r.y;
    const double z = r.z;
    const double k2 = s.static_curvature;
    const double k3 = s.static_cubic;
    const double k4 = s.static_quartic;
    const double radial_scale = 0.5 * k2 + 3.0 * k3 * z + k4 * (6.0 * z * z - 1.5 * rho2);
    return Vec3{
        radial_scale * r.x,
        radial_scale * r.y,
        -k2 * z - k3 * (3.0 * z * z - 1.5 * rho2) - k4 * (4.0 * z * z * z - 6.0 * z * rho2),
    };
}

/// Static (DC) electric field in V/m; zero for the 1D models.
inline Vec3 static_field(const FieldModel& m, const Vec3& r)
{
    if (const auto* s = std::get_if<Separable3D>(&m)) {
        return static_field(*s, r);
    }
    return {};
}

/// Static electric potential in volts (zero for 1D models).
inline double static_potential(const FieldModel& m, const Vec3& r)
{
    const auto* s = std::get_if<Separable3D>(&m);
    if (s == nullptr) {
        return 0.0;
    }
    const double rho2 = r.x * r.x + r.y * r.y;
    const double z = r.z;
    return 0.5 * s->static_curvature * (z * z - 0.5 * rho2) + s->static_cubic * (z * z * z - 1.5 * z * rho2)
           + s->static_quartic / 8.0 * (8.0 * z * z * z * z - 24.0 * z * z * rho2 + 3.0 * rho2 * rho2);
}

/// Build a separable 3D model whose static curvature yields the axial
/// angular frequency omega_z for the given particle.
inline Separable3D make_separable(RadialModel radial, double axial_omega, const ParticleSpec& particle)
{
    particle.validate();
    detail::require_finite(axial_omega, "axial omega");
    detail::require(axial_omega >= 0.0, "axial omega must be >= 0");
    Separable3D s;
    s.radial = radial;
    s.static_curvature = particle.mass * axial_omega * axial_omega / particle.charge;
    return s;
}

/// Axial angular frequency from the static curvature (rad/s).
inline double axial_omega(const Separable3D& s, const ParticleSpec& particle)
{
    const double w2 = particle.charge * s.static_curvature / particle.mass;
    if (w2 < 0.0) {
        throw DomainError("static curvature is anti-confining for this particle");
    }
    return std::sqrt(w2);
}

/// Total electric field (V/m): RF envelope * scale * cos(Omega t + phase) plus the static field.
inline Vec3 instantaneous_field(const FieldModel& model, const DriveSpec& drive, const Vec3& position, double time,
                                double phase)
{
    drive.validate();
    detail::require(is_finite(position), "position must be finite");
    detail::require_finite(time, "time");
    detail::require_finite(phase, "phase");
    const double limit = validity_radius(model);
    detail::require(std::fabs(position.x) <= limit && std::fabs(position.y) <= limit && std::fabs(position.z) <= limit,
                    "position outside the model validity domain");
    const double c = std::cos(drive.omega * time + phase) * drive.amplitude_scale;
    return rf_envelope(model, position) * c + static_field(model, position);
}

struct PseudopotentialSample {
    Vec3 position;
    double u_p = 0.0;    // J
    double delta = 0.0;  // fractional deviation from the origin-curvature harmonic
};

/// Time-averaged pseudopotential q^2 |E|^2 / (4 m Omega^2) of the RF envelope.
inline PseudopotentialSample pseudopotential(const FieldModel& model, const DriveSpec& drive,
                                             const ParticleSpec& particle, const Vec3& position)
{
    detail::require_finite(drive.omega, "drive omega");
    if (drive.omega == 0.0) {
        throw InvalidArgument("pseudopotential is singular at zero drive frequency");
    }
    drive.validate();
    particle.validate();
    detail::require(is_finite(position), "position must be finite");

    const double scale = drive.amplitude_scale;
    const Vec3 e = rf_envelope(model, position) * scale;
    const double prefactor = particle.charge * particle.charge / (4.0 * particle.mass * drive.omega * drive.omega);

    PseudopotentialSample s;
    s.position = position;
    s.u_p = prefactor * dot(e, e);

    // Harmonic reference: same origin curvature, so the ratio reduces to the
    // rolloff factors and stays exact near the origin.
    const double g = gradient_of(model) * scale;
    const bool three_d = is_three_dimensional(model);
    const double rho2 = position.x * position.x + (three_d ? position.y * position.y : 0.0);
    if (rho2 == 0.0 || g == 0.0) {
        s.delta = 0.0;
        return s;
    }
    const double harmonic = prefactor * g * g * rho2;
    if (std::holds_alternative<HarmonicRF1D>(model)) {
        s.delta = 0.0;
    } else if (const auto* a = std::get_if<Anharmonic1D>(&model)) {
        const double f = rolloff_factor(*a, position.x);
        s.delta = f * f - 1.0;
    } else {
        s.delta = s.u_p / harmonic - 1.0;
    }
    return s;
}

inline PseudopotentialSample pseudopotential(const FieldModel& model, const DriveSpec& drive,
                                             const ParticleSpec& particle, double x)
{
    return pseudopotential(model, drive, particle, Vec3{x, 0.0, 0.0});
}

/// Unbounded pseudopotential within the search extent (no interior maximum).
class UnboundedWithinExtent : public DomainError {
  public:
    using DomainError::DomainError;
};

struct TrapDepth {
    double depth = 0.0;     // J
    double location = 0.0;  // m
};

/// Maximum of the pseudopotential along +x within [0, search_extent].
inline TrapDepth trap_depth(const FieldModel& model, const DriveSpec& drive, const ParticleSpec& particle,
                            double search_extent)
{
    detail::require_finite(search_extent, "search extent");
    detail::require(search_extent > 0.0, "search extent must be positive");
    detail::require(search_extent <= validity_radius(model), "search extent exceeds the model validity domain");

    constexpr int samples = 4096;
    auto u = [&](double x) { return pseudopotential(model, drive, particle, x).u_p; };

    int best = 0;
    double best_value = -1.0;
    for (int i = 0; i <= samples; ++i) {
        const double v = u(search_extent * i / samples);
        if (v > best_value) {
            best_value = v;
            best = i;
        }
    }
    if (best >= samples - 1) {
        throw UnboundedWithinExtent("pseudopotential increases up to the search extent; no trap depth within "
                                    + std::to_string(search_extent) + " m");
    }
    const double lo = search_extent * std::max(best - 1, 0) / samples;
    const double hi = search_extent * (best + 1) / samples;
    const auto [x_max, neg] = boost::math::tools::brent_find_minima([&](double x) { return -u(x); }, lo, hi,
                                                                    std::numeric_limits<double>::digits / 2);
    return TrapDepth{-neg, x_max};
}

/// Radial secular frequency of the pseudopotential harmonic core,
/// omega_r = |q| E' / (sqrt(2) m Omega).
inline double pseudopotential_secular_omega(double gradient, const DriveSpec& drive, const ParticleSpec& particle)
{
    return std::fabs(particle.charge) * std::fabs(gradient) * drive.amplitude_scale
           / (std::sqrt(2.0) * particle.mass * drive.omega);
}

/// Gradient E' giving the requested pseudopotential secular frequency.
inline double gradient_for_secular_omega(double omega_r, const DriveSpec& drive, const ParticleSpec& particle)
{
    return std::sqrt(2.0) * particle.mass * drive.omega * omega_r / (std::fabs(particle.charge) * drive.amplitude_scale);
}

struct CalibrationTargets {
    double secular_omega = units::angular(300.0 * units::MHz);  // rad/s
    double depth = 1.3 * units::eV;                             // J
    double max_deviation = 0.02;                                // fraction
    double deviation_extent = 200.0 * units::um;                // m
    DriveSpec drive{};
    ParticleSpec particle{};
    int rolloff_power = 2;

    double frequency_tolerance = 1e-3;  // relative
    double depth_tolerance = 0.01;      // relative
    double order_step = 0.25;           // search grid for rolloff_order
    double order_max = 16.0;
};

struct CalibrationReport {
    CalibrationTargets targets;
    Anharmonic1D model;
    double achieved_secular_omega = 0.0;
    double achieved_depth = 0.0;
    double depth_location = 0.0;
    double achieved_max_deviation = 0.0;

    double frequency_residual = 0.0;  // relative
    double depth_residual = 0.0;      // relative
    double deviation_residual = 0.0;  // achieved - bound (<= 0 when met)

    bool frequency_met = false;
    bool depth_met = false;
    bool deviation_met = false;

    bool all_met() const { return frequency_met && depth_met && deviation_met; }
};

class CalibrationFailure : public DomainError {
  public:
    CalibrationFailure(const std::string& what, CalibrationReport best) : DomainError(what), best_(std::move(best)) {}
    const CalibrationReport& best() const { return best_; }

  private:
    CalibrationReport best_;
};

struct Calibration {
    Anharmonic1D model;
    CalibrationReport report;
};

/// Largest |delta| over [0, extent], sampled densely.
inline double max_abs_deviation(const FieldModel& model, const DriveSpec& drive, const ParticleSpec& particle,
                                double extent, int samples = 2000)
{
    double worst = 0.0;
    for (int i = 0; i <= samples; ++i) {
        const double x = extent * i / samples;
        worst = std::max(worst, std::fabs(pseudopotential(model, drive, particle, x).delta));
    }
    return worst;
}

/// Re-evaluate the three targets on a candidate model.
inline CalibrationReport evaluate_calibration(const CalibrationTargets& t, const Anharmonic1D& m)
{
    CalibrationReport r;
    r.targets = t;
    r.model = m;
    const FieldModel fm = m;
    r.achieved_secular_omega = pseudopotential_secular_omega(m.gradient, t.drive, t.particle);
    r.frequency_residual = r.achieved_secular_omega / t.secular_omega - 1.0;
    r.frequency_met = std::fabs(r.frequency_residual) <= t.frequency_tolerance;
    try {
        const TrapDepth d = trap_depth(fm, t.drive, t.particle, validity_radius(fm));
        r.achieved_depth = d.depth;
        r.depth_location = d.location;
        r.depth_residual = d.depth / t.depth - 1.0;
        r.depth_met = std::fabs(r.depth_residual) <= t.depth_tolerance;
    } catch (const UnboundedWithinExtent&) {
        r.achieved_depth = std::numeric_limits<double>::infinity();
        r.depth_residual = std::numeric_limits<double>::infinity();
    }
    r.achieved_max_deviation = max_abs_deviation(fm, t.drive, t.particle, t.deviation_extent);
    r.deviation_residual = r.achieved_max_deviation - t.max_deviation;
    r.deviation_met = r.deviation_residual <= 0.0;
    return r;
}

/// Fit (E', x_s, p) of an Anharmonic1D profile to a radial secular frequency,
/// a trap depth, and a bound on |delta| within an extent.
///
/// E' follows from the frequency in closed form. For each rolloff order on a
/// fixed grid the rolloff scale is solved so the numerically located depth
/// matches the target; the softest order meeting the deviation bound wins.
inline Calibration calibrate_anharmonic(const CalibrationTargets& t)
{
    t.drive.validate();
    t.particle.validate();
    detail::require_finite(t.secular_omega, "target secular frequency");
    detail::require_finite(t.depth, "target depth");
    detail::require_finite(t.max_deviation, "target deviation");
    detail::require_finite(t.deviation_extent, "deviation extent");
    detail::require(t.rolloff_power >= 1 && t.rolloff_power <= 8, "rolloff_power must be in [1, 8]");
    detail::require(t.order_step > 0.0 && t.order_max > 0.0, "order grid must be positive");

    CalibrationReport empty;
    empty.targets = t;
    if (t.secular_omega <= 0.0 || t.depth <= 0.0 || t.max_deviation < 0.0 || t.deviation_extent < 0.0
        || t.drive.amplitude_scale == 0.0) {
        throw CalibrationFailure("infeasible calibration targets: frequency, depth and drive scale must be positive",
                                 empty);
    }

    const double gradient = gradient_for_secular_omega(t.secular_omega, t.drive, t.particle);
    const double g = gradient * t.drive.amplitude_scale;
    const double prefactor = t.particle.charge * t.particle.charge * g * g
                             / (4.0 * t.particle.mass * t.drive.omega * t.drive.omega);
    const double harmonic_at_extent = prefactor * t.deviation_extent * t.deviation_extent;
    if (t.depth <= harmonic_at_extent * (1.0 - t.max_deviation)) {
        empty.model = Anharmonic1D{gradient, 1.0, 1.0, t.rolloff_power};
        throw CalibrationFailure("infeasible calibration targets: depth is below the pseudopotential allowed at the "
                                 "deviation extent",
                                 empty);
    }

    const int k = t.rolloff_power;
    // Closed-form location of the maximum of x^2 (1 + (x/xs)^2k)^(-2p) gives a
    // bracket for the numerical depth solve.
    auto analytic_scale = [&](double p) {
        const double u_star = 1.0 / (2.0 * k * p - 1.0);
        const double shape = std::pow(u_star, 1.0 / k) * std::pow(1.0 + u_star, -2.0 * p);
        return std::sqrt(t.depth / (prefactor * shape));
    };

    std::vector<double> orders;
    const double p_min = 1.0 / (2.0 * k);
    for (int j = 1;; ++j) {
        const double p = j * t.order_step;
        if (p > t.order_max + 1e-12) {
            break;
        }
        if (p > p_min + 1e-12) {
            orders.push_back(p);
        }
    }

    CalibrationReport best = empty;
    best.deviation_residual = std::numeric_limits<double>::infinity();
    for (double p : orders) {
        const double guess = analytic_scale(p);
        auto depth_mismatch = [&](double xs) {
            const FieldModel fm = Anharmonic1D{gradient, xs, p, k};
            try {
                return trap_depth(fm, t.drive, t.particle, validity_radius(fm)).depth / t.depth - 1.0;
            } catch (const UnboundedWithinExtent&) {
                return std::numeric_limits<double>::infinity();
            }
        };
        double lo = 0.8 * guess;
        double hi = 1.25 * guess;
        if (!(depth_mismatch(lo) < 0.0 && depth_mismatch(hi) > 0.0)) {
            continue;
        }
        std::uintmax_t iterations = 100;
        const auto [a, b] = boost::math::tools::toms748_solve(depth_mismatch, lo, hi,
                                                              boost::math::tools::eps_tolerance<double>(40), iterations);
        const double xs = 0.5 * (a + b);
        CalibrationReport r = evaluate_calibration(t, Anharmonic1D{gradient, xs, p, k});
        if (r.all_met()) {
            return Calibration{r.model, r};
        }
        if (r.deviation_residual < best.deviation_residual) {
            best = r;
        }
    }
    throw CalibrationFailure("calibration failed: no rolloff order meets the deviation bound "
                             "(best residual "
                                 + std::to_string(best.deviation_residual) + ")",
                             best);
}

/// Default targets: radial secular frequency 2pi x 300 MHz, depth 1.3 eV,
/// |delta| <= 2% within 200 um, drive 2pi x 1.6 GHz, electron.
inline CalibrationTargets default_calibration_targets() { return CalibrationTargets{}; }

}  // namespace etrap
