// SPDX-License-Identifier: Apache-2.0
#pragma once

// Reference computations used by the tests. They share no numerics with the
// library: Floquet multipliers come from an adaptive Dormand-Prince solver.

#include <array>
#include <cmath>
#include <numbers>

#include <boost/numeric/odeint.hpp>

namespace oracle {

/// Trace of the Mathieu monodromy matrix for x'' + (a - 2q cos 2tau) x = 0
/// over one period tau in [0, pi].
inline double mathieu_trace(double a, double q)
{
    using State = std::array<double, 2>;
    namespace ode = boost::numeric::odeint;
    auto rhs = [a, q](const State& s, State& ds, double tau) {
        ds[0] = s[1];
        ds[1] = -(a - 2.0 * q * std::cos(2.0 * tau)) * s[0];
    };
    auto stepper = ode::make_controlled(1e-13, 1e-13, ode::runge_kutta_dopri5<State>());
    State c{1.0, 0.0};
    State s{0.0, 1.0};
    ode::integrate_adaptive(stepper, rhs, c, 0.0, std::numbers::pi, 1e-3);
    ode::integrate_adaptive(stepper, rhs, s, 0.0, std::numbers::pi, 1e-3);
    return c[0] + s[1];
}

/// Characteristic exponent beta in the lowest stable region.
inline double mathieu_beta(double a, double q) { return std::acos(0.5 * mathieu_trace(a, q)) / std::numbers::pi; }

/// Secular frequency in Hz for drive frequency f_drive (Hz).
inline double secular_hz(double a, double q, double f_drive) { return 0.5 * mathieu_beta(a, q) * f_drive; }

inline constexpr double e = 1.602176634e-19;
inline constexpr double m_e = 9.1093837015e-31;

/// q for an electron in E = E' x cos(Omega t).
inline double electron_q(double gradient, double omega) { return 2.0 * e * gradient / (m_e * omega * omega); }

}  // namespace oracle
