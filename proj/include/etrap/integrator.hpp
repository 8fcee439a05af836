// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "etrap/vec3.hpp"

namespace etrap {

/// Position/velocity pair; T is double (1D) or Vec3.
template <class T>
struct PhaseSpace {
    T r{};
    T v{};

    friend PhaseSpace operator+(const PhaseSpace& a, const PhaseSpace& b) { return {a.r + b.r, a.v + b.v}; }
    friend PhaseSpace operator*(double s, const PhaseSpace& a) { return {s * a.r, s * a.v}; }
};

/// One classical fourth-order Runge-Kutta step.
///
/// The derivative is queried by stage rather than by time: stage 0 is the
/// start of the step, 1 the midpoint, 2 the end. Callers with periodic
/// forcing can then look the drive up in a table instead of re-evaluating it.
template <class State, class Derivative>
inline State rk4_step(const Derivative& f, const State& y, double h)
{
    const State k1 = f(0, y);
    const State k2 = f(1, y + (0.5 * h) * k1);
    const State k3 = f(1, y + (0.5 * h) * k2);
    const State k4 = f(2, y + h * k3);
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace etrap
