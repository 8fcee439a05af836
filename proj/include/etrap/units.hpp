// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <numbers>

namespace etrap {

inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * std::numbers::pi;

/// CODATA 2018 exact / recommended values.
namespace constants {
inline constexpr double elementary_charge = 1.602176634e-19;  // C
inline constexpr double electron_mass = 9.1093837015e-31;     // kg
inline constexpr double boltzmann = 1.380649e-23;             // J/K
}  // namespace constants

// Conversions used at the configuration boundary. Everything past the
// boundary is SI.
namespace units {
inline constexpr double MHz = 1e6;
inline constexpr double GHz = 1e9;
inline constexpr double um = 1e-6;
inline constexpr double mm = 1e-3;
inline constexpr double ns = 1e-9;
inline constexpr double us = 1e-6;
inline constexpr double ms = 1e-3;
inline constexpr double eV = constants::elementary_charge;

constexpr double angular(double hz) { return two_pi * hz; }
constexpr double hertz(double rad_per_s) { return rad_per_s / two_pi; }
}  // namespace units

}  // namespace etrap
