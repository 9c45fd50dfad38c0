#pragma once

#include <numbers>

namespace satnet::constants {

// CODATA 2018 exact values.
inline constexpr double planck = 6.62607015e-34;        // J s
inline constexpr double speed_of_light = 299792458.0;   // m/s

inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * std::numbers::pi;
inline constexpr double deg = std::numbers::pi / 180.0;

// Spherical Earth.
inline constexpr double earth_radius_km = 6378.0;
inline constexpr double sidereal_day_s = 86164.0905;
inline constexpr double earth_mu_km3_s2 = 398600.4418;

// Photon pair source rate of every satellite.
inline constexpr double default_source_rate = 1e9;      // ebits/s
// A satellite is only in range of a pair if the two-arm loss is below this.
inline constexpr double loss_threshold_db = 90.0;

// Repeater-chain defaults.
inline constexpr double fiber_attenuation_per_km = 1.0 / 22.0;
inline constexpr double fiber_light_speed_km_s = 2.0e5;
inline constexpr double vacuum_light_speed_km_s = speed_of_light / 1000.0;

}  // namespace satnet::constants
