#pragma once

#include <numbers>
#include <string_view>

#include "errors.hpp"

namespace cavqed::units {

inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * std::numbers::pi;

// CODATA 2018 exact values
inline constexpr double c = 299792458.0;
inline constexpr double hbar = 1.054571817e-34;
inline constexpr double k_B = 1.380649e-23;

inline constexpr double THz = 1e12;
inline constexpr double GHz = 1e9;
inline constexpr double MHz = 1e6;
inline constexpr double Hz = 1.0;

/// Scale factor of a unit suffix ("THz", "GHz", "MHz", "Hz").
inline double frequency_scale(std::string_view unit)
{
    if (unit == "THz") return THz;
    if (unit == "GHz") return GHz;
    if (unit == "MHz") return MHz;
    if (unit == "Hz") return Hz;
    throw ConfigError("unknown frequency unit '" + std::string(unit) + "'");
}

/// Converts a quoted rate to rad/s. With angular=false the value is an
/// ordinary frequency and gets multiplied by 2*pi.
inline double to_angular(double value, double unit_scale, bool angular)
{
    return angular ? value * unit_scale : two_pi * value * unit_scale;
}

/// Angular frequency of a vacuum wavelength given in metres.
inline double omega_from_wavelength(double lambda_m) { return two_pi * c / lambda_m; }

inline double wavelength_from_omega(double omega) { return two_pi * c / omega; }

} // namespace cavqed::units
