#pragma once

#include <numbers>

namespace tddft::units {

inline constexpr double pi = std::numbers::pi;

inline constexpr double hartree_ev = 27.2114;
/// Intensity (W/cm^2) of a field with unit peak amplitude in atomic units.
inline constexpr double intensity_au_wcm2 = 3.509e16;
/// Photon energy in hartree times wavelength in nm.
inline constexpr double hartree_nm = 45.563353;
inline constexpr double au_time_fs = 0.02418884326;

inline double ev_to_hartree(double ev) { return ev / hartree_ev; }
inline double hartree_to_ev(double h) { return h * hartree_ev; }

}  // namespace tddft::units
