#pragma once

// Physical constants in the frequency units used throughout the library.
// Energies are MHz, fields are tesla, temperatures kelvin (CODATA 2018).

namespace spinforge::constants {

inline constexpr double pi = 3.14159265358979323846;

/// Bohr magneton over h, MHz/T.
inline constexpr double bohr_mhz_per_t = 13996.24493;

/// Boltzmann constant over h, MHz/K.
inline constexpr double boltzmann_mhz_per_k = 20836.61912;

/// Boltzmann constant over h, GHz/K.
inline constexpr double boltzmann_ghz_per_k = boltzmann_mhz_per_k * 1e-3;

/// mu_N g_N / h for 51V, MHz/T.
inline constexpr double vanadium51_nuclear_mhz_per_t = 11.213;

/// Speed of light in vacuum, m/s.
inline constexpr double speed_of_light = 299792458.0;

/// Vacuum wavelength in nm to frequency in GHz.
inline constexpr double wavelength_nm_to_ghz(double nm) { return speed_of_light / nm; }

}  // namespace spinforge::constants
