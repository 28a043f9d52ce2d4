#pragma once

#include <string>
#include <vector>

#include "spinforge/fitting.hpp"
#include "spinforge/trace.hpp"

namespace spinforge {

struct Isotope {
  std::string label;
  int mass_offset_u = 0;  // relative to the majority isotope
  double abundance = 0.0;
};

/// One shell of equivalent neighbor sites around the defect.
struct IsotopeShell {
  std::string element;
  int n_sites = 0;
  std::vector<Isotope> isotopes;
  double shift_per_u = 0.0;  // GHz per atomic mass unit

  /// Throws std::invalid_argument on abundances outside [0, 1] or not summing to 1.
  void validate() const;
};

/// Natural-abundance shells around a silicon-site defect in SiC: 4 carbon
/// nearest neighbors and 12 silicon next-nearest neighbors.
std::vector<IsotopeShell> sic_silicon_site_shells(double carbon_shift_per_u = 22.0, double silicon_shift_per_u = 2.0);

struct IsotopeConfig {
  std::vector<std::vector<int>> occupation;  // [shell][isotope]
  std::vector<int> mass_units;               // [shell] sum of occupation * mass offset
  double total_shift = 0.0;                  // GHz
  double probability = 0.0;
};

struct ConfigurationSet {
  std::vector<IsotopeConfig> configs;  // lexicographic in the occupation vectors
  double retained_probability = 0.0;
  double pruned_probability = 0.0;
};

ConfigurationSet configuration_distribution(const std::vector<IsotopeShell>& shells, double prob_floor = 1e-6);

enum class Profile { gaussian, lorentzian, pseudo_voigt };

/// Unit-area line profile evaluated at offset x from its center.
double profile_value(Profile profile, double x, double fwhm, double voigt_eta = 0.5);

struct LineshapeOptions {
  Profile profile = Profile::gaussian;
  double voigt_eta = 0.5;  // Lorentzian fraction for pseudo-Voigt
  double prob_floor = 1e-6;
};

/// Sum over isotope configurations of probability-weighted profiles.  Grid
/// and f0 in GHz.  The integral equals the retained probability.
SpectrumTrace isotope_lineshape(double f0_ghz, const std::vector<IsotopeShell>& shells, double intrinsic_fwhm_ghz,
                                const std::vector<double>& grid_ghz, const LineshapeOptions& options = {});

/// Same model, evaluated on precomputed configurations (shifts from `shifts_per_u`).
std::vector<double> evaluate_lineshape(const ConfigurationSet& set, const std::vector<double>& shifts_per_u,
                                       double f0_ghz, double fwhm_ghz, const std::vector<double>& grid_ghz,
                                       const LineshapeOptions& options = {});

struct IsotopeFitInit {
  double f0_ghz = 0.0;
  std::vector<double> shifts_per_u;  // one per shell; shell defaults when empty
  double fwhm_ghz = 2.0;
  double amplitude = 1.0;
};

/// Fits amplitude * lineshape with f0, per-shell shifts, FWHM and amplitude
/// free; abundances and site counts fixed.  Parameter names: f0_GHz,
/// shift_<element>_GHz_per_u, fwhm_GHz, amplitude.
FitResult fit_isotope_model(const SpectrumTrace& trace, const std::vector<IsotopeShell>& shells,
                            const IsotopeFitInit& init, const LineshapeOptions& options = {});

}  // namespace spinforge
